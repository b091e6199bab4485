"""Batch experiment runner.

    microlocal run CONFIG [--output-dir DIR] [--seed-override S] [--grid-override NxN] [--verbose]
    microlocal list-builtins

Exit status: 0 all verdicts pass, 1 some verdict fails, 2 the config does
not parse or validate, 3 a theorem hypothesis check refused to run.
Without ``--output-dir`` artifacts go to ``$MICROLOCAL_OUTPUT_ROOT`` (or
``./runs``) under ``<name>-<config hash prefix>``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, config_hash, load_config
from .errors import CalibrationError, HypothesisError, MicrolocalError
from .reports import jsonable, write_csv, write_json

ENV_OUTPUT_ROOT = "MICROLOCAL_OUTPUT_ROOT"
EXIT_OK, EXIT_VERDICT, EXIT_CONFIG, EXIT_REFUSED = 0, 1, 2, 3

log = logging.getLogger("microlocal")

DEFAULT_RESOLUTIONS = {"theorem": [16.0, 32.0, 64.0, 128.0], "necessity": [16.0, 32.0, 64.0, 128.0],
                       "lemma": [16.0, 32.0, 64.0], "commutator": [16.0, 32.0], "pairing": [32.0]}


class Artifacts:
    """Collects files written under one output directory."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.files = []

    def path(self, name):
        p = (self.root / name).resolve()
        if self.root.resolve() not in p.parents and p != self.root.resolve():
            raise ValueError(f"artifact {name!r} escapes the output directory")
        self.files.append(name)
        return p

    def csv(self, name, header, rows):
        return write_csv(self.path(name), header, rows)

    def report(self, name, rep):
        return rep.write_csv(self.path(name))


def derived_seed(seed, *keys):
    """Counter-based split of the top-level seed."""
    from .probes import rng_for
    return int(rng_for(int(seed), 9001, *keys).integers(2**31 - 1))


def _solutions(cfg: ExperimentConfig, default):
    from .waves import SolutionFamily

    if not cfg.solutions:
        return [SolutionFamily(f.kind, f.band_limit, f.params, derived_seed(cfg.seed, i) if f.kind == "random-hs"
                               else f.seed) for i, f in enumerate(default)]
    out = []
    for i, s in enumerate(cfg.solutions):
        seed = s.seed if s.seed is not None else derived_seed(cfg.seed, i)
        out.append(SolutionFamily(s.kind, s.band_limit, dict(s.params), seed))
    return out


def _symbol(cfg, name):
    from .builtins import build_symbol
    s = cfg.symbols[name]
    return build_symbol(s.builder, s.params, cfg.grid.d, label=name)


def _triple(cfg, p):
    from . import propagation as PR

    if p["triple"] == "flagship":
        return PR.flagship_triple(p.get("profile", "plateau"), p["N"])
    if p["triple"] == "violating":
        return PR.violating_triple(p.get("profile", "plateau"), p["N"])
    if p["triple"] == "regularization":
        return PR.regularization_triple(p["N"])
    return PR.TripleSpec(_symbol(cfg, "b"), _symbol(cfg, "e"), _symbol(cfg, "g"), p["k"], p["N"],
                         PR.NetSpec(extra_dirs=(tuple(PR.NULL_AXIS),)), label="custom")


def _cap(resolutions, grid_factor, cap):
    if cap is None:
        return list(resolutions)
    kept = [r for r in resolutions if grid_factor * r <= cap]
    if not kept:
        raise ConfigError(f"grid override {cap} leaves no resolution of {list(resolutions)}")
    return kept


def _constant_summary(rep):
    return {"label": rep.label, "per_resolution": rep.per_resolution, "sup": rep.sup, "stability": rep.stability,
            "tolerance": rep.tolerance, "verdict": rep.verdict}


# ---------------------------------------------------------------------------
# experiment kinds


def run_check_calculus(cfg, grid, art, cap):
    from . import calculus as C
    from .quantize import exactness_report

    p = cfg.params
    check = p["check"]
    if check == "quantization":
        rep = exactness_report(grid, cfg.seed)
        art.csv("quantization.csv", ["case", "relative_error"],
                [[k, v] for k, v in sorted(rep.items()) if k not in ("tolerance", "verdict")])
        return rep, rep["verdict"]
    if check in ("composition", "adjoint", "commutator"):
        if p["a1"] is None:
            _, a2, a1 = C.documented_pair()
        else:
            a1 = _symbol(cfg, p["a1"])
            a2 = _symbol(cfg, p["a2"]) if p["a2"] else None
        if check == "composition":
            rep = C.composition_residual(a1, a2, grid, p["bands"], p["slack"], cfg.seed, p["first_order"])
        elif check == "adjoint":
            rep = C.adjoint_residual(a1, grid, p["bands"], p["slack"], cfg.seed)
        else:
            rep = C.commutator_principal_check(a1, a2, grid, p["bands"], p["slack"], cfg.seed)
        art.report(f"{check}.csv", rep)
        summary = {k: v for k, v in rep.__dict__.items()}
        return summary, rep.verdict
    res = [int(r) for r in _cap(p["resolutions"], 1, cap)]
    if check == "garding":
        if p["a1"]:
            a = _symbol(cfg, p["a1"])
            b_loc = _symbol(cfg, p["a2"]) if p["a2"] else None
            fields = [C.packet_field(q) for q in C.packet_corpus(12, cfg.seed, 16.0, spread=0.5)]
        else:
            a, b_loc, fields = C.garding_documented_case(seed=cfg.seed)
        rep = C.garding_experiment(a, b_loc, res, fields, N=p["N"])
    else:
        a, ap = _symbol(cfg, p["a1"]), _symbol(cfg, p["a2"])
        fields = [C.packet_field(q) for q in C.packet_corpus(12, cfg.seed, 16.0, spread=0.5)]
        rep = C.elliptic_estimate_experiment(a, ap, p["k"], p["N"], res, fields)
    art.report(f"{check}.csv", rep)
    return _constant_summary(rep), rep.verdict


def run_trace_rays(cfg, grid, art, cap):
    from .hamilton import LightRay, check_control, in_characteristic_set
    from .symbols import PhaseDirection

    p = cfg.params
    rows, skipped = [], []
    i = 0
    for x in p["points"]:
        for v in p["directions"]:
            base = PhaseDirection.normalized(x, v)
            if not in_characteristic_set(base.xi_hat):
                skipped.append({"x": list(x), "xi": list(v)})
                continue
            ray = LightRay(base, p["orientation"], tuple(p["t_range"]))
            ts, pts = ray.samples(p["per_unit"])
            rows.extend([i, float(t)] + pt.tolist() + base.xi_hat.tolist() for t, pt in zip(ts, pts))
            i += 1
    d = cfg.grid.d
    art.csv("rays.csv", ["ray", "t"] + [f"x{j}" for j in range(d)] + [f"xi_hat{j}" for j in range(d)], rows)
    summary = {"n_rays": i, "skipped_noncharacteristic": skipped}
    verdict = True
    if p["triple"] != "none":
        tp = {"triple": p["triple"], "N": 2.0, "k": 0.0}
        t = _triple(cfg, tp)
        cert = check_control(t.b, t.e, t.g, t.net)
        cert.write_csv(art.path("control_rays.csv"))
        summary["control"] = cert.summary()
        verdict = cert.verdict
    return summary, verdict


def run_build_escape(cfg, grid, art, cap):
    from . import propagation as PR
    from .escape import (EscapeSpec, build_escape, default_psi, sos_decomposition, sos_identity_residual,
                         verify_sign_condition)
    from .symbols import PhaseDirection

    p = cfg.params
    spec = EscapeSpec(PhaseDirection(np.asarray(p["x"], float), np.asarray(p["xi_hat"], float)), p["t0"],
                      p["delta"], p["gamma"], p["k"], p["y_radius"], p["angle_radius"])
    bundle = build_escape(spec, check=False)
    e = _symbol(cfg, "e") if "e" in cfg.symbols else PR.escape_e()
    sign = verify_sign_condition(bundle, e, n_samples=p["n_samples"], seed=cfg.seed, keep_rows=p["keep_rows"])
    if p["keep_rows"]:
        sign.write_csv(art.path("sign_samples.csv"))
    C = p["sos_C"] if p["sos_C"] is not None else (1.05 * sign.c_min if sign.c_finite and sign.c_min > 0 else 1.0)
    pair = sos_decomposition(bundle, e, default_psi(bundle), C, check_samples=p["sos_samples"], seed=cfg.seed + 1)
    sos = sos_identity_residual(pair, bundle, e, n=p["sos_samples"], seed=cfg.seed + 2)
    tol = cfg.tolerances.get("sos", 1e-8)
    summary = {"spec": spec.to_dict(), "sign": sign.summary(), "sos_C": C, "sos_residual": sos, "sos_tolerance": tol}
    art.csv("sign_summary.csv", ["key", "value"], [[k, v] for k, v in sorted(sign.summary().items())
                                                   if not isinstance(v, (tuple, list))])
    return summary, bool(sign.verdict and sos <= tol)


def run_estimate_wavefront(cfg, grid, art, cap):
    from . import wavefront as W
    from .symbols import sphere_directions
    from .waves import traveling_delta

    p = cfg.params
    lam = p["band_limit"]
    sols = _solutions(cfg, [])
    u = sols[0].at(lam).field(grid) if sols else traveling_delta(grid, lam, window=True)
    try:
        cal = W.calibrate(grid, p["window_scale"], p["cone_half_angle"], tuple(range(p["calibration_seeds"])),
                          band_limit=lam)
        cal_ok = True
    except CalibrationError as err:
        cal, cal_ok = err.table, False
    art.csv("calibration.csv", ["s", "slope", "slope_std", "n", "s_fit", "residual"],
            [[e["s"], e["slope"], e["slope_std"], e["n"], e["s_fit"], e["residual"]] for e in cal.entries])
    dirs = np.asarray(p["directions"], float) if p["directions"] else sphere_directions(grid.d, p["n_dirs"])
    est = W.wavefront_scan(u, [np.asarray(x, float) for x in p["x_net"]], dirs, cal, p["window_scale"],
                           p["cone_half_angle"], lam)
    W.write_scan_csv(art.path("scan.csv"), est)
    summary = {"calibration": {"alpha": cal.alpha, "beta": cal.beta, "max_residual": cal.max_residual,
                               "sentinel_check": cal.sentinel_check, "passed": cal_ok},
               "n_points": len(est), "n_sentinel": sum(e.regular for e in est)}
    return summary, cal_ok


def run_propagation(cfg, grid, art, cap):
    from . import propagation as PR

    p = cfg.params
    est = p["estimate"]
    res = _cap(p["resolutions"] or DEFAULT_RESOLUTIONS[est], p["grid_factor"], cap)
    if est == "pairing":
        from .escape import EscapeSpec, build_escape
        from .symbols import PhaseDirection
        from .waves import traveling_delta

        bundle = build_escape(EscapeSpec(PhaseDirection(np.zeros(2), PR.NULL_AXIS)), check=False)
        u = traveling_delta(grid, grid.n_points[0] / p["grid_factor"], window=True)
        rep = PR.pairing_identity_check(bundle.a, u, cfg.tolerances.get("pairing", 1e-8))
        art.csv("pairing.csv", ["expression", "value"],
                [["im_pairing", rep.im_pairing], ["commutator_form", rep.commutator_form],
                 ["bracket_form", rep.bracket_form]])
        return jsonable(rep), rep.verdict
    if est == "commutator":
        bundle, e, g, sign = PR.escape_setup(p["gamma"], seed=cfg.seed)
        sols = _solutions(cfg, PR.default_corpus("ladder"))
        rep = PR.commutator_bound_experiment(bundle, e, g, sols, res, sign, grid_factor=p["grid_factor"])
        art.report("commutator.csv", rep.fitted)
        return {"cauchy_schwarz_residual": rep.cauchy_schwarz_residual, "fitted": _constant_summary(rep.fitted),
                "combined_ok": rep.combined_ok, "eps": rep.eps, "gamma": rep.gamma}, rep.verdict
    triple = _triple(cfg, p)
    if est == "necessity":
        nr = PR.hypothesis_necessity_sweep(triple, _solutions(cfg, PR.default_corpus()), res, p["threshold"],
                                           p["grid_factor"])
        art.report("necessity.csv", nr.report)
        return {"exponent": nr.exponent, "control_verdict": nr.control_verdict, "threshold": nr.threshold,
                "report": _constant_summary(nr.report)}, nr.verdict
    if est == "lemma":
        rep = PR.run_lemma_estimate(triple, _solutions(cfg, PR.default_corpus("lemma")), res, p["grid_factor"],
                                    tolerance=cfg.tolerances.get("stability", 2.0))
    else:
        rep = PR.run_theorem_estimate(triple, _solutions(cfg, PR.default_corpus()), res, p["grid_factor"],
                                      tolerance=cfg.tolerances.get("stability", 2.0))
    art.report(f"{est}.csv", rep)
    return _constant_summary(rep) | {"control": rep.config.get("control")}, rep.verdict


def run_ladder(cfg, grid, art, cap):
    from . import propagation as PR

    p = cfg.params
    res = _cap(p["resolutions"], p["grid_factor"], cap)
    triple = _triple(cfg, p)
    lr = PR.run_order_ladder(triple, _solutions(cfg, PR.default_corpus("ladder")), res, p["m_max"],
                             growth_factor=p["growth_factor"], grid_factor=p["grid_factor"],
                             tolerance=cfg.tolerances.get("stability", 2.0))
    for rep in lr.levels:
        art.report(f"ladder_m{rep.config['m']}.csv", rep)
    return lr.summary(), lr.verdict


def run_regularization(cfg, grid, art, cap):
    from . import propagation as PR

    p = cfg.params
    lam = p["band_limit"]
    if cap is not None and p["grid_factor"] * lam > cap:
        lam = cap / p["grid_factor"]
    triple = _triple(cfg, p)
    rr = PR.regularization_experiment(triple, _solutions(cfg, PR.default_corpus("regularization")), lam, p["r"],
                                      p["eps_list"], p["s_mono"], p["grid_factor"],
                                      tolerance=cfg.tolerances.get("uniformity", 2.0))
    rr.write_csv(art.path("regularization.csv"))
    return rr.summary(), rr.verdict


RUNNERS = {
    "check-calculus": run_check_calculus,
    "trace-rays": run_trace_rays,
    "build-escape": run_build_escape,
    "estimate-wavefront": run_estimate_wavefront,
    "run-propagation": run_propagation,
    "run-ladder": run_ladder,
    "run-regularization": run_regularization,
}


# ---------------------------------------------------------------------------
# driver


def _parse_grid_override(text):
    parts = text.lower().split("x")
    if len(parts) < 2 or len(set(parts)) != 1 or not parts[0].isdigit():
        raise ConfigError(f"--grid-override expects NxN (square grids), got {text!r}")
    return int(parts[0])


def _output_dir(cfg, digest, override):
    if override:
        return Path(override)
    root = Path(os.environ.get(ENV_OUTPUT_ROOT, "runs"))
    if cfg.output_dir:
        out = Path(cfg.output_dir)
        return out if out.is_absolute() else root / out
    return root / f"{cfg.name}-{digest[:12]}"


def execute(config_path, output_dir=None, seed_override=None, grid_override=None):
    """Run one config; returns ``(exit_code, output_dir or None, message)``."""
    from .grid import GridSpec

    try:
        cfg = load_config(config_path)
        if seed_override is not None:
            cfg.seed = int(seed_override)
        cap = _parse_grid_override(grid_override) if grid_override else None
        if cap is not None:
            cfg.grid.n = cap
            if cap < 8 or cap & (cap - 1):
                raise ConfigError(f"--grid-override: {cap} is not a power of two >= 8")
    except ConfigError as err:
        return EXIT_CONFIG, None, str(err)
    digest = config_hash(cfg)
    out = _output_dir(cfg, digest, output_dir)
    out.mkdir(parents=True, exist_ok=True)
    art = Artifacts(out)
    grid = GridSpec.square(cfg.grid.n, cfg.grid.d, cfg.grid.period)
    log.info("running %s (%s) into %s", cfg.kind, cfg.name, out)
    status, refusal = EXIT_OK, None
    try:
        summary, verdict = RUNNERS[cfg.kind](cfg, grid, art, cap)
        status = EXIT_OK if verdict else EXIT_VERDICT
    except HypothesisError as err:
        summary, verdict, status = {"refused": str(err), "diagnostic": err.diagnostic}, False, EXIT_REFUSED
        refusal = str(err)
    except (ConfigError, KeyError, MicrolocalError) as err:
        if isinstance(err, MicrolocalError) and not isinstance(err, (ConfigError, ValueError)):
            raise
        return EXIT_CONFIG, out, f"{config_path}: {err}"
    doc = {"experiment": cfg.kind, "name": cfg.name, "seed": cfg.seed, "verdict": bool(verdict),
           "exit_status": status, "results": summary,
           "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    write_json(art.path("summary.json"), doc)
    files = {}
    for name in sorted(set(art.files) - {"summary.json"}):
        files[name] = hashlib.sha256((out / name).read_bytes()).hexdigest()
    write_json(out / "manifest.json", {"config_hash": digest, "library_version": __version__,
                                       "experiment": cfg.kind, "config": cfg.model_dump(mode="json"),
                                       "artifacts": files})
    return status, out, refusal or ("pass" if verdict else "verdict failed")


@click.group()
def main():
    """Microlocal propagation experiments."""


@main.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--output-dir", type=click.Path(file_okay=False), default=None, help="Artifact directory.")
@click.option("--seed-override", type=int, default=None, help="Replace the config's top-level seed.")
@click.option("--grid-override", default=None, help="NxN grid; caps sweep resolutions.")
@click.option("--verbose", is_flag=True, help="Log progress to stderr.")
def run(config_path, output_dir, seed_override, grid_override, verbose):
    """Run the experiment described by CONFIG_PATH."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    code, out, msg = execute(config_path, output_dir, seed_override, grid_override)
    if code == EXIT_CONFIG:
        click.echo(msg, err=True)
    else:
        click.echo(f"{msg} -> {out}")
    sys.exit(code)


@main.command("list-builtins")
def list_builtins():
    """Print symbol builders, solution families and experiment schemas."""
    from .builtins import catalog
    click.echo(json.dumps(jsonable(catalog()), indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
