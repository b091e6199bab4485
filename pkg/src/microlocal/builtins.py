"""Named symbol builders, solution families and experiment kinds.

Each builder takes a parameter dict and the dimension and returns a
:class:`SymbolHandle`. ``BUILDER_PARAMS`` documents the accepted keys with
their defaults (``None`` marks a required key).
"""

from __future__ import annotations

import math

from . import symbols as S

BUILDER_PARAMS = {
    "box": {},
    "bracket": {"m": 1.0},
    "constant": {"c": 1.0},
    "linear-xi": {"j": 0},
    "bump-x": {"center": None, "radius": None, "inner": 0.5, "profile": "plateau"},
    "raised-cosine-x": {"center": None, "power": 8, "period": 2 * math.pi},
    "cone-cutoff": {"center": None, "radius": None, "axis": None, "half_angle": None, "order": 0.0, "inner": 0.5,
                    "symmetric": False, "low": 0.5, "high": 1.0, "profile": "plateau"},
    "tube-cone": {"start": None, "end": None, "radius": None, "axis": None, "half_angle": None, "order": 0.0,
                  "inner": 0.5, "symmetric": False, "low": 0.5, "high": 1.0, "profile": "plateau"},
}


def _merged(name, params):
    spec = BUILDER_PARAMS[name]
    unknown = sorted(set(params) - set(spec))
    if unknown:
        raise ValueError(f"builder {name!r} does not accept {unknown}")
    out = dict(spec)
    out.update(params)
    missing = sorted(k for k, v in out.items() if v is None)
    if missing:
        raise ValueError(f"builder {name!r} needs {missing}")
    return out


def _box(p, d):
    return S.make_box_symbol(d)


def _bump_x(p, d):
    f = S.bump_factor(p["center"], p["radius"], p["inner"], p["profile"])
    return S.x_symbol(f, d, label="bump", x_support=S.bump_support(p["center"], p["radius"]))


def _cone(p, d):
    return S.cone_cutoff_symbol(p["center"], p["radius"], p["axis"], p["half_angle"], p["order"], d, p["inner"],
                                p["symmetric"], p["low"], p["high"], profile=p["profile"])


def _tube(p, d):
    return S.tube_cone_symbol(p["start"], p["end"], p["radius"], p["axis"], p["half_angle"], p["order"],
                              p["inner"], p["symmetric"], p["low"], p["high"], profile=p["profile"])


SYMBOL_BUILDERS = {
    "box": _box,
    "bracket": lambda p, d: S.make_bracket_symbol(p["m"], d),
    "constant": lambda p, d: S.constant_symbol(p["c"], d),
    "linear-xi": lambda p, d: S.linear_xi_symbol(p["j"], d),
    "bump-x": _bump_x,
    "raised-cosine-x": lambda p, d: S.x_symbol(S.raised_cosine_factor(p["center"], p["power"], p["period"]), d),
    "cone-cutoff": _cone,
    "tube-cone": _tube,
}


def build_symbol(name, params, d=2, label=None) -> S.SymbolHandle:
    sym = SYMBOL_BUILDERS[name](_merged(name, params), d)
    return sym.with_label(label) if label else sym


def declared_order(name, params) -> float:
    """Order a builder will tag its symbol with, without building it."""
    p = dict(BUILDER_PARAMS.get(name, {}))
    p.update(params)
    if name == "box":
        return 2.0
    if name == "bracket":
        return float(p["m"])
    if name == "linear-xi":
        return 1.0
    if name in ("cone-cutoff", "tube-cone"):
        return float(p["order"])
    return 0.0


SOLUTION_FAMILIES = {
    "traveling-delta": {"offset": 0.0},
    "random-hs": {"s": None},
    "plane-wave-packet": {"center": [0.0], "width": 0.3, "k0": [0.0], "k0_frac": None},
}

TRIPLES = ("flagship", "violating", "regularization", "custom")


def catalog() -> dict:
    """Everything ``list-builtins`` prints, with sorted keys."""
    from .config import KINDS, PARAMS

    return {
        "symbols": {k: BUILDER_PARAMS[k] for k in sorted(BUILDER_PARAMS)},
        "solution_families": {k: SOLUTION_FAMILIES[k] for k in sorted(SOLUTION_FAMILIES)},
        "triples": sorted(TRIPLES),
        "experiments": {k: PARAMS[k].model_json_schema()["properties"] for k in sorted(KINDS)},
    }
