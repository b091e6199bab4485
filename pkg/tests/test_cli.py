import json

import pytest
from click.testing import CliRunner

from microlocal.cli import derived_seed, main

QUANT = {"kind": "check-calculus", "name": "quant", "grid": {"n": 32}, "params": {"check": "quantization"}}
ESCAPE = {"kind": "build-escape", "params": {"gamma": 32, "n_samples": 4000, "sos_samples": 1000}}


def _write(tmp_path, doc, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc, indent=2))
    return str(p)


def _run(*args, env=None):
    return CliRunner().invoke(main, list(args), env=env)


def test_quantization_run_writes_artifacts(tmp_path):
    out = tmp_path / "out"
    res = _run("run", _write(tmp_path, QUANT), "--output-dir", str(out))
    assert res.exit_code == 0, res.output
    summary = json.loads((out / "summary.json").read_text())
    manifest = json.loads((out / "manifest.json").read_text())
    assert summary["verdict"] is True and "timestamp" in summary
    assert manifest["library_version"] and len(manifest["config_hash"]) == 64
    assert set(manifest["artifacts"]) == {"quantization.csv"}


def test_rerun_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, ESCAPE)
    for d in ("a", "b"):
        assert _run("run", cfg, "--output-dir", str(tmp_path / d)).exit_code == 0
    for name in ("sign_summary.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_verdict_failure_exit_code(tmp_path):
    doc = dict(ESCAPE, params={"gamma": 1, "n_samples": 4000, "sos_samples": 1000})
    assert _run("run", _write(tmp_path, doc), "--output-dir", str(tmp_path / "o")).exit_code == 1


def test_refusal_exit_code(tmp_path):
    doc = {"kind": "run-propagation", "params": {"triple": "violating", "resolutions": [16]}}
    res = _run("run", _write(tmp_path, doc), "--output-dir", str(tmp_path / "o"))
    assert res.exit_code == 3
    assert "refused" in json.loads((tmp_path / "o" / "summary.json").read_text())["results"]


def test_parse_error_exit_code(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"kind": "trace-rays",\n "params": {"per_unit": "many"}}')
    res = _run("run", str(p))
    assert res.exit_code == 2
    assert "bad.json:2:" in res.output


def test_default_output_root_from_env(tmp_path):
    res = _run("run", _write(tmp_path, QUANT), env={"MICROLOCAL_OUTPUT_ROOT": str(tmp_path / "root")})
    assert res.exit_code == 0
    (run_dir,) = (tmp_path / "root").iterdir()
    assert run_dir.name.startswith("quant-")


def test_seed_override_changes_the_hash(tmp_path):
    cfg = _write(tmp_path, QUANT)
    _run("run", cfg, "--output-dir", str(tmp_path / "a"))
    _run("run", cfg, "--output-dir", str(tmp_path / "b"), "--seed-override", "9")
    ha = json.loads((tmp_path / "a" / "manifest.json").read_text())["config_hash"]
    hb = json.loads((tmp_path / "b" / "manifest.json").read_text())["config_hash"]
    assert ha != hb


@pytest.mark.parametrize("value, code", [("16x16", 0), ("16x32", 2), ("12x12", 2)])
def test_grid_override(tmp_path, value, code):
    res = _run("run", _write(tmp_path, QUANT), "--output-dir", str(tmp_path / "o"), "--grid-override", value)
    assert res.exit_code == code, res.output


def test_trace_rays_skips_noncharacteristic(tmp_path):
    doc = {"kind": "trace-rays", "params": {"directions": [[1, -1], [1, 0]], "t_range": [0, 1], "per_unit": 4}}
    out = tmp_path / "o"
    assert _run("run", _write(tmp_path, doc), "--output-dir", str(out)).exit_code == 0
    s = json.loads((out / "summary.json").read_text())["results"]
    assert s["n_rays"] == 1 and len(s["skipped_noncharacteristic"]) == 1
    assert len((out / "rays.csv").read_text().splitlines()) == 1 + 5


def test_list_builtins():
    res = _run("list-builtins")
    assert res.exit_code == 0
    doc = json.loads(res.output)
    assert "box" in doc["symbols"] and "traveling-delta" in doc["solution_families"]


def test_derived_seeds_are_distinct_and_stable():
    seeds = [derived_seed(0, i) for i in range(20)]
    assert len(set(seeds)) == 20
    assert seeds == [derived_seed(0, i) for i in range(20)]
