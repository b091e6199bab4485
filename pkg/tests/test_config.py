import json

import pytest

from microlocal.builtins import build_symbol, catalog, declared_order
from microlocal.config import ConfigError, config_hash, parse_config


def _text(**doc):
    return json.dumps(doc, indent=2)


def test_minimal_config_gets_defaults():
    cfg = parse_config(_text(kind="run-propagation"))
    assert cfg.params["estimate"] == "theorem"
    assert cfg.grid.n == 128


def test_invalid_json_is_line_anchored():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n "kind": "trace-rays",\n "seed": 1,,\n}', "c.json")
    assert info.value.line == 3
    assert str(info.value).startswith("c.json:3:")


def test_unknown_param_key_names_its_line():
    text = _text(kind="check-calculus", params={"check": "adjoint", "bogus": 1})
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert "params.bogus" in str(info.value)
    assert info.value.line == text.splitlines().index('    "bogus": 1') + 1


@pytest.mark.parametrize("doc", [
    {"kind": "no-such-kind"},
    {"kind": "trace-rays", "grid": {"n": 100}},
    {"kind": "trace-rays", "extra": 1},
    {"kind": "trace-rays", "symbols": {"a": {"builder": "nope"}}},
    {"kind": "run-ladder", "params": {"triple": "violating"}},
    {"kind": "run-propagation", "solutions": [{"kind": "soliton"}]},
])
def test_rejections(doc):
    with pytest.raises(ConfigError):
        parse_config(_text(**doc))


def test_order_mismatch_cites_the_pattern():
    doc = {"kind": "run-propagation", "params": {"triple": "custom"},
           "symbols": {"b": {"builder": "constant"}, "e": {"builder": "constant"},
                       "g": {"builder": "bracket", "params": {"m": 0}}}}
    with pytest.raises(ConfigError, match="b in S\\^k, e in S\\^k, g in S\\^\\(k-1\\)"):
        parse_config(_text(**doc))


def test_custom_triple_with_right_orders():
    doc = {"kind": "run-propagation", "params": {"triple": "custom", "k": 1.0},
           "symbols": {"b": {"builder": "bracket"}, "e": {"builder": "bracket"},
                       "g": {"builder": "constant"}}}
    assert parse_config(_text(**doc)).params["k"] == 1.0


def test_hash_ignores_formatting():
    a = parse_config('{"kind": "trace-rays", "seed": 2}')
    b = parse_config('{\n  "seed": 2,\n  "kind": "trace-rays"\n}')
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(parse_config('{"kind": "trace-rays", "seed": 3}'))


def test_declared_orders_match_built_symbols():
    cases = [("box", {}), ("bracket", {"m": -1.5}), ("constant", {}), ("linear-xi", {"j": 1}),
             ("bump-x", {"center": [0, 0], "radius": 1}),
             ("cone-cutoff", {"center": [0, 0], "radius": 1, "axis": [1, -1], "half_angle": 0.3, "order": -1})]
    for name, p in cases:
        assert build_symbol(name, p).order == declared_order(name, p)


def test_builder_param_errors():
    with pytest.raises(ValueError, match="needs"):
        build_symbol("bump-x", {"center": [0, 0]})
    with pytest.raises(ValueError, match="does not accept"):
        build_symbol("box", {"m": 2})


def test_catalog_is_sorted():
    c = catalog()
    assert "box" in c["symbols"] and "traveling-delta" in c["solution_families"]
    assert list(c["symbols"]) == sorted(c["symbols"])
    assert list(c["experiments"]) == sorted(c["experiments"])
