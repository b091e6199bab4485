"""Experiment configuration: a JSON document validated with pydantic.

Unknown keys are rejected everywhere. Parse and validation failures are
reported as ``ConfigError`` whose message is anchored to a line of the
source file (``path:line: message``).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import MicrolocalError, OrderPatternError

KINDS = ("check-calculus", "trace-rays", "build-escape", "estimate-wavefront", "run-propagation", "run-ladder",
         "run-regularization")
TRIPLE_PRESETS = ("flagship", "violating", "regularization", "custom")


class ConfigError(MicrolocalError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(_Strict):
    n: int = 128
    d: int = 2
    period: float = 2 * math.pi

    @field_validator("n")
    @classmethod
    def _pow2(cls, v):
        if v < 8 or v & (v - 1):
            raise ValueError("n must be a power of two >= 8")
        return v


class SymbolConfig(_Strict):
    builder: str
    params: Dict[str, Any] = Field(default_factory=dict)


class SolutionConfig(_Strict):
    kind: Literal["traveling-delta", "random-hs", "plane-wave-packet"]
    band_limit: float = 16.0
    params: Dict[str, Any] = Field(default_factory=dict)
    seed: Optional[int] = None


class CheckCalculusParams(_Strict):
    check: Literal["quantization", "composition", "adjoint", "commutator", "elliptic", "garding"] = "quantization"
    a1: Optional[str] = None
    a2: Optional[str] = None
    bands: List[float] = Field(default_factory=lambda: [8.0, 16.0, 32.0, 64.0])
    slack: float = 0.3
    first_order: bool = True
    resolutions: List[int] = Field(default_factory=lambda: [64, 128, 256])
    k: float = 0.0
    N: float = 2.0


class TraceRaysParams(_Strict):
    points: List[List[float]] = Field(default_factory=lambda: [[0.0, 0.0]])
    directions: List[List[float]] = Field(default_factory=lambda: [[0.7071067811865476, -0.7071067811865476]])
    t_range: List[float] = Field(default_factory=lambda: [-1.0, 1.0])
    orientation: Literal[1, -1] = 1
    triple: Literal["flagship", "violating", "regularization", "custom", "none"] = "none"
    per_unit: int = 64


class BuildEscapeParams(_Strict):
    x: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    xi_hat: List[float] = Field(default_factory=lambda: [0.7071067811865476, -0.7071067811865476])
    t0: float = 1.0
    delta: float = 0.25
    gamma: float = 1.0
    k: float = 0.0
    y_radius: float = 0.3
    angle_radius: float = 0.15
    n_samples: int = 100_000
    sos_samples: int = 10_000
    sos_C: Optional[float] = None
    keep_rows: bool = False


class EstimateWavefrontParams(_Strict):
    band_limit: float = 64.0
    window_scale: float = 1.5
    cone_half_angle: float = 0.2
    x_net: List[List[float]] = Field(default_factory=lambda: [[0.0, 0.0]])
    n_dirs: int = 8
    directions: List[List[float]] = Field(default_factory=list)
    calibration_seeds: int = 8


class RunPropagationParams(_Strict):
    estimate: Literal["theorem", "lemma", "necessity", "pairing", "commutator"] = "theorem"
    triple: Literal["flagship", "violating", "regularization", "custom"] = "flagship"
    profile: Literal["plateau", "gauss"] = "plateau"
    # default depends on the estimate, see cli.DEFAULT_RESOLUTIONS
    resolutions: Optional[List[float]] = None
    grid_factor: int = 4
    k: float = 0.0
    N: float = 2.0
    threshold: float = 0.5
    gamma: float = 32.0


class RunLadderParams(_Strict):
    triple: Literal["flagship", "regularization", "custom"] = "flagship"
    resolutions: List[float] = Field(default_factory=lambda: [32.0, 64.0, 128.0])
    m_max: Optional[int] = None
    growth_factor: float = 2.0
    grid_factor: int = 4
    k: float = 0.0
    N: float = 2.0


class RunRegularizationParams(_Strict):
    triple: Literal["flagship", "regularization", "custom"] = "regularization"
    band_limit: float = 64.0
    r: Optional[float] = None
    eps_list: List[float] = Field(default_factory=lambda: [2.0 ** -j for j in range(7)])
    s_mono: float = 0.0
    grid_factor: int = 4
    k: float = 0.0
    N: float = 2.0


PARAMS = {
    "check-calculus": CheckCalculusParams,
    "trace-rays": TraceRaysParams,
    "build-escape": BuildEscapeParams,
    "estimate-wavefront": EstimateWavefrontParams,
    "run-propagation": RunPropagationParams,
    "run-ladder": RunLadderParams,
    "run-regularization": RunRegularizationParams,
}


class ExperimentConfig(_Strict):
    kind: Literal[KINDS]
    name: str = "experiment"
    seed: int = 0
    grid: GridConfig = Field(default_factory=GridConfig)
    symbols: Dict[str, SymbolConfig] = Field(default_factory=dict)
    solutions: List[SolutionConfig] = Field(default_factory=list)
    params: Dict[str, Any] = Field(default_factory=dict)
    tolerances: Dict[str, float] = Field(default_factory=dict)
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        from .builtins import SYMBOL_BUILDERS, declared_order

        for name, sym in self.symbols.items():
            if sym.builder not in SYMBOL_BUILDERS:
                raise ValueError(f"symbol {name!r}: unknown builder {sym.builder!r}")
        if self.params.get("triple") == "custom":
            missing = [s for s in ("b", "e", "g") if s not in self.symbols]
            if missing:
                raise ValueError(f"custom triple needs symbols {missing}")
            k = self.params.get("k", 0.0)
            orders = [declared_order(self.symbols[s].builder, self.symbols[s].params) for s in ("b", "e", "g")]
            try:
                from .propagation import check_order_pattern
                check_order_pattern(*orders, k)
            except OrderPatternError as err:
                raise ValueError(str(err)) from None
        return self

    def typed_params(self):
        return PARAMS[self.kind].model_validate(self.params)


def _locate(text: str, loc) -> Optional[int]:
    """Line (1-based) of the innermost key of ``loc`` found in order in ``text``."""
    pos, line = 0, None
    for part in loc:
        if isinstance(part, int):
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(str(part))).search(text, pos)
        if m is None:
            break
        pos = m.end()
        line = text.count("\n", 0, m.start()) + 1
    return line


def parse_config(text: str, source="<config>") -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{source}:{err.lineno}: invalid JSON: {err.msg} (column {err.colno})", err.lineno) from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: the document must be a JSON object", 1)
    try:
        cfg = ExperimentConfig.model_validate(data)
        prefix = ("params",)
        cfg.params = PARAMS[cfg.kind].model_validate(cfg.params).model_dump()
        return cfg
    except ValidationError as err:
        first = err.errors()[0]
        loc = tuple(first["loc"])
        if err.title != "ExperimentConfig":
            loc = prefix + loc
        if first["type"] == "value_error" and not loc:
            # model-level rule: anchor to the params/symbols block it concerns
            loc = ("symbols",) if "pattern" in first["msg"] or "symbol" in first["msg"] else ("params",)
        line = _locate(text, loc) or 1
        where = ".".join(str(p) for p in loc) or "<root>"
        msg = first["msg"].removeprefix("Value error, ")
        raise ConfigError(f"{source}:{line}: {where}: {msg}", line) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"{path}:0: cannot read config: {err.strerror}", 0) from None
    return parse_config(text, str(path))


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.model_dump(mode="json"), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()
