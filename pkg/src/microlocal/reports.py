"""Report containers and their serialization.

CSV cells are written with ``repr`` for floats so that reruns produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from pathlib import Path

import numpy as np


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def jsonable(obj):
    """Convert numpy scalars/arrays and dataclasses into plain JSON data."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


@dataclass
class ResidualReport:
    """Per-band operator-norm estimates of a residual and their decay fit.

    ``exact`` is set when every band sits at the roundoff floor; the fitted
    exponent is then ``-inf`` and the verdict is true.
    """

    label: str
    band_lambdas: list
    residual_norms: list
    reference_norms: list
    fitted_exponent: float
    target_exponent: float
    slack: float
    verdict: bool
    exact: bool = False
    fd_fallback: bool = False
    seed: int = 0

    def rows(self):
        return [(lam, r, ref) for lam, r, ref in zip(self.band_lambdas, self.residual_norms, self.reference_norms)]

    def write_csv(self, path):
        return write_csv(path, ["lambda", "residual_norm", "reference_norm"], self.rows())


@dataclass
class ConstantReport:
    """Measured ratios of an estimate, per datum and resolution.

    ``stability`` is max/min over per-resolution sups (1 when all sups are 0).
    """

    label: str
    columns: list
    rows: list
    per_resolution: dict
    sup: float
    stability: float
    tolerance: float
    verdict: bool
    config: dict = field(default_factory=dict)

    def write_csv(self, path):
        return write_csv(path, self.columns, self.rows)


def stability_ratio(values):
    vals = [float(v) for v in values]
    if not vals:
        return float("nan")
    hi, lo = max(vals), min(vals)
    if hi == 0.0:
        return 1.0
    if lo <= 0.0:
        return float("inf")
    return hi / lo


def make_constant_report(label, columns, rows, resolution_col, ratio_col, tolerance=2.0, config=None):
    ri = columns.index(resolution_col)
    qi = columns.index(ratio_col)
    per = {}
    for row in rows:
        per[row[ri]] = max(per.get(row[ri], 0.0), float(row[qi]))
    sup = max(per.values()) if per else float("nan")
    stab = stability_ratio(per.values())
    return ConstantReport(label, list(columns), [list(r) for r in rows], per, sup, stab,
                          tolerance, bool(stab <= tolerance), dict(config or {}))
