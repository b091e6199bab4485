"""Left (Kohn-Nirenberg) quantization on a periodic grid.

``(Au)(x) = sum_k a(x, xi_k) u_hat(k) e^{i x . xi_k}`` with the transform
normalized so that ``a = 1`` is the identity. Separable symbols use
``sum_r f_r(x) IFFT(g_r FFT u)``; anything else is applied row by row
(only rows inside ``x_support``), never materializing the full matrix.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, GridMismatchError
from .grid import Field, GridSpec
from .symbols import Factor, SymbolHandle, bracket, xi_symbol

_CHUNK_BYTES = 64 * 2**20


class GridOperator:
    """A linear operator on fields over one grid, with an exact adjoint.

    Subclasses implement ``matvec``/``rmatvec`` on arrays shaped
    ``(..., *grid.shape)`` so that several fields can be pushed at once.
    """

    def __init__(self, grid: GridSpec, matvec=None, rmatvec=None, label=""):
        self.grid = grid
        self._mv = matvec
        self._rmv = rmatvec
        self.label = label

    def matvec(self, values):
        return self._mv(values)

    def rmatvec(self, values):
        return self._rmv(values)

    def apply(self, u: Field) -> Field:
        if u.grid != self.grid:
            raise GridMismatchError("operator and field grids differ")
        return Field(self.grid, self.matvec(u.values))

    __call__ = apply

    def adjoint(self) -> "GridOperator":
        return GridOperator(self.grid, self.rmatvec, self.matvec, f"({self.label})*")

    @property
    def H(self):
        return self.adjoint()

    def __matmul__(self, other: "GridOperator") -> "GridOperator":
        if other.grid != self.grid:
            raise GridMismatchError("cannot compose operators on different grids")
        a, b = self, other
        return GridOperator(self.grid, lambda v: a.matvec(b.matvec(v)),
                            lambda v: b.rmatvec(a.rmatvec(v)), f"{a.label}{b.label}")

    def __add__(self, other):
        a, b = self, other
        return GridOperator(self.grid, lambda v: a.matvec(v) + b.matvec(v),
                            lambda v: a.rmatvec(v) + b.rmatvec(v), f"({a.label}+{b.label})")

    def __sub__(self, other):
        a, b = self, other
        return GridOperator(self.grid, lambda v: a.matvec(v) - b.matvec(v),
                            lambda v: a.rmatvec(v) - b.rmatvec(v), f"({a.label}-{b.label})")

    def __mul__(self, c):
        a = self
        return GridOperator(self.grid, lambda v: c * a.matvec(v),
                            lambda v: np.conj(c) * a.rmatvec(v), f"{c}*{a.label}")

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def identity(grid):
    return GridOperator(grid, lambda v: v, lambda v: v, "I")


def commutator(a: GridOperator, b: GridOperator) -> GridOperator:
    return (a @ b) - (b @ a)


def _fftn(v, d):
    return np.fft.fftn(v, axes=tuple(range(-d, 0)))


def _ifftn(v, d):
    return np.fft.ifftn(v, axes=tuple(range(-d, 0)))


class OperatorHandle(GridOperator):
    """``Op(a)`` on a grid; ``mode='adjoint'`` applies its conjugate transpose."""

    def __init__(self, symbol: SymbolHandle, grid: GridSpec, mode="left"):
        if symbol.dim != grid.d:
            raise DimensionMismatchError(f"symbol dimension {symbol.dim} != grid dimension {grid.d}")
        if mode not in ("left", "adjoint"):
            raise ValueError("mode must be 'left' or 'adjoint'")
        super().__init__(grid, label=f"Op({symbol.label})" + ("*" if mode == "adjoint" else ""))
        self.symbol = symbol
        self.mode = mode
        self._tables = None

    # -- separable fast path --------------------------------------------------
    def _separable_tables(self):
        if self._tables is None:
            g = self.grid
            mask = self.symbol.support_mask(g.coords)
            tables = []
            for fx, gx in self.symbol.terms:
                fvals = np.broadcast_to(np.asarray(fx(g.coords), dtype=complex), g.shape) * mask
                gvals = np.broadcast_to(np.asarray(gx(g.freqs), dtype=complex), g.shape)
                tables.append((fvals, gvals))
            self._tables = tables
        return self._tables

    def _left(self, v):
        d = self.grid.d
        if self.symbol.separable:
            vh = _fftn(v, d)
            out = np.zeros(np.shape(v), dtype=complex)
            for fvals, gvals in self._separable_tables():
                out += fvals * _ifftn(gvals * vh, d)
            return out
        return self._naive_left(v)

    def _right(self, v):
        d = self.grid.d
        if self.symbol.separable:
            out = np.zeros(np.shape(v), dtype=complex)
            for fvals, gvals in self._separable_tables():
                out += np.conj(gvals) * _fftn(np.conj(fvals) * v, d)
            return _ifftn(out, d)
        return self._naive_right(v)

    # -- general path ---------------------------------------------------------
    def _rows(self):
        g = self.grid
        mask = self.symbol.support_mask(g.coords).reshape(-1)
        return np.flatnonzero(mask)

    def _row_chunks(self, rows):
        n_xi = self.grid.size
        step = max(1, _CHUNK_BYTES // (16 * 4 * n_xi))
        for i in range(0, rows.size, step):
            yield rows[i:i + step]

    def _kernel_block(self, idx):
        g = self.grid
        d = g.d
        x = g.coords.reshape(-1, d)[idx]
        xi = g.freqs.reshape(-1, d)
        origin = np.array([-L / 2 for L in g.period])
        phase = np.exp(1j * ((x - origin) @ xi.T))
        return self.symbol.eval(x[:, None, :], xi[None, :, :]) * phase

    def _naive_left(self, v):
        g = self.grid
        batch = np.shape(v)[:-g.d]
        vh = (_fftn(v, g.d) / g.size).reshape(batch + (g.size,))
        out = np.zeros(batch + (g.size,), dtype=complex)
        for idx in self._row_chunks(self._rows()):
            M = self._kernel_block(idx)
            out[..., idx] = vh @ M.T
        return out.reshape(np.shape(v))

    def _naive_right(self, v):
        g = self.grid
        batch = np.shape(v)[:-g.d]
        flat = np.reshape(v, batch + (g.size,))
        w = np.zeros(batch + (g.size,), dtype=complex)
        for idx in self._row_chunks(self._rows()):
            M = self._kernel_block(idx)
            w += flat[..., idx] @ np.conj(M)
        return _ifftn(w.reshape(np.shape(v)), g.d)

    def matvec(self, values):
        return self._left(values) if self.mode == "left" else self._right(values)

    def rmatvec(self, values):
        return self._right(values) if self.mode == "left" else self._left(values)

    def adjoint(self) -> "OperatorHandle":
        other = OperatorHandle(self.symbol, self.grid, "adjoint" if self.mode == "left" else "left")
        other._tables = self._tables
        return other


def quantize(a: SymbolHandle, grid: GridSpec) -> OperatorHandle:
    """The operator with left symbol ``a`` on ``grid``."""
    return OperatorHandle(a, grid)


def apply(op: GridOperator, u: Field) -> Field:
    return op.apply(u)


# ---------------------------------------------------------------------------
# norms and multipliers


def sobolev_norm(u: Field, s: float) -> float:
    """``(sum_k <xi_k>^{2s} |u_hat(k)|^2 vol)^{1/2}``; ``s = 0`` is the L^2 norm."""
    w = bracket(u.grid.freqs, 2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(u.spectrum) ** 2) * u.grid.volume))


def sobolev_norms(values, grid: GridSpec, s: float):
    """Batched :func:`sobolev_norm` over leading axes of raw arrays."""
    d = grid.d
    vh = _fftn(values, d) / grid.size
    w = bracket(grid.freqs, 2.0 * s)
    return np.sqrt(np.sum(w * np.abs(vh) ** 2, axis=tuple(range(-d, 0))) * grid.volume)


def l2_norms(values, grid: GridSpec):
    d = grid.d
    return np.sqrt(np.sum(np.abs(values) ** 2, axis=tuple(range(-d, 0))) * grid.cell_volume)


def multiplier(grid: GridSpec, weights, label="m") -> GridOperator:
    """Fourier multiplier by the array ``weights`` (FFT order) on ``grid``."""
    w = np.asarray(weights, dtype=complex)
    d = grid.d
    return GridOperator(grid, lambda v: _ifftn(w * _fftn(v, d), d),
                        lambda v: _ifftn(np.conj(w) * _fftn(v, d), d), label)


def reg_factor(eps: float, r: float) -> Factor:
    """``<eps xi>^{-r}`` with its gradient."""
    def f(xi):
        return bracket(eps * np.asarray(xi), -r)

    def df(xi):
        xi = np.asarray(xi)
        return -r * eps**2 * xi * bracket(eps * xi, -r - 2.0)[..., None]

    return Factor(f, df, f"<{eps:g}xi>^{-r:g}", relative_step=True)


def lambda_symbol(s: float, d: int) -> SymbolHandle:
    from .symbols import make_bracket_symbol
    return make_bracket_symbol(s, d)


def lambda_reg_symbol(eps: float, r: float, d: int) -> SymbolHandle:
    """Symbol of ``Lambda_{eps,-r} = (1 - eps^2 Delta)^{-r/2}``."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return xi_symbol(reg_factor(eps, r), -r, d, label=f"Lambda_reg({eps:g},{-r:g})")


def lambda_operator(s: float, grid: GridSpec) -> OperatorHandle:
    """``Lambda_s = (I - Delta)^{s/2}``."""
    return quantize(lambda_symbol(s, grid.d), grid)


def lambda_reg(eps: float, r: float, grid: GridSpec) -> OperatorHandle:
    """``Lambda_{eps,-r}``: the multiplier ``<eps xi>^{-r}`` (pass ``-r`` for the inverse)."""
    return quantize(lambda_reg_symbol(eps, r, grid.d), grid)


def box_weights(grid: GridSpec):
    xi = grid.freqs
    return xi[..., 0] ** 2 - np.sum(xi[..., 1:] ** 2, axis=-1)


def dalembertian(grid: GridSpec) -> GridOperator:
    """``P = -d_0^2 + sum_j d_j^2`` as the real multiplier ``xi_0^2 - sum xi_j^2``."""
    w = box_weights(grid)
    d = grid.d
    return GridOperator(grid, lambda v: _ifftn(w * _fftn(v, d), d),
                        lambda v: _ifftn(w * _fftn(v, d), d), "P")


def apply_dalembertian(u: Field) -> Field:
    return Field(u.grid, _ifftn(box_weights(u.grid) * _fftn(u.values, u.grid.d), u.grid.d))


def exactness_report(grid: GridSpec, seed=0, tol=1e-10) -> dict:
    """Relative errors of the three exact cases of the quantization rule.

    identity (``a = 1``), multiplication (``a = a(x)``, also through the
    row-by-row path) and a Fourier multiplier (``a = xi_0`` on a plane
    wave). Test data is band-limited to ``|k| <= N/4``.
    """
    from .probes import rng_for
    from .symbols import SymbolHandle, constant_symbol, linear_xi_symbol, x_symbol

    rng = rng_for(seed, 11)
    d = grid.d
    h = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * (grid.freq_norm <= grid.nyquist / 2)
    u = Field.from_spectrum(grid, h)

    def rel(a, b):
        return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))

    out = {}
    out["identity"] = rel(quantize(constant_symbol(1.0, d), grid).apply(u).values, u.values)
    ax = np.cos(grid.coords[..., 0]) * np.exp(np.sin(grid.coords[..., -1]))

    def fx(x, xi):
        return np.cos(x[..., 0]) * np.exp(np.sin(x[..., -1])) * np.ones(np.shape(xi)[:-1])

    sep = x_symbol(Factor(lambda x: np.cos(x[..., 0]) * np.exp(np.sin(x[..., -1])), None, "a(x)"), d)
    out["multiplier"] = rel(quantize(sep, grid).apply(u).values, ax * u.values)
    if grid.size <= 64**2:
        naive = SymbolHandle(0.0, d, fx, label="a(x)")
        out["multiplier_rowwise"] = rel(quantize(naive, grid).apply(u).values, ax * u.values)
    k = np.zeros(d)
    k[0], k[-1] = 3.0 * 2 * np.pi / grid.period[0], -2.0 * 2 * np.pi / grid.period[-1]
    pw = Field(grid, np.exp(1j * (grid.coords @ k)))
    out["fourier_multiplier"] = rel(quantize(linear_xi_symbol(0, d), grid).apply(pw).values, k[0] * pw.values)
    out["tolerance"] = tol
    out["verdict"] = all(v <= tol for key, v in out.items() if key != "tolerance")
    return out
