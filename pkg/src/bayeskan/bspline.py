"""Fixed-knot B-spline bases on equally spaced knot grids.

Knot convention: a grid with ``G`` intervals of degree ``m`` has ``G + 2m + 1``
knots ``t_0 < ... < t_{G+2m}`` with ``t_0 = a`` and ``t_{G+2m} = b``.  Basis
function ``b`` (0-based) is supported on ``[t_b, t_{b+m+1}]`` and the
estimation interval, where the basis is a partition of unity, is
``[t_m, t_{G+m}]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import math

import numpy as np

__all__ = [
    "KnotVector",
    "SplineCurve",
    "make_uniform_knots",
    "local_basis",
    "eval_basis",
    "eval_spline",
    "derivative_curve",
    "greville_abscissae",
    "greville_affine",
    "polynomial_coeffs",
    "localize",
]


@dataclass(frozen=True)
class KnotVector:
    """Uniform extended knot grid for one KAN layer."""

    a: float
    b: float
    G: int
    m: int
    knots: np.ndarray = field(repr=False, compare=False)

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        if k.shape != (self.G + 2 * self.m + 1,):
            raise ValueError("knot vector must have G+2m+1 entries")
        if not np.all(np.diff(k) > 0):
            raise ValueError("knots must be strictly increasing")
        k.setflags(write=False)
        object.__setattr__(self, "knots", k)

    @property
    def spacing(self) -> float:
        return (self.b - self.a) / (self.G + 2 * self.m)

    @property
    def n_basis(self) -> int:
        return self.G + self.m

    @property
    def xi0(self) -> float:
        """Left end of the estimation interval."""
        return float(self.knots[self.m])

    @property
    def xiG(self) -> float:
        """Right end of the estimation interval."""
        return float(self.knots[self.G + self.m])

    @property
    def interval(self) -> tuple[float, float]:
        return self.xi0, self.xiG

    def support(self, b: int) -> tuple[float, float]:
        """Support of 0-based basis function ``b``."""
        return float(self.knots[b]), float(self.knots[b + self.m + 1])


@dataclass(frozen=True)
class SplineCurve:
    """Spline curve ``sum_b w_b B_b`` on a knot vector."""

    knots: KnotVector
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.knots.n_basis,):
            raise ValueError(
                f"expected {self.knots.n_basis} coefficients, got {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __call__(self, x):
        return eval_spline(self, x)


def make_uniform_knots(a: float, b: float, G: int, m: int) -> KnotVector:
    """Equally spaced knots ``a = t_0 < ... < t_{G+2m} = b``."""
    if not a < b:
        raise ValueError("need a < b")
    if int(G) != G or G < 1:
        raise ValueError("G must be a positive integer")
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    G, m = int(G), int(m)
    n = G + 2 * m
    knots = a + (b - a) * np.arange(n + 1) / n
    knots[-1] = b
    return KnotVector(float(a), float(b), G, m, knots)


def local_basis(f, m: int) -> np.ndarray:
    """Nonzero basis values on a unit cell.

    For a uniform grid with unit spacing and local coordinate ``f`` in
    ``[0, 1)`` of cell ``[t_j, t_{j+1})``, returns the values of
    ``B_{j-m}, ..., B_j`` as an array of shape ``f.shape + (m+1,)``.  This is
    the triangular Cox-de Boor recursion with ``left_r = f + r - 1`` and
    ``right_r = r - f``.
    """
    f = np.asarray(f, dtype=float)
    N = np.zeros(f.shape + (m + 1,))
    N[..., 0] = 1.0
    left = [None] + [f + r - 1.0 for r in range(1, m + 1)]
    right = [None] + [r - f for r in range(1, m + 1)]
    for j in range(1, m + 1):
        saved = np.zeros_like(f)
        for r in range(j):
            den = right[r + 1] + left[j - r]
            # 0/0 := 0, guarded although unreachable on distinct knots
            temp = np.divide(N[..., r], den, out=np.zeros_like(f), where=den != 0)
            N[..., r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        N[..., j] = saved
    return N


def _cell(knots: KnotVector, x):
    """Cell index, local coordinate and validity mask for points ``x``."""
    x = np.asarray(x, dtype=float)
    u = (x - knots.a) / knots.spacing
    n_cells = knots.G + 2 * knots.m
    span = np.floor(u)
    # right-closed convention at the end of the estimation interval
    span = np.where(x == knots.xiG, knots.G + knots.m - 1, span)
    valid = (u >= 0) & (span < n_cells) & np.isfinite(u)
    span = np.where(valid, span, 0).astype(np.int64)
    f = np.clip(np.where(valid, u - span, 0.0), 0.0, 1.0)
    return span, f, valid


def eval_basis(knots: KnotVector, x) -> np.ndarray:
    """All ``G+m`` basis values at ``x``; shape ``x.shape + (G+m,)``."""
    x = np.asarray(x, dtype=float)
    m = knots.m
    nb = knots.n_basis
    span, f, valid = _cell(knots, x)
    loc = local_basis(f, m) * valid[..., None]
    out = np.zeros(x.shape + (nb + 2 * m,))
    # column c of out holds basis index c - m
    idx = span[..., None] + np.arange(m + 1)
    np.put_along_axis(out, idx.reshape(x.shape + (m + 1,)), loc, axis=-1)
    return out[..., m : m + nb]


def eval_spline(curve: SplineCurve, x) -> np.ndarray:
    """Evaluate ``sum_b w_b B_b(x)`` using only the ``m+1`` local terms."""
    x = np.asarray(x, dtype=float)
    kn = curve.knots
    m = kn.m
    span, f, valid = _cell(kn, x)
    loc = local_basis(f, m)
    idx = span[..., None] - m + np.arange(m + 1)
    ok = (idx >= 0) & (idx < kn.n_basis) & valid[..., None]
    w = np.where(ok, curve.coeffs[np.clip(idx, 0, kn.n_basis - 1)], 0.0)
    return np.sum(w * loc, axis=-1)


def derivative_curve(curve: SplineCurve) -> SplineCurve:
    """Derivative of a spline curve as a degree ``m-1`` curve.

    Uses ``w'_b = (w_{b+1} - w_b) / Delta`` on the knot vector with its two
    end knots removed, which leaves the estimation interval unchanged.
    """
    kn = curve.knots
    if kn.m < 2:
        raise ValueError("derivative_curve requires m >= 2")
    inner = KnotVector(
        float(kn.knots[1]), float(kn.knots[-2]), kn.G, kn.m - 1, kn.knots[1:-1].copy()
    )
    return SplineCurve(inner, np.diff(curve.coeffs) / kn.spacing)


def greville_abscissae(knots: KnotVector) -> np.ndarray:
    """Averages of the ``m`` interior knots of each basis support."""
    m = knots.m
    t = knots.knots
    return np.array([t[b + 1 : b + m + 1].mean() for b in range(knots.n_basis)])


def greville_affine(slope: float, intercept: float, knots: KnotVector) -> SplineCurve:
    """Exact representation of ``x -> slope*x + intercept`` on the estimation interval."""
    return SplineCurve(knots, slope * greville_abscissae(knots) + intercept)


def polynomial_coeffs(degree_target: int, knots: KnotVector) -> SplineCurve:
    """Exact coefficients of ``x**degree_target`` on ``[xi_0, xi_G]``.

    Marsden's identity: the coefficient of basis ``b`` is the polar form of
    the monomial at the interior knots ``t_{b+1}, ..., t_{b+m}``, i.e. the
    elementary symmetric polynomial ``e_p`` of those knots over ``C(m, p)``.
    """
    m = knots.m
    if degree_target < 0 or degree_target > m:
        raise ValueError("degree_target must lie in 0..m")
    t = knots.knots
    inner = np.stack([t[1 + r : 1 + r + knots.n_basis] for r in range(m)], axis=1)
    # e_p via the product expansion prod_r (1 + t_r z)
    e = np.zeros((knots.n_basis, m + 1))
    e[:, 0] = 1.0
    for r in range(m):
        e[:, 1:] = e[:, 1:] + inner[:, r : r + 1] * e[:, :-1]
    c = e[:, degree_target] / math.comb(m, degree_target)
    curve = SplineCurve(knots, c)
    lo, hi = knots.interval
    check = np.linspace(lo, hi, 4 * knots.n_basis + 1)
    err = np.max(np.abs(eval_spline(curve, check) - check**degree_target))
    scale = max(1.0, np.max(np.abs(check)) ** degree_target)
    if err > 1e-10 * scale:
        raise ArithmeticError(f"monomial reproduction failed, error {err:.3e}")
    return curve


def localize(curve: SplineCurve, lo: float, hi: float) -> SplineCurve:
    """Zero every coefficient whose basis support misses ``[lo, hi]``.

    The result agrees with ``curve`` on ``[lo, hi]``.
    """
    kn = curve.knots
    t = kn.knots
    b = np.arange(kn.n_basis)
    keep = (t[b + kn.m + 1] > lo) & (t[b] < hi)
    return SplineCurve(kn, np.where(keep, curve.coeffs, 0.0))
