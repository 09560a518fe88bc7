"""Constructive approximation of anisotropic Besov targets by KAN_c networks.

Pipeline: tensor cardinal-spline terms ``alpha * prod_i psi_m(2^{a_i} x_i - j_i)``
with ``a_i = floor(k / s_i)`` are selected greedily from a multilevel
projection of ``f0``, then realized exactly by a network whose layers are

* layer 0: affine edges ``x_i -> 2^{a_i} x_i - j_i``,
* layer 1: ``psi_m`` represented on the spacing-1/2 hidden grid,
* middle layers: a binary product tree built from squaring edges,
* last layer: the linear combination with coefficients ``alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .besov import SmoothnessProfile
from .bspline import (
    KnotVector,
    SplineCurve,
    eval_basis,
    eval_spline,
    greville_abscissae,
    greville_affine,
    local_basis,
    localize,
    polynomial_coeffs,
)
from .kan import KanSpec, ParamVector, forward
from .planner import beta_exponent, safe_ceil

__all__ = [
    "TensorTerm",
    "Fragment",
    "KancRealization",
    "L2Estimate",
    "RangeError",
    "cardinal_spline",
    "hidden_knots",
    "identity_edge",
    "square_edge",
    "psi_edge",
    "product_pair",
    "product_module",
    "tensor_eval",
    "select_terms",
    "candidate_terms",
    "resolution_levels",
    "assemble",
    "build_approximator",
    "l2_error",
]


class RangeError(ValueError):
    """An intermediate value leaves the exact range of the hidden grid."""


@dataclass(frozen=True)
class TensorTerm:
    k: int
    j: tuple
    alpha: float

    def scales(self, s) -> tuple:
        return tuple(int(math.floor(self.k / si + 1e-12)) for si in s)


def cardinal_spline(m: int, z):
    """Cardinal B-spline ``psi_m`` of degree ``m`` supported on ``[0, m+1]``."""
    z = np.asarray(z, dtype=float)
    i = np.floor(z)
    valid = (z >= 0) & (z < m + 1)
    ii = np.where(valid, i, 0).astype(np.int64)
    f = np.where(valid, z - ii, 0.0)
    N = local_basis(f, m)
    out = np.take_along_axis(N, (m - ii)[..., None], axis=-1)[..., 0]
    out = np.where(valid, out, 0.0)
    return out if out.ndim else float(out)


def hidden_knots(H: int, m: int) -> KnotVector:
    """Hidden knot vector on ``[-H, H]`` with ``G = 4H - 2m`` (spacing 1/2)."""
    from .bspline import make_uniform_knots

    if int(H) != H:
        raise ValueError("H must be an integer for the spacing-1/2 grid")
    return make_uniform_knots(-H, H, 4 * int(H) - 2 * m, m)


def identity_edge(knots: KnotVector, lo: float, hi: float) -> np.ndarray:
    _require(knots, lo, hi)
    return localize(greville_affine(1.0, 0.0, knots), lo, hi).coeffs


def square_edge(knots: KnotVector, lo: float | None = None, hi: float | None = None
                ) -> SplineCurve:
    """Exact ``u -> u^2`` on ``[lo, hi]`` (whole estimation interval by default)."""
    if knots.m < 2:
        raise ValueError("squaring edges need m >= 2")
    curve = polynomial_coeffs(2, knots)
    if lo is None:
        return curve
    _require(knots, lo, hi)
    return localize(curve, lo, hi)


def _require(knots: KnotVector, lo: float, hi: float) -> None:
    x0, xG = knots.interval
    if lo < x0 - 1e-12 or hi > xG + 1e-12:
        raise RangeError(
            f"range [{lo:.4g}, {hi:.4g}] leaves the estimation interval "
            f"[{x0:.4g}, {xG:.4g}]; a larger H is required"
        )


def psi_edge(knots: KnotVector) -> np.ndarray:
    """Coefficients of ``psi_m`` on the spacing-1/2 hidden grid, exact on all reals."""
    m = knots.m
    t = knots.knots
    if abs(knots.spacing - 0.5) > 1e-12:
        raise ValueError("psi_edge needs hidden spacing 1/2")
    b = np.arange(knots.n_basis)
    inside = (t[b] >= -1e-12) & (t[b + m + 1] <= m + 1 + 1e-12)
    if inside.sum() != m + 2 or t[0] > 1e-12 or t[-1] < m + 1 - 1e-12:
        raise RangeError(f"hidden grid must contain [0, {m + 1}]; a larger H is required")
    idx = np.flatnonzero(inside)
    gre = greville_abscissae(knots)[idx]
    A = eval_basis(knots, gre)[:, idx]
    c = np.zeros(knots.n_basis)
    c[idx] = np.linalg.solve(A, cardinal_spline(m, gre))
    z = np.linspace(-1.0, m + 2.0, 20 * (m + 3) + 1)
    err = np.max(np.abs(eval_spline(SplineCurve(knots, c), z) - cardinal_spline(m, z)))
    if err > 1e-10:
        raise ArithmeticError(f"psi realization error {err:.3e}")
    return c


@dataclass
class Fragment:
    """Small KAN_c block on a shared hidden knot vector.

    ``layers[l]`` lists edges ``(out, in, spline_coeffs)``; ``widths[l]`` is
    the width entering layer ``l`` and ``widths[-1]`` the output width.
    """

    widths: list
    layers: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def __call__(self, inputs, knots: KnotVector) -> np.ndarray:
        z = np.atleast_2d(np.asarray(inputs, dtype=float))
        for l, edges in enumerate(self.layers):
            out = np.zeros((z.shape[0], self.widths[l + 1]))
            for i, j, c in edges:
                out[:, i] += eval_spline(SplineCurve(knots, c), z[:, j])
            z = out
        return z


def product_pair(knots: KnotVector, lo: float = -1.0, hi: float = 1.0) -> Fragment:
    """Two-layer gadget for ``xy = ((x+y)^2 - x^2 - y^2) / 2`` on ``[lo, hi]^2``."""
    sq_sum = 0.5 * square_edge(knots, 2 * lo, 2 * hi).coeffs
    sq = 0.5 * square_edge(knots, lo, hi).coeffs
    idn = identity_edge(knots, lo, hi)
    layer_a = [(0, 0, idn), (0, 1, idn), (1, 0, idn), (2, 1, idn)]
    layer_b = [(0, 0, sq_sum), (0, 1, -sq), (0, 2, -sq)]
    return Fragment([2, 3, 1], [layer_a, layer_b])


def product_module(fan_in: int, knots: KnotVector) -> Fragment:
    """Binary product tree of depth ``2 ceil(log2 fan_in)`` for inputs in ``[0, 1]``."""
    if fan_in < 1:
        raise ValueError("fan_in must be at least 1")
    widths = [fan_in]
    layers = []
    n = fan_in
    if n == 1:
        return Fragment(widths, layers)
    sq_sum = 0.5 * square_edge(knots, 0.0, 2.0).coeffs
    sq = 0.5 * square_edge(knots, 0.0, 1.0).coeffs
    idn = identity_edge(knots, 0.0, 1.0)
    while n > 1:
        pairs, odd = n // 2, n % 2
        la, lb = [], []
        for p in range(pairs):
            x, y = 2 * p, 2 * p + 1
            la += [(3 * p, x, idn), (3 * p, y, idn), (3 * p + 1, x, idn), (3 * p + 2, y, idn)]
            lb += [(p, 3 * p, sq_sum), (p, 3 * p + 1, -sq), (p, 3 * p + 2, -sq)]
        if odd:
            la.append((3 * pairs, n - 1, idn))
            lb.append((pairs, 3 * pairs, idn))
        layers += [la, lb]
        widths += [3 * pairs + odd, pairs + odd]
        n = pairs + odd
    return Fragment(widths, layers)


def tensor_eval(terms: Sequence[TensorTerm], X, s, m: int) -> np.ndarray:
    """Direct evaluation of ``sum alpha prod_i psi_m(2^{a_i} x_i - j_i)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(X.shape[0])
    for t in terms:
        v = np.full(X.shape[0], t.alpha)
        for i, a in enumerate(t.scales(s)):
            v *= cardinal_spline(m, 2.0**a * X[:, i] - t.j[i])
        out += v
    return out


def _two_scale(a: int, m: int) -> np.ndarray:
    """Refinement matrix from scale ``a`` to ``a+1`` on the unit interval."""
    nc, nf = 2**a + m, 2 ** (a + 1) + m
    R = np.zeros((nf, nc))
    w = np.array([math.comb(m + 1, r) for r in range(m + 2)]) * 2.0 ** (-m)
    for jc in range(-m, 2**a):
        for r in range(m + 2):
            jf = 2 * jc + r
            if -m <= jf < 2 ** (a + 1):
                R[jf + m, jc + m] = w[r]
    return R


def _refine(a_from: int, a_to: int, m: int) -> np.ndarray:
    R = np.eye(2**a_from + m)
    for a in range(a_from, a_to):
        R = _two_scale(a, m) @ R
    return R


def _projector(a: int, m: int, oversample: int):
    """Discrete least-squares projector onto scale-``a`` splines on [0, 1]."""
    q = oversample * (m + 1)
    gx, gw = np.polynomial.legendre.leggauss(q)
    h = 2.0**-a
    cells = np.arange(2**a) * h
    x = (cells[:, None] + (gx[None, :] + 1) * h / 2).ravel()
    w = np.tile(gw * h / 2, 2**a)
    j = np.arange(-m, 2**a)
    A = cardinal_spline(m, 2.0**a * x[:, None] - j[None, :])
    gram = A.T @ (A * w[:, None])
    P = np.linalg.solve(gram, (A * w[:, None]).T)
    return x, P


def _mode_apply(F: np.ndarray, mats: list) -> np.ndarray:
    for axis, M in enumerate(mats):
        F = np.moveaxis(np.tensordot(M, F, axes=([1], [axis])), 0, axis)
    return F


def resolution_levels(profile: SmoothnessProfile, N: int) -> list:
    """``(k, a)`` for ``k = 0..ceil((1+kappa) log2 N)``, first ``k`` of each distinct scale ``a``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    kappa = beta_exponent(profile.s, profile.p)["kappa"]
    K = safe_ceil((1 + kappa) * math.log2(N)) if N > 1 else 0
    levels = []
    for k in range(K + 1):
        a = tuple(int(math.floor(k / si + 1e-12)) for si in profile.s)
        if not levels or levels[-1][1] != a:
            levels.append((k, a))
    return levels


def candidate_terms(profile: SmoothnessProfile, N: int, m: int) -> list:
    """Every tensor term ``M_{k,j}`` touching the unit cube, unit coefficients."""
    out = []
    for k, a in resolution_levels(profile, N):
        ranges = [range(-m, 2**ai) for ai in a]
        for j in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(len(a), -1).T:
            out.append(TensorTerm(k, tuple(int(v) for v in j), 1.0))
    return out


def select_terms(f0: Callable, profile: SmoothnessProfile, N: int, m: int,
                 oversample: int = 2, return_all: bool = False):
    """Greedy ``N``-term selection from a multilevel tensor projection of ``f0``.

    Levels ``k = 0..ceil((1+kappa) log2 N)`` use scales ``a_i = floor(k/s_i)``.
    Each distinct scale vector gets the tensor least-squares projection of
    ``f0``; its detail is the difference with the previous level's
    projection refined to the same scale.  The ``N`` details of largest
    ``|alpha| prod_i 2^{-a_i/2}`` are kept.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    levels = resolution_levels(profile, N)
    cache = {}
    cand_k, cand_j, cand_alpha, cand_w = [], [], [], []
    prev = None
    for k, a in levels:
        pts, projs = zip(*[cache.setdefault((ai, m), _projector(ai, m, oversample)) for ai in a])
        grids = np.meshgrid(*pts, indexing="ij")
        F = np.asarray(f0(np.stack([g.ravel() for g in grids], axis=1)), dtype=float)
        C = _mode_apply(F.reshape([p.size for p in pts]), list(projs))
        if prev is None:
            detail = C
        else:
            a_prev, C_prev = prev
            detail = C - _mode_apply(C_prev, [_refine(ap, ai, m) for ap, ai in zip(a_prev, a)])
        prev = (a, C)
        weight = 2.0 ** (-0.5 * np.sum(a))
        idx = np.argwhere(np.ones(detail.shape, dtype=bool))
        cand_k.append(np.full(len(idx), k))
        cand_j.append(idx - m)
        cand_alpha.append(detail.ravel())
        cand_w.append(np.abs(detail.ravel()) * weight)
    ks = np.concatenate(cand_k)
    js = np.concatenate(cand_j)
    al = np.concatenate(cand_alpha)
    wt = np.concatenate(cand_w)
    order = np.lexsort((np.arange(wt.size), -wt))
    keep = order[: min(N, wt.size)]
    keep = keep[al[keep] != 0] if np.any(al[keep] != 0) else keep[:0]
    terms = [TensorTerm(int(ks[t]), tuple(int(v) for v in js[t]), float(al[t])) for t in keep]
    if return_all:
        allt = [TensorTerm(int(ks[t]), tuple(int(v) for v in js[t]), float(al[t]))
                for t in range(wt.size)]
        return terms, allt
    return terms


@dataclass
class KancRealization:
    spec: KanSpec
    theta: ParamVector
    term_count: int
    terms: list
    N: int
    beta: float
    certificates: dict

    def __call__(self, X) -> np.ndarray:
        return forward(self.theta, X)


def _affine_layer_range(term: TensorTerm, s) -> list:
    return [(-j, 2.0**a - j) for a, j in zip(term.scales(s), term.j)]


def assemble(terms: Sequence[TensorTerm], profile: SmoothnessProfile, m: int,
             N: int | None = None, S_0: float | None = None, B_0: float | None = None,
             H: int | None = None, G0: int | None = None, a0: float = -1.0,
             b0: float = 2.0) -> KancRealization:
    """Realize ``sum alpha M_{k,j}`` exactly as a KAN_c parameter vector.

    Width ``D = 2dN`` with ``N = max(N, len(terms))``; hidden half-range
    ``H = max(ceil(2 B_0 N^beta), m+1)`` unless given.  Certificates report the empirical
    ``S_0 = nnz/N`` and ``B_0 = sup/N^beta``; they are asserted only for the
    constants that are passed.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("terms must be nonempty")
    s = profile.s
    d = len(s)
    N = max(len(terms), N or 0)
    beta = beta_exponent(s, profile.p)["beta"]
    if H is None:
        # psi_m needs its whole support [0, m+1] inside the hidden grid
        H = max(safe_ceil(2 * (1.0 if B_0 is None else B_0) * N**beta), m + 1)
    H = int(H)
    G0 = 3 * m if G0 is None else G0
    L0 = 3 + 2 * math.ceil(math.log2(d)) if d > 1 else 3
    D = 2 * d * N
    spec = KanSpec(L0, d, D, G0, 4 * H - 2 * m, H, m, a0, b0)
    hk = spec.knots(1)
    k0 = spec.knots(0)
    psi = psi_edge(hk)
    tree = product_module(d, hk)
    final_id = identity_edge(hk, 0.0, 1.0)
    affine = {}
    entries_idx, entries_val = [], []

    def put(l, i, j, coeffs):
        nz = np.flatnonzero(coeffs)
        base = spec.flat_index(l, i, j, 1)
        entries_idx.append(base + nz)
        entries_val.append(coeffs[nz])

    for t, term in enumerate(terms):
        for (lo, hi) in _affine_layer_range(term, s):
            if lo < -H or hi > H:
                raise RangeError(f"term {term} maps [0,1] to [{lo}, {hi}] outside [-{H}, {H}]")
        base = 2 * d * t
        for i, (a, j) in enumerate(zip(term.scales(s), term.j)):
            key = (a, j)
            if key not in affine:
                affine[key] = localize(greville_affine(2.0**a, -float(j), k0), 0.0, 1.0).coeffs
            put(0, base + i, i, affine[key])
            put(1, base + i, base + i, psi)
        for depth, edges in enumerate(tree.layers):
            for (o, i, c) in edges:
                put(2 + depth, base + o, base + i, c)
        put(L0 - 1, 0, base, term.alpha * final_id)
    theta = ParamVector(spec, np.concatenate(entries_idx), np.concatenate(entries_val))
    nnz = theta.nnz
    sup = theta.sup_norm()
    cert = {
        "nnz": nnz,
        "sup": sup,
        "S0_empirical": nnz / N,
        "B0_empirical": sup / N**beta,
        "silu_zero": True,
        "H": H,
    }
    if S_0 is not None and nnz > S_0 * N:
        raise AssertionError(f"sparsity certificate failed: {nnz} > {S_0} * {N}")
    if B_0 is not None and sup > B_0 * N**beta * (1 + 1e-12):
        raise AssertionError(f"magnitude certificate failed: {sup:.4g} > {B_0} * N^beta")
    return KancRealization(spec, theta, len(terms), terms, N, beta, cert)


def build_approximator(f0: Callable, profile: SmoothnessProfile, N: int, m: int,
                       **kwargs) -> KancRealization:
    """Select terms and assemble; on a range rejection double ``H`` once and retry."""
    terms = select_terms(f0, profile, N, m)
    if not terms:
        terms = [TensorTerm(0, (0,) * profile.d, 0.0)]
    try:
        return assemble(terms, profile, m, N=N, **kwargs)
    except RangeError:
        beta = beta_exponent(profile.s, profile.p)["beta"]
        H = kwargs.pop("H", None) or max(safe_ceil(2 * (kwargs.get("B_0") or 1.0) * N**beta), m + 1)
        return assemble(terms, profile, m, N=N, H=2 * H, **kwargs)


@dataclass
class L2Estimate:
    value: float
    se: float

    def __float__(self) -> float:
        return self.value


def l2_error(f0: Callable, realization, mc_n: int = 20000, rng=None, d: int | None = None
             ) -> L2Estimate:
    """Monte Carlo ``||f0 - f*||_{L^2}`` under the uniform design, with a delta-method SE."""
    if mc_n < 1:
        raise ValueError("mc_n must be at least 1")
    rng = np.random.default_rng(rng)
    if d is None:
        d = realization.spec.d
    X = rng.uniform(0.0, 1.0, (mc_n, d))
    sq = (np.asarray(f0(X), dtype=float) - np.asarray(realization(X), dtype=float)) ** 2
    msq = float(sq.mean())
    val = math.sqrt(msq)
    sd = float(sq.std(ddof=1)) if mc_n > 1 else 0.0
    se = sd / (2 * val * math.sqrt(mc_n)) if val > 0 else sd / math.sqrt(mc_n)
    return L2Estimate(val, se)
