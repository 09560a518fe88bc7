"""Anisotropic finite differences, moduli of smoothness and test functions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable

import numpy as np

from .planner import beta_exponent, intrinsic_smoothness

__all__ = [
    "SmoothnessProfile",
    "TestFunction",
    "SeminormEstimate",
    "finite_difference",
    "modulus",
    "seminorm_estimate",
    "test_function",
    "CATALOG",
]


@dataclass(frozen=True)
class SmoothnessProfile:
    """Anisotropic smoothness vector ``s`` with integrability ``p`` and ``q``."""

    s: tuple
    p: float = math.inf
    q: float = math.inf

    def __post_init__(self):
        s = tuple(float(v) for v in np.atleast_1d(self.s))
        if not s or any(not v > 0 for v in s):
            raise ValueError("all s_j must be positive")
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")
        object.__setattr__(self, "s", s)

    @property
    def d(self) -> int:
        return len(self.s)

    @property
    def r(self) -> int:
        """Difference order ``max floor(s_i) + 1``."""
        return int(max(math.floor(v) for v in self.s)) + 1

    @property
    def s_tilde(self) -> float:
        return intrinsic_smoothness(self.s)

    @property
    def omega(self) -> float:
        return max((0.0 if math.isinf(self.p) else 1 / self.p) - 0.5, 0.0)

    def beta(self) -> dict:
        return beta_exponent(self.s, self.p)


@dataclass(frozen=True)
class TestFunction:
    """Bounded target ``f0`` with its declared smoothness."""

    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    declared_profile: SmoothnessProfile
    name: str

    __test__ = False  # not a pytest class

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            if x.size == self.declared_profile.d:
                return float(self.evaluator(x[None, :])[0])
            x = x[:, None]
        return self.evaluator(x)


def _rows(x, d=None):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1), True
    if x.ndim == 1:
        if d is None or x.size == d:
            return x[None, :], True
        return x[:, None], False
    return x, False


def _eval(f, X):
    out = f(X)
    return np.broadcast_to(np.asarray(out, dtype=float), (X.shape[0],))


def finite_difference(f, r: int, h, x):
    """``sum_j C(r,j) (-1)^{r-j} f(x + j h)``, or 0 when ``x + r h`` leaves the cube.

    ``f`` maps an ``(n, d)`` array to ``n`` values.  ``x`` is a point or a
    batch of points.
    """
    if r < 1:
        raise ValueError("r must be at least 1")
    h = np.atleast_1d(np.asarray(h, dtype=float))
    X, single = _rows(x, h.size)
    end = X + r * h
    inside = np.all((end >= 0) & (end <= 1) & (X >= 0) & (X <= 1), axis=1)
    total = np.zeros(X.shape[0])
    for j in range(r + 1):
        total += math.comb(r, j) * (-1) ** (r - j) * _eval(f, np.clip(X + j * h, 0, 1))
    total = np.where(inside, total, 0.0)
    return float(total[0]) if single else total


def _grid(d: int, grid_n: int) -> np.ndarray:
    g = (np.arange(grid_n) + 0.5) / grid_n
    if d == 1:
        return g[:, None]
    return np.array(np.meshgrid(*([g] * d), indexing="ij")).reshape(d, -1).T


def _lp(v, p):
    v = np.abs(v)
    if math.isinf(p):
        return float(v.max())
    return float(np.mean(v**p) ** (1 / p))


def _directions(t, dir_n, rng):
    t = np.asarray(t, dtype=float)
    d = t.size
    dirs = [t.copy()]
    for i in range(d):
        e = np.zeros(d)
        e[i] = t[i]
        dirs += [e, -e]
    dirs.append(-t)
    while len(dirs) < dir_n:
        dirs.append(rng.uniform(-1, 1, d) * t)
    return np.array(dirs[: max(dir_n, 2 * d + 2)])


def modulus(f, r: int, p: float, t, grid_n: int = 200, dir_n: int = 16, rng=0,
            d: int | None = None) -> float:
    """Sampled anisotropic modulus of smoothness; a lower bound of the true sup.

    Directions include the full-radius corner, the axis extremes
    ``+-t_j e_j`` and uniform random ``h`` with ``|h_i| <= t_i``.  Norms use
    the tensor midpoint rule on ``grid_n`` points per axis.
    """
    if grid_n < 1 or dir_n < 1:
        raise ValueError("grid_n and dir_n must be positive")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    d = t.size if d is None else d
    t = np.broadcast_to(t, (d,))
    X = _grid(d, grid_n)
    best = 0.0
    for h in _directions(t, dir_n, np.random.default_rng(rng)):
        best = max(best, _lp(finite_difference(f, r, h, X), p))
    return best


@dataclass
class SeminormEstimate:
    value: float
    K_used: int
    terms: list
    tail_ratio: float

    def __float__(self) -> float:
        return self.value


def seminorm_estimate(f, profile: SmoothnessProfile, K_max: int = 16, grid_n: int = 200,
                      dir_n: int = 16, rng=0) -> SeminormEstimate:
    """Truncated anisotropic Besov seminorm over ``k = 0..K_max``."""
    if K_max < 1:
        raise ValueError("K_max must be at least 1")
    s = np.array(profile.s)
    terms = []
    for k in range(K_max + 1):
        t = 2.0 ** (-k / s)
        terms.append(2.0**k * modulus(f, profile.r, profile.p, t, grid_n, dir_n, rng))
    a = np.array(terms)
    if math.isinf(profile.q):
        val = float(a.max())
    else:
        val = float(np.sum(a**profile.q) ** (1 / profile.q))
    tail = float(a[-1] / a.max()) if a.max() > 0 else 0.0
    return SeminormEstimate(val, K_max, terms, tail)


def _lacunary(s: float, K: int = 24):
    c = 1 - 2.0 ** (-s)
    k = np.arange(K + 1)
    amp = c * 2.0 ** (-k * s)
    freq = np.pi * 2.0**k
    phase = 0.3 * k

    def g(x):
        return np.cos(np.multiply.outer(x, freq) + phase) @ amp

    return g


def _anisotropic_lacunary(s, K: int = 40):
    """``sum_k 2^{-k-1} cos(pi sum_i 2^{k/s_i} x_i + 0.3k)``: Zygmund order ``s_i`` along axis ``i``."""
    s = np.asarray(s, dtype=float)
    k = np.arange(K + 1)
    amp = 0.5 * 2.0 ** (-k)
    freq = np.pi * 2.0 ** (k[:, None] / s[None, :])
    phase = 0.3 * k

    def f(X):
        return np.cos(X @ freq.T + phase) @ amp

    return f


def _cusp(a: float):
    return lambda x: 1.0 - np.abs(2 * x - 1) ** a


def _smooth(s: float):
    return lambda x: np.sin(np.pi * x + 0.25) * np.cos(0.5 * np.pi * x)


def _product(factors):
    def f(X):
        out = np.ones(X.shape[0])
        for i, g in enumerate(factors):
            out = out * g(X[:, i])
        return out

    return f


def _additive(factors):
    def f(X):
        return sum(g(X[:, i]) for i, g in enumerate(factors)) / len(factors)

    return f


def _make(name: str, s: tuple) -> Callable:
    if name in ("anisotropic_lacunary", "smooth1"):
        return _anisotropic_lacunary(s)
    if name == "lacunary":
        return _product([_lacunary(v) for v in s])
    if name == "lacunary_additive":
        return _additive([_lacunary(v) for v in s])
    if name == "cusp":
        if any(v >= 1 for v in s):
            raise ValueError("cusp exponents must be below 1")
        return _product([_cusp(v) for v in s])
    if name == "cusp_additive":
        if any(v >= 1 for v in s):
            raise ValueError("cusp exponents must be below 1")
        return _additive([_cusp(v) for v in s])
    if name == "smooth":
        return _product([_smooth(v) for v in s])
    if name == "compositional":
        g1 = _lacunary(s[0])
        g2 = _lacunary(s[-1])
        return lambda X: g2(0.5 * (1.0 + g1(X[:, 0])))
    raise KeyError(name)


CATALOG = {
    "smooth1": ((2.0, 2.0), "anisotropic lacunary series with s = (2, 2), intrinsic smoothness 1"),
    "anisotropic_lacunary": ((4.0, 4.0 / 3.0), "lacunary series with frequencies 2^{k/s_i} per axis"),
    "lacunary": ((2.0, 2.0), "product of lacunary cosine series (dominating mixed smoothness)"),
    "lacunary_additive": ((2.0, 2.0), "average of lacunary cosine series"),
    "cusp": ((0.5, 0.5), "product of 1 - |2x-1|^a, smoothness a < 1"),
    "cusp_additive": ((0.5, 0.5), "average of cusps"),
    "smooth": ((1.0, 1.0), "analytic trigonometric product, bounded by 1, any declared s >= 1"),
    "compositional": ((2.0, 3.0), "g_3((1 + g_2(x_1))/2) with lacunary g_s"),
}


def test_function(name: str, s_profile=None, p: float = math.inf, q: float = math.inf
                  ) -> TestFunction:
    """Catalog target with values in ``[-1, 1]``.

    ``s_profile`` is a smoothness vector (or a :class:`SmoothnessProfile`);
    its length sets the input dimension.  Defaults come from :data:`CATALOG`.
    """
    if name not in CATALOG:
        raise KeyError(f"unknown test function {name!r}; choose from {sorted(CATALOG)}")
    if isinstance(s_profile, SmoothnessProfile):
        prof = s_profile
    else:
        s = CATALOG[name][0] if s_profile is None else tuple(np.atleast_1d(s_profile))
        prof = SmoothnessProfile(s, p, q)
    if name == "compositional":
        if prof.d != 2:
            raise ValueError("compositional target expects the pair (s1, s2)")
        ev = _make(name, prof.s)
        # the composition reads only the first coordinate of a 1-d input
        return TestFunction(ev, SmoothnessProfile((prof.s[0],), prof.p, prof.q), name)
    return TestFunction(_make(name, prof.s), prof, name)
