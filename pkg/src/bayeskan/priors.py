"""Spike-and-slab priors over KAN coefficients and their condition checkers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

__all__ = [
    "SlabSpec",
    "FixedCardinality",
    "Bernoulli",
    "Adaptive",
    "Sigma2Prior",
    "PriorSpec",
    "slab_log_density",
    "slab_density",
    "slab_cdf",
    "slab_tail",
    "slab_sample",
    "natural_tail_constants",
    "log_prior",
    "log_prior_active",
    "CheckReport",
    "sample_prior",
    "adaptive_log_normalizer",
    "check_B1",
    "check_B2",
    "check_C",
]

FAMILIES = ("uniform", "gaussian", "laplace", "subweibull")


@dataclass(frozen=True)
class SlabSpec:
    """Slab density family with scale ``tau`` and sub-Weibull shape ``alpha``."""

    family: str
    tau: float
    alpha: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown slab family {self.family!r}")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        alpha = self.alpha
        if alpha is None:
            alpha = {"gaussian": 2.0, "laplace": 1.0, "subweibull": 1.0, "uniform": 1.0}[
                self.family
            ]
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        if self.family == "gaussian" and alpha != 2.0:
            raise ValueError("gaussian slab has alpha = 2")
        if self.family == "laplace" and alpha != 1.0:
            raise ValueError("laplace slab has alpha = 1")
        object.__setattr__(self, "alpha", float(alpha))

    def to_dict(self) -> dict:
        return {"family": self.family, "tau": self.tau, "alpha": self.alpha}


def slab_log_density(slab: SlabSpec, u):
    u = np.abs(np.asarray(u, dtype=float))
    t = slab.tau
    f = slab.family
    if f == "uniform":
        out = np.where(u <= t, -math.log(2 * t), -np.inf)
    elif f == "gaussian":
        out = -0.5 * (u / t) ** 2 - math.log(math.sqrt(2 * math.pi) * t)
    elif f == "laplace":
        out = -u / t - math.log(2 * t)
    else:
        a = slab.alpha
        out = -((u / t) ** a) - math.log(2 * t) - special.gammaln(1 + 1 / a)
    return out if np.ndim(out) else float(out)


def slab_density(slab: SlabSpec, u):
    return np.exp(slab_log_density(slab, u))


def slab_tail(slab: SlabSpec, t):
    """``P(|U| > t)`` under the slab."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    v = t / slab.tau
    f = slab.family
    if f == "uniform":
        out = np.maximum(0.0, 1.0 - v)
    elif f == "gaussian":
        out = special.erfc(v / math.sqrt(2))
    elif f == "laplace":
        out = np.exp(-v)
    else:
        a = slab.alpha
        out = special.gammaincc(1 / a, v**a)
    return out if np.ndim(out) else float(out)


def slab_cdf(slab: SlabSpec, u):
    u = np.asarray(u, dtype=float)
    half = 0.5 * slab_tail(slab, np.abs(u))
    return np.where(u >= 0, 1.0 - half, half)


def slab_sample(slab: SlabSpec, size, rng: np.random.Generator) -> np.ndarray:
    t = slab.tau
    f = slab.family
    if f == "uniform":
        return rng.uniform(-t, t, size)
    if f == "gaussian":
        return rng.normal(0.0, t, size)
    if f == "laplace":
        return rng.laplace(0.0, t, size)
    a = slab.alpha
    mag = t * rng.gamma(1 / a, 1.0, size) ** (1 / a)
    return np.where(rng.random(size) < 0.5, -mag, mag)


@dataclass(frozen=True)
class FixedCardinality:
    S: int

    def __post_init__(self):
        if int(self.S) != self.S or self.S < 0:
            raise ValueError("S must be a nonnegative integer")


@dataclass(frozen=True)
class Bernoulli:
    rho: float

    def __post_init__(self):
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")


@dataclass(frozen=True)
class Adaptive:
    """Adaptive prior over model size ``N``; ``T_of_N`` maps N to the parameter count."""

    lambda_N: float
    B_ad: float
    beta_ad: float
    S_0: float
    T_of_N: Callable[[int], int] | None = field(default=None, compare=False)

    def S_of_N(self, N: int) -> int:
        return int(math.ceil(self.S_0 * N - 1e-9))


@dataclass(frozen=True)
class Sigma2Prior:
    """Prior on ``sigma^2`` supported on ``[lo, hi]``; uniform unless a density is given."""

    lo: float
    hi: float
    density: Callable[[float], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError("need 0 < sigma_min^2 < sigma_max^2")

    def log_density(self, s2: float) -> float:
        if not self.lo <= s2 <= self.hi:
            return -math.inf
        if self.density is None:
            return -math.log(self.hi - self.lo)
        v = float(self.density(s2))
        return math.log(v) if v > 0 else -math.inf

    def sample(self, rng: np.random.Generator) -> float:
        if self.density is None:
            return float(rng.uniform(self.lo, self.hi))
        grid = np.linspace(self.lo, self.hi, 2001)
        top = 1.05 * max(float(self.density(g)) for g in grid)
        while True:
            x = rng.uniform(self.lo, self.hi)
            if rng.random() * top <= self.density(x):
                return float(x)


@dataclass(frozen=True)
class PriorSpec:
    slab: SlabSpec
    sparsity: FixedCardinality | Bernoulli | Adaptive
    sigma2: Sigma2Prior = Sigma2Prior(0.05**2, 1.0)

    def to_dict(self) -> dict:
        sp = self.sparsity
        if isinstance(sp, FixedCardinality):
            spd = {"mode": "fixed", "S": sp.S}
        elif isinstance(sp, Bernoulli):
            spd = {"mode": "bernoulli", "rho": sp.rho}
        else:
            spd = {"mode": "adaptive", "lambda_N": sp.lambda_N, "B_ad": sp.B_ad,
                   "beta_ad": sp.beta_ad, "S_0": sp.S_0}
        return {"slab": self.slab.to_dict(), "sparsity": spd,
                "sigma2_support": [self.sigma2.lo, self.sigma2.hi]}


def adaptive_log_normalizer(lambda_N: float, tol: float = 1e-12) -> tuple[float, int]:
    """``log sum_{N>=1} exp(-lambda N log N)`` and the stopping index."""
    if not lambda_N > 0:
        raise ValueError("lambda_N must be positive")
    total = 0.0
    N = 1
    while True:
        term = math.exp(-lambda_N * N * math.log(N))
        total += term
        # remaining terms are bounded by a geometric tail once ratios fall below 1/2
        nxt = math.exp(-lambda_N * (N + 1) * math.log(N + 1))
        ratio = nxt / term if term > 0 else 0.0
        if ratio < 0.5 and nxt / (1 - ratio) < tol * total:
            return math.log(total), N
        N += 1


def _active_values(theta, gamma, T):
    theta = np.asarray(theta, dtype=float)
    gamma = np.asarray(gamma, dtype=bool)
    if theta.shape != (T,) or gamma.shape != (T,):
        raise ValueError("theta and gamma must have length T")
    if np.any(theta[~gamma] != 0):
        raise ValueError("theta must vanish off the mask")
    return theta[gamma]


def log_prior(theta, gamma, sigma2: float, prior: PriorSpec, T: int, N: int | None = None) -> float:
    """Joint log prior density of ``(theta, gamma, sigma^2)``."""
    vals = _active_values(theta, gamma, T)
    return log_prior_active(vals, sigma2, prior, T, N)


def log_prior_active(vals, sigma2: float, prior: PriorSpec, T: int, N: int | None = None) -> float:
    """Same as :func:`log_prior` given only the active values."""
    vals = np.asarray(vals, dtype=float)
    k = vals.size
    ls = prior.sigma2.log_density(sigma2)
    if ls == -math.inf:
        return -math.inf
    slab = float(np.sum(slab_log_density(prior.slab, vals))) if k else 0.0
    sp = prior.sparsity
    if isinstance(sp, FixedCardinality):
        if k != sp.S:
            return -math.inf
        lg = -_log_comb(T, sp.S)
    elif isinstance(sp, Bernoulli):
        lg = k * math.log(sp.rho) + (T - k) * math.log1p(-sp.rho)
    else:
        if N is None:
            raise ValueError("adaptive prior requires the model size N")
        if k != sp.S_of_N(N):
            return -math.inf
        logZ, _ = adaptive_log_normalizer(sp.lambda_N)
        lg = -sp.lambda_N * N * math.log(N) - logZ - _log_comb(T, k)
    return lg + slab + ls


def _log_comb(T: int, S: int) -> float:
    if S < 0 or S > T:
        return math.inf
    return math.lgamma(T + 1) - math.lgamma(S + 1) - math.lgamma(T - S + 1)


def sample_prior(prior: PriorSpec, T: int, rng: np.random.Generator):
    """Draw ``(theta, gamma, sigma2)``; ``theta`` and ``gamma`` are dense."""
    sp = prior.sparsity
    gamma = np.zeros(T, dtype=bool)
    if isinstance(sp, FixedCardinality):
        if sp.S > T:
            raise ValueError("S exceeds T")
        gamma[rng.choice(T, sp.S, replace=False)] = True
    elif isinstance(sp, Bernoulli):
        gamma = rng.random(T) < sp.rho
    else:
        raise ValueError("sampling across model sizes is not supported")
    theta = np.zeros(T)
    theta[gamma] = slab_sample(prior.slab, int(gamma.sum()), rng)
    return theta, gamma, prior.sigma2.sample(rng)


@dataclass(frozen=True)
class CheckReport:
    name: str
    lhs: float
    rhs: float
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "passed": bool(self.passed), **self.detail}


def check_B1(slab: SlabSpec, Bstar: float, n: float, c1: float = 2.0) -> CheckReport:
    """``-log inf_{|u| <= B*+1} density`` against ``c1 log n``."""
    if not n >= 2:
        raise ValueError("n must be at least 2")
    r = Bstar + 1.0
    rhs = c1 * math.log(n)
    if slab.family == "uniform" and r > slab.tau:
        return CheckReport("B1", math.inf, rhs, False, {"reason": "slab support too small"})
    lhs = -float(slab_log_density(slab, r))
    return CheckReport("B1", lhs, rhs, lhs <= rhs)


def natural_tail_constants(slab: SlabSpec) -> tuple[float, float, float]:
    """``(c2, c3, alpha)`` with ``tail(t) <= c2 exp(-c3 (t/tau)^alpha)``."""
    f = slab.family
    if f in ("uniform", "laplace"):
        return 1.0, 1.0, 1.0
    if f == "gaussian":
        return 1.0, 0.5, 2.0
    a = slab.alpha
    # sup_x Q(1/a, x) e^{x/2}; at least 1 (value at x = 0)
    g = lambda x: -(special.gammaincc(1 / a, x) * math.exp(x / 2))
    res = optimize.minimize_scalar(g, bounds=(0.0, 200.0 + 40 / a), method="bounded")
    c2 = max(1.0, -res.fun) * (1 + 1e-9)
    return c2, 0.5, a


def check_B2(slab: SlabSpec, t_grid=None, Bstar: float | None = None) -> CheckReport:
    """Max over ``t_grid`` of ``tail(t) / (c2 exp(-c3 (t/tau)^alpha))``."""
    if t_grid is None:
        t_grid = slab.tau * np.linspace(0.0, 20.0, 2001)
    t_grid = np.asarray(t_grid, dtype=float)
    c2, c3, a = natural_tail_constants(slab)
    v = t_grid / slab.tau
    tail = slab_tail(slab, t_grid)
    with np.errstate(divide="ignore"):
        log_ratio = np.log(tail) - (math.log(c2) - c3 * v**a)
    mx = float(np.exp(np.max(log_ratio)))
    detail = {"c2": c2, "c3": c3, "alpha": a}
    if Bstar is not None:
        detail["tau_over_Bstar"] = slab.tau / Bstar
    return CheckReport("B2", mx, 1.0, mx <= 1.0 + 1e-12, detail)


def check_C(slab_of_N: Callable[[int], SlabSpec], lambda_N: float, N_grid: Sequence[int],
            beta_ad: float, B_ad: float = 1.0, c1: float = 4.0,
            scale_max: float = 10.0) -> CheckReport:
    """Adaptive-prior conditions over a grid of model sizes.

    Per ``N``: B1 with ``log N`` in place of ``log n`` and ``B*(N) = B_ad
    N^beta_ad``, B2 at ``tau_N``, and the scale ratio ``tau_N / N^beta_ad``,
    which must stay below ``scale_max``.  Also requires ``lambda_N > 0``.
    """
    rows = []
    ok = lambda_N > 0
    for N in N_grid:
        if N < 2:
            raise ValueError("N_grid entries must be at least 2")
        slab = slab_of_N(int(N))
        b1 = check_B1(slab, B_ad * N**beta_ad, N, c1)
        b2 = check_B2(slab)
        ratio = slab.tau / N**beta_ad
        row_ok = b1.passed and b2.passed and ratio <= scale_max
        ok = ok and row_ok
        rows.append({"N": int(N), "B1_lhs": b1.lhs, "B1_rhs": b1.rhs, "B2_ratio": b2.lhs,
                     "scale_ratio": ratio, "passed": bool(row_ok)})
    return CheckReport("C", float(lambda_N), 0.0, bool(ok), {"rows": rows})
