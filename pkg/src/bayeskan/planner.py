"""Closed-form sizing and rate formulas for sparse Bayesian KANs.

Covers intrinsic smoothness and dimension, the magnitude exponent ``beta``,
the spike-and-slab architecture plan, the adaptive envelope, compositional
intrinsic indices, and the Bernoulli inclusion-rate check.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, replace

import numpy as np

from .kan import KanSpec, param_count

__all__ = [
    "SmoothnessWarning",
    "ArchitecturePlan",
    "AdaptivePlan",
    "CompositionalSpec",
    "CompositionalIndices",
    "RhoReport",
    "safe_ceil",
    "inv_p",
    "intrinsic_smoothness",
    "intrinsic_dimension",
    "beta_exponent",
    "check_smoothness_degree",
    "check_D1",
    "plan_sas",
    "plan_adaptive",
    "compositional_indices",
    "plan_compositional",
    "check_rho",
]


class SmoothnessWarning(UserWarning):
    """A smoothness/degree inequality is violated but the plan was still built."""


def safe_ceil(x: float, rtol: float = 1e-9) -> int:
    """Ceiling that treats values within ``rtol`` of an integer as that integer."""
    r = round(x)
    if abs(x - r) <= rtol * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def inv_p(p: float) -> float:
    """``1/p`` with ``p = inf`` mapped to 0."""
    if not p > 0:
        raise ValueError("p must be positive")
    return 0.0 if math.isinf(p) else 1.0 / p


def _as_s(s) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.ndim != 1 or s.size == 0:
        raise ValueError("s must be a nonempty vector")
    if np.any(~(s > 0)) or not np.all(np.isfinite(s)):
        raise ValueError("all smoothness entries must be positive and finite")
    return s


def intrinsic_smoothness(s) -> float:
    """``(sum_j 1/s_j)^{-1}``."""
    s = _as_s(s)
    return float(1.0 / np.sum(1.0 / s))


def intrinsic_dimension(s) -> float:
    """``min_j s_j / s_tilde``; equals ``d`` for isotropic ``s``."""
    s = _as_s(s)
    return float(np.sum(s.min() / s))


def beta_exponent(s, p: float) -> dict:
    """Magnitude exponent ``beta`` with its ``kappa`` and ``omega``."""
    s = _as_s(s)
    ip = inv_p(p)
    st = intrinsic_smoothness(s)
    omega = max(ip - 0.5, 0.0)
    if not st > omega:
        raise ValueError(
            f"intrinsic smoothness {st:.6g} must exceed (1/p - 1/2)_+ = {omega:.6g}"
        )
    kappa = 2 * omega / (st - omega) if ip > 0.5 else 0.0
    beta = (1 + kappa) * max(max(ip - st, 0.0), 1.0 / float(s.min()))
    return {"beta": beta, "kappa": kappa, "omega": omega}


def check_smoothness_degree(s, p: float, m: int, strict: bool = False, label: str = "A4"):
    """Check ``max s_j < min{m, m - 1 + 1/p}``.

    ``m < 2`` always raises.  Otherwise a violation raises only when
    ``strict``; else a :class:`SmoothnessWarning` is issued and the
    diagnostic string is returned (``None`` when the inequality holds).
    """
    s = _as_s(s)
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    bound = min(m, m - 1 + inv_p(p))
    msg = None
    if not s.max() < bound:
        msg = (
            f"{label} violated: max s_j = {s.max():.6g} is not below "
            f"min{{m, m-1+1/p}} = {bound:.6g}"
        )
    if m < 2:
        raise ValueError(msg or f"{label} violated: degree m = {m} must be at least 2")
    if msg is not None:
        if strict:
            raise ValueError(msg)
        warnings.warn(msg, SmoothnessWarning, stacklevel=3)
    return msg


def _L0(d: int) -> int:
    return 3 + 2 * math.ceil(math.log2(d)) if d > 1 else 3


def _eps(n: float, st: float) -> float:
    return n ** (-st / (2 * st + 1)) * math.sqrt(math.log(n))


@dataclass(frozen=True)
class ArchitecturePlan:
    """Architecture derived from a smoothness profile and a sample size."""

    N: int
    L0: int
    D: int
    G: int
    H: int
    G0: int
    m: int
    Bstar: float
    S: int
    T: int
    beta: float
    kappa: float
    omega: float
    s_tilde: float
    d_int: float
    eps_n: float
    constants: dict
    d: int = 1
    n: float | None = None
    s: tuple = ()
    p: float = math.inf
    a0: float = -1.0
    b0: float = 2.0
    diagnostics: tuple = ()

    def spec(self) -> KanSpec:
        return KanSpec(self.L0, self.d, self.D, self.G0, self.G, self.H, self.m, self.a0, self.b0)

    @property
    def hidden_spacing(self) -> float:
        return 2 * self.H / (self.G + 2 * self.m)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["s"] = list(self.s)
        out["p"] = _enc_p(self.p)
        out["diagnostics"] = list(self.diagnostics)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitecturePlan":
        kw = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        kw["s"] = tuple(kw.get("s", ()))
        kw["p"] = _dec_p(kw.get("p", "inf"))
        kw["diagnostics"] = tuple(kw.get("diagnostics", ()))
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ArchitecturePlan":
        return cls.from_dict(json.loads(text))


def _enc_p(p):
    return "inf" if math.isinf(p) else p


def _dec_p(p):
    return math.inf if p in ("inf", "Infinity", None) else float(p)


def plan_sas(
    n: float,
    s,
    p: float,
    m: int,
    C_N: float = 1.0,
    S_0: float = 1.0,
    B_0: float = 1.0,
    G0: int | None = None,
    a0: float = -1.0,
    b0: float = 2.0,
    strict: bool = False,
) -> ArchitecturePlan:
    """Spike-and-slab architecture for sample size ``n``.

    ``N = ceil(C_N n^{1/(2 s_tilde + 1)})``, ``L0 = 3 + 2 ceil(log2 d)``,
    ``D = 2dN``, ``B* = B_0 N^beta``, ``H = ceil(2 B*)``, ``G = 4H - 2m``,
    ``S = ceil(S_0 N)``.
    """
    s = _as_s(s)
    if not n >= 2:
        raise ValueError("n must be at least 2")
    diag = check_smoothness_degree(s, p, m, strict=strict)
    be = beta_exponent(s, p)
    st = intrinsic_smoothness(s)
    d = s.size
    N = safe_ceil(C_N * n ** (1 / (2 * st + 1)))
    return _build_plan(
        N, s, p, m, be, st, d, C_N, S_0, B_0, G0, a0, b0,
        eps_n=_eps(n, st), n=n, diagnostics=(diag,) if diag else (),
    )


def _build_plan(N, s, p, m, be, st, d, C_N, S_0, B_0, G0, a0, b0, eps_n, n, diagnostics,
                D_factor=None, beta=None):
    G0 = 3 * m if G0 is None else int(G0)
    beta = be["beta"] if beta is None else beta
    Bstar = B_0 * N**beta
    H = safe_ceil(2 * Bstar)
    G = 4 * H - 2 * m
    if G < 1:
        raise ValueError("hidden grid too small: increase B_0 or N")
    D = (2 * d if D_factor is None else D_factor) * N
    S = safe_ceil(S_0 * N)
    L0 = _L0(d)
    spec = KanSpec(L0, d, D, G0, G, H, m, a0, b0)
    return ArchitecturePlan(
        N=int(N), L0=L0, D=int(D), G=G, H=H, G0=G0, m=int(m), Bstar=float(Bstar),
        S=int(S), T=param_count(spec), beta=float(beta), kappa=float(be["kappa"]),
        omega=float(be["omega"]), s_tilde=float(st), d_int=intrinsic_dimension(s),
        eps_n=float(eps_n) if eps_n is not None else float("nan"),
        constants={"C_N": C_N, "S_0": S_0, "B_0": B_0}, d=d, n=n,
        s=tuple(float(v) for v in s), p=p, a0=a0, b0=b0, diagnostics=tuple(diagnostics),
    )


@dataclass(frozen=True)
class AdaptivePlan:
    """Adaptive envelope: ``beta_ad`` and the N-indexed architecture family."""

    beta_ad: float
    kappa_ad: float
    omega: float
    s_tilde_min: float
    s_min: float
    p: float
    d: int
    m: int
    B_ad: float = 1.0
    S_0: float = 1.0
    G0: int | None = None
    a0: float = -1.0
    b0: float = 2.0

    def plan_of_N(self, N: int) -> ArchitecturePlan:
        """Architecture for model size ``N`` (no rate attached)."""
        if int(N) != N or N < 1:
            raise ValueError("N must be a positive integer")
        be = {"beta": self.beta_ad, "kappa": self.kappa_ad, "omega": self.omega}
        s = (self.s_min,) * self.d
        return _build_plan(
            int(N), np.array(s), self.p, self.m, be, self.s_tilde_min, self.d, 1.0,
            self.S_0, self.B_ad, self.G0, self.a0, self.b0, eps_n=None, n=None,
            diagnostics=(),
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["p"] = _enc_p(self.p)
        return out


def plan_adaptive(
    envelope: dict,
    p: float,
    kappa_ad: float | None = None,
    d: int = 1,
    m: int = 2,
    B_ad: float = 1.0,
    S_0: float = 1.0,
    G0: int | None = None,
    a0: float = -1.0,
    b0: float = 2.0,
) -> AdaptivePlan:
    """``beta_ad = (1 + kappa_ad) max{(1/p - s_tilde_min)_+, 1/s_min}``."""
    st_min = float(envelope["s_tilde_min"])
    s_min = float(envelope["s_min"])
    if not (st_min > 0 and s_min > 0):
        raise ValueError("envelope entries must be positive")
    ip = inv_p(p)
    omega = max(ip - 0.5, 0.0)
    if not st_min > omega:
        raise ValueError(f"s_tilde_min = {st_min:.6g} must exceed (1/p - 1/2)_+ = {omega:.6g}")
    if ip > 0.5:
        kappa = 2 * omega / (st_min - omega)
    else:
        if kappa_ad is None or not kappa_ad > 0:
            raise ValueError("a positive kappa_ad is required when p >= 2")
        kappa = float(kappa_ad)
    beta_ad = (1 + kappa) * max(max(ip - st_min, 0.0), 1.0 / s_min)
    return AdaptivePlan(beta_ad, kappa, omega, st_min, s_min, p, int(d), int(m),
                        B_ad, S_0, G0, a0, b0)


@dataclass(frozen=True)
class CompositionalSpec:
    """Layered composition ``f_J o ... o f_1`` with per-layer smoothness."""

    dims: tuple
    effective_dims: tuple
    layer_smoothness: tuple
    p: float = math.inf
    q: float = math.inf

    def __post_init__(self):
        dims = tuple(int(v) for v in self.dims)
        t = tuple(int(v) for v in self.effective_dims)
        sm = tuple(tuple(float(v) for v in np.atleast_1d(si)) for si in self.layer_smoothness)
        J = len(t)
        if len(dims) != J + 1 or len(sm) != J or J < 1:
            raise ValueError("need J+1 dims, J effective dims and J smoothness vectors")
        if dims[-1] != 1:
            raise ValueError("the last dimension d^(J) must be 1")
        for j in range(J):
            if not 1 <= t[j] <= dims[j]:
                raise ValueError(f"layer {j + 1}: need 1 <= t <= d^(j-1)")
            if len(sm[j]) != t[j]:
                raise ValueError(f"layer {j + 1}: smoothness length must equal t")
            _as_s(sm[j])
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "effective_dims", t)
        object.__setattr__(self, "layer_smoothness", sm)

    @property
    def J(self) -> int:
        return len(self.effective_dims)

    @property
    def d(self) -> int:
        return self.dims[0]


@dataclass(frozen=True)
class CompositionalIndices:
    t_star_layers: tuple
    s_star_layers: tuple
    j_star: int
    t_star: float
    s_star: float


def check_D1(spec: CompositionalSpec) -> None:
    ip = inv_p(spec.p)
    for j, sj in enumerate(spec.layer_smoothness, start=1):
        st = intrinsic_smoothness(sj)
        need = max(ip - 0.5, 0.0) if j == 1 else ip
        if not st > need:
            raise ValueError(
                f"D1 violated at layer {j}: s_tilde = {st:.6g} must exceed {need:.6g}"
            )


def compositional_indices(spec: CompositionalSpec) -> CompositionalIndices:
    """Per-layer ``t*(j)``, ``s*(j)`` and the intrinsic layer ``j*`` (1-based)."""
    check_D1(spec)
    ip = inv_p(spec.p)
    st = [intrinsic_smoothness(s) for s in spec.layer_smoothness]
    smin = [min(s) for s in spec.layer_smoothness]
    tstar = [smin[j] / st[j] for j in range(spec.J)]
    sstar = []
    for j in range(spec.J):
        prod = 1.0
        for k in range(j + 1, spec.J):
            prod *= min(smin[k] - tstar[k] * ip, 1.0)
        sstar.append(st[j] * prod)
    jstar = int(np.argmin(sstar))
    return CompositionalIndices(tuple(tstar), tuple(sstar), jstar + 1, tstar[jstar], sstar[jstar])


def plan_compositional(
    n: float,
    spec: CompositionalSpec,
    m: int,
    D_cp: float | None = None,
    S_cp: float = 1.0,
    B_cp: float = 1.0,
    kappa_zero: float = 0.1,
    G0: int | None = None,
    a0: float = -1.0,
    b0: float = 2.0,
    strict: bool = False,
) -> ArchitecturePlan:
    """Compositional architecture with ``N* = ceil(n^{1/(2 s* + 1)})``.

    ``beta_cp`` is the maximum over layers of ``(1 + kappa_j) max{(1/p -
    s_tilde_j)_+, 1/min s_j}``; layer 1 uses the ``L^2`` exponent (``kappa = 0``
    when ``p >= 2``), later layers the ``L^inf`` exponent with ``kappa_zero``
    whenever ``omega_j = 0``.  Depth is the sum of per-layer product-tree
    depths; width defaults to ``max_j 2 t^(j) d^(j)`` per unit of ``N*``.
    """
    if not n >= 2:
        raise ValueError("n must be at least 2")
    ip = inv_p(spec.p)
    diags = []
    for j, sj in enumerate(spec.layer_smoothness, start=1):
        msg = check_smoothness_degree(sj, spec.p, m, strict=strict, label=f"D2 (layer {j})")
        if msg:
            diags.append(msg)
    idx = compositional_indices(spec)
    betas, kappas = [], []
    for j, sj in enumerate(spec.layer_smoothness, start=1):
        st = intrinsic_smoothness(sj)
        r_inv = 0.5 if j == 1 else 0.0
        omega = max(ip - r_inv, 0.0)
        if omega > 0:
            kappa = 2 * omega / (st - omega)
        else:
            kappa = 0.0 if j == 1 else kappa_zero
        kappas.append(kappa)
        betas.append((1 + kappa) * max(max(ip - st, 0.0), 1.0 / min(sj)))
    beta_cp = max(betas)
    jb = int(np.argmax(betas))
    sst = idx.s_star
    N = safe_ceil(n ** (1 / (2 * sst + 1)))
    if D_cp is None:
        D_cp = max(2 * spec.effective_dims[j] * spec.dims[j + 1] for j in range(spec.J))
    s_rep = np.array(spec.layer_smoothness[idx.j_star - 1])
    be = {"beta": beta_cp, "kappa": 0.0, "omega": max(ip - 0.5, 0.0)}
    plan = _build_plan(
        N, s_rep, spec.p, m, be, sst, spec.d, 1.0, S_cp, B_cp, G0, a0, b0,
        eps_n=_eps(n, sst), n=n, diagnostics=tuple(diags), D_factor=D_cp,
    )
    L_cp = sum(_L0(t) for t in spec.effective_dims)
    kspec = KanSpec(L_cp, spec.d, plan.D, plan.G0, plan.G, plan.H, m, a0, b0)
    return replace(
        plan, L0=L_cp, T=param_count(kspec), kappa=float(kappas[jb]),
        d_int=float(idx.t_star),
        constants={"D_cp": D_cp, "S_cp": S_cp, "B_cp": B_cp, "kappa_zero": kappa_zero,
                   "layer_betas": [float(b) for b in betas]},
    )


@dataclass(frozen=True)
class RhoReport:
    rho_T: float
    log_ratio: float
    c: float
    c_prime: float
    pass_lower: bool
    pass_upper: bool

    @property
    def passed(self) -> bool:
        return self.pass_lower and self.pass_upper


def check_rho(rho_n: float, T_n: int, S_n: int, n: float, c: float = 0.5,
              c_prime: float = 0.1) -> RhoReport:
    """Report ``rho T >= c`` and ``log(S/(T rho)) / log n >= c'``."""
    if not 0 < rho_n < 1:
        raise ValueError("rho_n must lie in (0, 1)")
    if not n > 1:
        raise ValueError("n must exceed 1")
    lhs1 = rho_n * T_n
    lhs2 = math.log(S_n / (T_n * rho_n)) / math.log(n)
    return RhoReport(lhs1, lhs2, c, c_prime, lhs1 >= c, lhs2 >= c_prime)
