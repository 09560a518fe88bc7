"""Metropolis-within-Gibbs sampler for sparse KAN regression.

The state is ``(theta, gamma, sigma^2)`` restricted to a set of *free*
coordinates; the remaining coordinates are frozen at a base parameter
vector.  The prior acts on the free coordinates only.  A sweep performs

* a random-walk update of every active coordinate (optionally followed by
  an independence update from the Gaussian conditional of the unclipped
  linear model),
* one inclusion move: swap for fixed cardinality, add/delete/swap for the
  Bernoulli prior,
* a log-scale random walk on ``sigma^2`` restricted to its support.

When every free coordinate lies in the last layer the network output is
linear in the free values and all updates touch only the affected rows.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .bspline import local_basis, _cell
from .kan import KanSpec, ParamVector, RegressionDataset, clip, forward, log_likelihood, silu
from .priors import (
    Adaptive,
    Bernoulli,
    FixedCardinality,
    PriorSpec,
    log_prior_active,
    sample_prior,
    slab_log_density,
    slab_sample,
)

__all__ = [
    "ChainConfig",
    "Chain",
    "PosteriorSummary",
    "UnsupportedModeError",
    "log_posterior",
    "run_mcmc",
    "run_chains",
    "posterior_l2_error",
    "ess",
    "log_accept_rw",
    "log_accept_swap",
    "log_accept_birth",
    "log_accept_death",
    "log_accept_sigma2",
    "slab_variance",
]


class UnsupportedModeError(ValueError):
    """The sampler does not move across model sizes."""


@dataclass
class ChainConfig:
    iters: int = 2000
    burnin: int = 500
    step_theta: float = 0.1
    p_swap: float = 1 / 3
    p_add: float = 1 / 3
    p_delete: float = 1 / 3
    sigma_step: float = 0.2
    seed: int = 0
    adapt: bool = True
    thin: int = 1
    birth: str = "slab"
    theta_move: str = "rw"
    gamma_moves: int = 1
    update_gamma: bool = True
    update_sigma2: bool = True

    def __post_init__(self):
        if self.iters <= self.burnin:
            raise ValueError("iters must exceed burnin")
        if self.burnin < 0 or self.thin < 1 or self.gamma_moves < 0:
            raise ValueError("burnin, thin and gamma_moves must be nonnegative (thin >= 1)")
        probs = (self.p_swap, self.p_add, self.p_delete)
        if min(probs) < 0 or abs(sum(probs) - 1) > 1e-12:
            raise ValueError("move probabilities must be nonnegative and sum to 1")
        if not (self.step_theta > 0 and self.sigma_step > 0):
            raise ValueError("step sizes must be positive")
        if self.birth not in ("slab", "informed"):
            raise ValueError("birth must be 'slab' or 'informed'")
        if self.theta_move not in ("rw", "conditional", "both"):
            raise ValueError("theta_move must be 'rw', 'conditional' or 'both'")

    def to_dict(self) -> dict:
        return asdict(self)


# acceptance ratios, shared with the discrete detailed-balance test

def log_accept_rw(lp_new: float, lp_old: float) -> float:
    """Symmetric proposal."""
    return lp_new - lp_old


def log_accept_swap(lp_new: float, lp_old: float, lq_forward: float, lq_reverse: float) -> float:
    """Swap ``a -> b``: forward draws the new value, reverse redraws the old one."""
    return lp_new - lp_old + lq_reverse - lq_forward


def log_accept_birth(lp_new: float, lp_old: float, k: int, T: int, p_add: float,
                     p_delete: float, lq_u: float) -> float:
    """Add one of ``T - k`` inactive coordinates with value density ``q(u)``."""
    return (lp_new - lp_old + math.log(p_delete / (k + 1))
            - math.log(p_add / (T - k)) - lq_u)


def log_accept_death(lp_new: float, lp_old: float, k: int, T: int, p_add: float,
                     p_delete: float, lq_v: float) -> float:
    """Delete one of ``k`` active coordinates; reverse birth redraws ``v``."""
    return (lp_new - lp_old + math.log(p_add / (T - k + 1)) + lq_v
            - math.log(p_delete / k))


def log_accept_sigma2(lp_new: float, lp_old: float, s2_new: float, s2_old: float) -> float:
    """Log-scale random walk; ``s2_new / s2_old`` is the Jacobian."""
    return lp_new - lp_old + math.log(s2_new / s2_old)


def slab_variance(slab) -> float:
    t, f = slab.tau, slab.family
    if f == "uniform":
        return t * t / 3
    if f == "gaussian":
        return t * t
    if f == "laplace":
        return 2 * t * t
    a = slab.alpha
    return t * t * math.exp(special.gammaln(3 / a) - special.gammaln(1 / a))


def _prior_log_gamma(prior: PriorSpec, k: int, T: int) -> float:
    sp = prior.sparsity
    if isinstance(sp, Bernoulli):
        return k * math.log(sp.rho) + (T - k) * math.log1p(-sp.rho)
    return 0.0  # constant under fixed cardinality


def log_posterior(params: ParamVector, sigma2: float, data: RegressionDataset,
                  prior: PriorSpec, free=None) -> float:
    """Log likelihood plus log prior of the free coordinates, ``-inf`` propagated.

    ``free`` is a boolean mask or an index array over the flat parameters;
    all coordinates are free by default.
    """
    T = params.T
    if free is None:
        vals, Tf = params.value, T
    else:
        idx = _free_index(free, T)
        vals = params.theta[idx]
        vals = vals[vals != 0]
        Tf = idx.size
    lp = log_prior_active(vals, sigma2, prior, Tf)
    if lp == -math.inf:
        return lp
    return log_likelihood(params, sigma2, data) + lp


def _free_index(free, T: int) -> np.ndarray:
    free = np.asarray(free)
    if free.dtype == bool:
        if free.shape != (T,):
            raise ValueError("free mask must have length T")
        return np.flatnonzero(free)
    out = np.unique(free.astype(np.int64))
    if out.size and (out[0] < 0 or out[-1] >= T):
        raise IndexError("free index out of range")
    return out


class _LinearModel:
    """Network output as ``base + sum_c v_c phi_c`` over last-layer free coordinates."""

    linear = True

    def __init__(self, spec: KanSpec, base: ParamVector, free_idx: np.ndarray, X: np.ndarray):
        self.n = X.shape[0]
        l = spec.L - 1
        hidden = X
        for lay in base.layers()[:-1]:
            hidden = lay(hidden)
        self.base_mu = forward(base, X) if self.n else np.zeros(0)
        _, _, j, k = spec.unflatten(free_idx)
        kn = spec.knots(l)
        m = kn.m
        self.rows, self.vals = [], []
        cache = {}
        for jj, kk in zip(j, k):
            if jj not in cache:
                z = hidden[:, jj]
                span, f, valid = _cell(kn, z)
                cache[jj] = (z, span, local_basis(f, m) * valid[:, None])
            z, span, loc = cache[jj]
            if kk == 0:
                v = silu(z)
                r = np.flatnonzero(v)
                self.rows.append(r)
                self.vals.append(v[r])
                continue
            b = kk - 1
            # local slot of basis b in the cell with index span is b - span + m
            slot = b - span + m
            hit = (slot >= 0) & (slot <= m)
            r = np.flatnonzero(hit)
            v = loc[r, slot[r]]
            nz = v != 0
            self.rows.append(r[nz])
            self.vals.append(v[nz])
        self.sq_norm = np.array([float(v @ v) for v in self.vals])

    def mean(self, active, values) -> np.ndarray:
        mu = self.base_mu.copy()
        for c, v in zip(active, values):
            mu[self.rows[c]] += v * self.vals[c]
        return mu

    def change(self, mu, changes, active=None, values=None):
        if len(changes) == 1:
            c, dv = changes[0]
            r = self.rows[c]
            return r, mu[r] + dv * self.vals[c]
        r = np.unique(np.concatenate([self.rows[c] for c, _ in changes]))
        new = mu[r].copy()
        for c, dv in changes:
            new[np.searchsorted(r, self.rows[c])] += dv * self.vals[c]
        return r, new


class _NetworkModel:
    """Full forward pass for every proposal."""

    linear = False

    def __init__(self, spec: KanSpec, base: ParamVector, free_idx: np.ndarray, X: np.ndarray):
        self.spec = spec
        self.free_idx = free_idx
        self.X = X
        self.n = X.shape[0]
        keep = ~np.isin(base.index, free_idx)
        self.base_idx = base.index[keep]
        self.base_val = base.value[keep]
        self.all_rows = np.arange(self.n)

    def params(self, active, values) -> ParamVector:
        return ParamVector(self.spec, np.concatenate([self.base_idx, self.free_idx[active]]),
                           np.concatenate([self.base_val, values]))

    def mean(self, active, values) -> np.ndarray:
        if self.n == 0:
            return np.zeros(0)
        return forward(self.params(np.asarray(active, dtype=np.int64), np.asarray(values)), self.X)

    def change(self, mu, changes, active, values):
        vals = dict(zip(active.tolist(), values.tolist()))
        for c, dv in changes:
            vals[c] = vals.get(c, 0.0) + dv
        act = np.array([c for c, v in vals.items() if v != 0], dtype=np.int64)
        return self.all_rows, self.mean(act, np.array([vals[c] for c in act]))


@dataclass
class Chain:
    """Kept draws of one chain; values are stored sparsely over free coordinates."""

    spec: KanSpec
    free_idx: np.ndarray
    base: ParamVector
    active: list
    values: list
    sigma2: np.ndarray
    logpost: np.ndarray
    accept: dict
    config: ChainConfig
    step_theta: float
    model_linear: bool = False

    @property
    def n_draws(self) -> int:
        return len(self.active)

    def params(self, i: int) -> ParamVector:
        keep = ~np.isin(self.base.index, self.free_idx)
        return ParamVector(self.spec,
                           np.concatenate([self.base.index[keep], self.free_idx[self.active[i]]]),
                           np.concatenate([self.base.value[keep], self.values[i]]))

    def accept_rates(self) -> dict:
        return {k: (a / p if p else float("nan")) for k, (a, p) in self.accept.items()}

    def draw_outputs(self, X) -> np.ndarray:
        """Unclipped network outputs of every kept draw at ``X``, shape ``(draws, n)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.model_linear:
            model = _LinearModel(self.spec, self.base, self.free_idx, X)
            return np.array([model.mean(a, v) for a, v in zip(self.active, self.values)])
        return np.array([forward(self.params(i), X) for i in range(self.n_draws)])

    def predict(self, X) -> np.ndarray:
        """Posterior mean of ``clip(f_theta)`` at ``X``."""
        return clip(self.draw_outputs(X)).mean(axis=0)


def _check_mode(prior: PriorSpec):
    if isinstance(prior.sparsity, Adaptive):
        raise UnsupportedModeError("adaptive model size is not sampled; fix N first")
    if not isinstance(prior.sparsity, (FixedCardinality, Bernoulli)):
        raise UnsupportedModeError(f"unsupported sparsity mode {prior.sparsity!r}")


def run_mcmc(data: RegressionDataset, spec: KanSpec, prior: PriorSpec, config: ChainConfig,
             base: ParamVector | None = None, free=None, init=None) -> Chain:
    """Run one chain.

    ``init`` is ``(active_positions, values, sigma2)`` over the free
    coordinates, or ``"greedy"`` for a top-correlation start on the linear
    path; by default the chain starts from a prior draw.
    """
    _check_mode(prior)
    if data.X.shape[1] != spec.d:
        raise ValueError("data dimension does not match the architecture")
    rng = np.random.default_rng(config.seed)
    base = ParamVector.zeros(spec) if base is None else base
    free_idx = np.arange(spec.T) if free is None else _free_index(free, spec.T)
    Tf = free_idx.size
    keep = ~np.isin(base.index, free_idx)
    base = ParamVector(spec, base.index[keep], base.value[keep])
    sp = prior.sparsity
    fixed = isinstance(sp, FixedCardinality)
    if fixed and sp.S > Tf:
        raise ValueError("S exceeds the number of free coordinates")
    last = spec.layer_offsets[spec.L - 1]
    linear = bool(free_idx.size and free_idx[0] >= last)
    model = (_LinearModel if linear else _NetworkModel)(spec, base, free_idx, data.X)
    if config.birth == "informed" or config.theta_move != "rw":
        if not linear:
            raise ValueError("informed proposals need all free coordinates in the last layer")

    # state over free positions
    if isinstance(init, str):
        if init != "greedy" or not linear:
            raise ValueError("init must be a tuple, None, or 'greedy' on the linear path")
        init = _greedy_init(model, data.y, prior, Tf)
    if init is None:
        th, gm, s2 = sample_prior(prior, Tf, rng)
        gamma, vals = gm.copy(), th.copy()
    else:
        act0, v0, s2 = init
        gamma = np.zeros(Tf, dtype=bool)
        vals = np.zeros(Tf)
        gamma[np.asarray(act0, dtype=np.int64)] = True
        vals[np.asarray(act0, dtype=np.int64)] = v0
        if fixed and gamma.sum() != sp.S:
            raise ValueError("initial active set must have S elements")
    s2 = float(s2)
    y = data.y
    mu = model.mean(np.flatnonzero(gamma), vals[gamma])
    ssr = float(np.sum((y - clip(mu)) ** 2))
    n = data.n
    qvar = slab_variance(prior.slab)

    def loglik(ssr_, s2_):
        return -0.5 * n * math.log(2 * math.pi * s2_) - ssr_ / (2 * s2_) if n else 0.0

    def d_ssr(rows, new):
        if rows.size == 0:
            return 0.0
        yr = y[rows]
        return float(np.sum((yr - clip(new)) ** 2) - np.sum((yr - clip(mu[rows])) ** 2))

    def slab_lp(v):
        return float(slab_log_density(prior.slab, v))

    def cond(c, mu_wo_rows, rows_c):
        """Gaussian conditional of coordinate ``c`` given the rest (unclipped, slab variance)."""
        phi = model.vals[c]
        r = y[model.rows[c]] - mu_wo_rows
        prec = model.sq_norm[c] / s2 + 1.0 / qvar
        return float(phi @ r) / s2 / prec, 1.0 / prec

    def norm_lpdf(u, m_, v_):
        return -0.5 * math.log(2 * math.pi * v_) - 0.5 * (u - m_) ** 2 / v_

    def commit(rows, new):
        nonlocal ssr
        ssr += d_ssr(rows, new)
        mu[rows] = new

    acc = {"theta": [0, 0], "conditional": [0, 0], "swap": [0, 0], "add": [0, 0],
           "delete": [0, 0], "sigma2": [0, 0]}
    step = config.step_theta
    kept_a, kept_v, kept_s2, kept_lp = [], [], [], []
    k_gamma = int(gamma.sum())

    def state_lp():
        slab = float(np.sum(slab_log_density(prior.slab, vals[gamma]))) if k_gamma else 0.0
        return loglik(ssr, s2) + _prior_log_gamma(prior, k_gamma, Tf) + slab

    for it in range(config.iters):
        burn = it < config.burnin
        act = np.flatnonzero(gamma)
        # (i) within-model updates
        if config.theta_move in ("rw", "both"):
            n_acc = 0
            for c in act:
                v = vals[c]
                u = v + step * rng.standard_normal()
                lq = slab_lp(u)
                if lq == -math.inf:
                    acc["theta"][1] += 1
                    continue
                rows, new = model.change(mu, [(c, u - v)], act, vals[act])
                dl = -d_ssr(rows, new) / (2 * s2) if n else 0.0
                la = log_accept_rw(dl + lq, slab_lp(v))
                acc["theta"][1] += 1
                if math.log(rng.random()) < la:
                    commit(rows, new)
                    vals[c] = u
                    acc["theta"][0] += 1
                    n_acc += 1
            if burn and config.adapt and act.size:
                rate = n_acc / act.size
                step *= math.exp((rate - 0.3) / (it + 1) ** 0.6)
        if config.theta_move in ("conditional", "both"):
            for c in act:
                v = vals[c]
                r = model.rows[c]
                base_rows = mu[r] - v * model.vals[c]
                m_, v_ = cond(c, base_rows, r)
                u = m_ + math.sqrt(v_) * rng.standard_normal()
                lq_u = slab_lp(u)
                acc["conditional"][1] += 1
                if lq_u == -math.inf:
                    continue
                new = base_rows + u * model.vals[c]
                dl = -d_ssr(r, new) / (2 * s2) if n else 0.0
                la = dl + lq_u - slab_lp(v) + norm_lpdf(v, m_, v_) - norm_lpdf(u, m_, v_)
                if math.log(rng.random()) < la:
                    commit(r, new)
                    vals[c] = u
                    acc["conditional"][0] += 1
        # (ii) inclusion moves
        if config.update_gamma:
            for _ in range(config.gamma_moves):
                act = np.flatnonzero(gamma)
                k = act.size
                if fixed:
                    move = "swap"
                else:
                    move = rng.choice(["swap", "add", "delete"],
                                      p=[config.p_swap, config.p_add, config.p_delete])
                acc[move][1] += 1
                if move == "swap":
                    if k == 0 or k == Tf:
                        continue
                    a = act[rng.integers(k)]
                    inact = np.flatnonzero(~gamma)
                    b = inact[rng.integers(inact.size)]
                    va = vals[a]
                    if config.birth == "informed":
                        ra = model.rows[a]
                        mu_wo = mu.copy()
                        mu_wo[ra] -= va * model.vals[a]
                        mb, vb = cond(b, mu_wo[model.rows[b]], None)
                        u = mb + math.sqrt(vb) * rng.standard_normal()
                        lq_f = norm_lpdf(u, mb, vb)
                        ma, vA = cond(a, mu_wo[ra], None)
                        lq_r = norm_lpdf(va, ma, vA)
                    else:
                        u = float(slab_sample(prior.slab, 1, rng)[0])
                        lq_f, lq_r = slab_lp(u), slab_lp(va)
                    lp_u = slab_lp(u)
                    if lp_u == -math.inf:
                        continue
                    rows, new = model.change(mu, [(a, -va), (b, u)], act, vals[act])
                    dl = -d_ssr(rows, new) / (2 * s2) if n else 0.0
                    la = log_accept_swap(dl + lp_u, slab_lp(va), lq_f, lq_r)
                    if math.log(rng.random()) < la:
                        commit(rows, new)
                        gamma[a], gamma[b] = False, True
                        vals[a], vals[b] = 0.0, u
                        acc["swap"][0] += 1
                elif move == "add":
                    if k == Tf:
                        continue
                    inact = np.flatnonzero(~gamma)
                    b = inact[rng.integers(inact.size)]
                    if config.birth == "informed":
                        mb, vb = cond(b, mu[model.rows[b]], None)
                        u = mb + math.sqrt(vb) * rng.standard_normal()
                        lq_u = norm_lpdf(u, mb, vb)
                    else:
                        u = float(slab_sample(prior.slab, 1, rng)[0])
                        lq_u = slab_lp(u)
                    lp_u = slab_lp(u)
                    if lp_u == -math.inf:
                        continue
                    rows, new = model.change(mu, [(b, u)], act, vals[act])
                    dl = -d_ssr(rows, new) / (2 * s2) if n else 0.0
                    lg = _prior_log_gamma(prior, k + 1, Tf) - _prior_log_gamma(prior, k, Tf)
                    la = log_accept_birth(dl + lp_u + lg, 0.0, k, Tf, config.p_add,
                                          config.p_delete, lq_u)
                    if math.log(rng.random()) < la:
                        commit(rows, new)
                        gamma[b] = True
                        vals[b] = u
                        k_gamma += 1
                        acc["add"][0] += 1
                else:
                    if k == 0:
                        continue
                    a = act[rng.integers(k)]
                    va = vals[a]
                    rows, new = model.change(mu, [(a, -va)], act, vals[act])
                    if config.birth == "informed":
                        # single change: rows are those of a, new is the mean without a
                        ma, vA = cond(a, new, None)
                        lq_v = norm_lpdf(va, ma, vA)
                    else:
                        lq_v = slab_lp(va)
                    dl = -d_ssr(rows, new) / (2 * s2) if n else 0.0
                    lg = _prior_log_gamma(prior, k - 1, Tf) - _prior_log_gamma(prior, k, Tf)
                    la = log_accept_death(dl + lg, slab_lp(va), k, Tf, config.p_add,
                                          config.p_delete, lq_v)
                    if math.log(rng.random()) < la:
                        commit(rows, new)
                        gamma[a] = False
                        vals[a] = 0.0
                        k_gamma -= 1
                        acc["delete"][0] += 1
        # (iii) noise variance
        if config.update_sigma2:
            s2n = s2 * math.exp(config.sigma_step * rng.standard_normal())
            lpn = prior.sigma2.log_density(s2n)
            acc["sigma2"][1] += 1
            if lpn > -math.inf:
                la = log_accept_sigma2(loglik(ssr, s2n) + lpn,
                                       loglik(ssr, s2) + prior.sigma2.log_density(s2), s2n, s2)
                if math.log(rng.random()) < la:
                    s2 = s2n
                    acc["sigma2"][0] += 1
        k_gamma = int(gamma.sum())
        if not burn and (it - config.burnin) % config.thin == 0:
            a = np.flatnonzero(gamma)
            kept_a.append(a)
            kept_v.append(vals[a].copy())
            kept_s2.append(s2)
            kept_lp.append(state_lp() + prior.sigma2.log_density(s2))
    return Chain(spec, free_idx, base, kept_a, kept_v, np.array(kept_s2), np.array(kept_lp),
                 {k: tuple(v) for k, v in acc.items()}, config, step, linear)


def _greedy_init(model: _LinearModel, y: np.ndarray, prior: PriorSpec, Tf: int):
    """Top-correlation support with ridge values under the slab variance."""
    sp = prior.sparsity
    k = sp.S if isinstance(sp, FixedCardinality) else max(1, round(sp.rho * Tf))
    r = y - model.base_mu
    score = np.array([abs(float(v @ r[rw])) / math.sqrt(q) if q > 0 else 0.0
                      for rw, v, q in zip(model.rows, model.vals, model.sq_norm)])
    act = np.sort(np.argsort(-score, kind="stable")[:k])
    Phi = np.zeros((model.n, act.size))
    for i, c in enumerate(act):
        Phi[model.rows[c], i] = model.vals[c]
    s2 = float(np.clip(0.5 * np.var(r) if r.size else 1.0, prior.sigma2.lo, prior.sigma2.hi))
    A = Phi.T @ Phi / s2 + np.eye(act.size) / slab_variance(prior.slab)
    v = np.linalg.solve(A, Phi.T @ r / s2)
    if prior.slab.family == "uniform":
        v = np.clip(v, -0.999 * prior.slab.tau, 0.999 * prior.slab.tau)
    v[v == 0] = 1e-12
    return act, v, s2


def _run_one(args):
    data, spec, prior, config, base, free, init = args
    return run_mcmc(data, spec, prior, config, base, free, init)


def run_chains(data, spec, prior, config: ChainConfig, n_chains: int = 2, base=None, free=None,
               jobs: int = 1, init=None) -> list:
    """Independent chains with seeds derived from ``(config.seed, chain_index)``."""
    seeds = np.random.SeedSequence(config.seed).spawn(n_chains)
    tasks = []
    for ss in seeds:
        cfg = ChainConfig(**{**config.to_dict(), "seed": int(ss.generate_state(1)[0])})
        tasks.append((data, spec, prior, cfg, base, free, init))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_run_one, tasks))
    return [_run_one(t) for t in tasks]


def ess(trace) -> float:
    """Effective sample size from the initial positive sequence of autocorrelations."""
    x = np.asarray(trace, dtype=float)
    n = x.size
    if n < 4:
        return float(n)
    x = x - x.mean()
    var = float(x @ x) / n
    if var == 0:
        return float(n)
    f = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n] / (n * var)
    total = 0.0
    for t in range(0, n - 1, 2):
        pair = acf[t] + acf[t + 1]
        if pair <= 0:
            break
        total += pair
    tau = max(2 * total - 1, 1.0 / n)
    return float(min(n / tau, n))


@dataclass
class PosteriorSummary:
    draws_kept: int
    mean_l2_error: float
    mean_l2_se: float
    plugin_l2_error: float
    posterior_mean_sigma2: float
    accept_rates: dict
    ess_min: float
    chain_errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def posterior_l2_error(chains, f0, mc_n: int = 5000, rng=None, sampler=None) -> PosteriorSummary:
    """Monte Carlo ``||clip f_theta - f0||_{L^2(P_X)}`` averaged over pooled draws.

    ``sampler(rng, n, d)`` draws design points (uniform by default).  Also
    reports the error of the posterior mean function.
    """
    if isinstance(chains, Chain):
        chains = [chains]
    chains = [c for c in chains if c.n_draws]
    if not chains:
        raise ValueError("chain is empty")
    rng = np.random.default_rng(rng)
    d = chains[0].spec.d
    X = rng.uniform(0.0, 1.0, (mc_n, d)) if sampler is None else sampler(rng, mc_n, d)
    truth = np.asarray(f0(X), dtype=float)
    errs, means, per_chain = [], [], []
    for c in chains:
        out = clip(c.draw_outputs(X))
        e = np.sqrt(np.mean((out - truth) ** 2, axis=1))
        errs.append(e)
        per_chain.append(float(e.mean()))
        means.append(out.mean(axis=0) * c.n_draws)
    errs = np.concatenate(errs)
    total = sum(c.n_draws for c in chains)
    fbar = np.sum(means, axis=0) / total
    plugin = float(np.sqrt(np.mean((fbar - truth) ** 2)))
    s2 = np.concatenate([c.sigma2 for c in chains])
    rates = {}
    for key in chains[0].accept:
        a = sum(c.accept[key][0] for c in chains)
        p = sum(c.accept[key][1] for c in chains)
        rates[key] = a / p if p else float("nan")
    se = float(errs.std(ddof=1) / math.sqrt(errs.size)) if errs.size > 1 else 0.0
    return PosteriorSummary(total, float(errs.mean()), se, plugin, float(s2.mean()), rates,
                            float(min(ess(c.logpost) for c in chains)), per_chain)
