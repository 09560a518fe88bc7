"""Simulation, dictionary-model fitting and contraction-rate studies."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .approx import assemble, candidate_terms
from .besov import SmoothnessProfile, test_function
from .inference import ChainConfig, posterior_l2_error, run_chains
from .kan import KanSpec, ParamVector, RegressionDataset
from .planner import SmoothnessWarning, plan_sas
from .priors import FixedCardinality, PriorSpec, Sigma2Prior, SlabSpec

__all__ = [
    "DataFormatError",
    "simulate",
    "read_dataset",
    "write_dataset",
    "write_table",
    "read_table",
    "DictionaryModel",
    "build_dictionary_model",
    "fit_dictionary",
    "fit_slope",
    "rate_study",
    "RateStudyResult",
]

SIGMA0 = 0.3
SIGMA2_SUPPORT = (0.05**2, 1.0)


class DataFormatError(ValueError):
    """Malformed dataset file."""


def simulate(f0: Callable, n: int, d: int, sigma0: float = SIGMA0, rng=None,
             design: str = "uniform") -> RegressionDataset:
    """``y = f0(x) + sigma0 eps`` with ``x`` uniform or from a tilted bounded density.

    The tilted design mixes the uniform and Beta(2, 2) laws per coordinate,
    so its density is bounded by ``(0.5 + 0.75)^d``.
    """
    rng = np.random.default_rng(rng)
    if design == "uniform":
        X = rng.uniform(0.0, 1.0, (n, d))
    elif design == "tilted":
        U = rng.uniform(0.0, 1.0, (n, d))
        B = rng.beta(2.0, 2.0, (n, d))
        X = np.where(rng.random((n, d)) < 0.5, U, B)
    else:
        raise ValueError("design must be 'uniform' or 'tilted'")
    y = np.asarray(f0(X), dtype=float) + sigma0 * rng.standard_normal(n)
    return RegressionDataset(X, y)


def read_dataset(path) -> RegressionDataset:
    """Read a ``x1,...,xd,y`` CSV; errors name the offending line."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError("empty dataset file")
    header = [h.strip() for h in rows[0]]
    if not header or header[-1] != "y":
        raise DataFormatError("line 1: header must end with a 'y' column")
    d = len(header) - 1
    if d < 1 or header[:-1] != [f"x{i + 1}" for i in range(d)]:
        raise DataFormatError("line 1: header must be x1,...,xd,y")
    X = np.empty((len(rows) - 1, d))
    y = np.empty(len(rows) - 1)
    for i, row in enumerate(rows[1:]):
        line = i + 2
        if len(row) != d + 1:
            raise DataFormatError(f"line {line}: expected {d + 1} fields, got {len(row)}")
        try:
            vals = [float(v) for v in row]
        except ValueError as exc:
            raise DataFormatError(f"line {line}: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise DataFormatError(f"line {line}: non-finite value")
        X[i], y[i] = vals[:-1], vals[-1]
        if np.any((X[i] < 0) | (X[i] > 1)):
            raise DataFormatError(f"line {line}: inputs must lie in [0, 1]")
    return RegressionDataset(X, y)


def write_dataset(path, data: RegressionDataset) -> None:
    rows = [[f"x{i + 1}" for i in range(data.d)] + ["y"]]
    rows += [[repr(float(v)) for v in x] + [repr(float(t))] for x, t in zip(data.X, data.y)]
    _write_rows(path, rows)


def _write_rows(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def write_table(path_or_buf, records: Sequence[dict]) -> None:
    """CSV with floats written by ``repr`` so that reading back is exact."""
    if not records:
        raise ValueError("no records")
    keys = list(records[0])
    rows = [keys] + [[_fmt(r[k]) for k in keys] for r in records]
    if isinstance(path_or_buf, io.TextIOBase):
        csv.writer(path_or_buf, lineterminator="\n").writerows(rows)
    else:
        _write_rows(path_or_buf, rows)


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def read_table(path) -> list[dict]:
    """Inverse of :func:`write_table`; numeric fields come back as int or float."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    keys = rows[0]
    out = []
    for row in rows[1:]:
        rec = {}
        for k, v in zip(keys, row):
            try:
                rec[k] = int(v)
            except ValueError:
                try:
                    rec[k] = float(v)
                except ValueError:
                    rec[k] = v
        out.append(rec)
    return out


@dataclass
class DictionaryModel:
    """KAN_c whose hidden layers realize a fixed tensor dictionary.

    The final-layer spline coefficients over the product nodes are free;
    everything before them is frozen.
    """

    spec: KanSpec
    base: ParamVector
    free: np.ndarray
    terms: list
    N: int
    S: int
    plan: dict = field(default_factory=dict)


def build_dictionary_model(profile: SmoothnessProfile, n: int, m: int = 2, C_N: float = 1.0,
                           S_0: float = 4.0, N: int | None = None, local: bool = False
                           ) -> DictionaryModel:
    """Freeze the planned resolution's full candidate dictionary in the hidden layers.

    ``N`` comes from the plan for sample size ``n`` unless given; the
    candidate terms are all ``M_{k,j}`` on the levels allowed by ``N``.
    The free coordinates are the last-layer spline coefficients on each
    term's product node whose support meets ``[0, 1]``; with ``local`` only
    those vanishing at 0 are kept, so every feature lives on its term's patch.
    """
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SmoothnessWarning)
        plan = plan_sas(max(n, 2), profile.s, profile.p, m, C_N=C_N, S_0=S_0)
    N = plan.N if N is None else int(N)
    terms = candidate_terms(profile, N, m)
    real = assemble(terms, profile, m)
    spec = real.spec
    hidden = spec.L - 1
    base_keep = real.theta.index < spec.layer_offsets[hidden]
    base = ParamVector(spec, real.theta.index[base_keep], real.theta.value[base_keep])
    kn = spec.knots(hidden)
    t = kn.knots
    lo = 0.0 if local else -np.inf
    overlap = [b for b in range(kn.n_basis)
               if t[b + kn.m + 1] > 0 and t[b] < 1 and t[b] >= lo]
    d = spec.d
    free = np.array([spec.flat_index(hidden, 0, 2 * d * q, b + 1)
                     for q in range(len(terms)) for b in overlap], dtype=np.int64)
    S = min(math.ceil(S_0 * N - 1e-9), free.size)
    info = plan.to_dict()
    info["warnings"] = [str(w.message) for w in caught]
    return DictionaryModel(spec, base, np.sort(free), terms, N, S, info)


def fit_dictionary(data: RegressionDataset, model: DictionaryModel, slab: SlabSpec,
                   config: ChainConfig, n_chains: int = 1,
                   sigma2=SIGMA2_SUPPORT, jobs: int = 1, init="greedy") -> list:
    prior = PriorSpec(slab, FixedCardinality(model.S), Sigma2Prior(*sigma2))
    return run_chains(data, model.spec, prior, config, n_chains, base=model.base,
                      free=model.free, jobs=jobs, init=init)


def fit_slope(n, err, log_factor: bool = True) -> dict:
    """Least-squares slope of ``log(err / sqrt(log n))`` on ``log n`` with its SE."""
    n = np.asarray(n, dtype=float)
    err = np.asarray(err, dtype=float)
    if np.unique(n).size < 3:
        raise ValueError("need at least three distinct sample sizes")
    degenerate = bool(np.any(err <= 1e-12))
    if degenerate:
        return {"slope": float("nan"), "se": float("nan"), "intercept": float("nan"),
                "degenerate": True}
    yv = np.log(err) - (0.5 * np.log(np.log(n)) if log_factor else 0.0)
    xv = np.log(n)
    A = np.column_stack([xv, np.ones_like(xv)])
    coef, *_ = np.linalg.lstsq(A, yv, rcond=None)
    resid = yv - A @ coef
    dof = max(xv.size - 2, 1)
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(np.sum((xv - xv.mean()) ** 2)))
    return {"slope": float(coef[0]), "se": se, "intercept": float(coef[1]), "degenerate": False}


@dataclass
class RateStudyResult:
    rows: list
    summary: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _study_task(args):
    (target, s, n, rep, ni, sigma0, seed, m, C_N, S_0, tau, cfg, mc_n, design, local) = args
    f0 = test_function(target, s)
    profile = f0.declared_profile
    ss = np.random.SeedSequence([seed, ni, rep])
    data_seed, chain_seed, mc_seed = ss.generate_state(3)
    data = simulate(f0, n, profile.d, sigma0, np.random.default_rng(data_seed), design)
    model = build_dictionary_model(profile, n, m, C_N=C_N, S_0=S_0, local=local)
    config = ChainConfig(**{**cfg, "seed": int(chain_seed)})
    chains = fit_dictionary(data, model, SlabSpec("gaussian", tau), config)
    summ = posterior_l2_error(chains, f0, mc_n=mc_n, rng=int(mc_seed))
    return {"n": n, "replicate": rep, "posterior_error": summ.mean_l2_error,
            "plugin_error": summ.plugin_l2_error, "sigma2_mean": summ.posterior_mean_sigma2,
            "N": model.N, "S": model.S, "T_free": int(model.free.size),
            "accept_theta": summ.accept_rates.get("conditional", float("nan")),
            "accept_swap": summ.accept_rates.get("swap", float("nan"))}


DEFAULT_CHAIN = {"iters": 600, "burnin": 300, "thin": 5, "birth": "informed",
                 "theta_move": "conditional", "gamma_moves": 10, "p_swap": 1.0, "p_add": 0.0,
                 "p_delete": 0.0}


def rate_study(target: str = "smooth1", s=None, n_grid=(250, 500, 1000, 2000, 4000),
               replicates: int = 5, sigma0: float = SIGMA0, seed: int = 0, m: int = 2,
               C_N: float = 1.0, S_0: float = 4.0, tau: float = 1.0, chain: dict | None = None,
               mc_n: int = 4000, design: str = "uniform", local: bool = False,
               jobs: int = 1) -> RateStudyResult:
    """Simulate, plan, fit and record errors on a grid of sample sizes.

    Each ``(n, replicate)`` task owns RNG streams derived from
    ``(seed, n index, replicate)``.  The slope is fitted on the posterior
    errors after dividing out ``sqrt(log n)``.
    """
    n_grid = [int(v) for v in n_grid]
    if len(n_grid) < 3 or any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid needs at least three strictly increasing sizes")
    if replicates < 1:
        raise ValueError("replicates must be at least 1")
    f0 = test_function(target, s)
    profile = f0.declared_profile
    cfg = {**DEFAULT_CHAIN, **(chain or {})}
    tasks = [(target, None if s is None else tuple(s), n, rep, ni, sigma0, seed, m, C_N, S_0,
              tau, cfg, mc_n, design, local)
             for ni, n in enumerate(n_grid) for rep in range(replicates)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_study_task, tasks))
    else:
        rows = [_study_task(t) for t in tasks]
    st = profile.s_tilde
    fit = fit_slope([r["n"] for r in rows], [r["posterior_error"] for r in rows])
    summary = {"target": target, "s": list(profile.s), "s_tilde": st,
               "target_slope": -st / (2 * st + 1), "sigma0": sigma0, "replicates": replicates,
               "n_grid": n_grid, "seed": seed, **{f"fit_{k}": v for k, v in fit.items()}}
    return RateStudyResult(rows, summary)
