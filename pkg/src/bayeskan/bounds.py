"""Closed-form Lipschitz, activation and covering bounds with empirical verifiers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, product

import numpy as np

from .kan import KanSpec, forward_batch, param_count

__all__ = [
    "BoundReport",
    "CoverResult",
    "lipschitz_K",
    "layer_lipschitz_C",
    "activation_bound",
    "entropy_bound",
    "cover_size",
    "verify_lipschitz",
    "verify_activation",
    "brute_force_cover",
    "default_tiny_instances",
    "TINY_SPEC",
]


@dataclass
class BoundReport:
    value: float
    empirical_max: float
    trials: int
    config: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.empirical_max <= 1 + 1e-9

    @property
    def slack(self) -> float:
        """Factor by which the bound exceeds the worst observation."""
        return math.inf if self.empirical_max == 0 else 1.0 / self.empirical_max

    def to_dict(self) -> dict:
        return {"value": self.value, "empirical_max": self.empirical_max,
                "trials": self.trials, "passed": self.passed, "config": self.config}


def _amax(spec: KanSpec) -> float:
    a = max(abs(spec.a0), abs(spec.b0))
    if a < 1:
        raise ValueError("need |a0| v |b0| >= 1")
    return a


def _widths(spec) -> tuple:
    return (spec.d,) + (spec.D,) * (spec.L - 1) + (1,)


def lipschitz_K(spec: KanSpec, B: float) -> float:
    """``2(|a0|v|b0|) L^2 m^{L-1} d ((G+2m)/H + 1)^{L-1} D^{L-1} B^L``.

    Pure arithmetic: ``spec`` may be any object with the architecture fields.
    """
    if B < 1:
        raise ValueError("B must be at least 1")
    s = spec
    return (2 * _amax(s) * s.L**2 * s.m ** (s.L - 1) * s.d
            * ((s.G + 2 * s.m) / s.H + 1) ** (s.L - 1) * s.D ** (s.L - 1) * B**s.L)


def layer_lipschitz_C(spec: KanSpec, weight_sup_per_layer, l: int) -> float:
    """``prod_{k=l}^{L-1} (2m/Delta_k + 1) ||W_k||_inf D_k``."""
    if not 1 <= l <= spec.L - 1:
        raise IndexError("l must lie in 1..L-1")
    w = np.broadcast_to(np.asarray(weight_sup_per_layer, dtype=float), (spec.L,))
    out = 1.0
    for k in range(l, spec.L):
        delta = spec.knots(k).spacing
        out *= (2 * spec.m / delta + 1) * w[k] * spec.widths[k]
    return out


def activation_bound(spec: KanSpec, B: float, l: int | None = None) -> float:
    """Sup-norm bound on the layer-``l`` output for ``||theta||_inf <= B``.

    Pure arithmetic: ``spec`` may be any object with the architecture fields.
    """
    l = spec.L - 1 if l is None else l
    if not 0 <= l <= spec.L - 1:
        raise IndexError("l must lie in 0..L-1")
    widths = np.prod(_widths(spec)[: l + 1], dtype=float)
    return 2 * _amax(spec) * widths * sum(B ** (h + 1) for h in range(l + 1))


def entropy_bound(spec: KanSpec | None, B: float, S: int, eps: float, *,
                  T: int | None = None, K: float | None = None) -> float:
    """``S log(eT/S) + S log(1 + B K / eps)``."""
    T = param_count(spec) if T is None else int(T)
    K = lipschitz_K(spec, B) if K is None else float(K)
    if not 1 <= S <= T:
        raise ValueError("need 1 <= S <= T")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if B < 1:
        raise ValueError("B must be at least 1")
    return S * math.log(math.e * T / S) + S * math.log(1 + B * K / eps)


def cover_size(T: int, S: int, B: float, eps: float, K: float) -> int:
    """``sum_{s=1}^S C(T, s) ceil(B/delta)^s`` with ``delta = eps/K``."""
    cells = _cells(B, eps / K)
    return sum(math.comb(T, s) * cells**s for s in range(1, S + 1))


def _cells(B: float, delta: float) -> int:
    r = B / delta
    c = round(r)
    return int(c) if abs(r - c) <= 1e-12 * max(1.0, r) else int(math.ceil(r))


def _input_grid(spec: KanSpec, grid_n: int) -> np.ndarray:
    """Tensor grid on the unit cube plus the first-layer knots inside it."""
    g = np.linspace(0.0, 1.0, grid_n)
    k = spec.knots(0).knots
    g = np.unique(np.concatenate([g, k[(k >= 0) & (k <= 1)]]))
    return np.array(list(product(g, repeat=spec.d))) if spec.d > 1 else g[:, None]


def _sample_pairs(spec, B, eps, R, rng, sparse):
    T = spec.T
    th = rng.uniform(-B, B, (R, T))
    if sparse:
        S = max(1, T // 10)
        mask = np.zeros((R, T), dtype=bool)
        for r in range(R):
            mask[r, rng.choice(T, S, replace=False)] = True
        th = np.where(mask, th, 0.0)
        pert = np.where(mask, rng.uniform(-eps, eps, (R, T)), 0.0)
    else:
        pert = rng.uniform(-eps, eps, (R, T))
    # push some coordinates to the extremes of the box and of the perturbation
    ext = rng.random((R, T)) < 0.3
    th = np.where(ext & (th != 0), B * np.sign(th), th)
    pert = np.where(ext, eps * np.sign(pert), pert)
    th2 = np.clip(th + pert, -B, B)
    return th, th2


def verify_lipschitz(spec: KanSpec, B: float, eps: float, trials: int = 1000,
                     grid_n: int = 25, rng=None, chunk: int = 64) -> BoundReport:
    """Max over sampled pairs of ``sup_x |f_theta - f_theta*| / (eps K)``."""
    rng = np.random.default_rng(rng)
    K = lipschitz_K(spec, B)
    X = _input_grid(spec, grid_n)
    worst = 0.0
    done = 0
    while done < trials:
        R = min(chunk, trials - done)
        th, th2 = _sample_pairs(spec, B, eps, R, rng, sparse=(done // chunk) % 2 == 1)
        out = forward_batch(spec, np.concatenate([th, th2]), X)
        diff = np.abs(out[:R] - out[R:])
        worst = max(worst, float(diff.max()) / (eps * K))
        done += R
    return BoundReport(eps * K, worst, trials,
                       {"spec": spec.to_dict(), "B": B, "eps": eps, "grid_n": grid_n, "K": K})


def verify_activation(spec: KanSpec, B: float, trials: int = 1000, n_x: int = 100,
                      rng=None, chunk: int = 100) -> BoundReport:
    """Max of ``|f_theta(x)| / activation_bound`` over random networks and inputs."""
    rng = np.random.default_rng(rng)
    bound = activation_bound(spec, B)
    worst = 0.0
    done = 0
    while done < trials:
        R = min(chunk, trials - done)
        th = rng.uniform(-B, B, (R, spec.T))
        X = rng.uniform(spec.a0, spec.b0, (n_x, spec.d))
        worst = max(worst, float(np.abs(forward_batch(spec, th, X)).max()) / bound)
        done += R
    return BoundReport(bound, worst, trials, {"spec": spec.to_dict(), "B": B})


TINY_SPEC = KanSpec(L=2, d=1, D=1, G0=1, G=1, H=1.0, m=1)


def default_tiny_instances() -> list[dict]:
    """Grid of tiny covering instances (``T = 6``)."""
    out = []
    for H, B, S, eps in product((1.0, 2.0), (1.0, 2.0), (1, 2), (0.5, 2.0)):
        spec = KanSpec(L=2, d=1, D=1, G0=1, G=1, H=H, m=1)
        out.append({"spec": spec, "B": B, "S": S, "eps": eps})
    return out


@dataclass
class CoverResult:
    size: int
    log_size: float
    entropy: float
    cells: int
    delta: float
    max_ratio: float
    n_check: int

    @property
    def valid(self) -> bool:
        return self.max_ratio <= 1.0

    def __int__(self) -> int:
        return self.size

    def to_dict(self) -> dict:
        return {"size": self.size, "log_size": self.log_size, "entropy": self.entropy,
                "cells": self.cells, "delta": self.delta, "max_ratio": self.max_ratio,
                "valid": self.valid, "n_check": self.n_check}


def brute_force_cover(spec_tiny: KanSpec, B: float, S: int, eps: float, rng=None,
                      n_check: int = 1000, grid_n: int = 201,
                      enumerate_limit: int = 200_000) -> CoverResult:
    """Explicit cover from the entropy argument, with a random validity check.

    Centers form a grid of pitch ``2B/cells <= 2 delta`` on ``[-B, B]`` per
    active coordinate, ``delta = eps/K``.  Each random ``S``-sparse function
    with ``||theta||_inf <= B`` is mapped to the cover element on its support
    with nearest centers, and the sampled sup-norm distance must be at most
    ``eps``.  When the cover is small it is also enumerated and counted.
    """
    T = spec_tiny.T
    if T > 6 or S > 2:
        raise ValueError("brute_force_cover is limited to T <= 6 and S <= 2")
    if not 1 <= S <= T:
        raise ValueError("need 1 <= S <= T")
    rng = np.random.default_rng(rng)
    K = lipschitz_K(spec_tiny, B)
    delta = eps / K
    cells = _cells(B, delta)
    centers = -B + (2 * np.arange(cells) + 1) * B / cells
    size = cover_size(T, S, B, eps, K)
    if size <= enumerate_limit:
        count = sum(1 for s in range(1, S + 1) for _ in combinations(range(T), s)
                    for _ in product(range(cells), repeat=s))
        if count != size:
            raise AssertionError("enumerated cover size disagrees with the count")
    X = np.linspace(0.0, 1.0, grid_n)[:, None]
    th = np.zeros((n_check, T))
    for r in range(n_check):
        s = rng.integers(1, S + 1)
        sup = rng.choice(T, s, replace=False)
        th[r, sup] = rng.uniform(-B, B, s)
    idx = np.clip(np.round((th + B) * cells / (2 * B) - 0.5), 0, cells - 1).astype(int)
    proj = np.where(th != 0, centers[idx], 0.0)
    dist = np.abs(forward_batch(spec_tiny, th, X) - forward_batch(spec_tiny, proj, X)).max(axis=1)
    return CoverResult(size, math.log(size), entropy_bound(spec_tiny, B, S, eps), cells,
                       delta, float(dist.max() / eps), n_check)
