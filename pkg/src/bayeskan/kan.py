"""Fixed-knot B-spline Kolmogorov-Arnold networks.

An edge of layer ``l`` carries ``phi(x) = sum_k theta_k B_k(x) + theta_0 silu(x)``
with ``k = 1..G_l+m`` over the layer's knot vector.  Layer widths are
``(d, D, ..., D, 1)``; layer 0 uses knots on ``[a0, b0]`` with ``G0`` intervals,
every other layer uses knots on ``[-H, H]`` with ``G`` intervals.

Parameters are flattened layer-major, then ``(i, j, k)`` lexicographically,
with ``i`` the output node and ``j`` the input node (both 0-based).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np

from .bspline import (
    KnotVector,
    SplineCurve,
    _cell,
    eval_basis,
    eval_spline,
    local_basis,
    make_uniform_knots,
)

__all__ = [
    "KanSpec",
    "ParamVector",
    "RegressionDataset",
    "param_count",
    "silu",
    "edge_eval",
    "forward",
    "forward_batch",
    "clip",
    "clip_forward",
    "log_likelihood",
]


def silu(x):
    x = np.asarray(x, dtype=float)
    return x * 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class KanSpec:
    """Architecture hyperparameters of a KAN."""

    L: int
    d: int
    D: int
    G0: int
    G: int
    H: float
    m: int
    a0: float = -1.0
    b0: float = 2.0

    def __post_init__(self):
        for name in ("L", "d", "D", "G0", "G", "m"):
            v = getattr(self, name)
            if int(v) != v:
                raise ValueError(f"{name} must be an integer")
            object.__setattr__(self, name, int(v))
        if self.L < 2:
            raise ValueError("L must be at least 2")
        if min(self.d, self.D, self.G0, self.G, self.m) < 1:
            raise ValueError("d, D, G0, G, m must be positive")
        if not self.H > 0:
            raise ValueError("H must be positive")
        if max(abs(self.a0), abs(self.b0)) < 1:
            raise ValueError("need |a0| v |b0| >= 1")
        k0 = self.knots(0)
        if k0.xi0 > 0 or k0.xiG < 1:
            raise ValueError(
                "first-layer estimation interval "
                f"[{k0.xi0:.4g}, {k0.xiG:.4g}] does not cover [0, 1]"
            )

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.d,) + (self.D,) * (self.L - 1) + (1,)

    def grid(self, l: int) -> int:
        return self.G0 if l == 0 else self.G

    def n_coef(self, l: int) -> int:
        """Coefficients per edge of layer ``l``, silu included."""
        return self.grid(l) + self.m + 1

    def knots(self, l: int) -> KnotVector:
        if l == 0:
            return make_uniform_knots(self.a0, self.b0, self.G0, self.m)
        return make_uniform_knots(-self.H, self.H, self.G, self.m)

    @cached_property
    def layer_offsets(self) -> np.ndarray:
        w = self.widths
        sizes = [w[l] * w[l + 1] * self.n_coef(l) for l in range(self.L)]
        return np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)

    @property
    def T(self) -> int:
        return int(self.layer_offsets[-1])

    def flat_index(self, l, i, j, k):
        """Flat index of ``theta^{(l)}_{i,j,k}``; vectorized over arrays."""
        w = self.widths
        l = np.asarray(l)
        if l.ndim == 0:
            li = int(l)
            return int(self.layer_offsets[li] + (i * w[li] + j) * self.n_coef(li) + k)
        din = np.array(w[:-1])[l]
        nc = np.array([self.n_coef(q) for q in range(self.L)])[l]
        return self.layer_offsets[l] + (np.asarray(i) * din + j) * nc + k

    def unflatten(self, t):
        """Inverse of :meth:`flat_index`, returning ``(l, i, j, k)`` arrays."""
        t = np.asarray(t, dtype=np.int64)
        if np.any((t < 0) | (t >= self.T)):
            raise IndexError("flat index out of range")
        l = np.searchsorted(self.layer_offsets, t, side="right") - 1
        w = self.widths
        din = np.array(w[:-1])[l]
        nc = np.array([self.n_coef(q) for q in range(self.L)])[l]
        r = t - self.layer_offsets[l]
        k = r % nc
        e = r // nc
        return l, e // din, e % din, k

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "KanSpec":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def param_count(spec: KanSpec) -> int:
    """``dD(G0+m+1) + ((L-2)D^2 + D)(G+m+1)``."""
    s = spec
    return s.d * s.D * (s.G0 + s.m + 1) + ((s.L - 2) * s.D**2 + s.D) * (s.G + s.m + 1)


class _Layer:
    """Active edges of one layer in a gather-friendly layout."""

    def __init__(self, spec: KanSpec, l: int, idx: np.ndarray, val: np.ndarray):
        self.l = l
        self.knots = spec.knots(l)
        m = spec.m
        nb = self.knots.n_basis
        _, i, j, k = spec.unflatten(idx)
        edge_key = i * spec.widths[l] + j
        keys, inv = np.unique(edge_key, return_inverse=True)
        self.out_node = keys // spec.widths[l]
        self.in_node = keys % spec.widths[l]
        self.silu = np.zeros(len(keys))
        # spline coefficients padded by m zeros on both sides
        self.coef = np.zeros((len(keys), nb + 2 * m))
        is_silu = k == 0
        np.add.at(self.silu, inv[is_silu], val[is_silu])
        self.coef[inv[~is_silu], k[~is_silu] - 1 + m] = val[~is_silu]
        self.has_silu = bool(np.any(self.silu != 0))
        self.nodes, self.node_pos = np.unique(self.in_node, return_inverse=True)
        starts = np.flatnonzero(np.r_[True, np.diff(self.out_node) != 0]) if len(keys) else \
            np.zeros(0, dtype=np.int64)
        self.group_starts = starts
        self.group_nodes = self.out_node[starts]
        self.width_out = spec.widths[l + 1]

    def __call__(self, z: np.ndarray) -> np.ndarray:
        n = z.shape[0]
        out = np.zeros((n, self.width_out))
        E = len(self.out_node)
        if E == 0:
            return out
        m = self.knots.m
        zs = z[:, self.nodes]
        span, f, valid = _cell(self.knots, zs)
        loc = local_basis(f, m) * valid[..., None]
        span_e = span[:, self.node_pos]
        loc_e = loc[:, self.node_pos, :]
        cols = span_e[..., None] + np.arange(m + 1)
        rows = np.arange(E)[None, :, None]
        vals = np.sum(self.coef[rows, cols] * loc_e, axis=-1)
        if self.has_silu:
            vals += self.silu * silu(zs[:, self.node_pos])
        out[:, self.group_nodes] = np.add.reduceat(vals, self.group_starts, axis=1)
        return out


class ParamVector:
    """Flattened KAN parameters ``theta`` with inclusion mask ``gamma``.

    Storage is sparse: sorted active flat indices plus their values.  Dense
    views ``theta`` and ``gamma`` are materialized on request.
    """

    def __init__(self, spec: KanSpec, index=(), value=()):
        index = np.asarray(index, dtype=np.int64).ravel()
        value = np.asarray(value, dtype=float).ravel()
        if index.shape != value.shape:
            raise ValueError("index and value lengths differ")
        order = np.argsort(index, kind="stable")
        index, value = index[order], value[order]
        if index.size and (index[0] < 0 or index[-1] >= spec.T):
            raise IndexError("active index out of range")
        if np.any(np.diff(index) == 0):
            raise ValueError("duplicate active index")
        index.setflags(write=False)
        value.setflags(write=False)
        self.spec = spec
        self.index = index
        self.value = value
        self._layers = None

    @classmethod
    def zeros(cls, spec: KanSpec) -> "ParamVector":
        return cls(spec)

    @classmethod
    def from_dense(cls, spec: KanSpec, theta, gamma=None) -> "ParamVector":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (spec.T,):
            raise ValueError("theta length must equal param_count(spec)")
        if gamma is None:
            gamma = theta != 0
        gamma = np.asarray(gamma, dtype=bool)
        if gamma.shape != theta.shape:
            raise ValueError("gamma length must equal theta length")
        if np.any(theta[~gamma] != 0):
            raise ValueError("theta must vanish off the mask")
        idx = np.flatnonzero(gamma)
        return cls(spec, idx, theta[idx])

    @classmethod
    def from_entries(cls, spec: KanSpec, entries) -> "ParamVector":
        """Build from an iterable of ``((l, i, j, k), value)``; repeated keys add."""
        acc: dict[int, float] = {}
        for (l, i, j, k), v in entries:
            t = spec.flat_index(l, i, j, k)
            acc[t] = acc.get(t, 0.0) + float(v)
        keys = sorted(acc)
        return cls(spec, keys, [acc[t] for t in keys])

    @property
    def T(self) -> int:
        return self.spec.T

    @property
    def theta(self) -> np.ndarray:
        out = np.zeros(self.T)
        out[self.index] = self.value
        return out

    @property
    def gamma(self) -> np.ndarray:
        out = np.zeros(self.T, dtype=bool)
        out[self.index] = True
        return out

    @property
    def nnz(self) -> int:
        """Number of nonzero coefficients."""
        return int(np.count_nonzero(self.value))

    @property
    def n_active(self) -> int:
        return int(self.index.size)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.value))) if self.value.size else 0.0

    def edge_coeffs(self, l: int, i: int, j: int) -> np.ndarray:
        """Coefficients ``(theta_0, ..., theta_{G_l+m})`` of one edge."""
        lo = self.spec.flat_index(l, i, j, 0)
        hi = lo + self.spec.n_coef(l)
        a, b = np.searchsorted(self.index, [lo, hi])
        out = np.zeros(self.spec.n_coef(l))
        out[self.index[a:b] - lo] = self.value[a:b]
        return out

    def layers(self) -> list[_Layer]:
        if self._layers is None:
            off = self.spec.layer_offsets
            cuts = np.searchsorted(self.index, off)
            self._layers = [
                _Layer(self.spec, l, self.index[cuts[l] : cuts[l + 1]],
                       self.value[cuts[l] : cuts[l + 1]])
                for l in range(self.spec.L)
            ]
        return self._layers

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ParamVector)
            and self.spec == other.spec
            and np.array_equal(self.index, other.index)
            and np.array_equal(self.value, other.value)
        )

    def __repr__(self) -> str:
        return f"ParamVector(T={self.T}, active={self.n_active})"

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "T": self.T,
            "active": [[int(t), float(v)] for t, v in zip(self.index, self.value)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ParamVector":
        spec = KanSpec.from_dict(d["spec"])
        if "T" in d and int(d["T"]) != spec.T:
            raise ValueError("stored T disagrees with spec")
        act = d.get("active", [])
        return cls(spec, [a[0] for a in act], [a[1] for a in act])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ParamVector":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class RegressionDataset:
    """Design ``X`` in ``[0,1]^d`` and responses ``y``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError("X and y have different numbers of rows")
        if X.size and (np.any(X < 0) or np.any(X > 1) or not np.all(np.isfinite(X))):
            raise ValueError("design rows must lie in [0,1]^d")
        if not np.all(np.isfinite(y)):
            raise ValueError("responses must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def d(self) -> int:
        return int(self.X.shape[1])


def edge_eval(spec: KanSpec, coeffs, l: int, x) -> np.ndarray:
    """Evaluate one edge of layer ``l`` with coefficients ``(theta_0, ..., )``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (spec.n_coef(l),):
        raise ValueError("edge coefficient length must be G_l+m+1")
    curve = SplineCurve(spec.knots(l), coeffs[1:])
    return eval_spline(curve, x) + coeffs[0] * silu(x)


def _as_rows(spec: KanSpec, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1 and (x.size == spec.d)
    if x.ndim == 0 or (x.ndim == 1 and single):
        return x.reshape(1, spec.d), True
    if x.ndim == 1 and spec.d == 1:
        return x.reshape(-1, 1), False
    if x.ndim != 2 or x.shape[1] != spec.d:
        raise ValueError(f"expected inputs with {spec.d} columns")
    return x, False


def forward(params: ParamVector, x, chunk: int = 4096) -> np.ndarray | float:
    """Network output at one point (scalar) or at the rows of ``x``."""
    X, single = _as_rows(params.spec, x)
    layers = params.layers()
    out = np.empty(X.shape[0])
    for a in range(0, X.shape[0], chunk):
        z = X[a : a + chunk]
        for lay in layers:
            z = lay(z)
        out[a : a + chunk] = z[:, 0]
    return float(out[0]) if single else out


def forward_batch(spec: KanSpec, thetas, x) -> np.ndarray:
    """Outputs of many dense parameter vectors at shared inputs.

    ``thetas`` has shape ``(R, T)``; returns an ``(R, n)`` array.  Intended for
    small architectures where dense tensors are cheap.
    """
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    X, _ = _as_rows(spec, x)
    R, n = thetas.shape[0], X.shape[0]
    w = spec.widths
    z = X
    for l in range(spec.L):
        kn = spec.knots(l)
        nc = spec.n_coef(l)
        W = thetas[:, spec.layer_offsets[l] : spec.layer_offsets[l + 1]]
        W = W.reshape(R, w[l + 1], w[l] * nc).transpose(0, 2, 1)
        feats = np.concatenate([silu(z)[..., None], eval_basis(kn, z)], axis=-1)
        # layer 0 features are shared by all parameter vectors
        z = np.matmul(feats.reshape(feats.shape[:-2] + (w[l] * nc,)), W)
    return z[..., 0]


def clip(v):
    return np.clip(v, -1.0, 1.0)


def clip_forward(params: ParamVector, x):
    out = clip(forward(params, x))
    return float(out) if np.ndim(out) == 0 else out


def log_likelihood(params: ParamVector, sigma2: float, data: RegressionDataset) -> float:
    """Gaussian log-likelihood with mean ``clip(forward(x))``."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if data.n == 0:
        return 0.0
    r = data.y - clip(forward(params, data.X))
    return float(-0.5 * data.n * math.log(2 * math.pi * sigma2) - np.sum(r * r) / (2 * sigma2))
