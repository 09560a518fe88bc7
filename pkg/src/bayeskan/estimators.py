"""scikit-learn style estimator around the dictionary KAN sampler."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .besov import SmoothnessProfile
from .experiments import build_dictionary_model, fit_dictionary
from .inference import ChainConfig
from .kan import RegressionDataset
from .priors import SlabSpec


class BayesianKANRegressor(RegressorMixin, BaseEstimator):
    """Sparse Bayesian KAN regression on ``[0, 1]^d``.

    The hidden layers realize a fixed tensor cardinal-spline dictionary
    sized by the architecture plan for the training sample size; the last
    layer carries a fixed-cardinality spike-and-slab prior and is sampled
    by Metropolis-within-Gibbs.  Predictions are posterior means of the
    clipped network.

    Parameters
    ----------
    smoothness : sequence of float or None
        Smoothness vector ``s``; ``(2, ..., 2)`` when None.
    m : int
        Spline degree.
    S_0, C_N : float
        Sparsity and model-size constants of the plan.
    slab, tau : str, float
        Slab family and scale.
    iters, burnin, thin : int
        Chain length, discarded prefix and thinning.
    n_chains : int
        Independent chains, pooled for prediction.
    random_state : int or None
    """

    def __init__(self, smoothness=None, m=2, S_0=4.0, C_N=1.0, slab="gaussian", tau=1.0,
                 iters=600, burnin=300, thin=5, n_chains=1, random_state=None):
        self.smoothness = smoothness
        self.m = m
        self.S_0 = S_0
        self.C_N = C_N
        self.slab = slab
        self.tau = tau
        self.iters = iters
        self.burnin = burnin
        self.thin = thin
        self.n_chains = n_chains
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if np.any((X < 0) | (X > 1)):
            raise ValueError("inputs must lie in [0, 1]^d")
        d = X.shape[1]
        s = (2.0,) * d if self.smoothness is None else tuple(np.atleast_1d(self.smoothness))
        if len(s) != d:
            raise ValueError(f"smoothness has length {len(s)} but X has {d} features")
        self.n_features_in_ = d
        self.model_ = build_dictionary_model(SmoothnessProfile(s), max(len(y), 2), self.m,
                                             C_N=self.C_N, S_0=self.S_0)
        seed = np.random.default_rng(self.random_state).integers(2**31)
        config = ChainConfig(iters=self.iters, burnin=self.burnin, thin=self.thin,
                             seed=int(seed), birth="informed", theta_move="both",
                             gamma_moves=10, p_swap=1.0, p_add=0.0, p_delete=0.0)
        self.chains_ = fit_dictionary(RegressionDataset(X, y), self.model_,
                                      SlabSpec(self.slab, self.tau), config, self.n_chains)
        self.sigma2_ = float(np.mean(np.concatenate([c.sigma2 for c in self.chains_])))
        return self

    def predict(self, X):
        check_is_fitted(self, "chains_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if np.any((X < 0) | (X > 1)):
            raise ValueError("inputs must lie in [0, 1]^d")
        total = sum(c.predict(X) * c.n_draws for c in self.chains_)
        return total / sum(c.n_draws for c in self.chains_)
