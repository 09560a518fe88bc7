"""Sparse Bayesian Kolmogorov-Arnold networks with fixed-knot B-spline edges."""

__version__ = "0.1.0"

from .bspline import KnotVector, SplineCurve, eval_basis, eval_spline, make_uniform_knots
from .kan import KanSpec, ParamVector, RegressionDataset, forward, param_count
from .planner import ArchitecturePlan, SmoothnessWarning, plan_adaptive, plan_compositional, plan_sas
from .priors import Bernoulli, FixedCardinality, PriorSpec, Sigma2Prior, SlabSpec
from .besov import SmoothnessProfile, test_function
from .approx import assemble, build_approximator, l2_error, select_terms
from .inference import ChainConfig, posterior_l2_error, run_chains, run_mcmc
from .estimators import BayesianKANRegressor

__all__ = [
    "KnotVector", "SplineCurve", "eval_basis", "eval_spline", "make_uniform_knots",
    "KanSpec", "ParamVector", "RegressionDataset", "forward", "param_count",
    "ArchitecturePlan", "SmoothnessWarning", "plan_adaptive", "plan_compositional", "plan_sas",
    "Bernoulli", "FixedCardinality", "PriorSpec", "Sigma2Prior", "SlabSpec",
    "SmoothnessProfile", "test_function",
    "assemble", "build_approximator", "l2_error", "select_terms",
    "ChainConfig", "posterior_l2_error", "run_chains", "run_mcmc",
    "BayesianKANRegressor",
]
