"""Acceptance criteria, each reporting one PASS/FAIL line."""

import math
import time
import warnings

import numpy as np
import pytest

from _oracles import conjugate_oracle, detailed_balance_check, prior_recovery
from conftest import ACCEPTANCE
from bayeskan.approx import (
    assemble,
    build_approximator,
    cardinal_spline,
    hidden_knots,
    l2_error,
    product_module,
    psi_edge,
    select_terms,
    tensor_eval,
)
from bayeskan.besov import SmoothnessProfile
from bayeskan.besov import test_function as make_target
from bayeskan.bounds import brute_force_cover, default_tiny_instances, verify_lipschitz
from bayeskan.bspline import (
    SplineCurve,
    derivative_curve,
    eval_basis,
    eval_spline,
    make_uniform_knots,
    polynomial_coeffs,
)
from bayeskan.experiments import fit_slope, rate_study
from bayeskan.kan import KanSpec
from bayeskan.planner import (
    CompositionalSpec,
    SmoothnessWarning,
    beta_exponent,
    check_rho,
    compositional_indices,
    intrinsic_dimension,
    intrinsic_smoothness,
    plan_compositional,
    plan_sas,
)
from bayeskan.priors import SlabSpec, check_B1, check_B2


def report(num, title, ok, detail, t0):
    line = f"CRITERION {num} {'PASS' if ok else 'FAIL'} {title}: {detail} ({time.time() - t0:.1f}s)"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


def test_criterion_01_bspline_suite():
    t0 = time.time()
    rng = np.random.default_rng(101)
    worst_pu, min_val, support_ok = 0.0, np.inf, True
    for _ in range(25):
        m, G = int(rng.integers(2, 6)), int(rng.integers(1, 21))
        a = rng.uniform(-3, 0)
        kn = make_uniform_knots(a, a + rng.uniform(1, 5), G, m)
        x = rng.uniform(kn.xi0, kn.xiG, 1000)
        B = eval_basis(kn, x)
        worst_pu = max(worst_pu, float(np.abs(B.sum(axis=1) - 1).max()))
        min_val = min(min_val, float(B.min()))
        t = kn.knots
        for b in range(kn.n_basis):
            outside = (x < t[b]) | (x > t[b + m + 1])
            support_ok &= bool(np.all(B[outside, b] == 0))
        support_ok &= bool(np.all(np.count_nonzero(B, axis=1) <= m + 1))
    ok = worst_pu <= 1e-12 and min_val >= 0 and support_ok
    report(1, "B-spline suite", ok,
           f"max |sum-1| = {worst_pu:.2e}, min value = {min_val:.2e}, support exact = {support_ok}",
           t0)


def test_criterion_02_derivative_oracle():
    t0 = time.time()
    rng = np.random.default_rng(102)
    h = 1e-5
    worst_rel, bound_ok = 0.0, True
    for _ in range(100):
        m, G = int(rng.integers(2, 6)), int(rng.integers(1, 21))
        kn = make_uniform_knots(-1.0, 2.0, G, m)
        curve = SplineCurve(kn, rng.normal(size=kn.n_basis))
        dc = derivative_curve(curve)
        x = rng.uniform(kn.xi0 + 2 * h, kn.xiG - 2 * h, 200)
        # central differences are exact only on a polynomial piece
        x = x[np.min(np.abs(x[:, None] - kn.knots[None, :]), axis=1) > 2 * h]
        fd = (eval_spline(curve, x + h) - eval_spline(curve, x - h)) / (2 * h)
        d = eval_spline(dc, x)
        scale = max(1.0, float(np.abs(dc.coeffs).max()))
        worst_rel = max(worst_rel, float(np.abs(d - fd).max()) / scale)
        grid = np.linspace(kn.xi0, kn.xiG, 2001)
        bound_ok &= bool(np.all(np.abs(eval_spline(dc, grid)) <= np.abs(dc.coeffs).max() + 1e-12))
    ok = worst_rel <= 1e-6 and bound_ok
    report(2, "derivative oracle", ok,
           f"max relative FD error = {worst_rel:.2e}, sup bound held = {bound_ok}", t0)


def test_criterion_03_exact_gadgets():
    t0 = time.time()
    rng = np.random.default_rng(103)
    mono = 0.0
    for m in range(1, 6):
        kn = make_uniform_knots(-3.0, 3.0, 10, m)
        x = np.linspace(kn.xi0, kn.xiG, 501)
        for p in range(m + 1):
            mono = max(mono, float(np.abs(eval_spline(polynomial_coeffs(p, kn), x) - x**p).max()))
    kn = hidden_knots(3, 2)
    prod = 0.0
    for fan_in in range(1, 9):
        X = rng.random((1000, fan_in))
        prod = max(prod, float(np.abs(product_module(fan_in, kn)(X, kn)[:, 0] - X.prod(1)).max()))
    psi = 0.0
    for m in range(2, 6):
        hk = hidden_knots(m + 2, m)
        z = np.linspace(-hk.b, hk.b, 4001)
        psi = max(psi, float(np.abs(eval_spline(SplineCurve(hk, psi_edge(hk)), z)
                                    - cardinal_spline(m, z)).max()))
    ok = mono <= 1e-10 and prod <= 1e-10 and psi <= 1e-10
    report(3, "exact gadgets", ok,
           f"monomial {mono:.2e}, product {prod:.2e}, psi {psi:.2e}", t0)


def test_criterion_04_assembly_equivalence():
    t0 = time.time()
    rng = np.random.default_rng(104)
    worst = 0.0
    cases = []
    for d in (1, 2, 3):
        prof = SmoothnessProfile((2.0,) * d)
        f0 = make_target("anisotropic_lacunary", prof.s)
        for N in (1, 8, 32):
            terms = select_terms(f0, prof, N, 2)
            real = assemble(terms, prof, 2, N=N)
            X = rng.random((1000, d))
            err = float(np.abs(real(X) - tensor_eval(terms, X, prof.s, 2)).max())
            worst = max(worst, err)
            cases.append(f"d={d},N={N}:{err:.1e}")
    report(4, "assembly/oracle equivalence", worst <= 1e-8,
           f"max error {worst:.2e} [{' '.join(cases)}]", t0)


def test_criterion_05_approximation_slope():
    t0 = time.time()
    f0 = make_target("smooth1")
    prof = f0.declared_profile
    Ns = [8, 16, 32, 64, 128, 256]
    errs = [l2_error(f0, build_approximator(f0, prof, N, 2), mc_n=20000, rng=N).value
            for N in Ns]
    slope = fit_slope(Ns, errs, log_factor=False)["slope"]
    target = -prof.s_tilde
    ok = abs(slope - target) <= 0.25
    report(5, "approximation slope", ok,
           f"slope {slope:.3f} vs {target:.3f} +- 0.25; errors {[round(e, 4) for e in errs]}", t0)


def test_criterion_06_lipschitz_bound():
    t0 = time.time()
    spec = KanSpec(L=3, d=2, D=4, G0=6, G=8, H=2.0, m=2)
    res = {B: verify_lipschitz(spec, B, 0.1 * B, trials=10_000, rng=int(B)) for B in (1.0, 3.0)}
    worst = max(r.empirical_max for r in res.values())
    report(6, "Lipschitz bound", worst <= 1 + 1e-9,
           ", ".join(f"B={B:g}: empirical_max {r.empirical_max:.2e}" for B, r in res.items()), t0)


def test_criterion_07_entropy_bound():
    t0 = time.time()
    ok, worst_gap, worst_ratio = True, -np.inf, 0.0
    insts = default_tiny_instances()
    for i, inst in enumerate(insts):
        r = brute_force_cover(inst["spec"], inst["B"], inst["S"], inst["eps"], rng=i, n_check=1000)
        ok &= r.log_size <= r.entropy and r.valid
        worst_gap = max(worst_gap, r.log_size - r.entropy)
        worst_ratio = max(worst_ratio, r.max_ratio)
    report(7, "entropy bound", ok,
           f"{len(insts)} instances, max(log size - bound) = {worst_gap:.3f}, "
           f"max cover distance / eps = {worst_ratio:.3f}", t0)


def test_criterion_08_prior_checkers():
    t0 = time.time()
    s, C_tau = (2.0, 2.0), 2.0
    st = intrinsic_smoothness(s)
    beta = beta_exponent(s, math.inf)["beta"]
    results = []
    ok = True
    for n in (1e3, 1e6):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SmoothnessWarning)
            plan = plan_sas(n, s, math.inf, 2)
        tau = C_tau * n ** (beta / (2 * st + 1))
        for slab in (SlabSpec("uniform", tau), SlabSpec("gaussian", tau),
                     SlabSpec("laplace", tau), SlabSpec("subweibull", tau, alpha=0.5)):
            b1 = check_B1(slab, plan.Bstar, n)
            b2 = check_B2(slab, Bstar=plan.Bstar)
            ok &= b1.passed and b2.passed
            results.append(f"{slab.family}@{n:g}:{'ok' if b1.passed and b2.passed else 'no'}")
        rho_ok = check_rho(1 / plan.T, plan.T, plan.S, n).passed
        rho_const = check_rho(0.5, plan.T, plan.S, n).passed
        ok &= rho_ok and not rho_const
        results.append(f"rho=1/T@{n:g}:{rho_ok} rho=0.5@{n:g}:{rho_const}")
    report(8, "prior condition checkers", ok, " ".join(results), t0)


def test_criterion_09_sampler_correctness():
    t0 = time.time()
    pr = prior_recovery(draws=10_000)
    co = conjugate_oracle(iters=3000, burnin=500)
    db = detailed_balance_check()
    zmax = float(np.abs(co["z"]).max())
    ok = (pr["ks_slab"] < 0.03 and pr["ks_sigma2"] < 0.03 and zmax <= 3
          and db["stationary_error"] <= 1e-6)
    report(9, "sampler correctness", ok,
           f"KS slab {pr['ks_slab']:.4f}, KS sigma2 {pr['ks_sigma2']:.4f}; conjugate max|z| "
           f"{zmax:.2f} (min ESS {co['ess'].min():.0f}); stationary error "
           f"{db['stationary_error']:.1e} on {db['n_states']} states", t0)


@pytest.fixture(scope="module")
def isotropic_study():
    t0 = time.time()
    res = rate_study("smooth1", replicates=5, seed=0)
    return res, time.time() - t0


@pytest.mark.slow
def test_criterion_10_contraction_scaling(isotropic_study):
    t0 = time.time()
    res, elapsed = isotropic_study
    s = res.summary
    ok = abs(s["fit_slope"] - s["target_slope"]) <= 0.15
    report(10, "contraction scaling", ok,
           f"slope {s['fit_slope']:.3f} (SE {s['fit_se']:.3f}) vs {s['target_slope']:.3f} +- 0.15, "
           f"study {elapsed:.0f}s", t0)


@pytest.mark.slow
def test_criterion_11_anisotropy_benefit(isotropic_study):
    t0 = time.time()
    iso, _ = isotropic_study
    aniso = rate_study("anisotropic_lacunary", s=(4.0, 4.0 / 3.0), replicates=5, seed=1)
    a, b = aniso.summary["fit_slope"], iso.summary["fit_slope"]
    ok = abs(a - b) <= 0.1
    report(11, "anisotropy benefit", ok,
           f"anisotropic slope {a:.3f} vs isotropic {b:.3f}, difference {abs(a - b):.3f} <= 0.1",
           t0)


def test_criterion_12_planner_arithmetic():
    t0 = time.time()
    checks = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmoothnessWarning)
        p = plan_sas(1000, (2, 2), math.inf, 2)
        p2 = plan_sas(1000, (2, 2), math.inf, 2, G0=2)
        comp = CompositionalSpec((1, 1, 1), (1, 1), ((2,), (3,)))
        pc = plan_compositional(math.e, comp, 2)
    checks["plan"] = ((p.N, p.L0, p.D, p.G, p.H, p.S) == (10, 5, 40, 24, 7, 10)
                      and abs(p.Bstar - math.sqrt(10)) < 1e-12 and abs(p.eps_n - 0.2628) < 1e-4)
    checks["T"] = p2.T == 131080
    idx = compositional_indices(comp)
    checks["comp"] = (idx.s_star == 2.0 and idx.j_star == 1
                      and abs(pc.eps_n - math.exp(-0.4)) < 1e-12)
    b1, b2 = beta_exponent((2, 4), math.inf), beta_exponent((2, 2), 1)
    checks["beta"] = (b1 == {"beta": 0.5, "kappa": 0.0, "omega": 0.0}
                      and (b2["omega"], b2["kappa"], b2["beta"]) == (0.5, 2.0, 1.5))
    rng = np.random.default_rng(112)
    worst = 0.0
    for _ in range(100):
        s = rng.uniform(0.5, 6.0, size=int(rng.integers(1, 6)))
        st = intrinsic_smoothness(s)
        worst = max(worst, abs(100 ** (-st / (2 * st + 1))
                               - 100 ** (-s.min() / (2 * s.min() + intrinsic_dimension(s)))))
    checks["identity"] = worst <= 1e-12
    report(12, "planner arithmetic", all(checks.values()),
           " ".join(f"{k}:{v}" for k, v in checks.items()) + f" (identity gap {worst:.1e})", t0)
