"""Command-line interface.

Exit codes: 0 success, 1 runtime failure (including a failed check), 2
validation failure of the inputs.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2


class ValidationError(ValueError):
    pass


def _floats(text) -> list:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    if isinstance(text, (int, float)):
        return [float(text)]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text) -> list:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValidationError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _p(text) -> float:
    if isinstance(text, (int, float)):
        return float(text)
    t = str(text).strip().lower()
    if t in ("inf", "infinity", "oo"):
        return math.inf
    try:
        return float(t)
    except ValueError:
        raise ValidationError(f"invalid p: {text!r}") from None


def _smoothness(args):
    s = _floats(args.s)
    if getattr(args, "d", None) is not None:
        if len(s) == 1:
            s = s * int(args.d)
        elif len(s) != int(args.d):
            raise ValidationError("--d disagrees with the length of --s")
    return tuple(s)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return None
        return v
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _emit(args, command: str, result: dict, table: list) -> None:
    doc = {"command": command, "version": __version__, "seed": getattr(args, "seed", None),
           "result": _jsonable(result)}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    if args.json:
        sys.stdout.write(text)
    else:
        width = max((len(k) for k, _ in table), default=0)
        for k, v in table:
            sys.stdout.write(f"{k:<{width}}  {v}\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


# commands

def cmd_plan(args) -> int:
    from .planner import (CompositionalSpec, SmoothnessWarning, compositional_indices,
                          plan_adaptive, plan_compositional, plan_sas)

    p = _p(args.p)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SmoothnessWarning)
        if args.mode == "sas":
            plan = plan_sas(args.n, _smoothness(args), p, args.m, C_N=args.C_N, S_0=args.S_0,
                            B_0=args.B_0, G0=args.G0, strict=args.strict)
            result = plan.to_dict()
        elif args.mode == "adaptive":
            ap = plan_adaptive({"s_tilde_min": args.s_tilde_min, "s_min": args.s_min}, p,
                               kappa_ad=args.kappa_ad, d=args.d or 1, m=args.m, S_0=args.S_0,
                               G0=args.G0)
            result = {"envelope": ap.to_dict(), "plan_of_N": ap.plan_of_N(args.N).to_dict()}
            plan = ap.plan_of_N(args.N)
        else:
            if not args.layers:
                raise ValidationError("compositional mode needs --layers (JSON)")
            layers = args.layers
            if isinstance(layers, str):
                if os.path.isfile(layers):
                    with open(layers, encoding="utf-8") as fh:
                        layers = json.load(fh)
                else:
                    layers = json.loads(layers)
            cs = CompositionalSpec(tuple(layers["dims"]), tuple(layers["effective_dims"]),
                                   tuple(tuple(v) for v in layers["layer_smoothness"]), p)
            plan = plan_compositional(args.n, cs, args.m, strict=args.strict)
            idx = compositional_indices(cs)
            result = {**plan.to_dict(), "indices": idx.__dict__}
    result["warnings"] = [str(w.message) for w in caught]
    table = [(k, _fmt(getattr(plan, k))) for k in
             ("N", "L0", "D", "G", "H", "G0", "m", "Bstar", "S", "T", "beta", "kappa", "s_tilde",
              "eps_n")]
    table += [("warning", str(w.message)) for w in caught]
    _emit(args, "plan", result, table)
    return EXIT_OK


def _load_data(args):
    from .besov import test_function
    from .experiments import read_dataset, simulate

    if args.data:
        return read_dataset(args.data), None
    if not args.simulate:
        raise ValidationError("give --data FILE or --simulate TARGET")
    f0 = test_function(args.simulate, _floats(args.s) if args.s else None)
    return simulate(f0, args.n, f0.declared_profile.d, args.sigma0,
                    np.random.default_rng(args.seed)), f0


def cmd_fit(args) -> int:
    from .besov import SmoothnessProfile, test_function
    from .experiments import build_dictionary_model, fit_dictionary, write_table
    from .inference import ChainConfig, ess, posterior_l2_error
    from .priors import SlabSpec

    data, f0 = _load_data(args)
    if args.target:
        f0 = test_function(args.target, _floats(args.s) if args.s else None)
    s = tuple(_floats(args.s)) if args.s else (2.0,) * data.d
    if len(s) == 1 and data.d > 1:
        s = s * data.d
    if len(s) != data.d:
        raise ValidationError("--s length must equal the data dimension")
    model = build_dictionary_model(SmoothnessProfile(s, _p(args.p)), data.n, args.m,
                                   C_N=args.C_N, S_0=args.S_0)
    config = ChainConfig(iters=args.iters, burnin=args.burnin, thin=args.thin, seed=args.seed,
                         birth="informed", theta_move="both", gamma_moves=args.gamma_moves,
                         p_swap=1.0, p_add=0.0, p_delete=0.0)
    chains = fit_dictionary(data, model, SlabSpec(args.slab, args.tau), config,
                            n_chains=args.chains, jobs=args.jobs)
    result = {"n": data.n, "d": data.d, "N": model.N, "S": model.S,
              "T_free": int(model.free.size), "config": config.to_dict()}
    fitted = np.mean([c.predict(data.X) for c in chains], axis=0)
    result["train_rmse"] = float(np.sqrt(np.mean((data.y - fitted) ** 2)))
    if f0 is not None:
        summ = posterior_l2_error(chains, f0, mc_n=args.mc_n, rng=args.seed)
        result.update(summ.to_dict())
    else:
        rates = {}
        for key in chains[0].accept:
            a = sum(c.accept[key][0] for c in chains)
            p = sum(c.accept[key][1] for c in chains)
            rates[key] = a / p if p else float("nan")
        result.update({"accept_rates": rates,
                       "posterior_mean_sigma2": float(np.mean([c.sigma2.mean() for c in chains])),
                       "ess_min": float(min(ess(c.logpost) for c in chains))})
    if args.chain_out:
        recs = []
        for ci, c in enumerate(chains):
            for i in range(c.n_draws):
                recs.append({"chain": ci, "draw": i, "sigma2": float(c.sigma2[i]),
                             "logpost": float(c.logpost[i]),
                             "active": " ".join(str(int(v)) for v in c.free_idx[c.active[i]]),
                             "values": " ".join(repr(float(v)) for v in c.values[i])})
        write_table(args.chain_out, recs)
    table = [(k, _fmt(result[k])) for k in ("n", "N", "S", "T_free", "train_rmse")]
    for k in ("mean_l2_error", "plugin_l2_error", "posterior_mean_sigma2", "ess_min"):
        if k in result:
            table.append((k, _fmt(result[k])))
    table += [(f"accept[{k}]", _fmt(v)) for k, v in result["accept_rates"].items()]
    _emit(args, "fit", result, table)
    return EXIT_OK


def cmd_rate_study(args) -> int:
    from .experiments import rate_study, write_table

    res = rate_study(args.target, _floats(args.s) if args.s else None, _ints(args.n_grid),
                     args.replicates, args.sigma0, args.seed, args.m, C_N=args.C_N,
                     S_0=args.S_0, tau=args.tau,
                     chain={"iters": args.iters, "burnin": args.burnin},
                     mc_n=args.mc_n, jobs=args.jobs)
    if args.csv:
        write_table(args.csv, res.rows)
    sm = res.summary
    table = [(f"n={r['n']} rep={r['replicate']}", f"{r['posterior_error']:.5g}") for r in res.rows]
    table += [("fitted slope", _fmt(sm["fit_slope"])), ("slope se", _fmt(sm["fit_se"])),
              ("target slope", _fmt(sm["target_slope"])), ("degenerate", sm["fit_degenerate"])]
    _emit(args, "rate-study", {"summary": sm, "rows": res.rows}, table)
    return EXIT_OK


def cmd_bounds(args) -> int:
    from .bounds import (activation_bound, brute_force_cover, default_tiny_instances,
                         entropy_bound, lipschitz_K, verify_activation, verify_lipschitz)
    from .kan import KanSpec

    spec = KanSpec(args.L, args.d, args.D, args.G0, args.G, args.H, args.m, args.a0, args.b0)
    rows, ok = [], True
    result = {"spec": spec.to_dict(), "T": spec.T, "per_B": rows}
    table = [("T", spec.T)]
    for i, B in enumerate(_floats(args.B)):
        row = {"B": B, "K": lipschitz_K(spec, B), "activation_bound": activation_bound(spec, B),
               "entropy_bound": entropy_bound(spec, B, min(args.S, spec.T), args.eps)}
        table += [(f"B={B:g} K", _fmt(row["K"])),
                  (f"B={B:g} activation", _fmt(row["activation_bound"])),
                  (f"B={B:g} entropy", _fmt(row["entropy_bound"]))]
        if args.verify_lipschitz:
            rep = verify_lipschitz(spec, B, args.eps_rel * B, args.trials, rng=args.seed + i)
            row["lipschitz_empirical_max"] = rep.empirical_max
            ok &= rep.passed
            table.append((f"B={B:g} lipschitz empirical_max", _fmt(rep.empirical_max)))
        if args.verify_activation:
            rep = verify_activation(spec, B, args.trials, rng=args.seed + i)
            row["activation_empirical_max"] = rep.empirical_max
            ok &= rep.passed
            table.append((f"B={B:g} activation empirical_max", _fmt(rep.empirical_max)))
        rows.append(row)
    if args.cover:
        covers = []
        for j, inst in enumerate(default_tiny_instances()):
            cr = brute_force_cover(inst["spec"], inst["B"], inst["S"], inst["eps"],
                                   rng=args.seed + j)
            good = cr.valid and cr.log_size <= cr.entropy
            ok &= good
            covers.append({"H": inst["spec"].H, "B": inst["B"], "S": inst["S"],
                           "eps": inst["eps"], **cr.to_dict()})
            table.append((f"cover H={inst['spec'].H:g} B={inst['B']:g} S={inst['S']} "
                          f"eps={inst['eps']:g}",
                          f"log|N|={cr.log_size:.4g} bound={cr.entropy:.4g} "
                          f"ratio={cr.max_ratio:.3g}"))
        result["covers"] = covers
    result["passed"] = bool(ok)
    table.append(("result", "PASS" if ok else "FAIL"))
    _emit(args, "bounds", result, table)
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_check_priors(args) -> int:
    from .planner import ArchitecturePlan, check_rho, plan_sas
    from .priors import SlabSpec, check_B1, check_B2

    if args.plan:
        with open(args.plan, encoding="utf-8") as fh:
            doc = json.load(fh)
        plan = ArchitecturePlan.from_dict(doc.get("result", doc))
        if args.n is None:
            args.n = plan.n
    else:
        n = 1000.0 if args.n is None else args.n
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            plan = plan_sas(n, _smoothness(args), _p(args.p), args.m)
    n = float(args.n)
    tau = args.tau
    if tau is None:
        tau = args.C_tau * n ** (plan.beta / (2 * plan.s_tilde + 1))
    slab = SlabSpec(args.slab, tau, args.alpha)
    b1 = check_B1(slab, plan.Bstar, n, args.c1)
    b2 = check_B2(slab, Bstar=plan.Bstar)
    reports = [b1, b2]
    if args.rho is not None:
        reports.append(check_rho(args.rho, plan.T, plan.S, n))
    ok = all(r.passed for r in reports)
    table = [("slab", f"{slab.family} tau={tau:.6g}"), ("Bstar", _fmt(plan.Bstar))]
    table += [(r.name, f"lhs={r.lhs:.6g} rhs={r.rhs:.6g} {'PASS' if r.passed else 'FAIL'}")
              for r in reports]
    table.append(("result", "PASS" if ok else "FAIL"))
    _emit(args, "check-priors", {"slab": slab.to_dict(), "n": n, "Bstar": plan.Bstar,
                                 "checks": [r.to_dict() for r in reports], "passed": ok}, table)
    return EXIT_OK if ok else EXIT_RUNTIME


def cmd_approx(args) -> int:
    from .approx import build_approximator, l2_error
    from .besov import test_function
    from .experiments import fit_slope

    f0 = test_function(args.target, _floats(args.s) if args.s else None)
    prof = f0.declared_profile
    rows = []
    for i, N in enumerate(_ints(args.N)):
        real = build_approximator(f0, prof, N, args.m)
        est = l2_error(f0, real, args.mc_n, rng=args.seed + i)
        rows.append({"N": N, "error": est.value, "se": est.se, "terms": real.term_count,
                     "nnz": real.certificates["nnz"], "sup": real.certificates["sup"],
                     "S0_empirical": real.certificates["S0_empirical"],
                     "B0_empirical": real.certificates["B0_empirical"]})
    result = {"target": args.target, "s": list(prof.s), "s_tilde": prof.s_tilde, "rows": rows}
    table = [(f"N={r['N']}", f"error={r['error']:.5g} se={r['se']:.2g} nnz={r['nnz']}")
             for r in rows]
    if len(rows) >= 3:
        fit = fit_slope([r["N"] for r in rows], [r["error"] for r in rows], log_factor=False)
        result["slope"] = fit["slope"]
        result["slope_se"] = fit["se"]
        table += [("fitted slope", _fmt(fit["slope"])), ("target slope", _fmt(-prof.s_tilde))]
    _emit(args, "approx", result, table)
    return EXIT_OK


def cmd_besov(args) -> int:
    from .besov import seminorm_estimate, test_function

    f0 = test_function(args.target, _floats(args.s) if args.s else None)
    est = seminorm_estimate(f0, f0.declared_profile, args.K_max, args.grid_n, args.dir_n,
                            args.seed)
    result = {"target": args.target, "s": list(f0.declared_profile.s), "value": est.value,
              "terms": est.terms, "tail_ratio": est.tail_ratio, "K_used": est.K_used}
    table = [(f"k={k}", _fmt(v)) for k, v in enumerate(est.terms)]
    table += [("seminorm", _fmt(est.value)), ("tail ratio", _fmt(est.tail_ratio))]
    _emit(args, "besov", result, table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file whose keys override flags")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--json", action="store_true", help="print the JSON document only")
    common.add_argument("--out", help="write the JSON document here")
    common.add_argument("--strict", action="store_true", help="turn smoothness warnings into errors")
    common.add_argument("--jobs", type=int, default=1)

    ap = argparse.ArgumentParser(prog="bayeskan", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="architecture plan")
    p.add_argument("--mode", choices=("sas", "adaptive", "compositional"), default="sas")
    p.add_argument("--n", type=float, default=1000.0)
    p.add_argument("--s", default="2,2")
    p.add_argument("--d", type=int)
    p.add_argument("--p", default="inf")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--C-N", dest="C_N", type=float, default=1.0)
    p.add_argument("--S0", dest="S_0", type=float, default=1.0)
    p.add_argument("--B0", dest="B_0", type=float, default=1.0)
    p.add_argument("--G0", type=int)
    p.add_argument("--s-tilde-min", dest="s_tilde_min", type=float, default=1.0)
    p.add_argument("--s-min", dest="s_min", type=float, default=2.0)
    p.add_argument("--kappa-ad", dest="kappa_ad", type=float, default=0.1)
    p.add_argument("--N", type=int, default=10, help="model size for the adaptive family")
    p.add_argument("--layers", help="JSON text or file with dims, effective_dims, layer_smoothness")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("fit", parents=[common], help="posterior sampling on a dataset")
    p.add_argument("--data")
    p.add_argument("--simulate", help="catalog target to simulate data from")
    p.add_argument("--target", help="catalog target for the error report")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--sigma0", type=float, default=0.3)
    p.add_argument("--s")
    p.add_argument("--p", default="inf")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--C-N", dest="C_N", type=float, default=1.0)
    p.add_argument("--S0", dest="S_0", type=float, default=4.0)
    p.add_argument("--slab", default="gaussian")
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=600)
    p.add_argument("--burnin", type=int, default=300)
    p.add_argument("--thin", type=int, default=5)
    p.add_argument("--gamma-moves", dest="gamma_moves", type=int, default=10)
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--mc-n", dest="mc_n", type=int, default=4000)
    p.add_argument("--chain-out", dest="chain_out", help="CSV of kept draws")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("rate-study", parents=[common], help="empirical contraction rate")
    p.add_argument("--target", default="smooth1")
    p.add_argument("--s")
    p.add_argument("--n-grid", dest="n_grid", default="250,500,1000,2000,4000")
    p.add_argument("--replicates", type=int, default=5)
    p.add_argument("--sigma0", type=float, default=0.3)
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--C-N", dest="C_N", type=float, default=1.0)
    p.add_argument("--S0", dest="S_0", type=float, default=4.0)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--iters", type=int, default=600)
    p.add_argument("--burnin", type=int, default=300)
    p.add_argument("--mc-n", dest="mc_n", type=int, default=4000)
    p.add_argument("--csv", help="per-replicate CSV output")
    p.set_defaults(func=cmd_rate_study)

    p = sub.add_parser("bounds", parents=[common], help="Lipschitz, activation and entropy bounds")
    for name, typ, default in (("L", int, 3), ("d", int, 2), ("D", int, 4), ("G0", int, 6),
                               ("G", int, 8), ("H", float, 2.0), ("m", int, 2),
                               ("a0", float, -1.0), ("b0", float, 2.0)):
        p.add_argument(f"--{name}", type=typ, default=default)
    p.add_argument("--B", default="1,3")
    p.add_argument("--S", type=int, default=10)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--eps-rel", dest="eps_rel", type=float, default=0.1,
                   help="perturbation radius as a fraction of B")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--verify-lipschitz", dest="verify_lipschitz", action="store_true")
    p.add_argument("--verify-activation", dest="verify_activation", action="store_true")
    p.add_argument("--cover", action="store_true", help="brute-force tiny covers")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("check-priors", parents=[common], help="slab condition checks")
    p.add_argument("--slab", default="gaussian")
    p.add_argument("--tau", type=float)
    p.add_argument("--C-tau", dest="C_tau", type=float, default=1.0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=float)
    p.add_argument("--plan", help="plan JSON written by 'plan --out'")
    p.add_argument("--s", default="2,2")
    p.add_argument("--d", type=int)
    p.add_argument("--p", default="inf")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--c1", type=float, default=2.0)
    p.add_argument("--rho", type=float)
    p.set_defaults(func=cmd_check_priors)

    p = sub.add_parser("approx", parents=[common], help="constructive approximation sweep")
    p.add_argument("--target", default="smooth1")
    p.add_argument("--s")
    p.add_argument("--N", default="8,16,32,64,128,256")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--mc-n", dest="mc_n", type=int, default=20000)
    p.set_defaults(func=cmd_approx)

    p = sub.add_parser("besov", parents=[common], help="seminorm estimate of a catalog target")
    p.add_argument("--target", default="smooth1")
    p.add_argument("--s")
    p.add_argument("--K-max", dest="K_max", type=int, default=8)
    p.add_argument("--grid-n", dest="grid_n", type=int, default=60)
    p.add_argument("--dir-n", dest="dir_n", type=int, default=16)
    p.set_defaults(func=cmd_besov)
    return ap


def _apply_config(args, parser) -> None:
    if not args.config:
        return
    with open(args.config, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    for key, val in cfg.items():
        dest = key.lstrip("-").replace("-", "_")
        if not hasattr(args, dest):
            raise ValidationError(f"unknown config key {key!r}")
        setattr(args, dest, val)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code else EXIT_OK
    from .experiments import DataFormatError
    from .planner import SmoothnessWarning

    try:
        _apply_config(args, parser)
        return args.func(args)
    except (ValidationError, DataFormatError, FileNotFoundError, json.JSONDecodeError,
            KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except ValueError as exc:
        # invalid parameters (smoothness, grids, supports) surface as ValueError
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001
        sys.stderr.write(f"runtime failure: {type(exc).__name__}: {exc}\n")
        return EXIT_RUNTIME


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
