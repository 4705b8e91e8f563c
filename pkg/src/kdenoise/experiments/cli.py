"""Command-line interface.

Subcommands:
  w2          exact squared Wasserstein distance between two measure CSVs
  check-order convex-order verdict as JSON
  check-kdr   Kantorovich-dominance verdict as JSON
  denoise     run a domain solver on a data CSV
  repro       canned reproduction runs with built-in assertions

Every command can write a versioned JSON report (and measure/coupling CSVs)
under --out.  Exit code 0 means all asserted checks passed; assertion
failures exit 1 with a structured message on stderr, bad input exits 2.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from ..dominance import is_convex_order, is_monotone_support, kdr_check
from ..measures import (
    DiscreteMeasure,
    MeasureError,
    load_measure_csv,
    second_moment,
    uniform_measure,
    variance,
)
from ..solvers import (
    BoundedCurvature,
    BoundedLength,
    DiscreteSupport,
    LengthSdRatio,
    MonotonePenalty,
    SolverConfig,
    Subspace,
    solve_kdr,
    solve_subspace,
    verify_kramkov_comparison,
)
from ..transport import SinkhornConfig, w2_squared
from .datasets import FactorModel, InstabilityKernel, Parabola, StepCurve, generate
from .reports import build_report, measure_payload, write_coupling, write_measure, write_report

PROG = "kdenoise"


def _fail(msg: str, code: int = 1) -> int:
    print(json.dumps({"error": msg}), file=sys.stderr)
    return code


def _emit(report: dict, args) -> int:
    if args.out:
        write_report(report, args.out)
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0 if report.get("passed", True) else 1


def _load(path: str) -> DiscreteMeasure:
    return load_measure_csv(path)


# ------------------------------------------------------------ subcommands


def cmd_w2(args) -> int:
    mu, nu = _load(args.mu), _load(args.nu)
    res = w2_squared(mu, nu)
    report = build_report("w2", args.seed, {"w2_squared": res.value}, {})
    if args.out:
        write_report(report, args.out)
        write_coupling(res.coupling, args.out)
    print(json.dumps(report, sort_keys=True, indent=2))
    return 0


def cmd_check_order(args) -> int:
    mu, nu = _load(args.mu), _load(args.nu)
    verdict = is_convex_order(mu, nu, feas_tol=args.tol)
    report = build_report(
        "check-order", args.seed,
        {"dominated": verdict.dominated, "residual": verdict.max_residual},
        {},
    )
    return _emit(report, args)


def cmd_check_kdr(args) -> int:
    mu, nu = _load(args.mu), _load(args.nu)
    verdict = kdr_check(mu, nu)
    report = build_report(
        "check-kdr", args.seed,
        {"dominated": verdict.dominated, "slack": verdict.slack},
        {},
    )
    return _emit(report, args)


def _domain_from_args(args, dim: int):
    name = args.domain
    if name == "bounded-length":
        return BoundedLength(m=args.m, B=args.bound)
    if name == "ratio":
        return LengthSdRatio(m=args.m, B=args.bound)
    if name == "curvature":
        return BoundedCurvature(m=args.m, curvature_penalty=args.penalty)
    if name == "subspace":
        return Subspace(subspace_dim=min(args.m, dim))
    if name == "discrete":
        return DiscreteSupport(m=args.m)
    if name == "monotone":
        return MonotonePenalty(m=args.m, penalty_weight=args.penalty)
    raise ValueError(f"unknown domain {name!r}")


def _solver_config(args) -> SolverConfig:
    kw = {"seed": args.seed}
    if args.max_iter is not None:
        kw["max_outer_iter"] = args.max_iter
    if args.epsilon is not None:
        kw["sinkhorn"] = SinkhornConfig(epsilon=args.epsilon)
    return SolverConfig(**kw)


def _report_payload(rep) -> dict:
    return {
        "measure": measure_payload(rep.mu_star),
        "variance": rep.variance,
        "w2_squared": rep.w2_squared,
        "kdr_slack": rep.kdr_slack,
        "domain_residuals": rep.domain_residuals,
        "iterations": rep.iterations,
        "converged": rep.converged,
    }


def cmd_denoise(args) -> int:
    nu = _load(args.nu)
    domain = _domain_from_args(args, nu.dim)
    cfg = _solver_config(args)
    rep = solve_kdr(nu, domain, cfg)
    checks = {
        "kdr_slack_nonnegative": {
            "passed": bool(rep.kdr_slack >= -1e-3 * max(variance(nu), 1e-12)),
            "slack": rep.kdr_slack,
        }
    }
    report = build_report("denoise", args.seed, {
        "domain": repr(domain),
        "config": {"max_outer_iter": cfg.max_outer_iter, "seed": cfg.seed},
        **_report_payload(rep),
    }, checks)
    if args.out:
        write_measure(rep.mu_star, args.out, "mu.csv")
        if rep.coupling is not None and args.format == "csv":
            write_coupling(rep.coupling, args.out)
    return _emit(report, args)


# ------------------------------------------------------------- repro runs


def _check(name, passed, **detail):
    return name, {"passed": bool(passed), **detail}


def repro_counterexample_1d(args) -> dict:
    mu = DiscreteMeasure([[-4.0], [2.0]], [1 / 3, 2 / 3])
    nu = uniform_measure([[-4.0], [0.0], [4.0]])
    theta = DiscreteMeasure([[-3.0], [6.0]], [2 / 3, 1 / 3])
    w2 = [w2_squared(a, b).value for a, b in [(mu, nu), (nu, theta), (mu, theta)]]
    m2 = [second_moment(x) for x in (mu, nu, theta)]
    verdicts = [kdr_check(a, b) for a, b in [(mu, nu), (nu, theta), (mu, theta)]]
    expected_w2 = [8 / 3, 14 / 3, 14.0]
    expected_m2 = [8.0, 32 / 3, 18.0]
    checks = dict([
        _check("w2_values", all(abs(a - b) <= 1e-9 for a, b in zip(w2, expected_w2)),
               got=w2, expected=expected_w2),
        _check("second_moments", all(abs(a - b) <= 1e-12 for a, b in zip(m2, expected_m2)),
               got=m2, expected=expected_m2),
        _check("kdr_verdicts", [v.dominated for v in verdicts] == [True, True, False],
               got=[v.dominated for v in verdicts], expected=[True, True, False]),
    ])
    return build_report("repro counterexample-1d", args.seed, {
        "w2_squared": w2, "second_moments": m2,
        "kdr_slacks": [v.slack for v in verdicts],
    }, checks)


def repro_counterexample_2d(args) -> dict:
    mu = uniform_measure([[0.0, -1.0], [0.0, 1.0]])
    nu = uniform_measure([[-1.0, -1.0], [1.0, 1.0]])
    theta = uniform_measure([[-2.0, 0.0], [2.0, 0.0]])
    pairs = [(mu, nu), (nu, theta), (mu, theta)]
    w2 = [w2_squared(a, b).value for a, b in pairs]
    m2 = [second_moment(x) for x in (mu, nu, theta)]
    verdicts = [kdr_check(a, b) for a, b in pairs]
    slacks = [v.slack for v in verdicts]
    checks = dict([
        _check("w2_values", all(abs(a - b) <= 1e-9 for a, b in zip(w2, [1.0, 2.0, 5.0])),
               got=w2, expected=[1.0, 2.0, 5.0]),
        _check("second_moments", all(abs(a - b) <= 1e-12 for a, b in zip(m2, [1.0, 2.0, 4.0])),
               got=m2, expected=[1.0, 2.0, 4.0]),
        _check("kdr_verdicts", [v.dominated for v in verdicts] == [True, True, False],
               got=[v.dominated for v in verdicts]),
        _check("kdr_slacks", all(abs(a - b) <= 1e-9 for a, b in zip(slacks, [0.0, 0.0, -2.0])),
               got=slacks, expected=[0.0, 0.0, -2.0]),
    ])
    return build_report("repro counterexample-2d", args.seed, {
        "w2_squared": w2, "second_moments": m2, "kdr_slacks": slacks,
    }, checks)


def repro_instability(args) -> dict:
    from .datasets import instability_signal

    mu = instability_signal()
    residuals = []
    for n in range(1, 6):
        nu_n = generate(InstabilityKernel(n_index=n))
        verdict = is_convex_order(mu, nu_n)
        residuals.append(verdict.max_residual if verdict.dominated else np.inf)
    nu_inf = generate(InstabilityKernel(n_index=None))
    var_inf = variance(nu_inf)
    checks = dict([
        _check("dominated_each_n", all(r <= 1e-10 for r in residuals), residuals=residuals),
        _check("limit_monotone", is_monotone_support(nu_inf)),
        _check("limit_variance", abs(var_inf - 5 / 3) <= 1e-12, got=var_inf, expected=5 / 3),
    ])
    return build_report("repro instability", args.seed, {
        "witness_residuals": residuals, "limit_variance": var_inf,
    }, checks)


def repro_supplement_a(args) -> dict:
    cmp = verify_kramkov_comparison()
    checks = dict([
        _check("martingale_couplings",
               cmp.martingale_residual_k <= 1e-12 and cmp.martingale_residual_m <= 1e-12,
               residual_k=cmp.martingale_residual_k, residual_m=cmp.martingale_residual_m),
        _check("pair_inequality", cmp.pair_inequality_holds),
        _check("quadratic_costs",
               abs(cmp.quadratic_cost_k - 4.5) <= 1e-12
               and abs(cmp.quadratic_cost_m - 4.1) <= 1e-12
               and cmp.quadratic_cost_m < cmp.quadratic_cost_k,
               cost_k=cmp.quadratic_cost_k, cost_m=cmp.quadratic_cost_m),
        _check("variance_identity", abs(cmp.variance_gap_k - 4.5) <= 1e-12,
               got=cmp.variance_gap_k),
    ])
    return build_report("repro supplement-a", args.seed, {
        "quadratic_cost_k": cmp.quadratic_cost_k,
        "quadratic_cost_m": cmp.quadratic_cost_m,
    }, checks)


def repro_parabola(args) -> dict:
    n = args.n or 2000
    nu = generate(Parabola(n=n, noise_sigma=0.1, seed=args.seed))
    bounds = [args.bound] if args.bound is not None else [4.0]
    cfg = SolverConfig(seed=args.seed, max_outer_iter=args.max_iter or 8000)
    runs = {}
    checks = {}
    var_nu = variance(nu)
    for B in bounds:
        rep = solve_kdr(nu, BoundedLength(m=10, B=B), cfg)
        r = rep.domain_residuals
        runs[f"B={B}"] = _report_payload(rep)
        name, chk = _check(
            f"bounded_length_B={B}",
            r["length"] <= B + 1e-6
            and rep.kdr_slack >= -1e-3 * var_nu
            and r["weight_sum_residual"] <= 1e-6,
            length=r["length"], kdr_slack=rep.kdr_slack,
            weight_sum_residual=r["weight_sum_residual"], converged=rep.converged,
        )
        checks[name] = chk
        if args.out:
            write_measure(rep.mu_star, args.out, f"mu_B{B}.csv")
            if rep.coupling is not None:
                write_coupling(rep.coupling, args.out, f"coupling_B{B}.csv")
    if args.out:
        write_measure(nu, args.out, "data.csv")
    return build_report("repro parabola", args.seed, {
        "n": n, "variance_nu": var_nu, "runs": runs,
    }, checks)


def _repro_cone(args, domains, label) -> dict:
    nu = generate(StepCurve(n=300, noise_sigma=0.1, seed=args.seed))
    var_nu = variance(nu)
    cfg = SolverConfig(seed=args.seed)
    runs = {}
    checks = {}
    for key, domain in domains:
        rep = solve_kdr(nu, domain, cfg)
        r = rep.domain_residuals
        runs[key] = _report_payload(rep)
        ok = (
            rep.converged
            and r["cone_identity_gap"] <= 1e-3 * var_nu
            and max(r["kkt_stationarity"], r["kkt_feasibility"],
                    r["kkt_complementarity"]) <= 1e-6
            and r["sum_x"] <= 1e-8
        )
        if "ratio" in r:
            ok = ok and r["ratio"] <= domain.B + 1e-4
        name, chk = _check(key, ok, **{k: v for k, v in r.items() if not isinstance(v, dict)})
        checks[name] = chk
        if args.out:
            write_measure(rep.mu_star, args.out, f"mu_{key}.csv")
    if args.out:
        write_measure(nu, args.out, "data.csv")
    return build_report(f"repro {label}", args.seed, {
        "variance_nu": var_nu, "runs": runs,
    }, checks)


def repro_step_ratio(args) -> dict:
    bounds = (6.0, 10.0) if args.bound is None else (args.bound,)
    domains = [(f"B={B}", LengthSdRatio(m=100, B=B)) for B in bounds]
    return _repro_cone(args, domains, "step-ratio")


def repro_step_curvature(args) -> dict:
    lams = (0.04, 0.08) if args.penalty is None else (args.penalty,)
    domains = [
        (f"lam={lam}", BoundedCurvature(m=100, curvature_penalty=lam)) for lam in lams
    ]
    return _repro_cone(args, domains, "step-curvature")


def repro_pca_factor(args) -> dict:
    d, m, n = 5, 2, 20000
    sigma = 0.5
    L_star = np.array([
        [2.0, 0.0],
        [0.0, 1.5],
        [1.0, 0.5],
        [0.5, -1.0],
        [-0.5, 0.5],
    ])
    # orient as an orthonormal frame times sqrt of eigenvalues
    q, r = np.linalg.qr(L_star)
    L_star = q @ np.diag(np.sort(np.abs(np.diag(r)))[::-1])
    nu = generate(FactorModel(
        d=d, m=m, loadings=tuple(map(tuple, L_star)), sigma=sigma, n=n,
        seed=args.seed,
    ))
    rep = solve_subspace(nu, m, seed=args.seed)
    vals = rep.extras["eigenvalues"]
    U = rep.extras["basis"]
    sigma_n2 = rep.extras["noise_variance"]
    LLt_n = U @ np.diag(vals[:m]) @ U.T
    recovered = LLt_n - sigma_n2 * (U @ U.T)
    target = L_star @ L_star.T
    frob = float(np.linalg.norm(recovered - target))
    checks = dict([
        _check("loading_recovery", frob <= 0.1, frobenius_error=frob),
        _check("noise_variance", abs(sigma_n2 - sigma**2) <= 0.05,
               got=sigma_n2, expected=sigma**2),
    ])
    return build_report("repro pca-factor", args.seed, {
        "frobenius_error": frob, "noise_variance": sigma_n2,
        "eigenvalues": vals.tolist(),
    }, checks)


REPRO_COMMANDS = {
    "counterexample-1d": repro_counterexample_1d,
    "counterexample-2d": repro_counterexample_2d,
    "instability": repro_instability,
    "supplement-a": repro_supplement_a,
    "parabola": repro_parabola,
    "step-ratio": repro_step_ratio,
    "step-curvature": repro_step_curvature,
    "pca-factor": repro_pca_factor,
}


def cmd_repro(args) -> int:
    report = REPRO_COMMANDS[args.case](args)
    return _emit(report, args)


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog=PROG, description=__doc__)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=str, default=None, help="output directory")
    p.add_argument("--format", choices=["json", "csv"], default="json")
    sub = p.add_subparsers(dest="command", required=True)

    w2 = sub.add_parser("w2", help="exact squared Wasserstein distance")
    w2.add_argument("--mu", required=True)
    w2.add_argument("--nu", required=True)
    w2.set_defaults(func=cmd_w2)

    order = sub.add_parser("check-order", help="convex order verdict")
    order.add_argument("--mu", required=True)
    order.add_argument("--nu", required=True)
    order.add_argument("--tol", type=float, default=1e-8)
    order.set_defaults(func=cmd_check_order)

    kdr = sub.add_parser("check-kdr", help="Kantorovich dominance verdict")
    kdr.add_argument("--mu", required=True)
    kdr.add_argument("--nu", required=True)
    kdr.set_defaults(func=cmd_check_kdr)

    dn = sub.add_parser("denoise", help="run a domain solver on a data CSV")
    dn.add_argument("--nu", required=True)
    dn.add_argument("--domain", required=True, choices=[
        "bounded-length", "ratio", "curvature", "subspace", "discrete", "monotone",
    ])
    dn.add_argument("--m", type=int, default=10)
    dn.add_argument("--bound", type=float, default=4.0)
    dn.add_argument("--penalty", type=float, default=1.0)
    dn.add_argument("--epsilon", type=float, default=None)
    dn.add_argument("--max-iter", type=int, default=None)
    dn.set_defaults(func=cmd_denoise)

    rp = sub.add_parser("repro", help="reproduction runs with built-in checks")
    rp.add_argument("case", choices=sorted(REPRO_COMMANDS))
    rp.add_argument("--n", type=int, default=None)
    rp.add_argument("--bound", type=float, default=None)
    rp.add_argument("--penalty", type=float, default=None)
    rp.add_argument("--max-iter", type=int, default=None)
    rp.set_defaults(func=cmd_repro)

    return p


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (MeasureError, FileNotFoundError, ValueError) as exc:
        return _fail(str(exc), 2)


def main() -> None:
    sys.exit(run_command())
