"""Command-line driver.

Exit codes: 0 success, 1 numerical failure or finding, 2 usage error.
Every command writes its manifest before any numerics run.  All randomness
comes from ``numpy.random.default_rng(seed)`` (PCG64), seeded by ``--seed``.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .ball import PositivityError, beckner_gap
from .halfspace import er_residual, halfspace_sampler, recenter, reflection_probe
from .identities import (TRUNCATION_BOUND, CriticalFamily, beckner_verify, critical_trace, pohozaev_residual,
                         pohozaev_scaled)
from .params import ProblemParams
from .records import RESULT_SCHEMA, RunManifest, read_json, sweep_csv, write_atomic, write_json
from .solver import (BifurcationError, SingularJacobianError, SolverOptions, bifurcating_solution, find_bifurcation,
                     minimize_quotient, newton_solve, residual)
from .spectral import BoundaryFunction, default_node_count, random_positive_function

log = logging.getLogger("steklov_lab")

EXIT_OK, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2

# certification thresholds reported by verify-critical and identities
EQ_RESIDUAL_TOL = 1e-8
POHOZAEV_TOL = 1e-6
ER_TOL = 1e-6
REFLECTION_TOL = 1e-10
BECKNER_TOL = 1e-10


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _manifest_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + ".manifest.json"


def _params_from(args) -> ProblemParams:
    try:
        return ProblemParams(args.n, args.a, args.q).validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _node_count(args) -> int:
    return args.m if args.m is not None else default_node_count(args.L)


def _options(args) -> SolverOptions:
    return SolverOptions(tol=args.tol, L=args.L, m=_node_count(args), seed=args.seed)


def initial_guess(params: ProblemParams, L: int, init: str, seed: int, init_file: str | None = None) -> BoundaryFunction:
    """Initial data for the solvers.

    constant            the constant solution a^{1/(q-1)}
    perturbed-constant  constant times 1 + p, p a seeded random polynomial, |p| <= 0.5
    mode1               constant plus 0.3 e_1 (unit-norm l = 1 basis function)
    branch              a point on the nonconstant branch (needs a > 1/(q-1))
    file                coefficients from a result JSON (``--init-file``)
    """
    uc = params.constant_solution()
    if init == "constant":
        return BoundaryFunction.constant(uc, params.n, L)
    if init == "perturbed-constant":
        rng = np.random.default_rng(seed)
        return random_positive_function(params.n, L, rng, degree=8, amplitude=0.5, level=uc)
    if init == "mode1":
        c = BoundaryFunction.constant(uc, params.n, L).coeffs.copy()
        c[1] += 0.3
        return BoundaryFunction.from_coeffs(c, params.n)
    if init == "branch":
        res = bifurcating_solution(params, SolverOptions(L=L))
        if res is None:
            raise UsageError("no nonconstant branch point found; --init branch needs a > 1/(q-1)")
        return res.solution
    if init == "file":
        if not init_file:
            raise UsageError("--init file needs --init-file PATH")
        data = _load_result(init_file)
        f = BoundaryFunction.from_coeffs(data["result"]["coeffs"], data["params"]["n"])
        if f.n != params.n:
            raise UsageError("initial file has a different dimension")
        return f.resized(L)
    raise UsageError(f"unknown init {init!r}")


def _load_result(path: str) -> dict:
    try:
        data = read_json(path)
        data["result"]["coeffs"]
        data["params"]["n"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"cannot read result file {path}: {exc}") from exc
    return data


def _er_points(n: int, count: int = 16) -> np.ndarray:
    # deterministic boundary points (x', 0) with |x'| from 0 to 10
    r = np.linspace(0.0, 10.0, count)
    pts = np.zeros((count, n - 1))
    pts[:, 0] = r * np.cos(np.arange(count))
    if n > 2:
        pts[:, -1] = r * np.sin(np.arange(count))
    return pts


def solution_checks(f: BoundaryFunction, params: ProblemParams, er_count: int = 16) -> dict:
    """Identity-oracle values for a candidate solution."""
    checks = {
        "pohozaev_raw": pohozaev_residual(f, params),
        "pohozaev_scaled": pohozaev_scaled(f, params),
        "beckner_gap": beckner_gap(f, params.q),
    }
    g = recenter(f)
    try:
        checks["er_residual_max"] = max(abs(er_residual(g, params, x)) for x in _er_points(params.n, er_count))
    except PositivityError:
        checks["er_residual_max"] = math.nan
    return checks


def _result_payload(command: str, params: ProblemParams, args, res) -> dict:
    f = res.solution
    grid = np.cos(np.linspace(0.0, math.pi, 401))
    return {
        "schema": RESULT_SCHEMA,
        "command": command,
        "params": {"n": params.n, "a": params.a, "q": params.q, "L": f.L, "m": _node_count(args),
                   "tol": args.tol, "seed": args.seed, "init": args.init, "method": args.method},
        "result": {
            "converged": res.converged,
            "message": res.message,
            "residual_norm": res.residual_norm,
            "multiplier": res.multiplier,
            "iterations": res.iterations,
            "quotient_value": res.quotient_value,
            "amplitude": f.amplitude(),
            "mean": f.mean(),
            "constant_solution": params.constant_solution(),
            "sup_distance_to_constant": float(np.max(np.abs(f(grid) - params.constant_solution()))),
            "coeffs": f.coeffs,
            "spectrum": res.spectrum,
        },
        "checks": solution_checks(f, params) if res.converged else {},
    }


def _run_solver(params: ProblemParams, f0: BoundaryFunction, method: str, opts: SolverOptions):
    if method == "minimize" and params.q < params.q_crit:
        return minimize_quotient(f0, params, opts)
    return newton_solve(f0, params, opts)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    params = _params_from(args)
    f0 = initial_guess(params, args.L, args.init, args.seed, args.init_file)
    try:
        res = _run_solver(params, f0, args.method, _options(args))
    except (SingularJacobianError, PositivityError) as exc:
        write_json(_diagnostics_path(args.out), {"error": str(exc)})
        log.error("%s", exc)
        return EXIT_NUMERIC
    payload = _result_payload("solve", params, args, res)
    write_json(args.out, payload)
    if not res.converged:
        write_json(_diagnostics_path(args.out), {"message": res.message, "history": res.history})
        log.error("solve did not converge: %s", res.message)
        return EXIT_NUMERIC
    print(f"converged in {res.iterations} iterations, residual {res.residual_norm:.3e}, "
          f"amplitude {payload['result']['amplitude']:.3e}")
    return EXIT_OK


def _diagnostics_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + ".diagnostics.json"


def sweep_cell(n: int, q: float, a: float, seed: int, L: int, m: int, tol: float, init: str, method: str) -> dict:
    """One (a, seed) cell of a sweep; pure function of its arguments."""
    params = ProblemParams(n, a, q).validate()
    opts = SolverOptions(tol=tol, L=L, m=m, seed=seed)
    f0 = initial_guess(params, L, init, seed)
    row = {"a": a, "q": q, "n": n, "seed": seed, "converged": False, "amplitude": math.nan,
           "quotient_value": math.nan, "min_eigenvalue": math.nan, "residual_norm": math.nan,
           "pohozaev_scaled": math.nan, "beckner_min_gap": math.nan}
    try:
        res = _run_solver(params, f0, method, opts)
    except (SingularJacobianError, PositivityError):
        return row
    row.update(converged=res.converged, amplitude=res.solution.amplitude(), quotient_value=res.quotient_value,
               min_eigenvalue=res.min_eigenvalue, residual_norm=res.residual_norm)
    if res.converged:
        row["pohozaev_scaled"] = pohozaev_scaled(res.solution, params)
        # smallest gap among the functions this cell produced
        row["beckner_min_gap"] = min(beckner_gap(res.solution, q), beckner_gap(f0, q))
    return row


def cmd_sweep(args) -> int:
    if args.a_min is None or args.a_max is None:
        raise UsageError("sweep needs --a-min and --a-max")
    if args.steps < 1 or args.seeds < 1 or not args.a_min <= args.a_max:
        raise UsageError("invalid sweep range")
    a_values = np.linspace(args.a_min, args.a_max, args.steps) if args.steps > 1 else np.array([args.a_min])
    for a in a_values:
        try:
            ProblemParams(args.n, float(a), args.q).validate()
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    m = _node_count(args)
    cells = [(args.n, args.q, float(a), args.seed + k, args.L, m, args.tol, args.init, args.method)
             for a in a_values for k in range(args.seeds)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(sweep_cell, *zip(*cells)))
    else:
        rows = [sweep_cell(*c) for c in cells]
    write_atomic(args.out, sweep_csv(rows))
    ok = sum(bool(r["converged"]) for r in rows)
    print(f"{ok}/{len(rows)} cells converged")
    return EXIT_OK if ok >= 0.9 * len(rows) else EXIT_NUMERIC


def cmd_bifurcation(args) -> int:
    a_lo = args.a_min if args.a_min is not None else 0.5 / (args.q - 1)
    a_hi = args.a_max if args.a_max is not None else 1.5 / (args.q - 1)
    try:
        ProblemParams(args.n, 1.0, args.q)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    analytic = 1.0 / (args.q - 1)
    try:
        a_star = find_bifurcation(args.n, args.q, (a_lo, a_hi))
    except BifurcationError as exc:
        write_json(args.out, {"schema": RESULT_SCHEMA, "command": "bifurcation",
                              "params": {"n": args.n, "q": args.q, "a_min": a_lo, "a_max": a_hi},
                              "error": str(exc)})
        log.error("%s", exc)
        return EXIT_NUMERIC
    write_json(args.out, {"schema": RESULT_SCHEMA, "command": "bifurcation",
                          "params": {"n": args.n, "q": args.q, "a_min": a_lo, "a_max": a_hi},
                          "a_star": a_star, "analytic": analytic, "error_vs_analytic": abs(a_star - analytic)})
    print(f"a* = {a_star:.17g}  |a* - 1/(q-1)| = {abs(a_star - analytic):.3e}")
    return EXIT_OK


def cmd_verify_critical(args) -> int:
    if args.s is None or not 0 <= args.s < 1:
        raise UsageError("--s must lie in [0, 1)")
    try:
        fam = CriticalFamily(args.n, args.s)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    warnings = []
    if not fam.truncation_ok(args.L):
        bound = args.s ** (args.L + 1)
        need = math.ceil(math.log(TRUNCATION_BOUND) / math.log(args.s)) if args.s > 0 else 0
        warnings.append(f"s^(L+1) = {bound:.2e} exceeds {TRUNCATION_BOUND:g}; use L >= {need}")
        log.warning(warnings[-1])
    params = fam.params
    f = critical_trace(args.n, args.s, args.L)
    R = residual(f, params)
    xs = np.random.default_rng(args.seed).uniform(-10, 10, size=(100, args.n - 1))
    er = max(abs(er_residual(f, params, x)) for x in xs)
    v = halfspace_sampler(f)
    probes = {str(lam): reflection_probe(v, lam, args.n, count=2048, seed=args.seed).min_difference
              for lam in (0.25, 1.0, 4.0)}
    report = {
        "schema": RESULT_SCHEMA, "command": "verify-critical",
        "params": {"n": args.n, "s": args.s, "L": args.L, "a": params.a, "q": params.q, "kappa": fam.kappa,
                   "seed": args.seed},
        "eq_residual": R.l2_norm(),
        "eq_residual_scaled": R.l2_norm() / f.l2_norm(),
        "pohozaev_raw": pohozaev_residual(f, params),
        "pohozaev_scaled": pohozaev_scaled(f, params),
        "er_residual_max": er,
        "reflection_min_difference": probes,
        "warnings": warnings,
    }
    passed = (report["eq_residual_scaled"] <= EQ_RESIDUAL_TOL and report["pohozaev_scaled"] <= POHOZAEV_TOL
              and er <= ER_TOL and min(probes.values()) >= -REFLECTION_TOL)
    report["passed"] = passed
    write_json(args.out, report)
    print(f"residual {report['eq_residual_scaled']:.2e}  kws {report['pohozaev_scaled']:.2e}  "
          f"ER {er:.2e}  reflection min {min(probes.values()):.2e}  -> {'ok' if passed else 'FAIL'}")
    return EXIT_OK if passed else EXIT_NUMERIC


def cmd_identities(args) -> int:
    report = {"schema": RESULT_SCHEMA, "command": "identities"}
    failed = False
    if args.input:
        data = _load_result(args.input)
        p = data["params"]
        params = ProblemParams(p["n"], p["a"], p["q"])
        f = BoundaryFunction.from_coeffs(data["result"]["coeffs"], params.n)
        if args.perturb:
            c = f.coeffs.copy()
            c[1] += args.perturb * c[0]
            f = BoundaryFunction(c, f.geometry)
        try:
            scaled = pohozaev_scaled(f, params)
            raw = pohozaev_residual(f, params)
        except PositivityError as exc:
            raise UsageError(f"stored solution is not positive: {exc}") from exc
        report["pohozaev"] = {"input": os.path.basename(args.input), "perturb": args.perturb,
                              "raw": raw, "scaled": scaled, "threshold": POHOZAEV_TOL}
        failed |= scaled > POHOZAEV_TOL
        print(f"kws residual scaled {scaled:.3e} (threshold {POHOZAEV_TOL:g})")
    if args.trials > 0:
        if args.q is None:
            raise UsageError("Beckner trials need --q")
        try:
            params = ProblemParams(args.n, 1.0, args.q).validate()
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        rep = beckner_verify(params, trials=args.trials, seed=args.seed, tol=BECKNER_TOL)
        report["beckner"] = {"n": rep.n, "q": rep.q, "trials": rep.trials, "seed": rep.seed,
                             "min_gap": rep.min_gap, "min_relative_gap": rep.min_relative_gap,
                             "violations": rep.violations, "tol": rep.tol}
        failed |= not rep.ok
        print(f"Beckner: min gap {rep.min_gap:.3e} over {rep.trials} trials, {rep.violations} violations")
    if "pohozaev" not in report and "beckner" not in report:
        raise UsageError("identities needs --input or --trials > 0")
    report["passed"] = not failed
    write_json(args.out, report)
    return EXIT_NUMERIC if failed else EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "bifurcation": cmd_bifurcation,
    "verify-critical": cmd_verify_critical,
    "identities": cmd_identities,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=3, help="dimension (>= 3)")
    common.add_argument("--q", type=float, default=None, help="nonlinearity exponent")
    common.add_argument("--a", type=float, default=None, help="boundary coefficient")
    common.add_argument("--L", type=int, default=64, help="truncation degree")
    common.add_argument("--m", type=int, default=None, help="quadrature nodes (default 2L+2)")
    common.add_argument("--tol", type=float, default=1e-11)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--out", default=None, help="output path")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="steklov-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[common], help="solve for one (n, a, q)")
    p.add_argument("--init", choices=["constant", "perturbed-constant", "mode1", "branch", "file"], default="perturbed-constant")
    p.add_argument("--init-file", default=None)
    p.add_argument("--method", choices=["newton", "minimize"], default="newton")

    p = sub.add_parser("sweep", parents=[common], help="grid of a values times seeds, CSV output")
    p.add_argument("--a-min", type=float, default=None)
    p.add_argument("--a-max", type=float, default=None)
    p.add_argument("--steps", type=int, default=9)
    p.add_argument("--seeds", type=int, default=5, help="seeds per a value, counting up from --seed")
    p.add_argument("--init", choices=["constant", "perturbed-constant", "mode1"], default="perturbed-constant")
    p.add_argument("--method", choices=["newton", "minimize"], default="minimize")

    p = sub.add_parser("bifurcation", parents=[common], help="locate a* on the constant branch")
    p.add_argument("--a-min", type=float, default=None)
    p.add_argument("--a-max", type=float, default=None)

    p = sub.add_parser("verify-critical", parents=[common], help="check a critical-family member")
    p.add_argument("--s", type=float, default=None)

    p = sub.add_parser("identities", parents=[common], help="Beckner trials and conformal-field identity")
    p.add_argument("--input", default=None, help="result JSON to check")
    p.add_argument("--perturb", type=float, default=0.0, help="add PERTURB * c_0 to the l=1 coefficient")
    p.add_argument("--trials", type=int, default=0)

    p = sub.add_parser("rerun", help="re-execute the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the output path")
    return parser


DEFAULT_OUT = {"solve": "result.json", "sweep": "sweep.csv", "bifurcation": "bifurcation.json",
               "verify-critical": "verify_critical.json", "identities": "identities.json"}


def _required(args):
    need = {"solve": ("q", "a"), "sweep": ("q",), "bifurcation": ("q",)}.get(args.command, ())
    missing = [f"--{k}" for k in need if getattr(args, k) is None]
    if missing:
        raise UsageError("missing " + ", ".join(missing))


def _rerun_argv(manifest_path: str, out: str | None) -> list[str]:
    manifest = RunManifest.load(manifest_path)
    argv = list(manifest.argv)
    if out is not None:
        if "--out" in argv:
            argv[argv.index("--out") + 1] = out
        else:
            argv += ["--out", out]
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "rerun":
        try:
            new_argv = _rerun_argv(args.manifest, args.out)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            print(f"steklov-lab: cannot read manifest: {exc}", file=sys.stderr)
            return EXIT_USAGE
        return main(new_argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.out is None:
        args.out = DEFAULT_OUT[args.command]
    try:
        _required(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"steklov-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    manifest_path = _manifest_path(args.out)
    params = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    if getattr(args, "m", None) is None and hasattr(args, "L"):
        params["m"] = default_node_count(args.L)
    manifest = RunManifest(command=args.command, argv=argv, parameters=params,
                           outputs={"result": args.out, "manifest": manifest_path})
    manifest.save(manifest_path)
    try:
        code = COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"steklov-lab: error: {exc}", file=sys.stderr)
        code = EXIT_USAGE
    manifest.finish(manifest_path, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
