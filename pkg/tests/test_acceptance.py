"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Tolerances and runtime budgets are the contract values; none are relaxed.
"""

import json
import math
import time

import numpy as np
import pytest

from steklov_lab import cli
from steklov_lab.ball import beckner_gap, dirichlet_energy, dtn
from steklov_lab.halfspace import (default_directions, default_radii, er_residual, fit_asymptotics,
                                   halfspace_sampler, reflection_probe)
from steklov_lab.identities import beckner_verify, critical_eval, critical_kappa, critical_trace, pohozaev_scaled
from steklov_lab.params import ProblemParams
from steklov_lab.solver import (SolverOptions, continue_branch, find_bifurcation, minimize_quotient, newton_solve,
                                residual)
from steklov_lab.spectral import (BoundaryFunction, SphereGeometry, analyze, build_rule, default_rule,
                                  jacobi_moment, random_positive_function, synthesize)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail, elapsed, budget=None):
        timing = f"{elapsed:.2f}s" + (f" (budget {budget:g}s)" if budget else "")
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}; {timing}")
    return emit


def test_criterion_1_quadrature_and_transforms(report):
    t0 = time.perf_counter()
    worst_moment = worst_trip = 0.0
    rng = np.random.default_rng(0)
    for n in (3, 4, 5, 7):
        g = SphereGeometry(n)
        for m in (8, 16, 32):
            rule = build_rule(n, m)
            for k in range(2 * m):
                exact = g.area_sn2 * jacobi_moment(k, n)
                # odd moments vanish; measure them against the neighbouring even moment
                ref = abs(exact) if k % 2 == 0 else g.area_sn2 * jacobi_moment(k + 1, n)
                worst_moment = max(worst_moment, abs(rule.integrate(rule.nodes ** k) - exact) / ref)
            L = m - 1
            c = rng.normal(size=L + 1)
            back = analyze(synthesize(BoundaryFunction.from_coeffs(c, n), rule.nodes), rule, L)
            worst_trip = max(worst_trip, np.max(np.abs(back.coeffs - c)) / np.max(np.abs(c)))
    elapsed = time.perf_counter() - t0
    ok = worst_moment <= 1e-12 and worst_trip <= 1e-12 and elapsed < 5
    report(1, ok, f"moment rel err {worst_moment:.1e}, round trip {worst_trip:.1e}", elapsed, 5)
    assert ok


def test_criterion_2_dtn_spectral_law(report):
    t0 = time.perf_counter()
    L = 96
    exact = True
    for n in (3, 4, 5):
        for l in range(L + 1):
            e = BoundaryFunction.from_coeffs(np.eye(L + 1)[l], n)
            exact &= bool(np.array_equal(dtn(e).coeffs, l * e.coeffs))
    rule = default_rule(3, 4)
    energy = dirichlet_energy(analyze(rule.nodes, rule, 4))
    err = abs(energy - 4 * math.pi / 3) / (4 * math.pi / 3)
    elapsed = time.perf_counter() - t0
    ok = exact and err <= 1e-12
    report(2, ok, f"dtn exact for l<=96: {exact}, energy(t) rel err {err:.1e}", elapsed)
    assert ok


def _fd_laplacian(n, s, x, h):
    """(2n+1)-point Laplacian, one Richardson step on h and h/2."""
    def lap(step):
        out = -2 * n * critical_eval(n, s, x)
        for e in np.eye(n):
            out = out + critical_eval(n, s, x + step * e) + critical_eval(n, s, x - step * e)
        return out / step ** 2
    return (4 * lap(h / 2) - lap(h)) / 3


def test_criterion_3_critical_family(report):
    t0 = time.perf_counter()
    worst_res = worst_lap = 0.0
    rng = np.random.default_rng(3)
    for n in (3, 4, 5):
        a, q = (n - 2) / 2, n / (n - 2)
        assert critical_kappa(n) == pytest.approx(((n - 2) / 2) ** ((n - 2) / 2))
        d = rng.normal(size=(100, n))
        x = d / np.linalg.norm(d, axis=1, keepdims=True) * 0.9 * rng.uniform(0, 1, (100, 1)) ** (1 / n)
        for s in (0.0, 0.3, 0.6):
            f = critical_trace(n, s, 80)
            worst_res = max(worst_res, residual(f, ProblemParams(n, a, q)).l2_norm() / f.l2_norm())
            worst_lap = max(worst_lap, float(np.max(np.abs(_fd_laplacian(n, s, x, 1e-3)))))
    elapsed = time.perf_counter() - t0
    ok = worst_res <= 1e-8 and worst_lap <= 1e-6 and elapsed < 30
    report(3, ok, f"scaled residual {worst_res:.1e}, FD Laplacian {worst_lap:.1e}", elapsed, 30)
    assert ok


def test_criterion_4_bifurcation_threshold(report):
    t0 = time.perf_counter()
    worst = 0.0
    for n in (3, 4):
        for q in (1.5, 2.0, 2.5):
            if q > n / (n - 2):
                continue
            target = 1 / (q - 1)
            worst = max(worst, abs(find_bifurcation(n, q, (0.5 * target, 1.5 * target)) - target))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 10
    report(4, ok, f"max |a* - 1/(q-1)| {worst:.1e}", elapsed, 10)
    assert ok


def test_criterion_5_uniqueness_in_theorem_range(report):
    t0 = time.perf_counter()
    L = 64
    opts = SolverOptions(L=L)
    grid = np.cos(np.linspace(0, math.pi, 401))
    converged = attempted = 0
    worst = 0.0
    nonconstant = 0
    for q in (1.5, 2.0, 2.5):
        for a in (0.1, 0.3, 0.5):
            p = ProblemParams(3, a, q)
            uc = p.constant_solution()
            rng = np.random.default_rng(int(1000 * q + 100 * a))
            for _ in range(20):
                f0 = random_positive_function(3, L, rng, degree=int(rng.integers(1, 13)),
                                              amplitude=float(rng.uniform(0.05, 0.9)),
                                              level=uc * 10 ** float(rng.uniform(-0.5, 0.5)))
                for solve in (minimize_quotient, newton_solve):
                    attempted += 1
                    res = solve(f0, p, opts)
                    if not res.converged:
                        continue
                    converged += 1
                    dist = float(np.max(np.abs(res.solution(grid) - uc)))
                    worst = max(worst, dist)
                    nonconstant += dist > 1e-6
    elapsed = time.perf_counter() - t0
    ok = nonconstant == 0 and worst <= 1e-6 and elapsed < 180
    report(5, ok, f"{converged}/{attempted} converged, {nonconstant} nonconstant, "
                  f"max sup distance {worst:.1e}", elapsed, 180)
    assert ok


def test_criterion_6_beckner_inequality(report):
    t0 = time.perf_counter()
    worst = math.inf
    for n, q in ((3, 2.0), (3, 3.0), (4, 2.0)):
        rep = beckner_verify(ProblemParams(n, 1.0, q), trials=1000, seed=n * 10 + int(q))
        assert rep.trials == 1000
        worst = min(worst, rep.min_gap)
    equality = max(abs(beckner_gap(BoundaryFunction.constant(k, n, 16), q))
                   for k in (0.1, 1.0, 3.7) for n, q in ((3, 2.0), (3, 3.0), (4, 2.0)))
    elapsed = time.perf_counter() - t0
    ok = worst >= -1e-10 and equality <= 1e-10 and elapsed < 30
    report(6, ok, f"min gap {worst:.1e}, gap at constants {equality:.1e}", elapsed, 30)
    assert ok


def _detection_catalog():
    """50 non-solutions: 36 monotone perturbations of constants, 14 tilted branch points.

    Reflection-symmetric perturbations are deliberately absent: the identity
    integrand is odd in t for even data, so they are invisible to it.
    """
    catalog = []
    rule = default_rule(3, 16)
    for q in (1.5, 2.0, 2.5):
        for a in (0.1, 0.3, 0.5):
            p = ProblemParams(3, a, q)
            for eps in (0.1, 0.2, 0.3, 0.4):
                catalog.append((analyze(p.constant_solution() * (1 + eps * rule.nodes), rule, 16), p))
    trace = continue_branch(3, 2.0, 1.05, 1.3, 6)
    for pt in trace.points:
        for delta in (0.05, -0.05):
            c = pt.solution.coeffs.copy()
            c[1] += delta * c[0]
            catalog.append((BoundaryFunction(c, pt.solution.geometry), ProblemParams(3, pt.a, 2.0)))
    return catalog, trace


def test_criterion_7_pohozaev_identity(report):
    t0 = time.perf_counter()
    catalog, trace = _detection_catalog()
    solutions = [(pt.solution, ProblemParams(3, pt.a, 2.0)) for pt in trace.points]
    assert all(pt.amplitude > 1e-3 for pt in trace.points)
    rng = np.random.default_rng(7)
    for q, a in ((2.0, 0.3), (2.5, 0.5), (2.0, 1.1), (2.0, 1.25)):
        p = ProblemParams(3, a, q)
        res = minimize_quotient(random_positive_function(3, 64, rng, level=p.constant_solution()), p)
        if res.converged:
            solutions.append((res.solution, p))
    worst_solution = max(pohozaev_scaled(f, p) for f, p in solutions)
    weakest_detection = min(pohozaev_scaled(f, p) for f, p in catalog)
    elapsed = time.perf_counter() - t0
    ok = len(catalog) == 50 and worst_solution <= 1e-6 and weakest_detection > 1e-3 and elapsed < 60
    report(7, ok, f"{len(solutions)} solutions max scaled {worst_solution:.1e}, "
                  f"{len(catalog)} non-solutions min scaled {weakest_detection:.1e}", elapsed, 60)
    assert ok


def test_criterion_8_halfspace_consistency(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_er = worst_c0 = worst_c1 = 0.0
    worst_reflection = math.inf
    cases = [(ProblemParams(3, 0.5, 2.0), BoundaryFunction.constant(0.5, 3, 8)),
             (ProblemParams(4, 0.5, 2.0), BoundaryFunction.constant(0.5, 4, 8)),
             (ProblemParams(5, 1.0, 1.5), BoundaryFunction.constant(1.0, 5, 8))]
    for n in (3, 4, 5):
        for s in (0.3, 0.6):
            cases.append((ProblemParams(n, (n - 2) / 2, n / (n - 2)), critical_trace(n, s, 80)))
    for p, f in cases:
        xs = rng.uniform(-10, 10, (100, p.n - 1))
        worst_er = max(worst_er, max(abs(er_residual(f, p, x)) for x in xs))
    for n in (3, 4, 5, 6):
        for k in (0.5, 1.0, 2.0):
            fit = fit_asymptotics(halfspace_sampler(BoundaryFunction.constant(k, n, 2)), default_directions(n),
                                  default_radii())
            worst_c0 = max(worst_c0, abs(fit.c0 - k * 2 ** ((n - 2) / 2)))
            worst_c1 = max(worst_c1, abs(fit.c1 + (n - 2)))
    for n in (3, 4, 5):
        for s in (0.0, 0.3, 0.6):
            v = halfspace_sampler(critical_trace(n, s, 80))
            for lam in (0.25, 1.0, 4.0):
                worst_reflection = min(worst_reflection, reflection_probe(v, lam, n, count=2048).min_difference)
    elapsed = time.perf_counter() - t0
    ok = (worst_er <= 1e-6 and worst_c0 <= 1e-6 and worst_c1 <= 1e-3 and worst_reflection >= -1e-10
          and elapsed < 60)
    report(8, ok, f"ER {worst_er:.1e}, c0 err {worst_c0:.1e}, c1 err {worst_c1:.1e}, "
                  f"reflection min {worst_reflection:.1e}", elapsed, 60)
    assert ok


RERUN_COMMANDS = [
    ["solve", "--n", "3", "--q", "2", "--a", "0.5", "--L", "64", "--init", "perturbed-constant", "--seed", "7"],
    ["solve", "--n", "3", "--q", "2", "--a", "1.2", "--L", "48", "--init", "branch", "--method", "newton"],
    ["sweep", "--n", "3", "--q", "2", "--a-min", "0.1", "--a-max", "0.5", "--steps", "3", "--seeds", "2",
     "--L", "32", "--jobs", "2"],
    ["bifurcation", "--n", "3", "--q", "2.5"],
    ["verify-critical", "--n", "4", "--s", "0.3", "--L", "80"],
    ["identities", "--n", "3", "--q", "2", "--trials", "200", "--seed", "11"],
]


def test_criterion_9_reproducibility(report, tmp_path):
    t0 = time.perf_counter()
    identical = []
    for k, argv in enumerate(RERUN_COMMANDS):
        suffix = ".csv" if argv[0] == "sweep" else ".json"
        out = tmp_path / f"run{k}{suffix}"
        cli.main(argv + ["--out", str(out)])
        manifest = tmp_path / f"run{k}.manifest.json"
        assert json.loads(manifest.read_text())["status"] == "finished"
        again = tmp_path / f"rerun{k}{suffix}"
        cli.main(["rerun", str(manifest), "--out", str(again)])
        identical.append(out.read_bytes() == again.read_bytes())
    elapsed = time.perf_counter() - t0
    ok = all(identical)
    report(9, ok, f"{sum(identical)}/{len(identical)} reruns byte-identical", elapsed)
    assert ok
