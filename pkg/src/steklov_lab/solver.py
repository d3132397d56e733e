"""Positive solutions of  dtn(f) + a f = f^q  on S^{n-1} (axisymmetric).

The residual is assembled pseudospectrally: f is sampled at Gauss nodes, the
power is taken pointwise and the result is projected back onto degree <= L.
The Jacobian is the exact derivative of that discrete map,

    J = diag(l) + a I - q M[f^{q-1}],   M[g]_{lk} = sum_j w_j g(t_j) e_l(t_j) e_k(t_j),

so it is symmetric and Newton converges quadratically on the discrete system.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq, minimize

from .ball import PositivityError, nodal_power, quotient
from .params import CRITICAL_ATOL, ProblemParams, constant_solution
from .spectral import BoundaryFunction, QuadratureRule, build_rule, default_node_count, nodal_basis

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    pass


class SingularJacobianError(SolverError):
    def __init__(self, smallest_singular_value: float, iteration: int):
        super().__init__(f"Jacobian singular at iteration {iteration}: "
                         f"smallest singular value {smallest_singular_value:.3e}")
        self.smallest_singular_value = smallest_singular_value
        self.iteration = iteration


class BifurcationError(SolverError):
    pass


class ContinuationError(SolverError):
    def __init__(self, message: str, trace: "ContinuationTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-11
    max_iter: int = 50
    damping: float = 0.5
    max_halvings: int = 40
    positivity_floor: float = 1e-12
    L: int | None = None
    m: int | None = None
    seed: int = 0
    # below this sup-norm a "solution" is the trivial one
    trivial_floor: float = 1e-8

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")


@dataclass
class SolveResult:
    solution: BoundaryFunction
    residual_norm: float
    multiplier: float
    iterations: int
    spectrum: np.ndarray
    converged: bool
    quotient_value: float
    message: str = ""
    history: list = field(default_factory=list)

    @property
    def min_eigenvalue(self) -> float:
        return float(self.spectrum[0]) if len(self.spectrum) else math.nan


def _setup(f: BoundaryFunction, params: ProblemParams, rule: QuadratureRule | None,
           opts: SolverOptions | None = None):
    if f.n != params.n:
        raise ValueError("function and parameters have different dimensions")
    if rule is None:
        m = opts.m if opts is not None and opts.m is not None else default_node_count(f.L)
        rule = build_rule(f.n, m)
    if f.L >= rule.m:
        raise ValueError("rule has too few nodes for the truncation degree")
    return rule, nodal_basis(rule, f.L)


def _residual_vec(c, params, rule, B):
    vals = B @ c
    power = nodal_power(vals, params.q)
    return np.arange(c.size) * c + params.a * c - B.T @ (rule.weights * power)


def _jacobian_mat(c, params, rule, B):
    vals = B @ c
    deriv = params.q * nodal_power(vals, params.q - 1)
    if float(params.q).is_integer():
        deriv = deriv * np.sign(vals)  # d|v|^q/dv
    M = B.T @ ((rule.weights * deriv)[:, None] * B)
    J = np.diag(np.arange(c.size) + params.a) - M
    return 0.5 * (J + J.T)


def residual(f: BoundaryFunction, params: ProblemParams, rule: QuadratureRule | None = None) -> BoundaryFunction:
    """Projected residual dtn(f) + a f - P_L(f^q)."""
    rule, B = _setup(f, params, rule)
    return BoundaryFunction(_residual_vec(f.coeffs, params, rule, B), f.geometry)


def jacobian(f: BoundaryFunction, params: ProblemParams, rule: QuadratureRule | None = None) -> np.ndarray:
    rule, B = _setup(f, params, rule)
    return _jacobian_mat(f.coeffs, params, rule, B)


def spectrum(f: BoundaryFunction, params: ProblemParams, rule: QuadratureRule | None = None) -> np.ndarray:
    """Sorted eigenvalues of the linearization at ``f``."""
    J = jacobian(f, params, rule)
    try:
        return np.linalg.eigvalsh(J)
    except np.linalg.LinAlgError as exc:
        raise SolverError("eigensolver failed") from exc


def _needs_pinning(params: ProblemParams) -> bool:
    # the critical family is a one-parameter set of solutions; fix c_1
    return params.is_critical and abs(params.a - params.theorem_threshold) <= CRITICAL_ATOL


def _finish(c, params, rule, B, *, converged, iterations, rn, message, history, multiplier=1.0):
    f = BoundaryFunction(c, rule.geometry)
    try:
        spec = np.linalg.eigvalsh(_jacobian_mat(c, params, rule, B))
        qv = quotient(f, params, rule)
    except (PositivityError, ZeroDivisionError):
        spec, qv = np.array([]), math.nan
    return SolveResult(solution=f, residual_norm=float(rn), multiplier=float(multiplier),
                       iterations=iterations, spectrum=spec, converged=converged,
                       quotient_value=float(qv), message=message, history=history)


def newton_solve(f0: BoundaryFunction, params: ProblemParams, opts: SolverOptions | None = None,
                 rule: QuadratureRule | None = None) -> SolveResult:
    """Damped Newton iteration on the projected residual.

    Steps are halved until every nodal value exceeds ``opts.positivity_floor``
    and the residual norm decreases.  ``iterations`` counts residual
    evaluations of the main loop, so an exact initial guess reports 1.
    Non-convergence is returned with ``converged=False`` and a message; a
    singular Jacobian raises :class:`SingularJacobianError`.
    """
    opts = opts or SolverOptions()
    if opts.L is not None and opts.L != f0.L:
        f0 = f0.resized(opts.L)
    rule, B = _setup(f0, params, rule, opts)
    c = f0.coeffs.copy()
    if np.min(B @ c) <= opts.positivity_floor:
        raise PositivityError("initial guess is not positive at the quadrature nodes")

    pin = _needs_pinning(params)
    size = c.size
    history = []
    rn = math.inf
    for it in range(1, opts.max_iter + 1):
        R = _residual_vec(c, params, rule, B)
        rn = float(np.linalg.norm(R))
        history.append(rn)
        if rn <= opts.tol:
            break
        J = _jacobian_mat(c, params, rule, B)
        if pin:
            A = np.zeros((size + 1, size + 1))
            A[:size, :size] = J
            A[1, size] = A[size, 1] = 1.0
            rhs = np.concatenate([-R, [0.0]])
        else:
            A, rhs = J, -R
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= 1e-13 * sv[0]:
            raise SingularJacobianError(float(sv[-1]), it)
        delta = np.linalg.solve(A, rhs)[:size]

        step = 1.0
        for _ in range(opts.max_halvings):
            trial = c + step * delta
            if np.min(B @ trial) > opts.positivity_floor:
                rn_trial = np.linalg.norm(_residual_vec(trial, params, rule, B))
                if rn_trial <= opts.tol or rn_trial < (1 - 1e-4 * step) * rn:
                    c = trial
                    break
            step *= opts.damping
        else:
            return _finish(c, params, rule, B, converged=False, iterations=it, rn=rn, history=history,
                           message="line search failed: no positive step decreases the residual")
    else:
        return _finish(c, params, rule, B, converged=False, iterations=opts.max_iter, rn=rn,
                       history=history, message=f"no convergence in {opts.max_iter} iterations")

    if np.max(np.abs(B @ c)) < opts.trivial_floor:
        return _finish(c, params, rule, B, converged=False, iterations=it, rn=rn, history=history,
                       message="collapsed to the trivial solution")
    return _finish(c, params, rule, B, converged=True, iterations=it, rn=rn, history=history,
                   message="converged")


def rescale_to_solution(g: BoundaryFunction, multiplier: float, q: float) -> BoundaryFunction:
    """If dtn g + a g = mu g^q then theta g with theta = mu^{1/(q-1)} solves the equation."""
    if not multiplier > 0:
        raise ValueError("multiplier must be positive")
    return g.scaled(multiplier ** (1.0 / (q - 1)))


def minimize_quotient(f0: BoundaryFunction, params: ProblemParams, opts: SolverOptions | None = None,
                      rule: QuadratureRule | None = None) -> SolveResult:
    """Minimize the Rayleigh-type quotient, then rescale and polish with Newton.

    A critical point g satisfies dtn g + a g = mu g^q with mu = N(g)/P(g),
    N(g) = energy + a ||g||^2 and P(g) = ||g||_{q+1}^{q+1}.
    """
    opts = opts or SolverOptions()
    if params.q >= params.q_crit:
        raise ValueError("quotient minimization needs a subcritical exponent")
    if opts.L is not None and opts.L != f0.L:
        f0 = f0.resized(opts.L)
    rule, B = _setup(f0, params, rule, opts)
    q, w = params.q, rule.weights
    diag = np.arange(f0.L + 1) + params.a
    x0 = f0.coeffs / np.linalg.norm(f0.coeffs)

    def objective(c):
        v = B @ c
        av = np.abs(v)
        P = np.dot(w, av ** (q + 1))
        N = np.dot(diag, c * c)
        Pp = P ** (2 / (q + 1))
        dP = (q + 1) * (B.T @ (w * np.sign(v) * av ** q))
        grad = 2 * diag * c / Pp - N * (2 / (q + 1)) * P ** (2 / (q + 1) - 1) * dP / Pp ** 2
        return N / Pp, grad

    res = minimize(objective, x0, jac=True, method="BFGS", options={"gtol": 1e-12, "maxiter": 2000})
    g = res.x / np.linalg.norm(res.x)
    if np.mean(B @ g) < 0:
        g = -g
    vals = B @ g
    mu = np.dot(diag, g * g) / np.dot(w, np.abs(vals) ** (q + 1))
    start = rescale_to_solution(BoundaryFunction(g, rule.geometry), mu, q)
    if np.min(B @ start.coeffs) <= opts.positivity_floor:
        f = BoundaryFunction(start.coeffs, rule.geometry)
        return _finish(f.coeffs, params, rule, B, converged=False, iterations=res.nit, rn=math.nan,
                       history=[], multiplier=mu, message="minimizer left the positive cone")
    polished = newton_solve(start, params, replace(opts, L=None), rule)
    polished.multiplier = float(mu)
    polished.iterations += int(res.nit)
    if not polished.converged:
        polished.message = f"stagnation after quotient minimization ({res.message}); {polished.message}"
    return polished


# ---------------------------------------------------------------------------
# Bifurcation and continuation
# ---------------------------------------------------------------------------

def _odd_mode_eigenvalue(n: int, q: float, a: float, L: int) -> float:
    params = ProblemParams(n, a, q)
    u = BoundaryFunction.constant(constant_solution(params), n, L)
    J = jacobian(u, params)
    odd = np.arange(1, L + 1, 2)
    return float(np.linalg.eigvalsh(J[np.ix_(odd, odd)])[0])


def find_bifurcation(n: int, q: float, bracket: tuple[float, float], L: int = 8) -> float:
    """Value of a where the first odd (l = 1) eigenvalue at the constant solution vanishes."""
    lo, hi = bracket
    if not 0 < lo < hi:
        raise BifurcationError(f"invalid bracket {bracket}")
    g_lo = _odd_mode_eigenvalue(n, q, lo, L)
    g_hi = _odd_mode_eigenvalue(n, q, hi, L)
    if g_lo * g_hi > 0:
        raise BifurcationError(f"no sign change of the l=1 eigenvalue on {bracket}")
    return brentq(lambda a: _odd_mode_eigenvalue(n, q, a, L), lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


@dataclass(frozen=True)
class ContinuationPoint:
    a: float
    amplitude: float
    min_eigenvalue: float
    residual_norm: float
    solution: BoundaryFunction


@dataclass
class ContinuationTrace:
    n: int
    q: float
    branch: str
    points: list = field(default_factory=list)

    def as_array(self) -> np.ndarray:
        """Rows (a, amplitude, min_eigenvalue, residual_norm)."""
        return np.array([(p.a, p.amplitude, p.min_eigenvalue, p.residual_norm) for p in self.points])


def _accept(res: SolveResult, branch: str, amp_floor: float) -> bool:
    if not res.converged:
        return False
    amp = res.solution.amplitude()
    return amp <= amp_floor if branch == "constant" else amp > amp_floor


def _pinned_branch_point(c, a, eps, q, rule, B, n, max_iter=30):
    """Solve R(c, a) = 0 with c_1 = eps for the unknowns (c, a)."""
    size = c.size
    c = c.copy()
    c[1] = eps
    for _ in range(max_iter):
        params = ProblemParams(n, a, q)
        if np.min(B @ c) <= 0 or not a > 0:
            return None
        R = _residual_vec(c, params, rule, B)
        if np.linalg.norm(R) <= 1e-13 * max(1.0, np.linalg.norm(c)):
            return c, a
        A = np.zeros((size + 1, size + 1))
        A[:size, :size] = _jacobian_mat(c, params, rule, B)
        A[:size, size] = c  # dR/da
        A[size, 1] = 1.0
        d = np.linalg.solve(A, np.concatenate([-R, [0.0]]))
        c = c + d[:size]
        a = a + d[size]
    return None


def _seed_bifurcating(params: ProblemParams, a_star: float, L: int, opts: SolverOptions,
                      amp_floor: float, max_steps: int = 400):
    """Follow the branch out of a* with the l = 1 coefficient as parameter until it crosses ``params.a``.

    The branch leaves the constant solution along the l = 1 eigenmode; the
    crossing point is interpolated and refined by Newton at fixed ``a``.
    """
    n, q, a_target = params.n, params.q, params.a
    rule, B = _setup(BoundaryFunction.constant(1.0, n, L), params, None, opts)
    c = BoundaryFunction.constant(constant_solution(ProblemParams(n, a_star, q)), n, L).coeffs.copy()
    a = a_star
    deps = 0.05 * c[0]
    eps = 0.0
    for _ in range(max_steps):
        point = _pinned_branch_point(c, a, eps + deps, q, rule, B, n)
        if point is None:
            deps *= 0.5
            if deps < 1e-8 * c[0]:
                return None
            continue
        c_new, a_new = point
        eps += deps
        if (a - a_target) * (a_new - a_target) <= 0:
            w = (a_target - a) / (a_new - a) if a_new != a else 1.0
            guess = BoundaryFunction((1 - w) * c + w * c_new, rule.geometry)
            try:
                res = newton_solve(guess, params, opts, rule)
            except (PositivityError, SingularJacobianError):
                return None
            return res if _accept(res, "bifurcating", amp_floor) else None
        c, a = c_new, a_new
        deps = min(deps * 1.5, 0.1 * c[0])
    return None


def bifurcating_solution(params: ProblemParams, opts: SolverOptions | None = None,
                         amp_floor: float = 1e-8) -> SolveResult | None:
    """A nonconstant solution on the branch leaving the constants at a* = 1/(q-1).

    Returns ``None`` when ``params.a`` is not past a* or the branch cannot be
    followed that far.
    """
    opts = opts or SolverOptions()
    L = opts.L if opts.L is not None else 64
    opts = replace(opts, L=L)
    q = params.q
    a_star = find_bifurcation(params.n, q, (0.25 / (q - 1), 4.0 / (q - 1)))
    if not params.a > a_star:
        return None
    return _seed_bifurcating(params, a_star, L, opts, amp_floor)


def continue_branch(n: int, q: float, a_start: float, a_end: float, steps: int,
                    opts: SolverOptions | None = None, branch: str | None = None,
                    amp_floor: float = 1e-8, max_retries: int = 8) -> ContinuationTrace:
    """Natural-parameter continuation in ``a`` with a secant predictor.

    ``branch`` is ``"constant"`` or ``"bifurcating"``; by default it is chosen
    from the side of a* = 1/(q-1) on which ``a_start`` lies.  The bifurcating
    branch is seeded by the l = 1 eigenmode of the linearization at a*.
    Failed steps are halved; after ``max_retries`` halvings a
    :class:`ContinuationError` carrying the partial trace is raised.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    opts = opts or SolverOptions()
    L = opts.L if opts.L is not None else 64
    opts = replace(opts, L=L)
    a_star = find_bifurcation(n, q, (0.25 / (q - 1), 4.0 / (q - 1)))
    if branch is None:
        branch = "bifurcating" if a_start > a_star else "constant"
    if branch not in ("constant", "bifurcating"):
        raise ValueError(f"unknown branch {branch!r}")
    trace = ContinuationTrace(n=n, q=q, branch=branch)

    def record(a, res):
        trace.points.append(ContinuationPoint(a=a, amplitude=res.solution.amplitude(),
                                              min_eigenvalue=res.min_eigenvalue,
                                              residual_norm=res.residual_norm, solution=res.solution))

    p0 = ProblemParams(n, a_start, q).validate()
    if branch == "constant":
        first = newton_solve(BoundaryFunction.constant(constant_solution(p0), n, L), p0, opts)
        ok = _accept(first, branch, amp_floor)
    else:
        first = _seed_bifurcating(p0, a_star, L, opts, amp_floor)
        ok = first is not None
    if not ok:
        raise ContinuationError(f"could not find a {branch} solution at a={a_start}", trace)
    record(a_start, first)

    da_nominal = (a_end - a_start) / steps
    a_prev = a_start
    targets = [a_start + k * da_nominal for k in range(1, steps + 1)]
    for target in targets:
        while a_prev != target:
            frac = 1.0
            for _ in range(max_retries + 1):
                a_new = target if frac == 1.0 else a_prev + frac * (target - a_prev)
                pts = trace.points
                c_last = pts[-1].solution.coeffs
                if len(pts) >= 2 and pts[-1].a != pts[-2].a:
                    slope = (c_last - pts[-2].solution.coeffs) / (pts[-1].a - pts[-2].a)
                    guess = c_last + slope * (a_new - pts[-1].a)
                else:
                    guess = c_last * (constant_solution(ProblemParams(n, a_new, q))
                                      / constant_solution(ProblemParams(n, pts[-1].a, q)))
                params = ProblemParams(n, a_new, q).validate()
                try:
                    res = newton_solve(BoundaryFunction(guess, params.geometry), params, opts)
                except (PositivityError, SingularJacobianError) as exc:
                    log.debug("step to a=%g failed: %s", a_new, exc)
                    res = None
                if res is not None and _accept(res, branch, amp_floor):
                    record(a_new, res)
                    a_prev = a_new
                    break
                frac *= 0.5
            else:
                raise ContinuationError(f"continuation stalled near a={a_prev}", trace)
    return trace
