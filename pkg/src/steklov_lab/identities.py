"""Closed-form solutions and identity oracles for the boundary problem.

All functions here are independent of the Newton/minimization code paths so
they can be used to certify its output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ball import PositivityError, beckner_gap, nodal_power
from .params import ProblemParams, constant_solution
from .spectral import (BoundaryFunction, QuadratureRule, SphereGeometry, default_rule, gegenbauer_log_norm,
                       nodal_derivative_basis, random_positive_function)

__all__ = [
    "CriticalFamily", "PohozaevForm", "BecknerReport", "constant_solution", "critical_kappa",
    "critical_trace", "critical_eval", "pohozaev_residual", "pohozaev_scaled", "mean_curvature",
    "beckner_verify",
]

# truncation is considered adequate when s^{L+1} falls below this
TRUNCATION_BOUND = 1e-14


def critical_kappa(n: int) -> float:
    """((n-2)/2)^{(n-2)/2}: makes the s = 0 member the constant critical solution."""
    lam = (n - 2) / 2
    return lam ** lam


@dataclass(frozen=True)
class CriticalFamily:
    """Solutions at a = (n-2)/2, q = n/(n-2) concentrating towards s e_n."""

    n: int
    s: float

    def __post_init__(self):
        SphereGeometry(self.n)
        if not 0 <= self.s < 1:
            raise ValueError(f"family parameter s must lie in [0, 1), got {self.s}")

    @property
    def kappa(self) -> float:
        return critical_kappa(self.n)

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self.n, (self.n - 2) / 2, self.n / (self.n - 2))

    def trace_value(self, t):
        lam = (self.n - 2) / 2
        s = self.s
        t = np.asarray(t, dtype=float)
        return self.kappa * (1 - s * s) ** lam * (1 + s * s - 2 * s * t) ** (-lam)

    def truncation_ok(self, L: int) -> bool:
        return self.s ** (L + 1) < TRUNCATION_BOUND


def critical_trace(n: int, s: float, L: int) -> BoundaryFunction:
    """Boundary trace of the critical family, from the Gegenbauer generating function.

    (1 - 2 s t + s^2)^{-lam} = sum_l C_l^lam(t) s^l, so the orthonormal
    coefficients are kappa (1 - s^2)^lam s^l ||C_l||.
    """
    fam = CriticalFamily(n, s)
    geom = SphereGeometry(n)
    lam = geom.gegenbauer_index
    ls = np.arange(L + 1)
    norms = np.exp(0.5 * (gegenbauer_log_norm(ls, lam) + math.log(geom.area_sn2)))
    spow = np.zeros(L + 1)
    spow[0] = 1.0
    if s > 0:
        spow = s ** ls
    coeffs = fam.kappa * (1 - s * s) ** lam * spow * norms
    return BoundaryFunction(coeffs, geom)


def critical_eval(n: int, s: float, x) -> float:
    """kappa [(1 - s^2) / (1 + s^2 |x|^2 - 2 s x_n)]^{(n-2)/2} at a Cartesian point."""
    fam = CriticalFamily(n, s)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise ValueError(f"expected points in R^{n}")
    lam = (n - 2) / 2
    den = 1 + s * s * np.sum(x * x, axis=-1) - 2 * s * x[..., -1]
    out = fam.kappa * ((1 - s * s) / den) ** lam
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PohozaevForm:
    params: ProblemParams

    @property
    def coeff_linear(self) -> float:
        n = self.params.n
        return ((n - 2) / 2 - self.params.a) * 2 / (n - 2)

    @property
    def coeff_power(self) -> float:
        return self.params.q_crit - self.params.q

    @property
    def weight_exponent(self) -> float:
        return (self.params.n - 1) / 2


def pohozaev_residual(f: BoundaryFunction, params: ProblemParams, rule: QuadratureRule | None = None) -> float:
    """int_{S^{n-1}} [A f + B f^q] <grad f, grad xi_n> dsigma for the axisymmetric ``f``.

    With f = f(xi_n) the pairing is f'(t)(1 - t^2), giving
    |S^{n-2}| int [A f + B f^q] f'(t) (1 - t^2)^{(n-1)/2} dt with
    A = ((n-2)/2 - a) 2/(n-2) and B = n/(n-2) - q.  The components along
    xi_i, i < n, vanish identically by azimuthal symmetry.
    """
    form = PohozaevForm(params)
    if rule is None:
        rule = default_rule(f.n, f.L)
    vals = f.nodal_values(rule)
    dvals = nodal_derivative_basis(rule, f.L) @ f.coeffs
    bracket = form.coeff_linear * vals + form.coeff_power * nodal_power(vals, params.q)
    t = rule.nodes
    return rule.integrate(bracket * dvals * (1 - t * t))


def pohozaev_scaled(f: BoundaryFunction, params: ProblemParams, rule: QuadratureRule | None = None,
                    eps: float = 1e-300) -> float:
    """|pohozaev_residual| / (|A| ||f||_2^2 + |B| ||f||_{q+1}^{q+1} + eps)."""
    form = PohozaevForm(params)
    if rule is None:
        rule = default_rule(f.n, f.L)
    raw = pohozaev_residual(f, params, rule)
    vals = f.nodal_values(rule)
    scale = (abs(form.coeff_linear) * f.l2_norm() ** 2
             + abs(form.coeff_power) * rule.integrate(nodal_power(vals, params.q + 1)) + eps)
    return abs(raw) / scale


def mean_curvature(f: BoundaryFunction, params: ProblemParams, t):
    """H = ((n-2)/2 - a) f^{-2/(n-2)} + f^{q - n/(n-2)} of u^{4/(n-2)} dx^2.

    The dimensional prefactor of the usual conformal-change formula is
    omitted; only the tangential gradient of H enters the conformal-field
    identity, so the overall constant is immaterial.
    """
    n = params.n
    vals = np.asarray(f(t), dtype=float)
    if np.any(vals <= 0):
        raise PositivityError("mean curvature needs a positive trace")
    out = ((n - 2) / 2 - params.a) * vals ** (-2 / (n - 2)) + vals ** (params.q - params.q_crit)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BecknerReport:
    n: int
    q: float
    trials: int
    seed: int
    min_gap: float
    min_relative_gap: float
    violations: int
    tol: float = 1e-10

    @property
    def ok(self) -> bool:
        return self.violations == 0


def beckner_verify(params: ProblemParams, trials: int = 1000, seed: int = 0, L: int = 16,
                   tol: float = 1e-10) -> BecknerReport:
    """Minimum Beckner gap over seeded random positive trial functions.

    Trials mix amplitudes from 1e-4 to 0.95 and random levels, so both the
    near-equality regime at constants and strongly non-constant data are
    exercised.  ``params.a`` is not used.
    """
    rng = np.random.default_rng(seed)
    rule = default_rule(params.n, L)
    gaps = np.empty(trials)
    rel = np.empty(trials)
    for k in range(trials):
        amp = 10 ** rng.uniform(-4, math.log10(0.95))
        degree = int(rng.integers(1, L + 1))
        level = 10 ** rng.uniform(-1, 1)
        f = random_positive_function(params.n, L, rng, degree=degree, amplitude=amp, level=level)
        gaps[k] = beckner_gap(f, params.q, rule)
        rel[k] = gaps[k] / f.l2_norm() ** 2
    return BecknerReport(n=params.n, q=params.q, trials=trials, seed=seed, min_gap=float(gaps.min()),
                         min_relative_gap=float(rel.min()), violations=int(np.sum(gaps < -tol)), tol=tol)
