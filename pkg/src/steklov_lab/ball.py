"""Ball-side operators expressed through the boundary trace.

Harmonic extension of f = sum c_l e_l is u(r, t) = sum c_l r^l e_l(t), so the
Dirichlet-to-Neumann map is diagonal, (dtn f)_l = l c_l, and the Dirichlet
energy of the extension is sum l c_l^2.  Points in the ball are given either
as (r, t) with t the cosine of the polar angle, or as Cartesian n-vectors.
"""

from __future__ import annotations

import math

import numpy as np

from .params import ProblemParams
from .spectral import BoundaryFunction, QuadratureRule, basis_derivative_table, basis_table, default_rule


class PositivityError(ValueError):
    """A non-integer power was requested of a function that is not positive."""


def _rule_for(f: BoundaryFunction, rule: QuadratureRule | None) -> QuadratureRule:
    if rule is None:
        return default_rule(f.n, f.L)
    if rule.n != f.n:
        raise ValueError("rule and function live on different spheres")
    return rule


def nodal_power(values: np.ndarray, p: float) -> np.ndarray:
    """|values|^p for integer p; values^p for positive values otherwise."""
    values = np.asarray(values, dtype=float)
    if float(p).is_integer():
        return np.abs(values) ** p
    if np.any(values <= 0):
        raise PositivityError(f"non-integer power {p} of a function with min {values.min():.3e} <= 0")
    return values ** p


def dtn(f: BoundaryFunction) -> BoundaryFunction:
    """Dirichlet-to-Neumann map: normal derivative of the harmonic extension."""
    return BoundaryFunction(np.arange(f.L + 1) * f.coeffs, f.geometry)


def dirichlet_energy(f: BoundaryFunction) -> float:
    """int_B |grad u|^2 for the harmonic extension u of ``f``."""
    return float(np.dot(np.arange(f.L + 1), f.coeffs ** 2))


def extend(f: BoundaryFunction, r, t):
    """Harmonic extension u(r, t) = sum c_l r^l e_l(t)."""
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    if np.any(r < 0) or np.any(r > 1):
        raise ValueError("radius must lie in [0, 1]")
    E = basis_table(f.L, f.n, t)
    ls = np.arange(f.L + 1).reshape((-1,) + (1,) * r.ndim)
    c = f.coeffs.reshape(ls.shape)
    out = np.sum(c * r[None] ** ls * E, axis=0)
    return float(out) if out.ndim == 0 else out


def _radial_sums(f: BoundaryFunction, r: float, t: float):
    """(u, du/dr, du/dt / r) at a single point; the last is regular at r = 0."""
    ls = np.arange(f.L + 1)
    E = basis_table(f.L, f.n, t)
    dE = basis_derivative_table(f.L, f.n, t)
    rl = r ** ls
    rl1 = np.where(ls >= 1, r ** np.maximum(ls - 1, 0), 0.0)
    u = np.dot(f.coeffs, rl * E)
    ur = np.dot(f.coeffs, ls * rl1 * E)
    ut_over_r = np.dot(f.coeffs, rl1 * dE)
    return u, ur, ut_over_r


def extend_gradient(f: BoundaryFunction, r: float, t: float) -> np.ndarray:
    """Gradient of the extension in the (radial, polar) frame.

    Returns ``[du/dr, (1/r) du/dtheta]`` with t = cos(theta).  At r = 1 the
    truncated series is differentiated term by term, so the value depends on
    the truncation degree.
    """
    if not 0 <= r <= 1:
        raise ValueError("radius must lie in [0, 1]")
    if not -1 <= t <= 1:
        raise ValueError("t must lie in [-1, 1]")
    _, ur, ut_over_r = _radial_sums(f, float(r), float(t))
    return np.array([ur, -math.sqrt(max(0.0, 1 - t * t)) * ut_over_r])


def _polar(x: np.ndarray):
    r = float(np.linalg.norm(x))
    if r == 0.0:
        return 0.0, 1.0, np.zeros_like(x)
    xhat = x / r
    return r, float(np.clip(xhat[-1], -1.0, 1.0)), xhat


def extend_cartesian(f: BoundaryFunction, x, *, allow_outside: bool = False) -> float:
    """Harmonic extension at a Cartesian point ``x`` (axis of symmetry e_n)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (f.n,):
        raise ValueError(f"expected a point in R^{f.n}")
    r, t, _ = _polar(x)
    if r > 1 + 1e-12 and not allow_outside:
        raise ValueError("point lies outside the closed ball")
    u, _, _ = _radial_sums(f, r, t)
    return float(u)


def gradient_cartesian(f: BoundaryFunction, x, *, allow_outside: bool = False) -> np.ndarray:
    """Cartesian gradient  u_r xhat + (u_t / r)(e_n - t xhat)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (f.n,):
        raise ValueError(f"expected a point in R^{f.n}")
    r, t, xhat = _polar(x)
    if r > 1 + 1e-12 and not allow_outside:
        raise ValueError("point lies outside the closed ball")
    _, ur, ut_over_r = _radial_sums(f, r, t)
    e_n = np.zeros(f.n)
    e_n[-1] = 1.0
    return ur * xhat + ut_over_r * (e_n - t * xhat)


def lp_norm(f: BoundaryFunction, p: float, rule: QuadratureRule | None = None) -> float:
    """(int_{S^{n-1}} |f|^p dsigma)^{1/p} by quadrature."""
    if p < 1:
        raise ValueError("p must be >= 1")
    rule = _rule_for(f, rule)
    vals = f.nodal_values(rule)
    return rule.integrate(nodal_power(vals, p)) ** (1.0 / p)


def beckner_gap(f: BoundaryFunction, q: float, rule: QuadratureRule | None = None) -> float:
    """(q-1) int_B |grad u|^2 + ||f||_2^2 - c_n^{(q-1)/(q+1)} ||f||_{q+1}^2.

    Non-negative for 1 < q <= n/(n-2); vanishes on constants.
    """
    n = f.n
    if not 1 < q <= n / (n - 2) + 1e-12:
        raise ValueError(f"q={q} outside (1, n/(n-2)] for n={n}")
    c_n = f.geometry.area_sn1
    lhs = c_n ** ((q - 1) / (q + 1)) * lp_norm(f, q + 1, rule) ** 2
    return (q - 1) * dirichlet_energy(f) + f.l2_norm() ** 2 - lhs


def quotient(f: BoundaryFunction, params: ProblemParams, rule: QuadratureRule | None = None) -> float:
    """(int_B |grad u|^2 + a ||f||_2^2) / ||f||_{q+1}^2."""
    den = lp_norm(f, params.q + 1, rule) ** 2
    if den == 0:
        raise ZeroDivisionError("quotient of the zero function")
    return (dirichlet_energy(f) + params.a * f.l2_norm() ** 2) / den
