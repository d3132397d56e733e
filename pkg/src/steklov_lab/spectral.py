"""Axisymmetric spectral machinery on the unit sphere S^{n-1}.

A function on S^{n-1} that depends only on the polar coordinate t = xi_n is
expanded in Gegenbauer polynomials C_l^{(n-2)/2}(t), normalized so that they
are orthonormal with respect to the *full* surface measure

    dsigma = |S^{n-2}| (1 - t^2)^{(n-3)/2} dt.

Quadrature rules are Gauss-Jacobi rules for that weight, built from the
eigenvalues of the Jacobi matrix (Golub-Welsch) and polished with a Newton
step; weights come from the Christoffel function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln


class QuadratureError(RuntimeError):
    """Raised when a quadrature rule cannot be constructed."""


def _check_dimension(n: int) -> None:
    if int(n) != n or n < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {n!r}")


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere S^{k} in R^{k+1}."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


@dataclass(frozen=True)
class SphereGeometry:
    n: int
    area_sn1: float = field(init=False)
    area_sn2: float = field(init=False)
    gegenbauer_index: float = field(init=False)
    weight_exponent: float = field(init=False)

    def __post_init__(self):
        _check_dimension(self.n)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "area_sn1", sphere_area(self.n - 1))
        object.__setattr__(self, "area_sn2", sphere_area(self.n - 2))
        object.__setattr__(self, "gegenbauer_index", (self.n - 2) / 2)
        object.__setattr__(self, "weight_exponent", (self.n - 3) / 2)


def jacobi_moment(k: int, n: int) -> float:
    """Closed form of int_{-1}^{1} t^k (1 - t^2)^{(n-3)/2} dt.

    Zero for odd ``k``; otherwise the Beta function B((k+1)/2, (n-1)/2).
    """
    _check_dimension(n)
    if k < 0:
        raise ValueError("moment order must be non-negative")
    if k % 2:
        return 0.0
    a, b = (k + 1) / 2, (n - 1) / 2
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def _as_readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Gegenbauer polynomials
# ---------------------------------------------------------------------------

def gegenbauer_table(L: int, lam: float, t) -> np.ndarray:
    """Values C_0^lam .. C_L^lam at ``t`` via the forward recurrence.

    Returns an array of shape ``(L + 1,) + t.shape``.
    """
    t = np.asarray(t, dtype=float)
    out = np.empty((L + 1,) + t.shape)
    out[0] = 1.0
    if L >= 1:
        out[1] = 2.0 * lam * t
    for l in range(2, L + 1):
        out[l] = (2.0 * t * (l + lam - 1) * out[l - 1] - (l + 2 * lam - 2) * out[l - 2]) / l
    return out


def gegenbauer_log_norm(l, lam: float):
    """log of int C_l^lam(t)^2 (1-t^2)^{lam-1/2} dt (closed form)."""
    l = np.asarray(l, dtype=float)
    return (math.log(math.pi) + (1 - 2 * lam) * math.log(2.0)
            + gammaln(l + 2 * lam) - gammaln(l + 1) - np.log(l + lam) - 2 * gammaln(lam))


@lru_cache(maxsize=None)
def _basis_scale(n: int, L: int) -> np.ndarray:
    # e_l = C_l / sqrt(|S^{n-2}| h_l)
    geom = SphereGeometry(n)
    logh = gegenbauer_log_norm(np.arange(L + 1), geom.gegenbauer_index)
    return _as_readonly(np.exp(-0.5 * (logh + math.log(geom.area_sn2))))


def basis_table(L: int, n: int, t) -> np.ndarray:
    """Orthonormal basis values e_0..e_L at ``t``; shape ``(L + 1,) + t.shape``."""
    lam = (n - 2) / 2
    C = gegenbauer_table(L, lam, t)
    scale = _basis_scale(n, L)
    return C * scale.reshape((-1,) + (1,) * (C.ndim - 1))


def basis_derivative_table(L: int, n: int, t) -> np.ndarray:
    """Values of d e_l / dt, from d/dt C_l^lam = 2 lam C_{l-1}^{lam+1}."""
    lam = (n - 2) / 2
    t = np.asarray(t, dtype=float)
    out = np.zeros((L + 1,) + t.shape)
    if L >= 1:
        out[1:] = 2.0 * lam * gegenbauer_table(L - 1, lam + 1, t)
    scale = _basis_scale(n, L)
    return out * scale.reshape((-1,) + (1,) * (out.ndim - 1))


def basis_eval(l: int, n: int, t):
    """Orthonormal axisymmetric basis function e_l evaluated at ``t``."""
    _check_dimension(n)
    if l < 0:
        raise ValueError("degree must be non-negative")
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0):
        raise ValueError("t must lie in [-1, 1]")
    val = basis_table(l, n, t)[l]
    return float(val) if val.ndim == 0 else val


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    geometry: SphereGeometry

    @property
    def m(self) -> int:
        return len(self.nodes)

    @property
    def n(self) -> int:
        return self.geometry.n

    def integrate(self, values) -> float:
        """Surface integral over S^{n-1} of nodal ``values``."""
        return float(np.dot(self.weights, values))


@lru_cache(maxsize=None)
def build_rule(n: int, m: int) -> QuadratureRule:
    """Gauss rule with ``m`` nodes for the axisymmetric measure on S^{n-1}.

    Exact for polynomials in t of degree <= 2m - 1.  Cached; rules are
    immutable and may be shared freely.
    """
    _check_dimension(n)
    if m < 1:
        raise ValueError("node count must be >= 1")
    geom = SphereGeometry(n)
    lam = geom.gegenbauer_index
    k = np.arange(1, m, dtype=float)
    offdiag = np.sqrt(k * (k + 2 * lam - 1) / (4 * (k + lam) * (k + lam - 1)))
    try:
        nodes = eigh_tridiagonal(np.zeros(m), offdiag, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise QuadratureError(f"Jacobi matrix eigensolve failed for n={n}, m={m}") from exc
    nodes = np.sort(nodes)

    # one or two Newton sweeps on C_m^lam
    for _ in range(2):
        cm = gegenbauer_table(m, lam, nodes)[m]
        dcm = 2 * lam * gegenbauer_table(m - 1, lam + 1, nodes)[m - 1] if m >= 1 else 0.0
        nodes = nodes - cm / dcm
    nodes = 0.5 * (nodes - nodes[::-1])

    # Christoffel function with the orthonormal basis of the full measure
    E = basis_table(m - 1, n, nodes)
    weights = 1.0 / np.sum(E * E, axis=0)
    weights = 0.5 * (weights + weights[::-1])

    if not (np.all(np.diff(nodes) > 0) and np.all(weights > 0) and np.all(np.isfinite(weights))):
        raise QuadratureError(f"degenerate rule for n={n}, m={m}")
    return QuadratureRule(_as_readonly(nodes), _as_readonly(weights), geom)


def default_node_count(L: int) -> int:
    return 2 * L + 2


def default_rule(n: int, L: int) -> QuadratureRule:
    return build_rule(n, default_node_count(L))


@lru_cache(maxsize=256)
def _nodal_basis(n: int, m: int, L: int) -> np.ndarray:
    rule = build_rule(n, m)
    return _as_readonly(basis_table(L, n, rule.nodes).T)


@lru_cache(maxsize=256)
def _nodal_derivative_basis(n: int, m: int, L: int) -> np.ndarray:
    rule = build_rule(n, m)
    return _as_readonly(basis_derivative_table(L, n, rule.nodes).T)


def nodal_basis(rule: QuadratureRule, L: int) -> np.ndarray:
    """Matrix B with B[j, l] = e_l(t_j); cached per (n, m, L)."""
    return _nodal_basis(rule.n, rule.m, L)


def nodal_derivative_basis(rule: QuadratureRule, L: int) -> np.ndarray:
    return _nodal_derivative_basis(rule.n, rule.m, L)


# ---------------------------------------------------------------------------
# Boundary functions and transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryFunction:
    """Axisymmetric boundary trace f(t) = sum_l coeffs[l] e_l(t)."""

    coeffs: np.ndarray
    geometry: SphereGeometry

    def __post_init__(self):
        c = _as_readonly(self.coeffs)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-d array")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_coeffs(cls, coeffs, n: int) -> "BoundaryFunction":
        return cls(np.asarray(coeffs, dtype=float), SphereGeometry(n))

    @classmethod
    def constant(cls, value: float, n: int, L: int) -> "BoundaryFunction":
        geom = SphereGeometry(n)
        c = np.zeros(L + 1)
        c[0] = value * math.sqrt(geom.area_sn1)
        return cls(c, geom)

    @property
    def L(self) -> int:
        return self.coeffs.size - 1

    @property
    def n(self) -> int:
        return self.geometry.n

    def __call__(self, t):
        return synthesize(self, t)

    def derivative(self, t):
        """f'(t), by exact differentiation of the Gegenbauer expansion."""
        t = np.asarray(t, dtype=float)
        D = basis_derivative_table(self.L, self.n, t)
        return np.tensordot(self.coeffs, D, axes=1)

    def mean(self) -> float:
        """Average of f over S^{n-1}."""
        return self.coeffs[0] / math.sqrt(self.geometry.area_sn1)

    def l2_norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def amplitude(self) -> float:
        """L^2 distance to the mean value, sqrt(sum_{l>=1} c_l^2)."""
        return float(np.linalg.norm(self.coeffs[1:]))

    def reflected(self) -> "BoundaryFunction":
        """The function t -> f(-t)."""
        signs = (-1.0) ** np.arange(self.L + 1)
        return BoundaryFunction(self.coeffs * signs, self.geometry)

    def resized(self, L: int) -> "BoundaryFunction":
        """Truncate or zero-pad to degree ``L``."""
        c = np.zeros(L + 1)
        k = min(L, self.L) + 1
        c[:k] = self.coeffs[:k]
        return BoundaryFunction(c, self.geometry)

    def scaled(self, factor: float) -> "BoundaryFunction":
        return BoundaryFunction(factor * self.coeffs, self.geometry)

    def nodal_values(self, rule: QuadratureRule) -> np.ndarray:
        return nodal_basis(rule, self.L) @ self.coeffs


def analyze(values, rule: QuadratureRule, L: int) -> BoundaryFunction:
    """Discrete Gegenbauer transform of nodal ``values`` up to degree ``L``."""
    values = np.asarray(values, dtype=float)
    if L >= rule.m:
        raise ValueError(f"degree L={L} needs at least L+1 nodes, rule has {rule.m}")
    if values.shape != (rule.m,):
        raise ValueError("values must have one entry per quadrature node")
    B = nodal_basis(rule, L)
    return BoundaryFunction(B.T @ (rule.weights * values), rule.geometry)


def synthesize(f: BoundaryFunction, points) -> np.ndarray:
    """Evaluate ``f`` at arbitrary polar coordinates ``points`` in [-1, 1]."""
    points = np.asarray(points, dtype=float)
    E = basis_table(f.L, f.n, points)
    return np.tensordot(f.coeffs, E, axes=1)


def random_positive_function(n: int, L: int, rng: np.random.Generator, *, degree: int = 8,
                             amplitude: float = 0.5, level: float = 1.0) -> BoundaryFunction:
    """Random trial function level * (1 + p(t)) with |p| <= amplitude < 1.

    ``p`` is a random polynomial of degree at most ``min(degree, L)`` whose
    sup-norm is fixed on a dense grid, so the result is bounded below by
    ``level * (1 - amplitude)`` (up to grid resolution, far finer than the
    polynomial degree).
    """
    if not 0 <= amplitude < 1:
        raise ValueError("amplitude must lie in [0, 1)")
    d = min(degree, L)
    geom = SphereGeometry(n)
    c = np.zeros(L + 1)
    if d >= 1 and amplitude > 0:
        raw = rng.standard_normal(d) / np.arange(1, d + 1)
        grid = np.cos(np.linspace(0.0, math.pi, 40 * d + 41))
        p = raw @ basis_table(d, n, grid)[1:]
        c[1:d + 1] = raw * amplitude / np.max(np.abs(p))
    c[0] = math.sqrt(geom.area_sn1)
    return BoundaryFunction(level * c, geom)
