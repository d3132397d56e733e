"""Stereographic transfer of the boundary problem to the upper half-space.

Psi maps the closed upper half-space {x_n >= 0} onto the closed ball minus
the north pole, with conformal factor phi(x) = 2 / (1 + |x|^2 + 2 x_n).  A
ball function u becomes v = (u o Psi) phi^{(n-2)/2}; if u solves the ball
problem then on {x_n = 0}

    -dv/dx_n = alpha phi v + phi^beta v^q,   phi = 2 / (1 + |x'|^2),

with alpha = (n-2)/2 - a and beta = (n - q(n-2))/2.  Functions here accept
points as arrays of shape (..., n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import norm, qmc

from .ball import extend, gradient_cartesian, nodal_power
from .params import ProblemParams
from .spectral import BoundaryFunction

Sampler = Callable[[np.ndarray], np.ndarray]


class AsymptoticFitError(RuntimeError):
    pass


@dataclass(frozen=True)
class HalfSpaceParams:
    n: int
    alpha: float
    beta: float

    @classmethod
    def from_problem(cls, params: ProblemParams) -> "HalfSpaceParams":
        n = params.n
        return cls(n=n, alpha=(n - 2) / 2 - params.a, beta=(n - params.q * (n - 2)) / 2)

    @property
    def conformal_exponent(self) -> float:
        return (self.n - 2) / 2

    @property
    def nonnegative(self) -> bool:
        return self.alpha >= 0 and self.beta >= 0


def _points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] < 2:
        raise ValueError("points must have shape (..., n) with n >= 2")
    return x


def conformal_factor(x) -> np.ndarray:
    x = _points(x)
    return 2.0 / (1.0 + np.sum(x * x, axis=-1) + 2.0 * x[..., -1])


def psi(x) -> np.ndarray:
    """Inverse stereographic projection of the upper half-space into the ball."""
    x = _points(x)
    if np.any(x[..., -1] < 0):
        raise ValueError("points must satisfy x_n >= 0")
    sq = np.sum(x * x, axis=-1)
    den = 1.0 + sq + 2.0 * x[..., -1]
    out = 2.0 * x / den[..., None]
    out[..., -1] = (sq - 1.0) / den
    return out


def psi_jacobian(x) -> np.ndarray:
    """d Psi_i / d x_j at a single point."""
    x = _points(x)
    n = x.size
    sq = float(x @ x)
    den = 1.0 + sq + 2.0 * x[-1]
    dden = 2.0 * x.copy()
    dden[-1] += 2.0
    J = np.zeros((n, n))
    for i in range(n - 1):
        J[i] = -2.0 * x[i] * dden / den ** 2
        J[i, i] += 2.0 / den
    J[-1] = (2.0 * x * den - (sq - 1.0) * dden) / den ** 2
    return J


def to_halfspace(u: Sampler, x) -> np.ndarray:
    """v(x) = u(Psi(x)) phi(x)^{(n-2)/2} for a vectorized ball evaluator ``u``."""
    x = _points(x)
    n = x.shape[-1]
    return np.asarray(u(psi(x))) * conformal_factor(x) ** ((n - 2) / 2)


def ball_sampler(f: BoundaryFunction) -> Sampler:
    """Vectorized harmonic extension of ``f`` on Cartesian ball points."""
    def u(y):
        y = np.asarray(y, dtype=float)
        r = np.sqrt(np.sum(y * y, axis=-1))
        safe = np.where(r > 0, r, 1.0)
        t = np.clip(np.where(r > 0, y[..., -1] / safe, 1.0), -1.0, 1.0)
        return extend(f, np.minimum(r, 1.0), t)
    return u


def halfspace_sampler(f: BoundaryFunction) -> Sampler:
    u = ball_sampler(f)
    return lambda x: to_halfspace(u, x)


def halfspace_gradient(f: BoundaryFunction, x) -> np.ndarray:
    """Analytic gradient of v = (u o Psi) phi^lam at one point, by the chain rule."""
    x = _points(x)
    n = x.size
    lam = (n - 2) / 2
    y = psi(x)
    u = float(ball_sampler(f)(y))
    grad_u = gradient_cartesian(f, y, allow_outside=True)
    phi = float(conformal_factor(x))
    dden = 2.0 * x.copy()
    dden[-1] += 2.0
    grad_phi = -phi * phi / 2.0 * dden
    return phi ** lam * (psi_jacobian(x).T @ grad_u) + u * lam * phi ** (lam - 1) * grad_phi


def er_residual(f: BoundaryFunction, params: ProblemParams, xprime) -> float:
    """-dv/dx_n - alpha phi v - phi^beta v^q at the boundary point (x', 0)."""
    xprime = np.asarray(xprime, dtype=float)
    if xprime.shape != (params.n - 1,):
        raise ValueError(f"x' must have {params.n - 1} components")
    hs = HalfSpaceParams.from_problem(params)
    x = np.append(xprime, 0.0)
    v = float(halfspace_sampler(f)(x))
    dv_n = halfspace_gradient(f, x)[-1]
    phi = 2.0 / (1.0 + float(xprime @ xprime))
    return -dv_n - hs.alpha * phi * v - phi ** hs.beta * float(nodal_power(np.array([v]), params.q)[0])


# ---------------------------------------------------------------------------
# Asymptotics at infinity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticFit:
    c0: float
    c1: float
    fit_radii: np.ndarray
    residual: float
    nuisance: np.ndarray = field(default_factory=lambda: np.array([]))


def default_directions(n: int, count: int = 9) -> np.ndarray:
    """Unit vectors in the (x_1, x_n) quarter plane with distinct x_n components."""
    theta = np.linspace(0.0, math.pi / 2, count)
    d = np.zeros((count, n))
    d[:, 0] = np.cos(theta)
    d[:, -1] = np.sin(theta)
    return d


def default_radii(r_max: float = 1e4, count: int = 4) -> np.ndarray:
    """Radii r_max / 2^k, k = count-1..0; the fit error is O(r_max^-3) for this window shape."""
    return r_max * 2.0 ** -np.arange(count - 1, -1, -1)


def fit_asymptotics(v: Sampler, directions, radii) -> AsymptoticFit:
    """Least-squares fit of |x|^{n-2} v = c0 (1 + c1 x_n/|x|^2) + O(|x|^-2).

    With d = x/|x| and rho = |x| the model is
    b0 + b1 d_n/rho + (b2 + b3 d_n + b4 d_n^2)/rho^2, so c0 = b0, c1 = b1/b0;
    the second-order terms are nuisance parameters and the reported residual
    (RMS, relative to c0) is third order in 1/rho_min.
    """
    d = np.asarray(directions, dtype=float)
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be strictly increasing")
    if radii[-1] < 1e3:
        raise ValueError("largest fitting radius must be at least 1e3")
    if np.any(d[:, -1] < 0):
        raise ValueError("directions must point into the upper half-space")
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    n = d.shape[1]
    rho = np.repeat(radii, len(d))
    dn = np.tile(d[:, -1], len(radii))
    X = rho[:, None] * np.tile(d, (len(radii), 1))
    y = np.asarray(v(X)) * rho ** (n - 2)
    A = np.column_stack([np.ones_like(rho), dn / rho, 1 / rho ** 2, dn / rho ** 2, dn ** 2 / rho ** 2])
    scale = np.linalg.norm(A, axis=0)
    if np.any(scale == 0):
        raise AsymptoticFitError("asymptotic fit is ill-conditioned; vary directions or radii")
    As = A / scale
    if np.linalg.cond(As) > 1e12:
        raise AsymptoticFitError("asymptotic fit is ill-conditioned; vary directions or radii")
    b, *_ = np.linalg.lstsq(As, y, rcond=None)
    b = b / scale
    if not b[0] > 0:
        raise AsymptoticFitError(f"fitted leading coefficient {b[0]:.3e} is not positive")
    resid = float(np.sqrt(np.mean((A @ b - y) ** 2)) / b[0])
    return AsymptoticFit(c0=float(b[0]), c1=float(b[1] / b[0]), fit_radii=radii, residual=resid, nuisance=b[2:])


# ---------------------------------------------------------------------------
# Reflection probes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReflectionProbe:
    lam: float
    samples: np.ndarray
    differences: np.ndarray

    @property
    def min_difference(self) -> float:
        return float(self.differences.min())

    @property
    def argmin(self) -> np.ndarray:
        return self.samples[int(np.argmin(self.differences))]


def reflect(x, lam: float) -> np.ndarray:
    """x^lam = (2 lam - x_1, x_2, ..., x_n)."""
    out = np.array(x, dtype=float, copy=True)
    out[..., 0] = 2 * lam - out[..., 0]
    return out


def reflection_samples(n: int, lam: float, count: int = 4096, seed: int = 0, r_max: float = 1e3,
                       ray_count: int = 8) -> np.ndarray:
    """Scrambled-Sobol samples of {x_1 <= lam, x_n >= 0} over radii 1e-2..r_max, plus rays.

    Radii are log-uniform so the near field and the far field (needed by the
    large-|x| part of the comparison) are both represented.
    """
    sob = qmc.Sobol(d=n + 1, scramble=True, seed=seed)
    u = sob.random_base2(max(0, math.ceil(math.log2(count))))[:count]
    dirs = norm.ppf(np.clip(u[:, 1:], 1e-12, 1 - 1e-12))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    rho = 10 ** (-2 + u[:, 0] * (math.log10(r_max) + 2))
    pts = rho[:, None] * dirs
    pts[:, -1] = np.abs(pts[:, -1])
    over = pts[:, 0] > lam
    pts[over, 0] = 2 * lam - pts[over, 0]

    # rays towards infinity in the slab, at several elevations
    theta = np.linspace(0.05, math.pi / 2 - 0.05, ray_count)
    ray_dir = np.zeros((ray_count, n))
    ray_dir[:, 0] = -np.cos(theta)
    ray_dir[:, -1] = np.sin(theta)
    ray_r = np.geomspace(1.0, r_max, 16)
    rays = (ray_r[:, None, None] * ray_dir[None]).reshape(-1, n)
    return np.vstack([pts, rays])


def reflection_probe(v: Sampler, lam: float, n: int, count: int = 4096, seed: int = 0,
                     r_max: float = 1e3, samples=None) -> ReflectionProbe:
    """min over samples x in the slab {x_1 <= lam} of v(x) - v(x^lam)."""
    if not lam > 0:
        raise ValueError("reflection offset must be positive")
    if samples is None:
        samples = reflection_samples(n, lam, count=count, seed=seed, r_max=r_max)
    samples = np.asarray(samples, dtype=float)
    if np.any(samples[:, 0] > lam):
        raise ValueError("all samples must satisfy x_1 <= lam")
    diff = np.asarray(v(samples)) - np.asarray(v(reflect(samples, lam)))
    return ReflectionProbe(lam=lam, samples=samples, differences=diff)


def recenter(f: BoundaryFunction, grid: int = 2001) -> BoundaryFunction:
    """Reflect t -> -t if needed so that the boundary maximum sits at the north pole."""
    t = np.cos(np.linspace(0.0, math.pi, grid))
    vals = f(t)
    return f if t[int(np.argmax(vals))] >= 0 else f.reflected()
