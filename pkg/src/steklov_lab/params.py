from __future__ import annotations

import math
from dataclasses import dataclass

from .spectral import SphereGeometry

# q is treated as critical when within this distance of n/(n-2)
CRITICAL_ATOL = 1e-12


@dataclass(frozen=True)
class ProblemParams:
    """Parameters of  Laplace u = 0 in B^n,  du/dnu + a u = u^q on S^{n-1}."""

    n: int
    a: float
    q: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"dimension must be an integer >= 3, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "q", float(self.q))
        if not self.q > 1:
            raise ValueError(f"exponent q must exceed 1, got {self.q}")

    @property
    def geometry(self) -> SphereGeometry:
        return SphereGeometry(self.n)

    @property
    def c_n(self) -> float:
        return self.geometry.area_sn1

    @property
    def q_crit(self) -> float:
        return self.n / (self.n - 2)

    @property
    def theorem_threshold(self) -> float:
        return (self.n - 2) / 2

    @property
    def conjecture_threshold(self) -> float:
        return 1.0 / (self.q - 1)

    @property
    def is_critical(self) -> bool:
        return abs(self.q - self.q_crit) <= CRITICAL_ATOL

    @property
    def in_theorem_range(self) -> bool:
        """1 < q < n/(n-2) and 0 < a <= (n-2)/2."""
        return self.q < self.q_crit and 0 < self.a <= self.theorem_threshold

    def thresholds_ordered(self) -> bool:
        """Whether (n-2)/2 <= 1/(q-1); equivalent to (n-2)(q-1) <= 2."""
        return self.theorem_threshold <= self.conjecture_threshold

    def validate(self) -> "ProblemParams":
        """Check the solver entry conditions a > 0, 1 < q <= n/(n-2)."""
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.q > self.q_crit + CRITICAL_ATOL:
            raise ValueError(f"q={self.q} exceeds the critical exponent {self.q_crit}")
        return self

    def constant_solution(self) -> float:
        return constant_solution(self)


def constant_solution(params: ProblemParams) -> float:
    """The constant positive solution u = a^{1/(q-1)}."""
    if not params.a > 0:
        raise ValueError("a must be positive")
    return math.pow(params.a, 1.0 / (params.q - 1))
