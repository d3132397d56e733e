import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from steklov_lab.ball import PositivityError, beckner_gap
from steklov_lab.identities import (CriticalFamily, PohozaevForm, beckner_verify, critical_eval, critical_kappa,
                                    critical_trace, mean_curvature, pohozaev_residual, pohozaev_scaled)
from steklov_lab.params import ProblemParams
from steklov_lab.solver import residual
from steklov_lab.spectral import BoundaryFunction, analyze, default_rule, random_positive_function

T = np.linspace(-1, 1, 50)


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_kappa_is_the_critical_constant(n):
    k = critical_kappa(n)
    p = CriticalFamily(n, 0.0).params
    assert p.a * k == pytest.approx(k ** p.q, rel=1e-14)


@pytest.mark.parametrize("n", [3, 5, 6])
def test_alternative_kappa_is_not_a_solution(n):
    # (2/(n-2))^{(n-2)/2} is a solution only for n = 4
    k = (2 / (n - 2)) ** ((n - 2) / 2)
    p = CriticalFamily(n, 0.0).params
    f = BoundaryFunction.constant(k, n, 4)
    assert residual(f, p).l2_norm() > 1e-2


def test_family_validation():
    with pytest.raises(ValueError):
        CriticalFamily(3, 1.0)
    with pytest.raises(ValueError):
        critical_trace(3, -0.1, 10)


def test_s_zero_is_constant():
    f = critical_trace(4, 0.0, 10)
    np.testing.assert_allclose(f(T), 1.0, rtol=1e-14)
    assert critical_eval(5, 0.0, np.array([0.1, 0.2, 0.0, 0.0, 0.3])) == pytest.approx(critical_kappa(5))


def test_closed_form_values():
    assert critical_trace(3, 0.5, 80)(1.0) == pytest.approx(1.224744871391589, rel=1e-14)
    assert critical_eval(4, 0.3, np.zeros(4)) == pytest.approx(0.91, rel=1e-14)


@pytest.mark.parametrize("n", [3, 4, 5])
@pytest.mark.parametrize("s", [0.0, 0.3, 0.6])
def test_family_solves_the_equation(n, s):
    f = critical_trace(n, s, 80)
    assert residual(f, CriticalFamily(n, s).params).l2_norm() <= 1e-8 * f.l2_norm()


@pytest.mark.parametrize("n, s", [(3, 0.4), (5, 0.6)])
def test_trace_matches_extension_on_the_sphere(n, s):
    f = critical_trace(n, s, 100)
    x = np.zeros((T.size, n))
    x[:, 0] = np.sqrt(1 - T ** 2)
    x[:, -1] = T
    np.testing.assert_allclose(critical_eval(n, s, x), f(T), atol=1e-10)
    np.testing.assert_allclose(CriticalFamily(n, s).trace_value(T), f(T), atol=1e-10)


def test_trace_continuous_in_s():
    a, b = critical_trace(4, 0.3, 60), critical_trace(4, 0.3 + 1e-6, 60)
    assert np.linalg.norm(a.coeffs - b.coeffs) < 1e-5


def test_truncation_rule():
    assert CriticalFamily(3, 0.3).truncation_ok(40)
    assert not CriticalFamily(3, 0.9).truncation_ok(64)


def test_pohozaev_form_coefficients():
    f = PohozaevForm(ProblemParams(4, 1.0, 2.0))
    assert f.coeff_linear == 0 and f.coeff_power == 0 and f.weight_exponent == 1.5
    g = PohozaevForm(ProblemParams(3, 0.3, 2.0))
    assert g.coeff_linear == pytest.approx(0.4) and g.coeff_power == pytest.approx(1.0)


def test_pohozaev_zero_on_constants_and_at_critical_parameters():
    assert pohozaev_residual(BoundaryFunction.constant(2.0, 3, 8), ProblemParams(3, 0.3, 2.0)) == 0.0
    f = random_positive_function(4, 12, np.random.default_rng(0))
    assert pohozaev_residual(f, ProblemParams(4, 1.0, 2.0)) == 0.0


def test_pohozaev_detects_linear_non_solution():
    rule = default_rule(3, 8)
    f = analyze(1 + 0.2 * rule.nodes, rule, 8)
    assert abs(pohozaev_residual(f, ProblemParams(3, 0.3, 2.0))) > 1e-3


@given(st.integers(0, 2 ** 32 - 1))
def test_pohozaev_blind_to_reflection_symmetric_data(seed):
    # for even f the integrand is odd in t, so the identity cannot detect it
    rng = np.random.default_rng(seed)
    c = random_positive_function(3, 12, rng).coeffs.copy()
    c[1::2] = 0
    f = BoundaryFunction.from_coeffs(c, 3)
    assert abs(pohozaev_residual(f, ProblemParams(3, 0.3, 2.0))) <= 1e-13


def test_pohozaev_needs_positive_data_for_fractional_q():
    f = BoundaryFunction.from_coeffs([0.1, 1.0], 3)
    with pytest.raises(PositivityError):
        pohozaev_residual(f, ProblemParams(3, 0.3, 1.5))


def test_mean_curvature_values():
    assert mean_curvature(BoundaryFunction.constant(1.0, 4, 2), ProblemParams(4, 1.0, 2.0), 0.3) == pytest.approx(1.0)
    assert mean_curvature(BoundaryFunction.constant(2.0, 4, 2), ProblemParams(4, 0.5, 2.0), 0.3) == pytest.approx(1.25)
    H = mean_curvature(BoundaryFunction.constant(0.5, 3, 4), ProblemParams(3, 0.5, 2.0), T)
    assert np.ptp(H) <= 1e-14
    with pytest.raises(PositivityError):
        mean_curvature(BoundaryFunction.from_coeffs([0.1, 1.0], 3), ProblemParams(3, 0.5, 2.0), -1.0)


@pytest.mark.parametrize("n, q, seed", [(3, 2.0, 11), (4, 2.0, 0)])
def test_beckner_verify(n, q, seed):
    rep = beckner_verify(ProblemParams(n, 1.0, q), trials=200, seed=seed)
    assert rep.ok and rep.min_gap >= -1e-10 and rep.trials == 200


def test_beckner_second_order_at_constants():
    # second variation along e_l is (q - 1)(l - 1) eps^2; it vanishes for l = 1
    base = BoundaryFunction.constant(1.0, 3, 8)
    q = 2.0
    for l in (2, 3):
        for eps in (1e-2, 1e-3):
            c = base.coeffs.copy()
            c[l] = eps
            gap = beckner_gap(BoundaryFunction.from_coeffs(c, 3), q)
            assert gap / eps ** 2 == pytest.approx((q - 1) * (l - 1), rel=2e-2)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_beckner_holds_on_the_family(s):
    assert beckner_gap(critical_trace(3, s, 160), 3.0) >= -1e-10
