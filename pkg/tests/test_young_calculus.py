import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rilab.norm_engine import Lebesgue, Orlicz, norm
from rilab.profile_core import random_profile
from rilab.young_calculus import (
    CappedInfinity, ExpPower, PowerLog, PreconditionError, Tabulated, check_infinity_integrability,
    check_zero_integrability, equivalent, fit_log_exponent, fit_power_log, glued, reduced_conjugate,
    sobolev_conjugate, young_from_descriptor,
)

S_FIT = np.geomspace(10.0, 1e6, 51)


def slope(func, s=S_FIT):
    return np.polyfit(np.log(s), np.log(func(s)), 1)[0]


# -- integrability ------------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 1.5, 2.9])
def test_zero_integrable_below_critical(p):
    assert check_zero_integrability(PowerLog(p), 3, 1)


def test_zero_integrable_critical_with_log():
    assert check_zero_integrability(PowerLog(3, 2.5, side="zero"), 3, 1)
    assert not check_zero_integrability(PowerLog(3, 1.5, side="zero"), 3, 1)


def test_zero_not_integrable_at_critical_power():
    assert not check_zero_integrability(PowerLog(3), 3, 1)


def test_infinity_integrability():
    assert not check_infinity_integrability(PowerLog(2), 3, 1)
    assert check_infinity_integrability(ExpPower(1.0), 3, 1)
    assert not check_infinity_integrability(PowerLog(3, 1.0), 3, 1)
    assert check_infinity_integrability(PowerLog(3, 2.5), 3, 1)


def test_bad_dimensions():
    with pytest.raises(PreconditionError):
        sobolev_conjugate(PowerLog(1), 2, 2)
    with pytest.raises(PreconditionError):
        sobolev_conjugate(PowerLog(3), 3, 1)


# -- Sobolev conjugate --------------------------------------------------------------

@pytest.mark.parametrize("p,n,k", [(1, 2, 1), (1, 3, 1), (1.5, 3, 1), (2, 5, 2), (1, 4, 3)])
def test_power_conjugate_slope(p, n, k):
    C = sobolev_conjugate(PowerLog(p), n, k)
    assert C.finite
    assert abs(slope(C) - n * p / (n - k * p)) < 1e-4


@pytest.mark.parametrize("r", [0, 1, 2])
def test_zygmund_conjugate_log_exponent(r):
    C = sobolev_conjugate(PowerLog(1, r), 3, 1)
    s = np.geomspace(C.H(1e20), C.H(1e58), 60)
    assert abs(fit_log_exponent(C, s, 1.5) - 1.5 * r) < 5e-3


def test_tabulated_square_matches_closed_form():
    # A = t^2, n = 4, k = 1: H(t) = (1.5 t^(2/3))^(3/4), so A_{4}(s) = s^4/1.5^3
    t = np.logspace(-40, 40, 1601)
    A = Tabulated(tuple(zip(t, 2 * t)))
    C = sobolev_conjugate(A, 4, 1)
    s = np.geomspace(1e-3, 1e3, 40)
    np.testing.assert_allclose(C(s), s ** 4 / 3.375, rtol=1e-3)


def test_conjugate_inverse_round_trip():
    C = sobolev_conjugate(PowerLog(1, 1), 3, 1)
    t = np.geomspace(1e-20, 1e20, 41)
    np.testing.assert_allclose(C.H_inv(C.H(t)), t, rtol=1e-8)


def test_infinite_conjugate_has_threshold():
    C = sobolev_conjugate(glued(PowerLog(1.0), PowerLog(3.0, 3.0)), 3, 1)
    assert not C.finite and math.isfinite(C.threshold)
    assert C(C.threshold * 1.01) == math.inf
    assert math.isfinite(C(C.threshold * 0.5))
    assert isinstance(C.as_young(), CappedInfinity)


def test_power_conjugate_equivalent_to_power():
    for p, n, k in [(1, 3, 1), (2, 5, 2)]:
        C = sobolev_conjugate(PowerLog(p), n, k)
        e = n * p / (n - k * p)
        ok, c = equivalent(PowerLog(e), C, grid=np.geomspace(1e-2, 1e6, 200))
        assert ok and c <= 2


def test_H_bounded_by_power():
    for A in (PowerLog(1), PowerLog(1, 2), PowerLog(2, 1)):
        C = sobolev_conjugate(A, 3, 1)
        t = np.geomspace(1e-10, 1e10, 200)
        h = C.H(t)
        assert np.all(np.diff(h) > 0)
        # t/A(t) <= 1/A(1) * ... for t >= 1 the integrand is at most 1, so H(t) - H(1) <= t^(2/3)
        assert np.all(h[t >= 1] ** 1.5 - C.H(1.0) ** 1.5 <= t[t >= 1] * (1 + 1e-9))


# -- reduced conjugate ---------------------------------------------------------------

@pytest.mark.parametrize("p", [1.0, 2.0])
def test_hat_of_power_is_power(p, rng):
    Ah = reduced_conjugate(PowerLog(p), 3, 1)
    assert abs(slope(Ah, np.geomspace(1e-10, 1e10, 81)) - p) < 1e-3
    ratios = []
    for _ in range(20):
        f = random_profile(rng, L=1e8)
        ratios.append(norm(f, Orlicz(Ah)) / norm(f, Lebesgue(p)))
    assert 0.5 <= min(ratios) and max(ratios) <= 2.0


@pytest.mark.parametrize("p,r", [(1, 1), (1, 2), (1.5, 1), (2, 1)])
def test_hat_power_log_near_infinity(p, r):
    Ah = reduced_conjugate(PowerLog(p, r), 3, 1)
    s = np.geomspace(1e20, 1e50, 60)
    assert abs(fit_log_exponent(Ah, s, p) - r) < 5e-3


@pytest.mark.parametrize("r", [0.0, 1.0])
def test_hat_critical_power(r):
    Ah = reduced_conjugate(glued(PowerLog(1.0), PowerLog(3.0, r)), 3, 1)
    s = np.geomspace(1e20, 1e50, 60)
    assert abs(fit_log_exponent(Ah, s, 3.0) - (r - 3.0)) < 2e-2


def test_hat_dominated_by_A():
    for A in (PowerLog(1, 1), PowerLog(2), glued(PowerLog(1.0), PowerLog(3.0, 1.0))):
        Ah = reduced_conjugate(A, 3, 1)
        t = np.geomspace(10.0, 1e30, 200)
        assert np.max(Ah(t) / A(64 * t)) <= 1.0


# -- equivalence and descriptors ---------------------------------------------------------

def test_equivalent_examples():
    A = PowerLog(2)
    assert equivalent(A, A) == (True, 1.0)
    B = Tabulated(tuple((t, 6 * t) for t in np.logspace(-10, 10, 401)))
    ok, c = equivalent(A, B, regime="near-infinity")
    assert ok and abs(c - math.sqrt(3)) < 1e-6
    assert equivalent(PowerLog(1), PowerLog(2)) == (False, None)


def test_descriptor_round_trip():
    for A in (PowerLog(2, 1), PowerLog(1, -1, side="zero"), ExpPower(1.0),
              CappedInfinity(3.0, PowerLog(2))):
        B = young_from_descriptor(A.descriptor())
        t = np.geomspace(1e-3, 2.9, 30)
        np.testing.assert_allclose(B(t), A(t), rtol=1e-12)


def test_inadmissible_exponents():
    with pytest.raises(ValueError):
        PowerLog(1.0, -1.0)
    with pytest.raises(ValueError):
        PowerLog(0.5)


@given(st.floats(1.0, 4.0), st.floats(0.0, 3.0))
def test_power_log_convex(p, r):
    A = PowerLog(p, r)
    t = np.geomspace(1e-6, 1e6, 300)
    a = A.density(t)
    assert np.all(a >= 0) and np.all(np.diff(a) >= -1e-10 * a[1:])


@given(st.floats(1.0, 2.5), st.floats(0.0, 2.0))
def test_fit_recovers_exponents(p, r):
    s = np.geomspace(1e3, 1e12, 60)
    sl, beta = fit_power_log(lambda x: x ** p * np.log(x) ** r, s)
    assert abs(sl - p) < 1e-8 and abs(beta - r) < 1e-6
