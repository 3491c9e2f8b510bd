import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rilab.profile_core import (
    DomainError, IncompatibleDomainError, MeasureOverflowError, SampleCloud, StepProfile,
    double_star, head_weighted_integral, nested_tail_integral, pairing, power_integral,
    random_cloud, random_profile, read_profile, rearrange, tail_weighted_integral, write_profile,
)
from conftest import step_profiles


def test_rearrange_two_samples():
    f = rearrange(SampleCloud([1.0, 2.0], [2.0, 1.0]), 10.0)
    np.testing.assert_array_equal(f.breakpoints, [1.0, 3.0])
    np.testing.assert_array_equal(f.values, [2.0, 1.0])
    assert f.rearranged


def test_rearrange_single_block():
    f = rearrange(SampleCloud([3.5], [0.25]), 1.0)
    assert f.breakpoints.tolist() == [0.25] and f.values.tolist() == [3.5]


def test_rearrange_merges_ties_and_drops_zeros():
    f = rearrange(SampleCloud([1.0, 0.0, 1.0, 2.0], [0.5, 1.0, 0.25, 0.125]), 4.0)
    assert f.values.tolist() == [2.0, 1.0]
    assert f.breakpoints.tolist() == [0.125, 0.875]


def test_rearrange_overflow():
    with pytest.raises(MeasureOverflowError):
        rearrange(SampleCloud([1.0, 1.0], [0.75, 0.5]), 1.0)


def test_rearrange_matches_infimum_definition(rng):
    # f*(s) = inf{t : mu(t) <= s}, evaluated by brute force on a grid of levels
    cloud = SampleCloud(rng.integers(1, 30, 200) / 7.0, rng.uniform(0.01, 1.0, 200))
    f = rearrange(cloud, 1e3)
    levels = np.unique(np.concatenate([[0.0], cloud.values]))
    mu = np.array([cloud.distribution(t) for t in levels])
    s = np.linspace(1e-3, cloud.total_measure() * 1.1, 997)
    brute = np.array([levels[np.argmax(mu <= x)] for x in s])
    np.testing.assert_array_equal(f(s), brute)


def test_double_star_indicator():
    fs = double_star(StepProfile([1.0], [1.0], 10.0, True))
    np.testing.assert_allclose(fs([0.25, 1.0, 4.0]), [1.0, 1.0, 0.25], rtol=0, atol=1e-15)


def test_double_star_constant():
    fs = double_star(StepProfile([5.0], [2.0], 5.0, True))
    np.testing.assert_allclose(fs(np.linspace(0.1, 5.0, 9)), 2.0, rtol=1e-15)


def test_double_star_block_sum_oracle(rng):
    f = random_profile(rng, blocks=15, L=100.0, lo=1e-3)
    s = np.geomspace(1e-4, 100.0, 50)
    oracle = []
    for x in s:
        acc = 0.0
        for a, b, v in zip(f.left, f.breakpoints, f.values):
            acc += v * max(0.0, min(b, x) - a)
        oracle.append(acc / x)
    np.testing.assert_allclose(double_star(f)(s), oracle, rtol=1e-13)


def test_double_star_rejects_nonpositive():
    with pytest.raises(DomainError):
        double_star(StepProfile([1.0], [1.0], 1.0, True))(0.0)


def test_pairing_trivial():
    chi = StepProfile([1.0], [1.0], 2.0, True)
    assert pairing(chi, chi) == 1.0
    assert pairing(StepProfile([], [], 2.0), chi) == 0.0


def test_pairing_length_mismatch():
    with pytest.raises(IncompatibleDomainError):
        pairing(StepProfile([1.0], [1.0], 2.0), StepProfile([1.0], [1.0], 3.0))


def test_tail_integral_indicator():
    n, k = 3, 1
    chi = StepProfile([1.0], [1.0], 10.0, True)
    s = np.geomspace(1e-6, 0.99, 20)
    np.testing.assert_allclose(tail_weighted_integral(chi, k / n - 1, s), (n / k) * (1 - s ** (k / n)), rtol=1e-12)
    assert np.all(tail_weighted_integral(StepProfile([], [], 10.0), -0.5, s) == 0)


def test_tail_integral_sampled_power():
    # r^(-1/2) on 64 log blocks of (1e-3, 1), value at the geometric midpoint
    b = np.geomspace(1e-3, 1.0, 65)
    v = np.sqrt(b[:-1] * b[1:]) ** -0.5
    f = StepProfile(b[1:], v, 1.0, True)
    s = np.array([1e-3, 1e-2, 0.3])
    exact = 4.0 * (1.0 - s ** 0.25)  # int_s^1 r^(-3/4) dr
    np.testing.assert_allclose(tail_weighted_integral(f, -0.25, s), exact, rtol=1e-3)


def test_profile_file_round_trip(tmp_path, rng):
    f = random_profile(rng, L=1e8)
    p = tmp_path / "f.txt"
    write_profile(p, f)
    g = read_profile(p)
    assert g.L == f.L
    np.testing.assert_array_equal(g.breakpoints, f.breakpoints)
    np.testing.assert_array_equal(g.values, f.values)


def test_invalid_profiles():
    with pytest.raises(ValueError):
        StepProfile([1.0, 0.5], [1.0, 1.0], 2.0)
    with pytest.raises(ValueError):
        StepProfile([1.0], [-1.0], 2.0)
    with pytest.raises(ValueError):
        StepProfile([3.0], [1.0], 2.0)
    with pytest.raises(ValueError):
        StepProfile([1.0, 2.0], [1.0, 2.0], 2.0, rearranged=True)


# -- properties --------------------------------------------------------------------

clouds = st.integers(0, 2 ** 32 - 1).map(lambda s: random_cloud(np.random.default_rng(s), size=40, L=1e3))


@given(clouds)
def test_measure_preservation(cloud):
    f = rearrange(cloud, 1e3)
    for t in np.concatenate([[0.0], np.unique(cloud.values)]):
        assert f.distribution(t) == cloud.distribution(t)


@given(step_profiles())
def test_double_star_dominates_and_decreases(f):
    s = np.geomspace(1e-5, 1e8, 400)
    fs, fss = f(s), double_star(f)(s)
    assert np.all(fss >= fs * (1 - 1e-14))
    assert np.all(np.diff(fss) <= 1e-14 * fss[:-1])


@given(step_profiles(L=100.0, rearranged=False), step_profiles(L=100.0, rearranged=False))
def test_hardy_littlewood(f, g):
    assert pairing(f, g) <= pairing(rearrange(f), rearrange(g)) * (1 + 1e-12)


@given(step_profiles(), st.floats(-0.95, 0.5))
def test_tail_integral_monotone_continuous(f, gamma):
    s = np.union1d(np.geomspace(1e-6, 1e5, 300), f.breakpoints)
    v = tail_weighted_integral(f, gamma, s)
    assert np.all(np.diff(v) <= 1e-12 * v[:-1])
    b = f.breakpoints
    lo, hi = tail_weighted_integral(f, gamma, b * (1 - 1e-9)), tail_weighted_integral(f, gamma, b * (1 + 1e-9))
    assert np.all(np.abs(lo - hi) <= 1e-6 * v.max())


@given(step_profiles(), st.floats(0.05, 0.95))
def test_head_and_nested_integrals_match_blockwise(f, th):
    t = np.geomspace(1e-3, 1e3, 7)
    # head: int_0^t s^-th f(s) ds summed block by block
    oracle = [math.fsum(v * power_integral(a, min(b, x), -th) for a, b, v in zip(f.left, f.breakpoints, f.values) if a < x)
              for x in t]
    np.testing.assert_allclose(head_weighted_integral(f, -th, t), oracle, rtol=1e-10)
    # nested integral of the indicator closed form: int_0^t s^-th (1/th)(1 - s^th) ds for t <= 1
    chi = StepProfile([1.0], [1.0], 1e8, True)
    tt = np.array([0.1, 0.5, 1.0])
    exact = (tt ** (1 - th) / (1 - th) - tt / 1.0) / th
    np.testing.assert_allclose(nested_tail_integral(chi, th, th - 1, tt), exact, rtol=1e-10)
