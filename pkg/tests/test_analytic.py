import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from csma_aoi.analytic import (aoi, attempt_energy_cost, effective_rate, energy_cost,
                               mean_interdeparture, mean_service_time,
                               second_moment_interdeparture)
from csma_aoi.meanfield import equilibrium, equilibrium_effective_rate
from csma_aoi.model import INFINITY, DomainError, Scheme, SystemParams

WP, WOP = Scheme.WITH_PREEMPTION, Scheme.WITHOUT_PREEMPTION
rates = st.floats(0.01, 100.0)


def test_effective_rate_at_table_point():
    x_s = equilibrium(SystemParams(lam=0.8, mu=1.0, gamma=2.0, w=1.0)).x_service
    assert effective_rate(1.0, 2.0, x_s) == pytest.approx(0.5205176, abs=1e-6)
    # the rounded fraction 0.239737 gives the rounded rate 0.520526
    assert effective_rate(1.0, 2.0, 0.239737) == pytest.approx(0.520526, abs=1e-6)


def test_effective_rate_limits():
    assert effective_rate(INFINITY, 2.0, 0.25) == INFINITY
    x_s = equilibrium(SystemParams(lam=0.8, mu=1.0, gamma=2.0, w=2.0)).x_service
    assert x_s == pytest.approx(0.290444, abs=1e-6)
    assert effective_rate(2.0, 2.0, x_s) == pytest.approx(0.838222, abs=1e-6)
    with pytest.raises(DomainError):
        effective_rate(1.0, 2.0, 0.6)


def test_table_mean_field_values():
    k = equilibrium_effective_rate(SystemParams(lam=0.8, mu=1.0, gamma=2.0, w=1.0))
    wp, wop = aoi(WP, 0.8, 1.0, k), aoi(WOP, 0.8, 1.0, k)
    assert wp.avg_aoi == pytest.approx(3.811444, abs=1e-5)
    assert wp.avg_peak_aoi == pytest.approx(5.147431, abs=1e-5)
    assert wop.avg_aoi == pytest.approx(4.592457, abs=1e-5)
    assert wop.avg_peak_aoi == pytest.approx(5.928443, abs=1e-5)


def test_infinite_rate_limits():
    assert aoi(WP, 0.8, 1.0, INFINITY).avg_aoi == pytest.approx(2.25, abs=1e-15)
    assert aoi(WOP, 0.8, 1.0, INFINITY).avg_aoi == pytest.approx(1.25 + 2 - 1 / 1.8, abs=1e-15)
    assert aoi(WOP, 0.8, 1.0, INFINITY).avg_peak_aoi == pytest.approx(3.25)
    assert aoi(WP, 0.8, 1.0, INFINITY).avg_peak_aoi == pytest.approx(2.25 + 1 / 1.8)


def test_direct_evaluation_small_point():
    pair = aoi(WP, 0.5, 1.0, 2.0)
    assert pair.avg_aoi == pytest.approx(3.433333, abs=1e-6)
    assert pair.avg_peak_aoi == pytest.approx(4.433333, abs=1e-6)
    wop = aoi(WOP, 0.5, 1.0, 2.0)
    assert (wop.avg_aoi, wop.avg_peak_aoi) == pytest.approx((3.9, 4.9))


@pytest.mark.parametrize("bad", [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)])
def test_nonpositive_inputs_rejected(bad):
    with pytest.raises(DomainError):
        aoi(WP, *bad)


@settings(max_examples=300)
@given(rates, rates, rates)
def test_dominance_and_peak_identity(lam, mu, k):
    wp, wop = aoi(WP, lam, mu, k), aoi(WOP, lam, mu, k)
    assert wp.avg_aoi < wop.avg_aoi and wp.avg_peak_aoi < wop.avg_peak_aoi
    gap = (lam + k + mu) / (lam * k + k * mu + lam * mu)
    for pair in (wp, wop):
        assert pair.avg_peak_aoi - pair.avg_aoi == pytest.approx(gap, rel=1e-12, abs=1e-12)


@given(rates, rates)
def test_monotone_decreasing_in_k(lam, mu):
    ks = np.geomspace(0.01, 1e4, 40)
    for scheme in (WP, WOP):
        avgs = [aoi(scheme, lam, mu, k).avg_aoi for k in ks]
        peaks = [aoi(scheme, lam, mu, k).avg_peak_aoi for k in ks]
        assert np.all(np.diff(avgs) < 0) and np.all(np.diff(peaks) < 0)


@given(rates, rates)
def test_large_k_matches_limit(lam, mu):
    for scheme in (WP, WOP):
        big, lim = aoi(scheme, lam, mu, 1e9), aoi(scheme, lam, mu, INFINITY)
        assert big.avg_aoi == pytest.approx(lim.avg_aoi, rel=1e-6)
        assert big.avg_peak_aoi == pytest.approx(lim.avg_peak_aoi, rel=1e-6)


def test_moments():
    assert mean_interdeparture(0.5, 1.0, 2.0) == pytest.approx(3.5)
    expected = 2 / 0.25 + 2 / 4 + 2 + 2 / 0.5 + 2 / 1.0 + 2 / 2.0
    assert second_moment_interdeparture(0.5, 1.0, 2.0) == pytest.approx(expected)
    assert mean_service_time(WOP, 0.5, 1.0, 2.0) == pytest.approx(1 / 2.5 + 1)
    assert mean_service_time(WP, 0.5, 1.0, 2.0) == pytest.approx((1 + 1 / 2.5) / 1.5)


def test_energy_cost_limit_and_linearity():
    assert energy_cost(0.8, 1.0, INFINITY, 0.1, 0.2) == pytest.approx(0.2 / 2.25)
    a = energy_cost(0.8, 1.0, 0.7, 0.1, 0.2)
    assert energy_cost(0.8, 1.0, 0.7, 0.2, 0.4) == pytest.approx(2 * a, rel=1e-15)


@given(rates, rates, st.floats(0.01, 10), st.floats(0.01, 10))
def test_time_billed_energy_direction(lam, mu, c_s, c_t):
    # Billing sensing per unit of waiting time makes the cost rise with k
    # exactly when waiting is cheaper per cycle than idle-plus-transmit.
    ks = np.geomspace(0.01, 1e3, 30)
    costs = np.array([energy_cost(lam, mu, k, c_s, c_t) for k in ks])
    lhs, rhs = c_s * (1 / lam + 1 / mu), c_t / mu
    if lhs < rhs * (1 - 1e-9):
        assert np.all(np.diff(costs) > 0)
    elif lhs > rhs * (1 + 1e-9):
        assert np.all(np.diff(costs) < 0)


@given(rates, rates, st.floats(0.0, 0.99), st.floats(0.01, 10), st.floats(0.01, 10))
def test_attempt_energy_increasing_in_k(lam, mu, busy, c_s, c_t):
    ks = np.geomspace(0.01, 1e3, 30)
    costs = [attempt_energy_cost(lam, mu, k, busy, c_s, c_t) for k in ks]
    assert np.all(np.diff(costs) > 0)
    lim = attempt_energy_cost(lam, mu, INFINITY, busy, c_s, c_t)
    assert costs[-1] < lim


def test_attempt_energy_rejects_saturation():
    with pytest.raises(DomainError):
        attempt_energy_cost(0.8, 1.0, 1.0, 1.0, 0.1, 0.2)
