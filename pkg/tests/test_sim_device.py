import numpy as np
import pytest

from csma_aoi.analytic import (aoi, energy_cost, mean_interdeparture, mean_service_time,
                               second_moment_interdeparture)
from csma_aoi.model import INFINITY, DomainError, Scheme
from csma_aoi.sim import device_logs, simulate_device, stats_from_log

WP, WOP = Scheme.WITH_PREEMPTION, Scheme.WITHOUT_PREEMPTION
ARRIVALS = 50_000
RUNS = 20  # independent 50k-arrival runs pooled per moment check
POINTS = [(0.5, 1.0, 2.0), (1.0, 1.0, 2.0), (0.3, 2.0, 0.7), (1.5, 0.8, 5.0)]


def test_preemptive_reference_point():
    s = simulate_device(WP, 1.0, 1.0, 2.0, ARRIVALS, seed=0)
    assert s.time_avg_aoi == pytest.approx(2.366667, rel=0.01)
    assert aoi(WP, 1.0, 1.0, 2.0).avg_aoi == pytest.approx(2.366667, abs=1e-6)


def test_non_preemptive_reference_point():
    s = simulate_device(WOP, 0.5, 1.0, 2.0, ARRIVALS, seed=0)
    assert s.time_avg_aoi == pytest.approx(3.9, rel=0.01)
    assert s.mean_peak_aoi == pytest.approx(4.9, rel=0.01)


def test_same_seed_is_bit_identical():
    a = simulate_device(WP, 0.7, 1.0, 2.0, 5000, seed=3, replication=2)
    b = simulate_device(WP, 0.7, 1.0, 2.0, 5000, seed=3, replication=2)
    assert a == b
    c = simulate_device(WP, 0.7, 1.0, 2.0, 5000, seed=3, replication=3)
    assert a != c


def test_infinite_rate_rejected():
    with pytest.raises(DomainError):
        simulate_device(WP, 1.0, 1.0, INFINITY, 100, seed=0)


def test_delivery_records_are_consistent():
    logs = device_logs(0.9, 1.2, 1.7, 20_000, seed=5)
    for log in logs.values():
        assert np.all(log.generation < log.delivery)
        assert np.all(np.diff(log.delivery) > 0)
        assert np.all(log.wait_start <= log.wait_end) and np.all(log.wait_end < log.delivery)
        scale = log.delivery[-1]
        np.testing.assert_allclose(log.peak, log.interarrival + log.service_time[1:],
                                   rtol=0, atol=4 * np.finfo(float).eps * scale)
    # same path, so both schemes share every delivery instant
    np.testing.assert_array_equal(logs[WP].delivery, logs[WOP].delivery)
    # preemption can only deliver a fresher update
    assert np.all(logs[WP].generation >= logs[WOP].generation)


@pytest.mark.parametrize("lam,mu,k", POINTS)
def test_moment_matching(lam, mu, k):
    stats = {WP: [], WOP: []}
    for r in range(RUNS):
        logs = device_logs(lam, mu, k, ARRIVALS, seed=0, replication=r)
        for scheme in (WP, WOP):
            stats[scheme].append(stats_from_log(logs[scheme]))
    mean = lambda scheme, attr: np.mean([getattr(s, attr) for s in stats[scheme]])  # noqa: E731
    assert mean(WP, "mean_interdeparture") == pytest.approx(mean_interdeparture(lam, mu, k),
                                                            rel=0.01)
    assert mean(WP, "second_moment_interdeparture") == pytest.approx(
        second_moment_interdeparture(lam, mu, k), rel=0.01)
    for scheme in (WP, WOP):
        assert mean(scheme, "mean_service_time") == pytest.approx(
            mean_service_time(scheme, lam, mu, k), rel=0.01)
        assert mean(scheme, "energy_rate") == pytest.approx(energy_cost(lam, mu, k, 0.1, 0.2),
                                                            rel=0.01)
        exact = aoi(scheme, lam, mu, k)
        assert mean(scheme, "time_avg_aoi") == pytest.approx(exact.avg_aoi, rel=0.01)
        assert mean(scheme, "mean_peak_aoi") == pytest.approx(exact.avg_peak_aoi, rel=0.01)


@pytest.mark.parametrize("lam,mu,k", POINTS)
def test_sawtooth_matches_renewal_reward(lam, mu, k):
    for log in device_logs(lam, mu, k, ARRIVALS, seed=1).values():
        assert log.sawtooth_aoi() == pytest.approx(log.renewal_reward_aoi(), rel=0.005)


def test_paired_dominance():
    for r in range(30):
        logs = device_logs(0.6, 1.0, 1.5, 10_000, seed=2, replication=r)
        wp, wop = stats_from_log(logs[WP]), stats_from_log(logs[WOP])
        assert wp.time_avg_aoi < wop.time_avg_aoi
        assert wp.mean_peak_aoi < wop.mean_peak_aoi
        assert wp.mean_peak_aoi > wp.time_avg_aoi
