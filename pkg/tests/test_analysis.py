import math

import numpy as np
import pytest

from conftest import enumerate_hot_wait, enumerate_uniform_wait, walk_wait
from f4tele import analysis
from f4tele.analysis import (InvalidCountError, NonConvergenceError,
                             UnknownSetError, UnstableError,
                             closed_form_wait_high, closed_form_wait_low,
                             damped_fixed_point, expected_wait_high,
                             expected_wait_low, pollaczek_khinchine_wait,
                             residual_moments, slot_wait_table,
                             state_probabilities)
from f4tele.model import ServiceDistribution, ServiceModel
from f4tele.scheduler import (PolicyKind, SchedulePolicy, build_schedule,
                              partition_racks)

EXP = ServiceDistribution.EXPONENTIAL
DET = ServiceDistribution.DETERMINISTIC


def interleaved(k_low, k_hot=1, d=0.01):
    n = k_low + k_hot
    part = partition_racks(n, 1, list(range(k_low, n)))
    return part, build_schedule(part, d,
                                SchedulePolicy(PolicyKind.INTERLEAVED_HOTSPOT))


# --- residual moments -------------------------------------------------

def test_residual_zero_rate():
    rm = residual_moments(0.0, ServiceModel(1.0))
    assert rm.mean_residual == 0.0
    assert rm.second_moment == 0.0
    assert rm.variance == 0.0


def test_residual_exponential():
    # lam=0.5, exponential mean 1: m2=2, m3=6
    rm = residual_moments(0.5, ServiceModel(1.0, EXP))
    assert rm.mean_residual == pytest.approx(0.5, rel=1e-12)
    assert rm.second_moment == pytest.approx(1.0, rel=1e-12)
    assert rm.variance == pytest.approx(0.75, rel=1e-12)
    assert not rm.negative_variance


def test_residual_deterministic():
    # lam=0.5, deterministic 1: m2=1, m3=1
    rm = residual_moments(0.5, ServiceModel(1.0, DET))
    assert rm.mean_residual == pytest.approx(0.25, rel=1e-12)
    assert rm.second_moment == pytest.approx(1.0 / 6.0, rel=1e-12)
    assert rm.variance >= 0.0


def test_residual_variance_nonnegative_for_standard_laws():
    rng = np.random.default_rng(7)
    for _ in range(300):
        mean = float(rng.uniform(1e-4, 2.0))
        lam = float(rng.uniform(0.0, 0.99 / mean))
        for dist in (EXP, DET):
            rm = residual_moments(lam, ServiceModel(mean, dist))
            assert rm.variance >= -1e-15
            assert not rm.negative_variance


def test_residual_flags_inconsistent_general_moments():
    # tiny third moment forces second_moment < mean_residual^2
    svc = ServiceModel(1.0, ServiceDistribution.GENERAL, m2=4.0, m3=1e-3)
    rm = residual_moments(0.9, svc)
    assert rm.variance < 0.0
    assert rm.negative_variance


# --- state probabilities ----------------------------------------------

def test_state_probabilities_symmetric_pair():
    p = state_probabilities(1)
    assert p.pr_hot == 0.5 and p.pr_low == 0.5


def test_state_probabilities_five_low_sets():
    assert state_probabilities(5).pr_low == pytest.approx(0.1, rel=1e-12)


def test_state_probabilities_normalise():
    for k in range(1, 60):
        p = state_probabilities(k)
        assert p.pr_hot + k * p.pr_low == pytest.approx(1.0, rel=1e-12)
        assert 0.0 <= p.pr_low <= 1.0


def test_state_probabilities_rejects_zero():
    with pytest.raises(InvalidCountError):
        state_probabilities(0)


# --- slot wait table ---------------------------------------------------

def test_walk_from_foreign_slot_start():
    # cycle [L1,H,L2,H,L3,H], target L1, arrival at start of L2's slot:
    # remaining slots L2,H,L3,H -> 4d
    _, sched = interleaved(3)
    d = sched.slot_length
    assert walk_wait(sched.slots, d, 0, 2 * d) == pytest.approx(4 * d)


def test_walk_minimal_cycle():
    # cycle [L1,H], arrival at start of the H slot waits one slot
    _, sched = interleaved(1)
    d = sched.slot_length
    assert walk_wait(sched.slots, d, 0, d) == pytest.approx(d)


def test_slot_wait_table_three_low_sets():
    _, sched = interleaved(3)
    d = sched.slot_length
    table = slot_wait_table(sched, 0)
    assert table.d_values == pytest.approx((3 * d, 2 * d, d))
    assert table.d_hot == pytest.approx(3 * d, rel=1e-12)          # (5+3+1)d/3
    assert table.uniform_wait == pytest.approx(25 * d / 12, rel=1e-12)


def test_slot_wait_table_matches_enumeration_oracle():
    rng = np.random.default_rng(11)
    for _ in range(40):
        k_low = int(rng.integers(1, 9))
        k_hot = int(rng.integers(1, 4))
        d = float(rng.uniform(0.001, 0.2))
        _, sched = interleaved(k_low, k_hot, d)
        target = int(rng.integers(0, k_low))
        table = slot_wait_table(sched, target)
        oracle = enumerate_uniform_wait(sched.slots, d, target)
        assert table.uniform_wait == pytest.approx(oracle, rel=1e-9)
        brute_hot = enumerate_hot_wait(sched.slots, d, target,
                                       sched.hot_set_ids)
        assert table.d_hot == pytest.approx(brute_hot, rel=1e-9)


def test_slot_wait_table_partial_sums_decrease():
    _, sched = interleaved(6)
    table = slot_wait_table(sched, 2)
    assert all(a > b for a, b in zip(table.d_values, table.d_values[1:]))
    assert all(v >= 0 for v in table.d_values)


def test_slot_wait_table_unknown_set():
    _, sched = interleaved(2)
    with pytest.raises(UnknownSetError):
        slot_wait_table(sched, 99)


# --- fixed points ------------------------------------------------------

def test_wait_low_worked_example():
    # rho=0.5 with bracket 2.0 s and residual 0.25 s collapses to 5/3 s:
    # cycle [L1,H] with d=4 gives bracket 0.5*d and exp service 0.5 at
    # lam=1 gives residual 0.25
    _, sched = interleaved(1, d=4.0)
    svc = ServiceModel(0.5, EXP)
    est = expected_wait_low(1.0, svc, sched, k_total=2)
    assert est.mean_wait == pytest.approx(5.0 / 3.0, rel=1e-9)
    assert est.converged and est.iterations > 1
    cf = closed_form_wait_low(1.0, svc, sched, k_total=2)
    assert est.mean_wait == pytest.approx(cf, rel=1e-9)


def test_wait_low_zero_load_limit():
    part, sched = interleaved(4)
    d = sched.slot_length
    table = slot_wait_table(sched, 0)
    probs = state_probabilities(4)
    k = part.k_total
    bracket = probs.pr_low * (k - 1) * (k - 2) * d / 2 + probs.pr_hot * table.d_hot
    est = expected_wait_low(0.0, ServiceModel(1e-3, EXP), sched, k_total=k)
    assert est.mean_wait == pytest.approx(bracket, rel=1e-9)
    assert est.queue_len == 0.0


def test_wait_low_queue_len_identity():
    _, sched = interleaved(5)
    est = expected_wait_low(40.0, ServiceModel(2e-4, EXP), sched, k_total=6)
    assert est.queue_len == pytest.approx(40.0 * est.mean_wait, rel=1e-12)


def test_wait_low_iterative_matches_closed_form():
    rng = np.random.default_rng(3)
    for _ in range(200):
        k_low = int(rng.integers(1, 11))
        d = float(rng.choice([0.01, 0.1]))
        mean = float(rng.uniform(1e-4, 5e-3))
        lam = float(rng.uniform(0.0, 0.95 / mean))
        _, sched = interleaved(k_low, d=d)
        svc = ServiceModel(mean, EXP)
        est = expected_wait_low(lam, svc, sched, k_total=k_low + 1)
        cf = closed_form_wait_low(lam, svc, sched, k_total=k_low + 1)
        assert est.mean_wait == pytest.approx(cf, rel=1e-9)


def test_wait_low_unstable():
    _, sched = interleaved(2)
    with pytest.raises(UnstableError):
        expected_wait_low(2000.0, ServiceModel(1e-3, EXP), sched, k_total=3)


def test_wait_high_zero_load():
    est = expected_wait_high(0.0, ServiceModel(1e-3, EXP), 0.01, 1)
    assert est.mean_wait == pytest.approx(0.01, rel=1e-12)


def test_wait_high_load_independent_fixed_point():
    # the queue terms cancel algebraically: W = sum of gap periods for
    # any utilisation below 1 (documented model gap; sim is ground truth)
    d = 0.01
    for rho in (0.2, 0.5, 0.9):
        est = expected_wait_high(rho / 1e-3, ServiceModel(1e-3, EXP), d, 3)
        assert est.mean_wait == pytest.approx(3 * d, rel=1e-9)
        assert est.mean_wait == pytest.approx(
            closed_form_wait_high(rho / 1e-3, ServiceModel(1e-3, EXP), d, 3),
            rel=1e-9)
    assert est.slots_waited == 4  # gap periods plus the serving slot


def test_wait_high_unstable():
    with pytest.raises(UnstableError):
        expected_wait_high(1000.0, ServiceModel(1e-3, EXP), 0.01, 1)


def test_damped_iteration_reports_divergence():
    with pytest.raises(NonConvergenceError):
        damped_fixed_point(lambda x: 2.0 * x + 1.0)
    x, iters, ok = damped_fixed_point(lambda x: x + 1.0, max_iter=50)
    assert not ok and iters == 50


# --- monotonicity ------------------------------------------------------

def test_wait_low_monotone_in_set_count_and_slot_length():
    svc = ServiceModel(2e-4, EXP)
    lam = 100.0
    prev = None
    for k_low in range(1, 11):
        _, sched = interleaved(k_low)
        w = expected_wait_low(lam, svc, sched, k_total=k_low + 1).mean_wait
        if prev is not None:
            assert w >= prev - 1e-15
        prev = w
    prev = None
    for d in (0.001, 0.005, 0.01, 0.05, 0.1):
        _, sched = interleaved(5, d=d)
        w = expected_wait_low(lam, svc, sched, k_total=6).mean_wait
        if prev is not None:
            assert w >= prev - 1e-15
        prev = w


def test_wait_high_monotone_in_service_mean():
    # the hotspot fixed point is flat in the service mean, so
    # non-decreasing holds with equality up to solver tolerance
    prev = None
    for mean in (1e-4, 2e-4, 5e-4, 1e-3, 2e-3):
        w = expected_wait_high(200.0, ServiceModel(mean, EXP), 0.01, 1).mean_wait
        if prev is not None:
            assert w >= prev * (1.0 - 1e-9)
        prev = w


def test_wait_low_falls_with_utilisation_when_vacations_dominate():
    # Known property of the verbatim low-set fixed point: with the
    # vacation bracket far above the service time, d/dlam at 0 equals
    # X*(X - bracket) < 0, so the estimate initially falls as the
    # utilisation lam*X rises (whether via lam or via X). The simulator
    # is the ground truth for the real trend; the acceptance suite
    # reports this model gap rather than hiding it (see README notes).
    _, sched = interleaved(5)
    svc = ServiceModel(2e-4, EXP)
    w1 = expected_wait_low(50.0, svc, sched, k_total=6).mean_wait
    w2 = expected_wait_low(500.0, svc, sched, k_total=6).mean_wait
    assert w2 < w1
    w3 = expected_wait_low(50.0, ServiceModel(2e-3, EXP), sched,
                           k_total=6).mean_wait
    assert w3 < w1


# --- M/G/1 reference ----------------------------------------------------

def test_pk_mm1_point():
    # lam=500/s, exponential 1 ms: rho/(mu-lam) = 1 ms
    assert pollaczek_khinchine_wait(500.0, ServiceModel(1e-3, EXP)) == \
        pytest.approx(1e-3, rel=1e-12)


def test_pk_zero_rate():
    assert pollaczek_khinchine_wait(0.0, ServiceModel(1e-3, EXP)) == 0.0


def test_pk_deterministic_halves_exponential():
    lam = 400.0
    w_exp = pollaczek_khinchine_wait(lam, ServiceModel(1e-3, EXP))
    w_det = pollaczek_khinchine_wait(lam, ServiceModel(1e-3, DET))
    assert w_det == pytest.approx(w_exp / 2.0, rel=1e-12)


def test_pk_unstable():
    with pytest.raises(UnstableError):
        pollaczek_khinchine_wait(1000.0, ServiceModel(1e-3, EXP))


def test_wait_high_excludes_residual_term():
    # deliberate asymmetry: the hotspot estimator carries no residual,
    # so its zero-gap limit is exactly 0 even under load
    est = expected_wait_high(100.0, ServiceModel(1e-3, EXP), 0.01, 0)
    assert est.mean_wait == pytest.approx(0.0, abs=1e-12)
    rm = residual_moments(100.0, ServiceModel(1e-3, EXP))
    assert rm.mean_residual > 0.0
