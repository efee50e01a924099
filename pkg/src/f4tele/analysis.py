"""Closed-form / fixed-point delay analysis of the rotating link bundle.

Models each rack's FSO link as an M/G/1 server whose availability is
gated by the slot rotation. The per-class mean-wait estimators solve
small fixed-point equations; the slot-wait table gives the deterministic
part of the wait implied by the cycle geometry.
"""

import math
from dataclasses import dataclass

from .model import ServiceModel  # noqa: F401  (re-exported for callers)


class UnstableError(ValueError):
    """Plain utilisation lam * mean_service is at or above 1."""


class NonConvergenceError(RuntimeError):
    pass


class InvalidCountError(ValueError):
    pass


class UnknownSetError(KeyError):
    pass


@dataclass(frozen=True)
class ResidualMoments:
    """Moments of the remaining service time seen by a random arrival."""

    mean_residual: float      # rho * m2 / (2 m1)
    second_moment: float      # lam * m3 / 3
    variance: float           # second_moment - mean_residual^2, unclamped
    negative_variance: bool   # inconsistent inputs; reported, never hidden


def residual_moments(lam, service):
    if lam < 0:
        raise ValueError("arrival rate must be >= 0")
    m1, m2, m3 = service.mean_service, service.moment2(), service.moment3()
    rho = lam * m1
    mean_res = rho * m2 / (2.0 * m1)
    second = lam * m3 / 3.0
    var = second - mean_res ** 2
    return ResidualMoments(mean_residual=mean_res, second_moment=second,
                           variance=var, negative_variance=var < -1e-15)


@dataclass(frozen=True)
class StateProbabilities:
    """Probability that a given set is the one under service.

    The bundle alternates between the hotspot group and the low group,
    so the hotspot state carries probability 1/2 and the remainder is
    split equally over the low sets.
    """

    pr_hot: float
    pr_low: float
    k_low: int


def state_probabilities(k_low):
    if k_low < 1:
        raise InvalidCountError("need at least one non-hotspot set")
    pr_hot = 0.5
    return StateProbabilities(pr_hot=pr_hot, pr_low=(1.0 - pr_hot) / k_low,
                              k_low=k_low)


@dataclass(frozen=True)
class SlotWaitTable:
    """Deterministic waits implied by the cycle, for one target set.

    d_values      remaining-slot partial sums (K-1)d, (K-2)d, ..., d
    d_hot         expected wait from a hotspot slot until the target's
                  next slot, averaged over hotspot occurrences with the
                  state-probability weights (the slot successor is fixed
                  by the cycle, so each occurrence contributes its exact
                  walk-to-target time)
    uniform_wait  expected wait to the target's next slot start for an
                  arrival instant uniform on the cycle (zero while the
                  target itself is being served)
    """

    d_values: tuple
    d_hot: float
    uniform_wait: float


def slot_wait_table(schedule, target_set):
    slots = schedule.slots
    d = schedule.slot_length
    if target_set not in slots:
        raise UnknownSetError(f"set {target_set} does not appear in the schedule")
    k_total = len(set(slots))
    d_values = tuple((k_total - j) * d for j in range(1, k_total))

    n = len(slots)
    target_pos = [i for i, s in enumerate(slots) if s == target_set]

    def slots_until_target(i):
        # whole slots from the start of slot i to the target's next start
        best = n
        for p in target_pos:
            best = min(best, (p - i) % n or n)
        return best

    hot = set(schedule.hot_set_ids)
    hot_pos = [i for i, s in enumerate(slots) if s in hot]
    if hot_pos:
        probs = state_probabilities(max(k_total - len(hot & set(slots)), 1))
        weights = [probs.pr_low] * len(hot_pos)
        total = sum(weights)
        d_hot = sum(w * slots_until_target(i) * d
                    for w, i in zip(weights, hot_pos)) / total
    else:
        d_hot = 0.0

    # Exact integral over one cycle: an arrival inside a foreign slot
    # waits the rest of that slot (mean d/2) plus the whole gap to the
    # target; inside the target's own slot the wait is zero.
    acc = 0.0
    for i, s in enumerate(slots):
        if s == target_set:
            continue
        gap = (slots_until_target(i) - 1) * d
        acc += d * (d / 2.0 + gap)
    uniform = acc / (n * d)
    return SlotWaitTable(d_values=d_values, d_hot=d_hot, uniform_wait=uniform)


@dataclass(frozen=True)
class WaitEstimate:
    mean_wait: float       # W
    queue_len: float       # lam * W
    vacation_count: float  # rotations spanned by the mean wait
    slots_waited: float    # service periods in the deterministic bracket
    iterations: int
    converged: bool


def damped_fixed_point(f, x0=0.0, damping=0.5, rel_tol=1e-9, max_iter=10000):
    """Solve x = f(x) by damped iteration x <- (1-g)x + g f(x).

    Stops once the geometric-tail error estimate drops below rel_tol
    relative to the iterate (with a 10x safety factor), so the returned
    value itself, not merely the last step, is accurate to rel_tol.
    """
    x = x0
    prev_delta = None
    for i in range(1, max_iter + 1):
        fx = f(x)
        if not math.isfinite(fx):
            raise NonConvergenceError(f"iteration diverged at step {i}")
        x_new = (1.0 - damping) * x + damping * fx
        delta = abs(x_new - x)
        scale = max(abs(x_new), 1e-300)
        if prev_delta is not None and prev_delta > 0.0:
            q = delta / prev_delta
            err = delta * q / (1.0 - q) if q < 1.0 else math.inf
        else:
            err = delta
        x = x_new
        if delta == 0.0 or err <= 0.1 * rel_tol * scale:
            return x, i, True
        prev_delta = delta
    return x, max_iter, False


def _low_bracket(schedule, k_total, d):
    """Probability-weighted deterministic wait for a non-hotspot packet."""
    hot = set(schedule.hot_set_ids)
    low_in_cycle = sorted(s for s in set(schedule.slots) if s not in hot)
    if not low_in_cycle:
        raise InvalidCountError("schedule has no non-hotspot slots")
    probs = state_probabilities(len(low_in_cycle))
    table = slot_wait_table(schedule, low_in_cycle[0])
    quad = (k_total - 1) * (k_total - 2) * d / 2.0
    return probs.pr_low * quad + probs.pr_hot * table.d_hot, probs, table


def closed_form_wait_low(lambda_low, service, schedule, k_total, d=None):
    """Algebraic reduction of the low-set fixed point:
    W = ((1 - rho) * bracket + mean_residual) / (1 - rho^2)."""
    d = schedule.slot_length if d is None else d
    rho = lambda_low * service.mean_service
    if rho >= 1.0:
        raise UnstableError(f"rho={rho:.4f} >= 1")
    bracket, _, _ = _low_bracket(schedule, k_total, d)
    rbar = residual_moments(lambda_low, service).mean_residual
    return ((1.0 - rho) * bracket + rbar) / (1.0 - rho ** 2)


def expected_wait_low(lambda_low, service, schedule, k_total, d=None):
    """Mean wait of a non-hotspot packet under the rotating schedule.

    Solves W = rho*(lam*W*X) + (1-rho)*bracket + mean_residual by damped
    iteration, where the bracket combines the quadratic remaining-slot
    term with the hotspot-state wait.
    """
    d = schedule.slot_length if d is None else d
    rho = lambda_low * service.mean_service
    if rho >= 1.0:
        raise UnstableError(f"rho={rho:.4f} >= 1")
    bracket, _, _ = _low_bracket(schedule, k_total, d)
    rbar = residual_moments(lambda_low, service).mean_residual
    x_mean = service.mean_service

    def step(w):
        return rho * (lambda_low * w * x_mean) + (1.0 - rho) * bracket + rbar

    w, iters, ok = damped_fixed_point(step)
    if not ok:
        raise NonConvergenceError("low-set wait iteration did not converge")
    return WaitEstimate(mean_wait=w, queue_len=lambda_low * w,
                        vacation_count=w / schedule.tau if schedule.tau else 0.0,
                        slots_waited=bracket / d, iterations=iters, converged=ok)


def closed_form_wait_high(lambda_hot, service, d, n_low_between_visits=1):
    """Algebraic reduction of the hotspot fixed point; the queue terms
    cancel and the wait collapses to the slot gap, independent of load."""
    rho = lambda_hot * service.mean_service
    if rho >= 1.0:
        raise UnstableError(f"rho={rho:.4f} >= 1")
    return n_low_between_visits * d


def expected_wait_high(lambda_hot, service, d, n_low_between_visits=1):
    """Mean wait of a hotspot packet.

    Solves W = rho*(lam*W*X) + (1-rho)*(lam*W*X + sum of the d-periods
    separating consecutive visits). No residual term enters here; the
    asymmetry with the low-set estimator is deliberate and documented.
    The fixed point is load-independent (see README model notes); the
    simulator is the ground truth for load effects on hotspot delay.
    """
    rho = lambda_hot * service.mean_service
    if rho >= 1.0:
        raise UnstableError(f"rho={rho:.4f} >= 1")
    sum_d = n_low_between_visits * d
    x_mean = service.mean_service

    def step(w):
        backlog = lambda_hot * w * x_mean
        return rho * backlog + (1.0 - rho) * (backlog + sum_d)

    w, iters, ok = damped_fixed_point(step)
    if not ok:
        raise NonConvergenceError("hotspot wait iteration did not converge")
    gap = (n_low_between_visits + 1) * d
    return WaitEstimate(mean_wait=w, queue_len=lambda_hot * w,
                        vacation_count=w / gap if gap else 0.0,
                        slots_waited=float(n_low_between_visits + 1),
                        iterations=iters, converged=ok)


def pollaczek_khinchine_wait(lam, service):
    """Mean M/G/1 queue wait, W_q = lam * m2 / (2 (1 - rho)).

    Independent of the rotation model; used as the benchmark-mode oracle.
    """
    rho = lam * service.mean_service
    if rho >= 1.0:
        raise UnstableError(f"rho={rho:.4f} >= 1")
    if lam == 0.0:
        return 0.0
    return lam * service.moment2() / (2.0 * (1.0 - rho))
