import pytest

from f4tele.model import (ClusterSpec, FlowSizeKind, FlowSizeLaw,
                          ServiceDistribution, ServiceModel, SourceKind,
                          TrafficProfile, validate_config)
from f4tele.scheduler import (PolicyKind, SchedulePolicy, build_schedule,
                              partition_racks)


def make_config(n=6, p=1, hotspot=(5,), d=0.01, lambda_low=50.0, beta=0.1,
                service_mean=2e-4, distribution=ServiceDistribution.EXPONENTIAL,
                primary_buffer=100000, backup_buffer=100000,
                backup_drain_rate=0.0, qos_deadline=float("inf"),
                source_kind=SourceKind.POISSON_PACKET, udp_rate=1e8,
                fso_rate=1e9, policy=PolicyKind.INTERLEAVED_HOTSPOT,
                gated_slots=False, loopback_filter_udp=True,
                flow_size_law=None, aimd=None, switchover_delay=0.0):
    """Small validated configuration; defaults give the 5-low + 1-hot
    interleaved cycle with one rack per set."""
    part = partition_racks(n, p, list(hotspot))
    if isinstance(policy, str):
        policy = PolicyKind(policy)
    sched = build_schedule(part, d, SchedulePolicy(policy),
                           gated_slots=gated_slots)
    law = flow_size_law or FlowSizeLaw(FlowSizeKind.FIXED_PACKETS, n_packets=1)
    kwargs = dict(lambda_low=lambda_low, lambda_hot=lambda_low / beta,
                  beta=beta, flow_size_law=law, source_kind=source_kind,
                  qos_deadline=qos_deadline, udp_rate=udp_rate,
                  packet_size=1500, loopback_filter_udp=loopback_filter_udp)
    if aimd is not None:
        kwargs["aimd"] = aimd
    traffic = TrafficProfile(**kwargs)
    cluster = ClusterSpec(n_data_racks=n, n_nms_racks=1, bundle_capacity=p,
                          fso_rate=fso_rate, primary_buffer=primary_buffer,
                          backup_buffer=backup_buffer,
                          backup_drain_rate=backup_drain_rate,
                          switchover_delay=switchover_delay)
    service = ServiceModel(mean_service=service_mean, distribution=distribution)
    return validate_config(cluster, part, sched, traffic, service)


# --- independent schedule-walk oracle (never calls the analysis module) ---

def walk_wait(slots, d, target, t):
    """Time from instant t until the start of the target's next slot;
    zero while the target's own slot is active. An instant on a slot
    boundary belongs to the starting slot (epsilon guards float noise).
    """
    n = len(slots)
    t = t % (n * d)
    idx = int((t + d * 1e-9) // d) % n
    if slots[idx] == target:
        return 0.0
    for j in range(1, n + 1):
        if slots[(idx + j) % n] == target:
            return (idx + j) * d - t
    raise ValueError("target not in cycle")


def enumerate_uniform_wait(slots, d, target, samples_per_slot=400):
    """Average walk_wait over fine-grained arrival instants on one cycle.

    The wait is linear within each slot, so symmetric midpoint sampling
    reproduces the continuous average exactly (up to rounding).
    """
    n = len(slots)
    total = 0.0
    for i in range(n):
        for k in range(samples_per_slot):
            t = i * d + (k + 0.5) * d / samples_per_slot
            total += walk_wait(slots, d, target, t)
    return total / (n * samples_per_slot)


def enumerate_hot_wait(slots, d, target, hot_ids):
    """Mean walk-to-target time over hotspot slot starts (the low-state
    probabilities are equal, so the weighted mean is a plain mean).
    Walks slot indices as integers to stay float-exact."""
    hot = set(hot_ids)
    n = len(slots)
    waits = []
    for i, s in enumerate(slots):
        if s not in hot:
            continue
        for j in range(1, n + 1):
            if slots[(i + j) % n] == target:
                waits.append(j * d)
                break
    return sum(waits) / len(waits)


@pytest.fixture
def small_config():
    return make_config()
