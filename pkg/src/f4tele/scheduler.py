"""Rack partitioning, cyclic slot schedule generation and stability checks."""

import math
from dataclasses import dataclass
from enum import Enum

from .model import Partition, RackClass, RackSet, Schedule


class PolicyKind(Enum):
    INTERLEAVED_HOTSPOT = "interleaved"
    ROUND_ROBIN = "round_robin"
    CUSTOM = "custom"


@dataclass(frozen=True)
class SchedulePolicy:
    kind: PolicyKind
    custom_slots: tuple = ()


class InvalidCapacityError(ValueError):
    pass


class PolicyMismatchError(ValueError):
    pass


def _split_balanced(ids, p):
    """Split sorted ids into ceil(len/p) groups of near-equal size (<= p)."""
    n = len(ids)
    k = math.ceil(n / p)
    base, extra = divmod(n, k)
    groups, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        groups.append(tuple(ids[start:start + size]))
        start += size
    return groups


def partition_racks(n, p, hotspot_rack_ids=()):
    """Group racks into hotspot and non-hotspot sets of at most p racks.

    Deterministic: racks are assigned in ascending id order, non-hotspot
    sets receive the low set ids and hotspot sets follow. Each class is
    split into ceil(class_size / p) near-equal groups. Capacity beyond n
    is simply unused (a single rack still forms one set).
    """
    if p < 1 or n < 1:
        raise InvalidCapacityError(f"bundle capacity {p} invalid for {n} racks")
    p = min(p, n)
    hot = sorted(set(hotspot_rack_ids))
    if hot and (hot[0] < 0 or hot[-1] >= n):
        raise InvalidCapacityError(f"hotspot rack ids {hot} outside [0, {n})")
    low = [r for r in range(n) if r not in set(hot)]

    sets = []
    for ids in _split_balanced(low, p) if low else []:
        sets.append(RackSet(set_id=len(sets), rack_ids=ids,
                            klass=RackClass.NON_HOTSPOT))
    k_low = len(sets)
    for ids in _split_balanced(hot, p) if hot else []:
        sets.append(RackSet(set_id=len(sets), rack_ids=ids,
                            klass=RackClass.HOTSPOT))
    k_hot = len(sets) - k_low
    return Partition(sets=tuple(sets), k_total=len(sets), k_hot=k_hot,
                     k_low=k_low, low_set_ids=tuple(range(k_low)))


def _cyclic_gaps(slots, positions, d):
    """Gaps (end of one occurrence to start of the next), cyclically."""
    n = len(slots)
    gaps = []
    for i, pos in enumerate(positions):
        nxt = positions[(i + 1) % len(positions)]
        gaps.append(((nxt - pos - 1) % n) * d)
    return gaps


def _derive_schedule(slot_list, d, partition, gated):
    slots = tuple(slot_list)
    tau = len(slots) * d
    hot_ids = partition.hot_set_ids
    hot_pos = [i for i, s in enumerate(slots) if s in set(hot_ids)]
    tau_hot = max(_cyclic_gaps(slots, hot_pos, d)) if hot_pos else 0.0
    low_ids = [s for s in set(slots) if s not in set(hot_ids)]
    subject = low_ids if low_ids else list(set(slots))
    tau_max = 0.0
    for sid in subject:
        pos = [i for i, s in enumerate(slots) if s == sid]
        tau_max = max(tau_max, max(_cyclic_gaps(slots, pos, d)))
    return Schedule(slots=slots, slot_length=d, tau=tau, tau_hot=tau_hot,
                    tau_max=tau_max, hot_set_ids=tuple(hot_ids),
                    gated_slots=gated)


def build_schedule(partition, d, policy, gated_slots=False):
    """Generate one rotation cycle for the partition under the policy.

    Interleaved hotspot scheduling alternates low and hotspot slots
    [L1, H, L2, H, ...]; with several hotspot sets the hotspot positions
    are filled round-robin and the cycle closes after lcm(K_L, K_H)
    pairs, keeping the low:hot slot ratio at exactly 1:1.
    """
    if d <= 0:
        raise ValueError("slot length must be > 0")
    kind = policy.kind
    if kind is PolicyKind.INTERLEAVED_HOTSPOT:
        if partition.k_hot < 1 or partition.k_low < 1:
            raise PolicyMismatchError(
                "interleaved policy needs at least one hotspot and one "
                "non-hotspot set")
        low = list(partition.low_set_ids)
        hot = list(partition.hot_set_ids)
        pairs = math.lcm(len(low), len(hot))
        slot_list = []
        for i in range(pairs):
            slot_list.append(low[i % len(low)])
            slot_list.append(hot[i % len(hot)])
    elif kind is PolicyKind.ROUND_ROBIN:
        slot_list = [s.set_id for s in partition.sets]
    elif kind is PolicyKind.CUSTOM:
        if not policy.custom_slots:
            raise PolicyMismatchError("custom policy needs a slot list")
        slot_list = list(policy.custom_slots)
    else:  # pragma: no cover - enum is closed
        raise PolicyMismatchError(f"unknown policy {kind}")
    return _derive_schedule(slot_list, d, partition, gated_slots)


@dataclass(frozen=True)
class SetStability:
    set_id: int
    klass: RackClass
    lam: float            # per-rack arrival rate
    time_share: float     # allocated fraction of the cycle
    rho_eff: float        # lam * mean_service / time_share


@dataclass(frozen=True)
class StabilityReport:
    per_set: tuple
    stable: bool

    def rho_for(self, set_id):
        for row in self.per_set:
            if row.set_id == set_id:
                return row.rho_eff
        raise KeyError(set_id)


def stability_check(schedule, traffic, service, partition):
    """Effective per-set utilisation: the slot allocation stretches the
    plain utilisation lam*X by tau / time_allocated_per_cycle."""
    rows = []
    counts = {}
    for s in schedule.slots:
        counts[s] = counts.get(s, 0) + 1
    for rack_set in partition.sets:
        lam = (traffic.lambda_hot if rack_set.klass is RackClass.HOTSPOT
               else traffic.lambda_low)
        share = counts.get(rack_set.set_id, 0) * schedule.slot_length / schedule.tau
        rho = lam * service.mean_service
        rho_eff = math.inf if share == 0 and rho > 0 else (rho / share if share else 0.0)
        rows.append(SetStability(set_id=rack_set.set_id, klass=rack_set.klass,
                                 lam=lam, time_share=share, rho_eff=rho_eff))
    return StabilityReport(per_set=tuple(rows),
                           stable=all(r.rho_eff < 1.0 for r in rows))


def slots_between_hot_visits(schedule, set_id=None):
    """Worst number of foreign slots between consecutive visits of a
    hotspot set (the d-terms a waiting packet spans at zero load)."""
    hot = set(schedule.hot_set_ids)
    targets = [set_id] if set_id is not None else sorted(hot)
    worst = 0
    for sid in targets:
        pos = [i for i, s in enumerate(schedule.slots) if s == sid]
        if not pos:
            continue
        n = len(schedule.slots)
        for i, p in enumerate(pos):
            nxt = pos[(i + 1) % len(pos)]
            worst = max(worst, (nxt - p - 1) % n)
    return worst


def schedule_csv(schedule):
    """Cycle as CSV rows (slot_index, set_id, start_offset_seconds)."""
    lines = ["slot_index,set_id,start_offset_seconds"]
    for i, sid in enumerate(schedule.slots):
        lines.append(f"{i},{sid},{i * schedule.slot_length:.12g}")
    return "\n".join(lines) + "\n"
