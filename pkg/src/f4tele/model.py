"""Domain types shared by all modules, plus configuration validation.

Units everywhere: time in seconds, sizes in bytes, rates in bits/second,
arrival rates in events/second.
"""

import math
from dataclasses import dataclass, field
from enum import Enum


class RackClass(Enum):
    HOTSPOT = "hotspot"
    NON_HOTSPOT = "non_hotspot"


class Mode(Enum):
    """Operating mode of the link bundle.

    F4TELE      rotation with loopback buffering during vacations
    F4TELE_PLUS rotation without loopback (vacation arrivals use the
                primary buffer only)
    BENCHMARK   dedicated always-on link per rack
    """

    F4TELE = "f4tele"
    F4TELE_PLUS = "f4tele+"
    BENCHMARK = "benchmark"


class ConfigError(Exception):
    """Raised when a configuration violates one or more invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class ClusterSpec:
    """Static topology parameters of the telemetry network."""

    n_data_racks: int          # N
    n_nms_racks: int           # U (capacity motivation only, not used in formulas)
    bundle_capacity: int       # P, max links served simultaneously
    fso_rate: float            # bits/second per link
    primary_buffer: int = 1000     # packets
    backup_buffer: int = 10000     # packets
    backup_drain_rate: float = 0.0   # bits/second; 0 = hold until next slot
    switchover_delay: float = 0.0    # seconds


@dataclass(frozen=True)
class RackSet:
    set_id: int
    rack_ids: tuple
    klass: RackClass


@dataclass(frozen=True)
class Partition:
    """Grouping of the data racks into service sets."""

    sets: tuple                # of RackSet
    k_total: int               # K
    k_hot: int                 # K_H
    k_low: int                 # K_L
    low_set_ids: tuple

    def set_by_id(self, set_id):
        for s in self.sets:
            if s.set_id == set_id:
                return s
        raise KeyError(set_id)

    @property
    def hot_set_ids(self):
        return tuple(s.set_id for s in self.sets if s.klass is RackClass.HOTSPOT)


@dataclass(frozen=True)
class Schedule:
    """One rotation cycle of the link bundle.

    slots        ordered set ids, one per service period
    slot_length  d, identical for every slot
    tau          cycle duration, len(slots) * d
    tau_hot      worst gap between consecutive hotspot-class slots
                 (end to start); 0 when the schedule has no hotspot slot
    tau_max      worst gap a non-hotspot set sees between its own slots
    gated_slots  True preempts service at slot boundaries (default lets a
                 service in progress complete)
    """

    slots: tuple
    slot_length: float
    tau: float
    tau_hot: float
    tau_max: float
    hot_set_ids: tuple = ()
    gated_slots: bool = False

    def occurrences(self, set_id):
        return tuple(i for i, s in enumerate(self.slots) if s == set_id)


class FlowSizeKind(Enum):
    UNIFORM_BYTES = "uniform_bytes"
    FIXED_PACKETS = "fixed_packets"


@dataclass(frozen=True)
class FlowSizeLaw:
    kind: FlowSizeKind
    min_bytes: int = 0
    max_bytes: int = 0
    n_packets: int = 1


class SourceKind(Enum):
    POISSON_PACKET = "poisson_packet"
    UDP_CONSTANT_RATE = "udp_constant_rate"
    TCP_AIMD = "tcp_aimd"


@dataclass(frozen=True)
class AimdParams:
    """Knobs of the window-based (slow start + AIMD) source model."""

    initial_window: int = 2       # packets
    ssthresh: int = 64            # packets
    rtt: float = 0.0002           # seconds, intra-DC
    mss: int = 1500               # bytes
    loss_response: float = 0.5    # multiplicative decrease factor


@dataclass(frozen=True)
class TrafficProfile:
    """Per-class arrival rates and workload shape.

    For the poisson_packet source the lambdas are packet rates per rack;
    for the flow sources (udp/tcp) they are flow arrival rates per rack.
    """

    lambda_low: float             # per rack, non-hotspot class
    lambda_hot: float             # per rack, hotspot class
    beta: float                   # lambda_hot = lambda_low / beta
    flow_size_law: FlowSizeLaw
    source_kind: SourceKind = SourceKind.POISSON_PACKET
    qos_deadline: float = math.inf   # T_QoS; inf disables deadline drops
    udp_rate: float = 1e8            # bits/second per flow, udp source
    aimd: AimdParams = field(default_factory=AimdParams)
    packet_size: int = 1500          # bytes per telemetry packet / MSS
    loopback_filter_udp: bool = True


class ServiceDistribution(Enum):
    EXPONENTIAL = "exponential"
    DETERMINISTIC = "deterministic"
    GENERAL = "general"


@dataclass(frozen=True)
class ServiceModel:
    """Per-packet service time law of one FSO link."""

    mean_service: float
    distribution: ServiceDistribution = ServiceDistribution.EXPONENTIAL
    m2: float = 0.0   # second moment, general distribution only
    m3: float = 0.0   # third moment, general distribution only

    def moment2(self):
        if self.distribution is ServiceDistribution.EXPONENTIAL:
            return 2.0 * self.mean_service ** 2
        if self.distribution is ServiceDistribution.DETERMINISTIC:
            return self.mean_service ** 2
        return self.m2

    def moment3(self):
        if self.distribution is ServiceDistribution.EXPONENTIAL:
            return 6.0 * self.mean_service ** 3
        if self.distribution is ServiceDistribution.DETERMINISTIC:
            return self.mean_service ** 3
        return self.m3

    def scaled(self, factor):
        """Service model with every time moment stretched by `factor`."""
        return ServiceModel(
            mean_service=self.mean_service * factor,
            distribution=self.distribution,
            m2=self.m2 * factor ** 2,
            m3=self.m3 * factor ** 3,
        )


@dataclass(frozen=True)
class ValidatedConfig:
    """Immutable, fully cross-checked configuration bundle.

    Construct through validate_config(); safe to share across concurrent
    simulation replications.
    """

    cluster: ClusterSpec
    partition: Partition
    schedule: Schedule
    traffic: TrafficProfile
    service: ServiceModel
    warnings: tuple = ()

    def rack_class(self, rack_id):
        for s in self.partition.sets:
            if rack_id in s.rack_ids:
                return s.klass
        raise KeyError(rack_id)

    def rack_lambda(self, rack_id):
        if self.rack_class(rack_id) is RackClass.HOTSPOT:
            return self.traffic.lambda_hot
        return self.traffic.lambda_low


_REL_TOL = 1e-9


def _check_cluster(c, out):
    if c.n_data_racks < 1:
        out.append("cluster: n_data_racks must be >= 1")
    if c.n_nms_racks < 1:
        out.append("cluster: n_nms_racks must be >= 1")
    if not (1 <= c.bundle_capacity <= max(c.n_data_racks, 1)):
        out.append("cluster: bundle_capacity must satisfy 1 <= P <= N")
    if c.fso_rate <= 0:
        out.append("cluster: fso_rate must be > 0")
    if c.backup_drain_rate < 0:
        out.append("cluster: backup_drain_rate must be >= 0")
    if c.primary_buffer < 0 or c.backup_buffer < 0:
        out.append("cluster: buffer sizes must be >= 0")
    if c.switchover_delay < 0:
        out.append("cluster: switchover_delay must be >= 0")


def _check_partition(p, cluster, out, warn):
    all_ids = []
    for s in p.sets:
        if len(s.rack_ids) > cluster.bundle_capacity:
            out.append(f"partition: set {s.set_id} has {len(s.rack_ids)} racks, "
                       f"exceeds bundle_capacity {cluster.bundle_capacity}")
        all_ids.extend(s.rack_ids)
    if len(all_ids) != len(set(all_ids)):
        out.append("partition: rack_ids are not disjoint across sets")
    if len(all_ids) > cluster.n_data_racks:
        out.append(f"partition: set union exceeds N "
                   f"({len(all_ids)} rack slots for {cluster.n_data_racks} racks)")
    elif set(all_ids) != set(range(cluster.n_data_racks)):
        out.append("partition: union of all sets must equal all data racks")
    n_hot = sum(1 for s in p.sets if s.klass is RackClass.HOTSPOT)
    n_low = len(p.sets) - n_hot
    if p.k_total != len(p.sets) or p.k_hot != n_hot or p.k_low != n_low:
        out.append("partition: k_total/k_hot/k_low do not match the sets")
    if p.k_total != p.k_hot + p.k_low:
        out.append("partition: k_total must equal k_hot + k_low")
    if set(p.low_set_ids) != {s.set_id for s in p.sets
                              if s.klass is RackClass.NON_HOTSPOT}:
        out.append("partition: low_set_ids inconsistent with set classes")
    # Per-class grouping can exceed ceil(N/P) by construction, so the
    # single-class count rule is advisory only.
    expected_k = math.ceil(cluster.n_data_racks / cluster.bundle_capacity)
    if not out and p.k_total != expected_k:
        warn.append(f"partition: k_total={p.k_total} differs from ceil(N/P)={expected_k}")


def _check_schedule(s, p, out):
    if s.slot_length <= 0:
        out.append("schedule: slot_length must be > 0")
        return
    if not s.slots:
        out.append("schedule: empty slot list")
        return
    if not math.isclose(s.tau, len(s.slots) * s.slot_length, rel_tol=_REL_TOL):
        out.append("schedule: tau must equal len(slots) * slot_length")
    known = {x.set_id for x in p.sets}
    in_sched = set(s.slots)
    if not in_sched <= known:
        out.append(f"schedule: unknown set ids {sorted(in_sched - known)}")
    missing = known - in_sched
    if missing:
        out.append(f"schedule: sets {sorted(missing)} never appear in the cycle")
    if not (s.tau_hot <= s.tau_max + _REL_TOL and s.tau_max <= s.tau + _REL_TOL):
        out.append("schedule: must satisfy tau_hot <= tau_max <= tau")
    if set(s.hot_set_ids) != set(p.hot_set_ids):
        out.append("schedule: hot_set_ids inconsistent with partition classes")


def _check_traffic(t, p, out, warn):
    if t.lambda_low <= 0:
        out.append("traffic: lambda_low must be > 0")
    if t.lambda_hot < t.lambda_low:
        out.append("traffic: lambda_hot must be >= lambda_low")
    if t.lambda_hot > 0 and not math.isclose(t.beta, t.lambda_low / t.lambda_hot,
                                             rel_tol=1e-6):
        out.append("traffic: beta inconsistent with lambda_low/lambda_hot")
    if t.qos_deadline <= 0:
        out.append("traffic: qos_deadline must be > 0")
    if t.packet_size <= 0:
        out.append("traffic: packet_size must be > 0")
    law = t.flow_size_law
    if law.kind is FlowSizeKind.UNIFORM_BYTES:
        if not (0 < law.min_bytes <= law.max_bytes):
            out.append("traffic: flow size law needs 0 < min_bytes <= max_bytes")
    elif law.n_packets < 1:
        out.append("traffic: fixed_packets law needs n_packets >= 1")
    if t.source_kind is SourceKind.UDP_CONSTANT_RATE and t.udp_rate <= 0:
        out.append("traffic: udp_rate must be > 0")
    a = t.aimd
    if min(a.initial_window, a.ssthresh, a.mss) < 1 or a.rtt <= 0:
        out.append("traffic: aimd parameters must be positive")
    if not (0 < a.loss_response < 1):
        out.append("traffic: aimd loss_response must lie in (0, 1)")
    if p.k_hot > 0 and math.isclose(t.lambda_hot, t.lambda_low, rel_tol=1e-12):
        warn.append("traffic: beta = 1 (hotspot arrival rate equals non-hotspot)")


def _check_service(sv, out):
    if sv.mean_service <= 0:
        out.append("service: mean_service must be > 0")
        return
    m1, m2, m3 = sv.mean_service, sv.moment2(), sv.moment3()
    if not (math.isfinite(m2) and math.isfinite(m3)):
        out.append("service: second/third moments must be finite")
    elif m2 < m1 ** 2 * (1 - 1e-9):
        out.append("service: second moment below mean^2 is impossible")
    elif m3 <= 0:
        out.append("service: third moment must be > 0")


def validate_config(cluster, partition, schedule, traffic, service):
    """Cross-check every type invariant and return a ValidatedConfig.

    Pure and idempotent. Raises ConfigError listing every failed
    invariant; never accepts a partially valid configuration.
    """
    violations, warnings = [], []
    _check_cluster(cluster, violations)
    _check_service(service, violations)
    if not violations:
        _check_partition(partition, cluster, violations, warnings)
        _check_traffic(traffic, partition, violations, warnings)
    if not any(v.startswith("partition") for v in violations):
        _check_schedule(schedule, partition, violations)
    if violations:
        raise ConfigError(violations)
    return ValidatedConfig(cluster=cluster, partition=partition,
                           schedule=schedule, traffic=traffic,
                           service=service, warnings=tuple(warnings))
