"""Deterministic discrete-event engine for the rotating link bundle.

Simulates per-rack FIFO queues served by dedicated FSO links whose
availability follows the slot schedule; covers loopback buffering,
overflow and deadline drops, flow sources, and per-set / per-flow
statistics.

Event ordering at equal timestamps is fixed (departure < backup
transfer < slot boundary < arrival < ack < timeout < flow start <
service kick), then by sequence number, so a run is a pure function of
(config, mode, seed).
"""

import hashlib
import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .model import Mode, ServiceDistribution, SourceKind
from .traffic import (TcpAimdSource, generate_flows, poisson_stream,
                      stream_rng, udp_emissions)

# event kinds, in tie-break priority order
_DEPART, _XFER, _SLOT, _ARRIVAL, _ACK, _TIMEOUT, _FLOW, _KICK = range(8)

WARMUP_FRACTION = 0.1


@dataclass(frozen=True)
class Packet:
    """Public packet view; the engine queues the same fields packed as a
    tuple (arrival_time, size, service_time, flow_id, packet_id)."""

    id: int
    source_rack: int
    arrival_time: float
    size: int
    deadline: float
    flow_id: int = None


@dataclass(frozen=True)
class SetStats:
    set_id: int
    klass: str
    arrivals: int
    served: int
    drops_deadline: int
    drops_overflow: int
    queued_end: int
    mean_wait: float
    p99_wait: float
    service_time_fraction: float
    stat_count: int             # waits collected after warm-up


@dataclass(frozen=True)
class FlowStats:
    flow_id: int
    rack: int
    transport: str
    size_bytes: int
    delivered_bytes: int
    start_time: float
    completion_time: float      # nan when unfinished
    throughput_bps: float


@dataclass(frozen=True)
class SimReport:
    mode: str
    seed: int
    sim_duration: float
    warmup: float
    per_set: tuple
    per_flow: tuple
    mirror_transitions: int
    cwnd_values: tuple = ()
    cwnd_weights: tuple = ()

    def sets_csv(self):
        lines = ["set_id,klass,arrivals,served,drops_deadline,"
                 "drops_overflow,queued_end,mean_wait,p99_wait,"
                 "service_time_fraction,stat_count"]
        for s in self.per_set:
            lines.append(
                f"{s.set_id},{s.klass},{s.arrivals},{s.served},"
                f"{s.drops_deadline},{s.drops_overflow},{s.queued_end},"
                f"{s.mean_wait:.12g},{s.p99_wait:.12g},"
                f"{s.service_time_fraction:.12g},{s.stat_count}")
        return "\n".join(lines) + "\n"

    def flows_csv(self):
        lines = ["flow_id,rack,transport,size_bytes,delivered_bytes,"
                 "start_time,completion_time,throughput_bps"]
        for f in self.per_flow:
            lines.append(
                f"{f.flow_id},{f.rack},{f.transport},{f.size_bytes},"
                f"{f.delivered_bytes},{f.start_time:.12g},"
                f"{f.completion_time:.12g},{f.throughput_bps:.12g}")
        return "\n".join(lines) + "\n"

    def report_hash(self):
        h = hashlib.sha256(self.sets_csv().encode())
        h.update(self.flows_csv().encode())
        return h.hexdigest()

    def summary(self):
        total_arr = sum(s.arrivals for s in self.per_set)
        total_served = sum(s.served for s in self.per_set)
        total_drops = sum(s.drops_deadline + s.drops_overflow
                          for s in self.per_set)
        lines = [
            f"mode={self.mode} seed={self.seed} duration={self.sim_duration:g}s",
            f"arrivals={total_arr} served={total_served} drops={total_drops}",
        ]
        for s in self.per_set:
            lines.append(
                f"  set {s.set_id} [{s.klass}]: mean_wait={s.mean_wait:.6g}s "
                f"p99={s.p99_wait:.6g}s share={s.service_time_fraction:.3f} "
                f"served={s.served}")
        if self.per_flow:
            thr = [f.throughput_bps for f in self.per_flow]
            lines.append(f"  flows={len(thr)} mean_throughput="
                         f"{sum(thr) / len(thr):.6g} bit/s")
        lines.append(f"hash={self.report_hash()}")
        return "\n".join(lines) + "\n"

    def set_stats(self, set_id):
        for s in self.per_set:
            if s.set_id == set_id:
                return s
        raise KeyError(set_id)

    def mean_wait_by_class(self, klass):
        rows = [(s.mean_wait, s.stat_count) for s in self.per_set
                if s.klass == klass.value and s.stat_count > 0]
        total = sum(c for _, c in rows)
        if total == 0:
            return 0.0
        return sum(w * c for w, c in rows) / total

    def total_served_bits(self, packet_size):
        return 8 * packet_size * sum(s.served for s in self.per_set)


def build_telemetry_trace(config, seed, duration, rate_scale=1.0,
                          with_marks=False):
    """Pre-generated per-rack arrival times (optionally with iid uniform
    marks for load thinning) and pre-drawn unit-speed service times.

    Traces built once at the highest load and thinned by mark let
    experiments share one random world across load points.
    """
    trace = {}
    for rack in range(config.cluster.n_data_racks):
        lam = config.rack_lambda(rack) * rate_scale
        times = poisson_stream(lam, duration, rng=stream_rng(seed, rack, 0))
        svc_rng = stream_rng(seed, rack, 1)
        if config.service.distribution is ServiceDistribution.EXPONENTIAL:
            svc = svc_rng.exponential(config.service.mean_service,
                                      size=len(times))
        else:
            svc = np.full(len(times), config.service.mean_service)
        marks = svc_rng.random(len(times)) if with_marks else None
        trace[rack] = (times, svc, marks)
    return trace


def thin_trace(trace, keep_fraction):
    """Keep each packet iff its mark falls below keep_fraction; thinned
    traces are nested across fractions (coupled load axis)."""
    out = {}
    for rack, (times, svc, marks) in trace.items():
        if marks is None:
            raise ValueError("trace was built without marks")
        sel = marks < keep_fraction
        out[rack] = (times[sel], svc[sel], None)
    return out


class _Rack:
    __slots__ = ("rack_id", "set_id", "klass", "primary", "backup", "busy",
                 "token", "xfer_token", "on_vacation", "arrivals", "served",
                 "drop_deadline", "drop_overflow")

    def __init__(self, rack_id, set_id, klass):
        self.rack_id = rack_id
        self.set_id = set_id
        self.klass = klass
        self.primary = deque()
        self.backup = deque()
        self.busy = False
        self.token = 0
        self.xfer_token = 0
        self.on_vacation = False
        self.arrivals = 0
        self.served = 0
        self.drop_deadline = 0
        self.drop_overflow = 0


def run_simulation(config, mode, seed, duration, speed_factor=1.0,
                   trace=None, collect_cwnd=False):
    """Run one deterministic replication and return its SimReport.

    speed_factor scales the link speed (0.5 = half-speed links: every
    service takes twice as long). An injected trace replaces the
    internally generated telemetry arrivals.
    """
    if isinstance(mode, str):
        mode = Mode(mode)
    cluster, sched, traffic = config.cluster, config.schedule, config.traffic
    service = config.service
    d = sched.slot_length
    cycle = sched.slots
    n_slots = len(cycle)
    stretch = 1.0 / speed_factor
    deadline = traffic.qos_deadline
    warmup = WARMUP_FRACTION * duration
    rotation = mode is not Mode.BENCHMARK
    f4tele = mode is Mode.F4TELE
    gated = sched.gated_slots
    udp_mode = traffic.source_kind is SourceKind.UDP_CONSTANT_RATE
    telemetry = traffic.source_kind is SourceKind.POISSON_PACKET

    set_of_rack = {}
    for s in config.partition.sets:
        for r in s.rack_ids:
            set_of_rack[r] = s
    racks = []
    for rid in range(cluster.n_data_racks):
        rs = set_of_rack[rid]
        rack = _Rack(rid, rs.set_id, rs.klass)
        rack.on_vacation = rotation and rs.set_id != cycle[0]
        racks.append(rack)

    heap = []
    seq = 0

    def push(time, kind, a=0, b=0, c=0.0):
        nonlocal seq
        seq += 1
        heapq.heappush(heap, (time, kind, seq, a, b, c))

    flows = []
    if telemetry:
        if trace is None:
            trace = build_telemetry_trace(config, seed, duration)
        for rack in racks:
            times = trace[rack.rack_id][0]
            if len(times):
                push(float(times[0]), _ARRIVAL, rack.rack_id, 0)
    else:
        flows = generate_flows(range(cluster.n_data_racks),
                               config.rack_lambda, traffic.flow_size_law,
                               duration, seed, traffic.source_kind,
                               traffic.aimd.mss)
        for fl in flows:
            push(fl.start_time, _FLOW, fl.flow_id)

    sources = {}
    flow_delivered = {}
    flow_last_delivery = {}
    flow_dropped = {}
    in_service = {}             # rack_id -> (pkt, depart_time)
    measured = set() if gated else None

    waits = {s.set_id: [] for s in config.partition.sets}
    transparent = {s.set_id: 0.0 for s in config.partition.sets}
    mirror_transitions = 0

    active_set = cycle[0] if rotation else None
    slot_open_at = cluster.switchover_delay if rotation else 0.0
    last_slot_start = 0.0
    if rotation:
        push(d, _SLOT, 1)

    def servable(rack, now):
        if not rotation:
            return True
        return rack.set_id == active_set and now >= slot_open_at

    size_default = traffic.packet_size
    wire = cluster.fso_rate * speed_factor

    def mark_dropped(pkt):
        if pkt[3] is not None:
            flow_dropped.setdefault(pkt[3], set()).add(pkt[4])

    def start_xfer(rack, now):
        rack.xfer_token += 1
        head = rack.backup[0]
        delay = head[1] * 8.0 / cluster.backup_drain_rate
        push(now + delay, _XFER, rack.rack_id, rack.xfer_token)

    def enqueue(rack, now, pkt):
        rack.arrivals += 1
        if rotation and rack.on_vacation:
            loop_ok = f4tele and not (traffic.loopback_filter_udp and udp_mode
                                      and pkt[3] is not None)
            if loop_ok:
                if len(rack.backup) >= cluster.backup_buffer:
                    rack.drop_overflow += 1
                    mark_dropped(pkt)
                elif cluster.backup_drain_rate > 0 and not rack.backup:
                    rack.backup.append(pkt)
                    start_xfer(rack, now)
                else:
                    rack.backup.append(pkt)
                return
        if len(rack.primary) >= cluster.primary_buffer:
            rack.drop_overflow += 1
            mark_dropped(pkt)
            return
        rack.primary.append(pkt)
        if not rack.busy and servable(rack, now):
            try_start(rack, now)

    def pop_next(rack):
        if f4tele and rack.backup:
            if not rack.primary or rack.backup[0][0] <= rack.primary[0][0]:
                return rack.backup.popleft()
        if rack.primary:
            return rack.primary.popleft()
        return None

    def try_start(rack, now):
        while not rack.busy:
            pkt = pop_next(rack)
            if pkt is None:
                return
            resumed = gated and (rack.rack_id, pkt[3], pkt[4]) in measured
            if not resumed:
                wait = now - pkt[0]
                if wait > deadline:
                    rack.drop_deadline += 1
                    mark_dropped(pkt)
                    continue
                if pkt[0] >= warmup:
                    waits[rack.set_id].append(wait)
                if gated:
                    measured.add((rack.rack_id, pkt[3], pkt[4]))
            svc = pkt[2]
            if svc is None:
                svc = pkt[1] * 8.0 / wire  # flow packet: wire transmission
            else:
                svc = svc * stretch
            rack.busy = True
            rack.token += 1
            depart_at = now + svc
            in_service[rack.rack_id] = (pkt, depart_at)
            push(depart_at, _DEPART, rack.rack_id, rack.token)
            return

    def pump_tcp(src, fid, now):
        while src.window_allows():
            pkt_id, size = src.next_packet(now)
            enqueue(racks[src.flow.source_rack], now,
                    (now, size, None, fid, pkt_id))
            push(now + src.rto, _TIMEOUT, fid, pkt_id)

    def close_transparent(upto):
        if rotation and active_set is not None:
            start = last_slot_start + cluster.switchover_delay
            transparent[active_set] += max(0.0, min(upto, duration) - start)

    while heap:
        time, kind, _, a, b, c = heapq.heappop(heap)
        if time >= duration:
            break

        if kind == _DEPART:
            rack = racks[a]
            if b != rack.token or not rack.busy:
                continue
            rack.busy = False
            pkt, _dep = in_service.pop(rack.rack_id)
            rack.served += 1
            if gated:
                measured.discard((rack.rack_id, pkt[3], pkt[4]))
            if pkt[3] is not None:
                fid = pkt[3]
                flow_delivered[fid] = flow_delivered.get(fid, 0) + pkt[1]
                flow_last_delivery[fid] = time
                if fid in sources:
                    push(time + traffic.aimd.rtt / 2.0, _ACK, fid, pkt[4])
            try_start(rack, time)

        elif kind == _XFER:
            rack = racks[a]
            if b != rack.xfer_token or not rack.on_vacation or not rack.backup:
                continue
            if len(rack.primary) < cluster.primary_buffer:
                pkt = rack.backup.popleft()
                # insert in arrival order: only packets drained earlier (or
                # leftovers from before the vacation) may be older, so the
                # slot is found by a short scan from the head region
                pos = 0
                for q in rack.primary:
                    if q[0] > pkt[0]:
                        break
                    pos += 1
                rack.primary.insert(pos, pkt)
                if rack.backup:
                    start_xfer(rack, time)
            # primary full: the drain stalls until the next service period

        elif kind == _SLOT:
            close_transparent(time)
            prev_set = active_set
            active_set = cycle[a % n_slots]
            last_slot_start = time
            slot_open_at = time + cluster.switchover_delay
            if prev_set != active_set:
                mirror_transitions += 2  # one mirror off, one on
            push(time + d, _SLOT, a + 1)
            for s in config.partition.sets:
                going_on = s.set_id == active_set
                for rid in s.rack_ids:
                    rack = racks[rid]
                    was_vacation = rack.on_vacation
                    rack.on_vacation = not going_on
                    if going_on:
                        rack.xfer_token += 1  # cancel any pending drain
                        if slot_open_at <= time:
                            if not rack.busy:
                                try_start(rack, time)
                        else:
                            push(slot_open_at, _KICK, rid)
                    elif not was_vacation:
                        if gated and rack.busy:
                            # preempt: park the remainder at the queue head
                            pkt, dep = in_service.pop(rack.rack_id)
                            rack.token += 1
                            rack.busy = False
                            remainder = max(dep - time, 0.0) / stretch
                            rack.primary.appendleft(
                                (pkt[0], pkt[1], remainder, pkt[3], pkt[4]))
                        if (f4tele and rack.backup
                                and cluster.backup_drain_rate > 0):
                            start_xfer(rack, time)

        elif kind == _ARRIVAL:
            if telemetry:
                rack = racks[a]
                times, svc, _ = trace[rack.rack_id]
                pkt = (float(times[b]), size_default, float(svc[b]), None, b)
                if b + 1 < len(times):
                    push(float(times[b + 1]), _ARRIVAL, a, b + 1)
                enqueue(rack, time, pkt)
            else:
                fl = flows[a]
                enqueue(racks[fl.source_rack], time,
                        (time, int(c), None, a, b))

        elif kind == _ACK:
            src = sources.get(a)
            if src is not None:
                src.on_ack(b, time)
                pump_tcp(src, a, time)

        elif kind == _TIMEOUT:
            src = sources.get(a)
            if src is None or b not in src.outstanding:
                continue
            dropped = b in flow_dropped.get(a, ())
            src.on_timeout(b, time, dropped)
            if dropped:
                flow_dropped[a].discard(b)
                pump_tcp(src, a, time)
            else:
                push(time + src.rto, _TIMEOUT, a, b)

        elif kind == _FLOW:
            fl = flows[a]
            if udp_mode:
                for i, (dt, size) in enumerate(
                        udp_emissions(fl.size, traffic.udp_rate,
                                      traffic.aimd.mss)):
                    push(fl.start_time + dt, _ARRIVAL, a, i, float(size))
            else:
                src = TcpAimdSource(flow=fl, params=traffic.aimd)
                sources[a] = src
                pump_tcp(src, a, time)

        else:  # _KICK: switchover finished, service may begin
            rack = racks[a]
            if not rack.busy and servable(rack, time):
                try_start(rack, time)

    close_transparent(duration)
    if not rotation:
        for sid in transparent:
            transparent[sid] = duration

    total_transparent = sum(transparent.values())
    per_set = []
    for s in config.partition.sets:
        arr = served = ddl = dof = left = 0
        for rid in s.rack_ids:
            rack = racks[rid]
            arr += rack.arrivals
            served += rack.served
            ddl += rack.drop_deadline
            dof += rack.drop_overflow
            left += (len(rack.primary) + len(rack.backup)
                     + (1 if rack.busy else 0))
        w = waits[s.set_id]
        share = (transparent[s.set_id] / total_transparent
                 if total_transparent > 0 else 0.0)
        per_set.append(SetStats(
            set_id=s.set_id, klass=s.klass.value, arrivals=arr, served=served,
            drops_deadline=ddl, drops_overflow=dof, queued_end=left,
            mean_wait=float(np.mean(w)) if w else 0.0,
            p99_wait=float(np.percentile(w, 99)) if w else 0.0,
            service_time_fraction=share, stat_count=len(w)))
        assert arr == served + ddl + dof + left, \
            f"conservation broken for set {s.set_id}"

    per_flow = []
    cwnd_vals, cwnd_wts = [], []
    for fl in flows:
        delivered = flow_delivered.get(fl.flow_id, 0)
        src = sources.get(fl.flow_id)
        if src is not None and src.completed_at is not None:
            completion = src.completed_at
        elif delivered >= fl.size:
            completion = flow_last_delivery[fl.flow_id]
        else:
            completion = math.nan
        elapsed = (completion if not math.isnan(completion)
                   else duration) - fl.start_time
        thr = delivered * 8.0 / elapsed if elapsed > 0 else 0.0
        per_flow.append(FlowStats(
            flow_id=fl.flow_id, rack=fl.source_rack,
            transport=fl.transport.value, size_bytes=fl.size,
            delivered_bytes=delivered, start_time=fl.start_time,
            completion_time=completion, throughput_bps=thr))
        if collect_cwnd and src is not None:
            v, wt = src.cwnd_trace(duration)
            cwnd_vals.extend(v)
            cwnd_wts.extend(wt)

    return SimReport(mode=mode.value, seed=seed, sim_duration=duration,
                     warmup=warmup, per_set=tuple(per_set),
                     per_flow=tuple(per_flow),
                     mirror_transitions=mirror_transitions,
                     cwnd_values=tuple(cwnd_vals),
                     cwnd_weights=tuple(cwnd_wts))
