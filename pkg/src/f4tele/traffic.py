"""Arrival processes and flow workloads: Poisson streams, flow sizing,
open-loop constant-rate sources and a window-based (AIMD) source."""

from collections import OrderedDict, deque
from dataclasses import dataclass, field

import numpy as np

from .model import FlowSizeKind, SourceKind


def stream_rng(seed, *channel):
    """Deterministic per-stream generator derived from (seed, channel)."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFF, *map(int, channel)])


def poisson_stream(rate, duration, seed=None, rng=None):
    """Arrival times of a Poisson process on [0, duration), sorted.

    Inter-arrival times are iid exponential with mean 1/rate; rate 0
    yields an empty stream. Reproducible given the seed.
    """
    if rate is not None and rate < 0:
        raise ValueError("rate must be >= 0")
    if rate == 0 or duration <= 0:
        return np.empty(0)
    gen = rng if rng is not None else stream_rng(seed if seed is not None else 0)
    times = []
    t = 0.0
    # draw in chunks; geometric top-up until the horizon is covered
    chunk = max(int(rate * duration * 1.1) + 16, 16)
    while True:
        gaps = gen.exponential(1.0 / rate, size=chunk)
        arr = t + np.cumsum(gaps)
        times.append(arr)
        t = arr[-1]
        if t >= duration:
            break
    all_times = np.concatenate(times)
    return all_times[all_times < duration]


def sample_flow_size(law, rng, mss=1500):
    """One flow size in bytes under the configured law."""
    if law.kind is FlowSizeKind.UNIFORM_BYTES:
        return int(rng.integers(law.min_bytes, law.max_bytes + 1))
    return law.n_packets * mss


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    source_rack: int
    start_time: float
    size: int                 # bytes
    transport: SourceKind


def generate_flows(rack_ids, rate_of, law, duration, seed, transport, mss=1500):
    """Poisson flow arrivals per rack with sampled sizes, in a stable
    global order (rack ascending, then start time)."""
    flows = []
    for rack in rack_ids:
        starts = poisson_stream(rate_of(rack), duration,
                                rng=stream_rng(seed, rack, 2))
        size_rng = stream_rng(seed, rack, 3)
        for t in starts:
            flows.append(FlowSpec(flow_id=len(flows), source_rack=rack,
                                  start_time=float(t),
                                  size=sample_flow_size(law, size_rng, mss),
                                  transport=transport))
    return flows


def udp_emissions(size, rate, mss=1500):
    """Constant-rate packetisation of `size` bytes at `rate` bits/second.

    Packet k leaves when the bytes before it have been clocked out, so
    the emission schedule spans exactly size*8/rate seconds and never
    reacts to network feedback.
    """
    if rate <= 0:
        raise ValueError("udp rate must be > 0")
    out = []
    sent = 0
    while sent < size:
        chunk = min(mss, size - sent)
        out.append((sent * 8.0 / rate, chunk))
        sent += chunk
    return out


@dataclass
class TcpAimdSource:
    """Window-limited sender: slow start below ssthresh, additive
    increase above, multiplicative decrease on loss.

    The surrounding simulation drives it through on_ack / on_timeout and
    pulls packets with next_packet while window_allows() holds. At most
    one multiplicative decrease is applied per round-trip.
    """

    flow: FlowSpec
    params: object
    cwnd: float = 0.0
    ssthresh: float = 0.0
    in_flight: int = 0
    fresh_remaining: int = 0
    next_pkt_id: int = 0
    delivered: int = 0
    rto_backoff: int = 1
    last_cut_at: float = -1.0
    outstanding: OrderedDict = field(default_factory=OrderedDict)
    retransmit: deque = field(default_factory=deque)
    cwnd_steps: list = field(default_factory=list)   # (time, cwnd)
    completed_at: float = None

    def __post_init__(self):
        self.cwnd = float(self.params.initial_window)
        self.ssthresh = float(self.params.ssthresh)
        self.fresh_remaining = self.flow.size
        self.cwnd_steps.append((self.flow.start_time, self.cwnd))

    @property
    def rto(self):
        return 2.0 * self.params.rtt * self.rto_backoff

    def window_allows(self):
        has_data = self.fresh_remaining > 0 or bool(self.retransmit)
        return has_data and self.in_flight < int(self.cwnd)

    def next_packet(self, now):
        """Emit one packet (id, bytes); caller checked window_allows()."""
        if self.retransmit:
            size = self.retransmit.popleft()
        else:
            size = min(self.params.mss, self.fresh_remaining)
            self.fresh_remaining -= size
        pkt_id = self.next_pkt_id
        self.next_pkt_id += 1
        self.outstanding[pkt_id] = (now, size)
        self.in_flight += 1
        return pkt_id, size

    def _record(self, now):
        self.cwnd_steps.append((now, self.cwnd))

    def on_ack(self, pkt_id, now):
        entry = self.outstanding.pop(pkt_id, None)
        if entry is None:
            return
        self.in_flight -= 1
        self.delivered += entry[1]
        self.rto_backoff = 1
        if self.cwnd < self.ssthresh:
            self.cwnd += 1.0
        else:
            self.cwnd += 1.0 / self.cwnd
        self._record(now)
        if self.delivered >= self.flow.size and self.completed_at is None:
            self.completed_at = now

    def on_timeout(self, pkt_id, now, was_dropped):
        """Returns True when the packet must be re-emitted."""
        if pkt_id not in self.outstanding:
            return False
        if now - self.last_cut_at >= self.params.rtt:
            self.cwnd = max(1.0, self.cwnd * self.params.loss_response)
            self.ssthresh = max(2.0, self.cwnd)
            self.last_cut_at = now
            self._record(now)
        self.rto_backoff = min(self.rto_backoff * 2, 64)
        if was_dropped:
            _, size = self.outstanding.pop(pkt_id)
            self.in_flight -= 1
            self.retransmit.append(size)
            return True
        return False

    def cwnd_trace(self, end_time):
        """Time-weighted (value, weight) samples of the window level."""
        vals, weights = [], []
        steps = self.cwnd_steps
        horizon = self.completed_at if self.completed_at is not None else end_time
        for (t0, w), (t1, _) in zip(steps, steps[1:] + [(horizon, 0.0)]):
            dt = max(0.0, min(t1, horizon) - t0)
            if dt > 0:
                vals.append(w)
                weights.append(dt)
        return vals, weights
