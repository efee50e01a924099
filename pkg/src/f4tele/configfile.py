"""Structured text configuration: flat key=value INI sections
[cluster], [partition], [schedule], [traffic].

Parse errors name the offending section, key and line.
"""

import configparser
import math

from .model import (AimdParams, ClusterSpec, FlowSizeKind, FlowSizeLaw,
                    ServiceDistribution, ServiceModel, SourceKind,
                    TrafficProfile, validate_config)
from .scheduler import PolicyKind, SchedulePolicy, build_schedule, partition_racks

EXAMPLE = """\
[cluster]
n_data_racks = 24
n_nms_racks = 4
bundle_capacity = 4
fso_rate = 1e9
primary_buffer = 1000
backup_buffer = 10000
backup_drain_rate = 1e7
switchover_delay = 0.0

[partition]
hotspot_racks = 20,21,22,23

[schedule]
slot_length = 0.01
policy = interleaved
gated_slots = false

[traffic]
lambda_low = 50
beta = 0.1
service_mean = 0.0002
service_distribution = exponential
flow_size_law = uniform_bytes
flow_size_min = 1000000
flow_size_max = 10000000
source_type = poisson_packet
udp_rate = 1e8
qos_deadline = inf
packet_size = 1500
loopback_filter_udp = true
"""


class ConfigFileError(Exception):
    pass


class _Reader:
    """Typed access to one parsed file, with line-aware error messages."""

    def __init__(self, text):
        self.parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            self.parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigFileError(f"config parse error: {exc}") from None
        self._lines = {}
        section = None
        for no, raw in enumerate(text.splitlines(), start=1):
            stripped = raw.strip()
            if stripped.startswith("[") and stripped.endswith("]"):
                section = stripped[1:-1].strip().lower()
            elif "=" in stripped and section and not stripped.startswith((";", "#")):
                key = stripped.split("=", 1)[0].strip().lower()
                self._lines.setdefault((section, key), no)

    def _where(self, section, key):
        line = self._lines.get((section, key))
        at = f" (line {line})" if line else ""
        return f"[{section}] {key}{at}"

    def has(self, section, key):
        return self.parser.has_option(section, key)

    def raw(self, section, key, default=None):
        if not self.parser.has_option(section, key):
            if default is None:
                raise ConfigFileError(f"missing required key {self._where(section, key)}")
            return default
        return self.parser.get(section, key).strip()

    def _typed(self, cast, kind, section, key, default):
        value = self.raw(section, key, default)
        if isinstance(value, str):
            try:
                return cast(value)
            except ValueError:
                raise ConfigFileError(
                    f"invalid {kind} for {self._where(section, key)}: "
                    f"{value!r}") from None
        return value

    def get_int(self, section, key, default=None):
        return self._typed(lambda v: int(float(v)), "integer", section, key, default)

    def get_float(self, section, key, default=None):
        return self._typed(float, "number", section, key, default)

    def get_bool(self, section, key, default=None):
        def cast(v):
            lv = v.lower()
            if lv in ("true", "yes", "on", "1"):
                return True
            if lv in ("false", "no", "off", "0"):
                return False
            raise ValueError(lv)
        return self._typed(cast, "boolean", section, key, default)

    def get_enum(self, section, key, enum_cls, default):
        value = self.raw(section, key, default)
        if not isinstance(value, str):
            return value
        try:
            return enum_cls(value.lower())
        except ValueError:
            allowed = ", ".join(e.value for e in enum_cls)
            raise ConfigFileError(
                f"invalid value for {self._where(section, key)}: {value!r} "
                f"(expected one of: {allowed})") from None

    def get_int_list(self, section, key, default=()):
        value = self.raw(section, key, "" if default == () else default)
        if not isinstance(value, str):
            return tuple(value)
        value = value.strip()
        if not value:
            return ()
        try:
            return tuple(int(x) for x in value.replace(" ", "").split(",") if x)
        except ValueError:
            raise ConfigFileError(
                f"invalid integer list for {self._where(section, key)}: "
                f"{value!r}") from None


def load_config_text(text):
    """Parse + validate a configuration document into a ValidatedConfig."""
    r = _Reader(text)
    for section in ("cluster", "schedule", "traffic"):
        if not r.parser.has_section(section):
            raise ConfigFileError(f"missing [{section}] section")

    cluster = ClusterSpec(
        n_data_racks=r.get_int("cluster", "n_data_racks"),
        n_nms_racks=r.get_int("cluster", "n_nms_racks", 1),
        bundle_capacity=r.get_int("cluster", "bundle_capacity"),
        fso_rate=r.get_float("cluster", "fso_rate"),
        primary_buffer=r.get_int("cluster", "primary_buffer", 1000),
        backup_buffer=r.get_int("cluster", "backup_buffer", 10000),
        backup_drain_rate=r.get_float("cluster", "backup_drain_rate", 0.0),
        switchover_delay=r.get_float("cluster", "switchover_delay", 0.0),
    )

    hotspot = r.get_int_list("partition", "hotspot_racks") \
        if r.parser.has_section("partition") else ()
    try:
        partition = partition_racks(cluster.n_data_racks,
                                    cluster.bundle_capacity, hotspot)
    except ValueError as exc:
        raise ConfigFileError(f"[partition] hotspot_racks: {exc}") from None

    policy = SchedulePolicy(
        kind=r.get_enum("schedule", "policy", PolicyKind,
                        PolicyKind.INTERLEAVED_HOTSPOT.value),
        custom_slots=r.get_int_list("schedule", "custom_slots"),
    )
    try:
        schedule = build_schedule(partition,
                                  r.get_float("schedule", "slot_length"),
                                  policy,
                                  gated_slots=r.get_bool("schedule",
                                                         "gated_slots", False))
    except ValueError as exc:
        raise ConfigFileError(f"[schedule] policy: {exc}") from None

    lambda_low = r.get_float("traffic", "lambda_low")
    if r.has("traffic", "lambda_hot"):
        lambda_hot = r.get_float("traffic", "lambda_hot")
        beta = (r.get_float("traffic", "beta", lambda_low / lambda_hot)
                if lambda_hot > 0 else 1.0)
    elif r.has("traffic", "beta"):
        beta = r.get_float("traffic", "beta")
        if beta <= 0:
            raise ConfigFileError("[traffic] beta must be > 0")
        lambda_hot = lambda_low / beta
    else:
        lambda_hot, beta = lambda_low, 1.0

    law_kind = r.get_enum("traffic", "flow_size_law", FlowSizeKind,
                          FlowSizeKind.UNIFORM_BYTES.value)
    law = FlowSizeLaw(
        kind=law_kind,
        min_bytes=r.get_int("traffic", "flow_size_min", 1_000_000),
        max_bytes=r.get_int("traffic", "flow_size_max", 10_000_000),
        n_packets=r.get_int("traffic", "flow_packets", 1),
    )
    aimd = AimdParams(
        initial_window=r.get_int("traffic", "tcp_initial_window", 2),
        ssthresh=r.get_int("traffic", "tcp_ssthresh", 64),
        rtt=r.get_float("traffic", "tcp_rtt", 0.0002),
        mss=r.get_int("traffic", "tcp_mss", 1500),
        loss_response=r.get_float("traffic", "tcp_loss_response", 0.5),
    )
    qos = r.raw("traffic", "qos_deadline", "inf")
    try:
        qos = float(qos)
    except ValueError:
        raise ConfigFileError(f"invalid number for [traffic] qos_deadline: "
                              f"{qos!r}") from None
    traffic = TrafficProfile(
        lambda_low=lambda_low, lambda_hot=lambda_hot, beta=beta,
        flow_size_law=law,
        source_kind=r.get_enum("traffic", "source_type", SourceKind,
                               SourceKind.POISSON_PACKET.value),
        qos_deadline=qos if math.isfinite(qos) else math.inf,
        udp_rate=r.get_float("traffic", "udp_rate", 1e8),
        aimd=aimd,
        packet_size=r.get_int("traffic", "packet_size", 1500),
        loopback_filter_udp=r.get_bool("traffic", "loopback_filter_udp", True),
    )

    service = ServiceModel(
        mean_service=r.get_float("traffic", "service_mean"),
        distribution=r.get_enum("traffic", "service_distribution",
                                ServiceDistribution,
                                ServiceDistribution.EXPONENTIAL.value),
        m2=r.get_float("traffic", "service_m2", 0.0),
        m3=r.get_float("traffic", "service_m3", 0.0),
    )
    return validate_config(cluster, partition, schedule, traffic, service)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc}") from None
    return load_config_text(text)
