"""Experiment orchestration: analytic rows for one configuration and the
figure-family sweeps (waiting time vs load, set count, slot length and
link speed).

Every sweep point is an independent deterministic run; points are
dispatched to a bounded process pool and results keep plan order.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from . import analysis
from .configfile import ConfigFileError, _Reader
from .engine import run_simulation
from .model import (ClusterSpec, FlowSizeKind, FlowSizeLaw, Mode, RackClass,
                    ServiceDistribution, ServiceModel, TrafficProfile,
                    validate_config)
from .scheduler import (PolicyKind, SchedulePolicy, build_schedule,
                        partition_racks, slots_between_hot_visits,
                        stability_check)

ANALYZE_COLUMNS = ("load,k_low,k_hot,d_seconds,mean_service,w_low_seconds,"
                   "w_hot_seconds,pr_hot,pr_low,r_mean,stable")
SWEEP_COLUMNS = "load,k,d,mu_multiplier,w_mean"


@dataclass(frozen=True)
class AnalyzeRow:
    load: float
    k_low: int
    k_hot: int
    d_seconds: float
    mean_service: float
    w_low_seconds: float
    w_hot_seconds: float
    pr_hot: float
    pr_low: float
    r_mean: float
    stable: bool

    def csv(self):
        def num(x):
            return f"{x:.12g}" if not math.isnan(x) else "nan"
        return (f"{num(self.load)},{self.k_low},{self.k_hot},"
                f"{num(self.d_seconds)},{num(self.mean_service)},"
                f"{num(self.w_low_seconds)},{num(self.w_hot_seconds)},"
                f"{num(self.pr_hot)},{num(self.pr_low)},{num(self.r_mean)},"
                f"{str(self.stable).lower()}")


def _max_effective_load(config):
    rep = stability_check(config.schedule, config.traffic, config.service,
                          config.partition)
    return max(r.rho_eff for r in rep.per_set)


def analyze_point(config, load=None):
    """Analytic waiting-time row at a target effective load.

    `load` rescales both class rates proportionally (preserving beta) so
    the most loaded class sits at the requested effective utilisation;
    None analyses the configuration as given.
    """
    base = _max_effective_load(config)
    if load is None or base == 0:
        scale, load_out = 1.0, base
    else:
        scale, load_out = load / base, load
    traffic = config.traffic
    lam_low = traffic.lambda_low * scale
    lam_hot = traffic.lambda_hot * scale
    part, sched, service = config.partition, config.schedule, config.service
    d = sched.slot_length
    stable = load_out < 1.0

    w_low = w_hot = math.nan
    if part.k_low > 0 and lam_low * service.mean_service < 1.0:
        try:
            w_low = analysis.expected_wait_low(lam_low, service, sched,
                                               part.k_total).mean_wait
        except analysis.InvalidCountError:
            pass
    if part.k_hot > 0 and lam_hot * service.mean_service < 1.0:
        gap = max(slots_between_hot_visits(sched), 1)
        w_hot = analysis.expected_wait_high(lam_hot, service, d,
                                            gap).mean_wait
    if part.k_low > 0:
        probs = analysis.state_probabilities(part.k_low)
        pr_hot, pr_low = probs.pr_hot, probs.pr_low
    else:
        pr_hot, pr_low = math.nan, math.nan
    r_mean = analysis.residual_moments(lam_low, service).mean_residual
    return AnalyzeRow(load=load_out, k_low=part.k_low, k_hot=part.k_hot,
                      d_seconds=d, mean_service=service.mean_service,
                      w_low_seconds=w_low, w_hot_seconds=w_hot,
                      pr_hot=pr_hot, pr_low=pr_low, r_mean=r_mean,
                      stable=stable)


def analyze_rows(config, loads=None):
    if loads is None:
        return [analyze_point(config)]
    return [analyze_point(config, load) for load in loads]


def rows_to_csv(rows):
    return ANALYZE_COLUMNS + "\n" + "\n".join(r.csv() for r in rows) + "\n"


@dataclass(frozen=True)
class ExperimentPlan:
    """Axes of the figure-family sweeps.

    The k axis counts hotspot sets for the hotspot families and
    non-hotspot sets for the non-hotspot families, with the complement
    class fixed at a single set (one rack per set).
    """

    seeds: tuple = (1,)
    loads: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
    k_values: tuple = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    d_values: tuple = (0.01, 0.1)
    speed_factors: tuple = (1.0, 0.5, 0.1)
    mode: Mode = Mode.F4TELE
    engine: str = "sim"            # 'sim' | 'analytic'
    service_mean: float = 2e-4     # at d = 10 ms; rescaled with d
    sim_cycles: int = 200          # simulated rotations per point
    workers: int = 0               # 0 = serial

    def validate(self):
        for name in ("seeds", "loads", "k_values", "d_values", "speed_factors"):
            if not getattr(self, name):
                raise ValueError(f"plan axis {name} is empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("plan seeds must be distinct")
        if self.engine not in ("sim", "analytic"):
            raise ValueError(f"unknown engine {self.engine!r}")


def load_plan_text(text):
    r = _Reader(text)
    if not r.parser.has_section("plan"):
        raise ConfigFileError("missing [plan] section")

    def floats(key, default):
        raw = r.raw("plan", key, default)
        if not isinstance(raw, str):
            return tuple(raw)
        try:
            return tuple(float(x) for x in raw.replace(" ", "").split(",") if x)
        except ValueError:
            raise ConfigFileError(f"invalid number list for [plan] {key}") from None

    plan = ExperimentPlan(
        seeds=tuple(r.get_int_list("plan", "seeds", (1,))),
        loads=floats("loads", (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)),
        k_values=tuple(r.get_int_list("plan", "k_values", tuple(range(1, 11)))),
        d_values=floats("d_values", (0.01, 0.1)),
        speed_factors=floats("speed_factors", (1.0, 0.5, 0.1)),
        mode=r.get_enum("plan", "mode", Mode, Mode.F4TELE.value),
        engine=r.raw("plan", "engine", "sim"),
        service_mean=r.get_float("plan", "service_mean", 2e-4),
        sim_cycles=r.get_int("plan", "sim_cycles", 200),
        workers=r.get_int("plan", "workers", 0),
    )
    plan.validate()
    return plan


def load_plan(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return load_plan_text(fh.read())
    except OSError as exc:
        raise ConfigFileError(f"cannot read plan {path}: {exc}") from None


def point_config(k_hot, k_low, d, service_mean, load, gated_slots=False,
                 switchover=0.0):
    """One-rack-per-set interleaved configuration whose subject classes
    sit at the requested effective load (at baseline link speed and with
    zero switching overhead; a nonzero switchover shaves capacity)."""
    n = k_hot + k_low
    part = partition_racks(n, 1, list(range(k_low, n)))
    sched = build_schedule(part, d, SchedulePolicy(PolicyKind.INTERLEAVED_HOTSPOT),
                           gated_slots=gated_slots)
    share_low = d / sched.tau
    share_hot = len(sched.occurrences(part.hot_set_ids[0])) * d / sched.tau
    lam_low = load * share_low / service_mean
    lam_hot = load * share_hot / service_mean
    lam_low = max(lam_low, 1e-9)
    lam_hot = max(lam_hot, lam_low)
    traffic = TrafficProfile(
        lambda_low=lam_low, lambda_hot=lam_hot, beta=lam_low / lam_hot,
        flow_size_law=FlowSizeLaw(FlowSizeKind.FIXED_PACKETS, n_packets=1))
    service = ServiceModel(mean_service=service_mean,
                           distribution=ServiceDistribution.EXPONENTIAL)
    cluster = ClusterSpec(n_data_racks=n, n_nms_racks=1, bundle_capacity=1,
                          fso_rate=1e9, primary_buffer=10 ** 9,
                          backup_buffer=10 ** 9, switchover_delay=switchover)
    return validate_config(cluster, part, sched, traffic, service)


def _run_point(args):
    (family, load, k, d, mult, engine, service_mean, seeds, mode,
     sim_cycles) = args
    hot_subject = family.startswith(("wh", "speed"))
    k_hot = k if hot_subject else 1
    k_low = 1 if hot_subject else k
    config = point_config(k_hot, k_low, d, service_mean, load)
    if engine == "analytic":
        service = config.service.scaled(1.0 / mult)
        try:
            if hot_subject:
                gap = max(slots_between_hot_visits(config.schedule), 1)
                w = analysis.expected_wait_high(config.traffic.lambda_hot,
                                                service, d, gap).mean_wait
            else:
                w = analysis.expected_wait_low(
                    config.traffic.lambda_low, service, config.schedule,
                    config.partition.k_total).mean_wait
        except analysis.UnstableError:
            w = math.inf
        return (family, load, k, d, mult, w)
    duration = sim_cycles * config.schedule.tau
    klass = RackClass.HOTSPOT if hot_subject else RackClass.NON_HOTSPOT
    vals = []
    for seed in seeds:
        rep = run_simulation(config, mode, seed, duration, speed_factor=mult)
        vals.append(rep.mean_wait_by_class(klass))
    return (family, load, k, d, mult, sum(vals) / len(vals))


def plan_points(plan):
    """Every sweep point in fixed plan order: the four waiting-time
    families over (load x k x d), then the speed-degradation family."""

    def mean_for(d):
        # service_mean is quoted at d = 10 ms; scale with the slot length
        # so a point simulates a comparable number of packets per slot
        return plan.service_mean * d / 0.01

    pts = []
    for d in plan.d_values:
        ms = round(d * 1000)
        for prefix in ("wh", "wl"):
            fam = f"{prefix}{ms}"
            for k in plan.k_values:
                for load in plan.loads:
                    pts.append((fam, load, k, d, 1.0, plan.engine,
                                mean_for(d), plan.seeds, plan.mode.value,
                                plan.sim_cycles))
    d0 = plan.d_values[0]
    for mult in plan.speed_factors:
        for k in plan.k_values:
            for load in plan.loads:
                pts.append(("speed_degradation", load, k, d0, mult,
                            plan.engine, mean_for(d0), plan.seeds,
                            plan.mode.value, plan.sim_cycles))
    return pts


def run_sweep(plan):
    """Execute the plan; returns {family: csv_text} in plan order."""
    plan.validate()
    pts = plan_points(plan)
    workers = plan.workers or min(4, os.cpu_count() or 1)
    if workers > 1 and plan.engine == "sim":
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, pts, chunksize=4))
    else:
        results = [_run_point(p) for p in pts]
    families = {}
    for family, load, k, d, mult, w in results:
        rows = families.setdefault(family, [SWEEP_COLUMNS])
        rows.append(f"{load:.12g},{k},{d:.12g},{mult:.12g},{w:.12g}")
    return {fam: "\n".join(rows) + "\n" for fam, rows in families.items()}
