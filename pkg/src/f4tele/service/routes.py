"""Service endpoints wrapping the core simulator and analytic models."""

import math

from fastapi import APIRouter, HTTPException

from .. import analysis, sweep
from ..configfile import ConfigFileError, load_config_text
from ..engine import run_simulation
from ..model import ConfigError, Mode, RackClass
from ..scheduler import (schedule_csv, slots_between_hot_visits,
                         stability_check)
from . import schemas

router = APIRouter()


def _load(config_text):
    try:
        return load_config_text(config_text)
    except ConfigFileError as exc:
        raise HTTPException(status_code=400, detail={
            "detail": "config parse error", "violations": [str(exc)]})
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail={
            "detail": "config violations", "violations": exc.violations})


def _mode(name):
    try:
        return Mode(name)
    except ValueError:
        raise HTTPException(status_code=400, detail={
            "detail": f"unknown mode {name!r}",
            "violations": [f"mode must be one of: "
                           f"{', '.join(m.value for m in Mode)}"]})


def _clean(x):
    return None if x is None or (isinstance(x, float) and math.isnan(x)) else x


@router.get("/health")
def health():
    return {"status": "ok"}


@router.post("/config/check", response_model=schemas.ConfigCheckResponse)
def config_check(req: schemas.ConfigCheckRequest):
    try:
        config = load_config_text(req.config_text)
    except ConfigFileError as exc:
        return schemas.ConfigCheckResponse(valid=False, violations=[str(exc)])
    except ConfigError as exc:
        return schemas.ConfigCheckResponse(valid=False,
                                           violations=exc.violations)
    return schemas.ConfigCheckResponse(valid=True,
                                       warnings=list(config.warnings))


@router.post("/simulate", response_model=schemas.SimulateResponse)
def simulate(req: schemas.SimulateRequest):
    config = _load(req.config_text)
    report = run_simulation(config, _mode(req.mode), req.seed, req.duration,
                            speed_factor=req.speed_factor)
    return schemas.SimulateResponse(
        mode=report.mode, seed=report.seed, sim_duration=report.sim_duration,
        per_set=[schemas.SetStatsModel(**vars(s)) for s in report.per_set],
        per_flow=[schemas.FlowStatsModel(
            flow_id=f.flow_id, rack=f.rack, transport=f.transport,
            size_bytes=f.size_bytes, delivered_bytes=f.delivered_bytes,
            start_time=f.start_time, completion_time=_clean(f.completion_time),
            throughput_bps=f.throughput_bps) for f in report.per_flow],
        mirror_transitions=report.mirror_transitions,
        sets_csv=report.sets_csv(), flows_csv=report.flows_csv(),
        summary=report.summary(), report_hash=report.report_hash(),
        warnings=list(config.warnings))


@router.post("/analyze", response_model=schemas.AnalyzeResponse)
def analyze(req: schemas.AnalyzeRequest):
    config = _load(req.config_text)
    rows = sweep.analyze_rows(config, req.loads)
    models = [schemas.AnalyzeRowModel(
        load=r.load, k_low=r.k_low, k_hot=r.k_hot, d_seconds=r.d_seconds,
        mean_service=r.mean_service, w_low_seconds=_clean(r.w_low_seconds),
        w_hot_seconds=_clean(r.w_hot_seconds), pr_hot=_clean(r.pr_hot),
        pr_low=_clean(r.pr_low), r_mean=r.r_mean, stable=r.stable)
        for r in rows]
    return schemas.AnalyzeResponse(rows=models, csv=sweep.rows_to_csv(rows),
                                   any_unstable=any(not r.stable for r in rows))


@router.post("/validate", response_model=schemas.ValidateResponse)
def validate(req: schemas.ValidateRequest):
    config = _load(req.config_text)
    mode = _mode(req.mode)
    report = run_simulation(config, mode, req.seed, req.duration)
    sched, service, traffic = config.schedule, config.service, config.traffic
    per_set = []
    worst = (None, 0.0)
    for s in report.per_set:
        lam = (traffic.lambda_hot if s.klass == RackClass.HOTSPOT.value
               else traffic.lambda_low)
        try:
            if mode is Mode.BENCHMARK:
                predicted = analysis.pollaczek_khinchine_wait(lam, service)
            elif s.klass == RackClass.HOTSPOT.value:
                gap = max(slots_between_hot_visits(sched), 1)
                predicted = analysis.expected_wait_high(
                    lam, service, sched.slot_length, gap).mean_wait
            else:
                predicted = analysis.expected_wait_low(
                    lam, service, sched, config.partition.k_total).mean_wait
        except analysis.UnstableError:
            predicted = math.inf
        if predicted in (0.0, math.inf):
            rel = abs(s.mean_wait - predicted) if predicted == 0.0 else math.inf
            rel = rel if s.mean_wait or predicted else 0.0
        else:
            rel = abs(s.mean_wait - predicted) / predicted
        ok = rel <= req.tolerance
        per_set.append(schemas.SetErrorModel(
            set_id=s.set_id, klass=s.klass, simulated_wait=s.mean_wait,
            predicted_wait=predicted, relative_error=rel,
            within_tolerance=ok))
        if worst[0] is None or rel > worst[1]:
            worst = (s.set_id, rel)
    return schemas.ValidateResponse(
        per_set=per_set, worst_set_id=worst[0], worst_relative_error=worst[1],
        within_tolerance=all(p.within_tolerance for p in per_set),
        tolerance=req.tolerance)


@router.post("/sweep", response_model=schemas.SweepResponse)
def run_sweep_endpoint(req: schemas.SweepRequest):
    try:
        plan = sweep.load_plan_text(req.plan_text)
    except (ConfigFileError, ValueError) as exc:
        raise HTTPException(status_code=400, detail={
            "detail": "plan error", "violations": [str(exc)]})
    return schemas.SweepResponse(families=sweep.run_sweep(plan))


@router.post("/schedule/export", response_model=schemas.ScheduleExportResponse)
def schedule_export(req: schemas.ScheduleExportRequest):
    config = _load(req.config_text)
    sched = config.schedule
    stab = stability_check(sched, config.traffic, config.service,
                           config.partition)
    return schemas.ScheduleExportResponse(
        csv=schedule_csv(sched), tau=sched.tau, tau_hot=sched.tau_hot,
        tau_max=sched.tau_max, stable=stab.stable)
