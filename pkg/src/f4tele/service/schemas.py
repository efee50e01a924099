"""Pydantic request/response models of the service API."""

from typing import Dict, List, Optional

from pydantic import BaseModel, Field


class ConfigCheckRequest(BaseModel):
    config_text: str


class ConfigCheckResponse(BaseModel):
    valid: bool
    violations: List[str] = []
    warnings: List[str] = []


class SimulateRequest(BaseModel):
    config_text: str
    mode: str = "f4tele"
    seed: int = 1
    duration: float = Field(gt=0)
    speed_factor: float = Field(default=1.0, gt=0)


class SetStatsModel(BaseModel):
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
    stat_count: int


class FlowStatsModel(BaseModel):
    flow_id: int
    rack: int
    transport: str
    size_bytes: int
    delivered_bytes: int
    start_time: float
    completion_time: Optional[float] = None
    throughput_bps: float


class SimulateResponse(BaseModel):
    mode: str
    seed: int
    sim_duration: float
    per_set: List[SetStatsModel]
    per_flow: List[FlowStatsModel]
    mirror_transitions: int
    sets_csv: str
    flows_csv: str
    summary: str
    report_hash: str
    warnings: List[str] = []


class AnalyzeRequest(BaseModel):
    config_text: str
    loads: Optional[List[float]] = None


class AnalyzeRowModel(BaseModel):
    load: float
    k_low: int
    k_hot: int
    d_seconds: float
    mean_service: float
    w_low_seconds: Optional[float] = None
    w_hot_seconds: Optional[float] = None
    pr_hot: Optional[float] = None
    pr_low: Optional[float] = None
    r_mean: float
    stable: bool


class AnalyzeResponse(BaseModel):
    rows: List[AnalyzeRowModel]
    csv: str
    any_unstable: bool


class ValidateRequest(BaseModel):
    config_text: str
    mode: str = "f4tele"
    seed: int = 1
    duration: float = Field(gt=0)
    tolerance: float = Field(default=0.05, gt=0)


class SetErrorModel(BaseModel):
    set_id: int
    klass: str
    simulated_wait: float
    predicted_wait: float
    relative_error: float
    within_tolerance: bool


class ValidateResponse(BaseModel):
    per_set: List[SetErrorModel]
    worst_set_id: Optional[int] = None
    worst_relative_error: float
    within_tolerance: bool
    tolerance: float


class SweepRequest(BaseModel):
    plan_text: str


class SweepResponse(BaseModel):
    families: Dict[str, str]      # family name -> CSV text


class ScheduleExportRequest(BaseModel):
    config_text: str


class ScheduleExportResponse(BaseModel):
    csv: str
    tau: float
    tau_hot: float
    tau_max: float
    stable: bool


class ErrorPayload(BaseModel):
    detail: str
    violations: List[str] = []
