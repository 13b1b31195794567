"""Pydantic request/response models for the doorstep service."""

from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class WorldGenRequest(BaseModel):
    seed: int
    visibility: Optional[str] = None  # open | recessed | enclosed
    config: dict[str, Any] = Field(default_factory=dict)  # SimConfig overrides


class DoorModel(BaseModel):
    center: list[float]
    width: float
    normal: list[float]
    visibility: str


class LayerModel(BaseModel):
    label: str
    vertices: list[list[float]]


class WorldDocument(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: str = Field(alias="schema")
    bounds: list[float]
    layers: list[LayerModel]
    recipient_index: int
    road_index: int
    house_center: list[float]
    front_dir: list[float]
    doors: list[DoorModel]
    start_xy: list[float]
    gen: dict[str, Any] = Field(default_factory=dict)


class TrialRequest(BaseModel):
    seed: int
    method: str  # proposed | frontier
    target: str = "front_door"
    visibility: Optional[str] = None
    config: dict[str, Any] = Field(default_factory=dict)


class TrialRecord(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: str = Field(alias="schema", default="doorstep-trial/1")
    seed: int
    method: str
    target: str
    visibility: str
    status: str
    elapsed_s: float
    path_length_m: float
    descent_point: Optional[list[float]] = None
    trajectory: list[list[float]] = Field(default_factory=list)


class MethodStats(BaseModel):
    count: int
    delivered: int
    success_rate: float
    mean_elapsed_s: float
    std_elapsed_s: float


class ReportModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: str = Field(alias="schema", default="doorstep-report/1")
    config: Optional[dict[str, Any]] = None
    methods: dict[str, MethodStats]
    speedup_ratio: Optional[float] = None
    rows: list[dict[str, Any]]
    notes: str = ""


class CorpusRequest(BaseModel):
    config: dict[str, Any] = Field(default_factory=dict)


class CorpusResponse(BaseModel):
    report: ReportModel
    trials: list[TrialRecord]


class ReportRequest(BaseModel):
    trials: list[TrialRecord]
    config: dict[str, Any] = Field(default_factory=dict)


class RenderRequest(BaseModel):
    trial: TrialRecord
    world: Optional[WorldDocument] = None  # regenerated from the seed if absent
    config: dict[str, Any] = Field(default_factory=dict)


class RenderResponse(BaseModel):
    svg: str
