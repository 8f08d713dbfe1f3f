"""Pydantic request/response models for the HTTP service."""
from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    name: str
    version: str


class ErrorBody(BaseModel):
    error: str
    detail: str


# --- corpus ------------------------------------------------------------------


class SummaryRequest(BaseModel):
    manifest: str = Field(description="path to a corpus manifest, server-visible")
    lenient: bool = False


class SummaryRow(BaseModel):
    project: str
    version: str
    instances: int
    defective: int
    pct_defective: float


class SummaryResponse(BaseModel):
    rows: list[SummaryRow]


# --- selection ---------------------------------------------------------------


class SelectRequest(BaseModel):
    manifest: str
    bins: int = 10
    lenient: bool = False


class ReleaseSubset(BaseModel):
    project: str
    version: str
    metrics: list[str] = []
    error: Optional[str] = None


class SelectResponse(BaseModel):
    subsets: list[ReleaseSubset]


class TopkRequest(BaseModel):
    manifest: str
    k: Optional[int] = Field(default=None, ge=1, le=20,
                             description="fixed size; omit to pick the coverage peak")
    k_max: int = Field(default=10, ge=1, le=20)
    bins: int = 10
    lenient: bool = False


class CoveragePointModel(BaseModel):
    k: int
    coverage: float
    metrics: list[str]


class TopkResponse(BaseModel):
    tally: dict[str, int]
    n_datasets: int
    chosen_k: int
    subset: list[str]
    curve: list[CoveragePointModel]


# --- minimization ---------------------------------------------------------------


class ScenarioModel(BaseModel):
    kind: str = "wpdp_nearest"
    max_releases: int = Field(default=3, ge=1)
    objective: str = "f_measure"
    name: Optional[str] = None


class MinimizeRequest(BaseModel):
    manifest: str
    scenario: ScenarioModel = ScenarioModel()
    phi: float = Field(default=0.6, gt=0.0, lt=1.0)
    signed: bool = True
    k: Optional[int] = Field(default=None, ge=2, le=20)
    bins: int = 10
    lenient: bool = False


class MatrixModel(BaseModel):
    names: list[str]
    values: list[list[float]]


class RankedCombination(BaseModel):
    metrics: list[str]
    coverage: float


class MinimizeResponse(BaseModel):
    base_subset: list[str]
    matrix: MatrixModel
    strong_pairs: list[list[str]]
    combinations: list[RankedCombination]
    minimum: list[str]
    skipped_targets: list[list[str]]


# --- experiments ------------------------------------------------------------------


class RunRequest(BaseModel):
    config: dict[str, Any] = Field(description="experiment config document")
    out_dir: str = Field(description="output directory, server-visible")
    base_dir: Optional[str] = Field(
        default=None, description="directory relative paths in config resolve against"
    )


class RunResponse(BaseModel):
    out_dir: str
    row_count: int
    artifacts: list[str]
    config_hash: str


class ReportRequest(BaseModel):
    result_dir: str


class ReportResponse(BaseModel):
    report_path: str
    files: list[str]
    markdown: str
