"""Pydantic request/response models for the experiment service."""
from __future__ import annotations

from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ScheduleModel(BaseModel):
    beta: float
    lam: float = Field(alias="lambda")
    model_config = ConfigDict(populate_by_name=True)


class BoundsRequest(BaseModel):
    """Parameters of the closed-form budgets. When c and l are omitted the
    distribution is taken to be uniform, c = l = 1/(S*A)."""

    epsilon: float = Field(gt=0)
    gamma: float = Field(gt=0, lt=1)
    num_states: int = Field(ge=1)
    num_actions: int = Field(ge=1)
    c: Optional[float] = Field(default=None, gt=0)
    l: Optional[float] = Field(default=None, gt=0)
    model_config = ConfigDict(extra="forbid")


class BoundsResponse(BaseModel):
    epsilon: float
    gamma: float
    num_states: int
    num_actions: int
    c: float
    l: float
    inner_steps: int
    outer_iters: int
    samples_for_q_accuracy: float
    samples_for_policy_accuracy: Optional[float]  # stated only for epsilon <= 1
    schedule: ScheduleModel


class ValidateResponse(BaseModel):
    valid: bool
    error: Optional[str] = None


class RunRequest(BaseModel):
    """An experiment config document plus execution overrides."""

    config: dict
    seeds: Optional[int] = Field(default=None, ge=1)
    threads: int = Field(default=1, ge=1)
    model_config = ConfigDict(extra="forbid")


class FilePayload(BaseModel):
    name: str
    content: str


class SummaryModel(BaseModel):
    config_hash: str
    seed_count: int
    samples_used: int
    q_inf_error_mean: float
    q_inf_error_se: float
    v_gap_mean: float
    v_gap_se: float
    wall_time_s: float


class RunResponse(BaseModel):
    summary: SummaryModel
    files: list[FilePayload]


class CompareRequest(BaseModel):
    pq: dict
    standard: dict
    matched_budget: int = Field(ge=1)
    threads: int = Field(default=1, ge=1)
    model_config = ConfigDict(extra="forbid")


class CompareResponse(BaseModel):
    matched_budget: int
    pq_summary: SummaryModel
    std_summary: SummaryModel
    files: list[FilePayload]
    rows: list[dict[str, Any]]
