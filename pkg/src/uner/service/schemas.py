"""Pydantic request/response models for the review service API."""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class TaskOut(BaseModel):
    task_id: str
    doc_id: str
    span_id: str
    text: str
    char_start: int
    char_end: int
    proposed_label: str
    candidate_labels: list[str] = Field(default_factory=list)
    status: Literal["open", "done"] = "open"


class VerdictIn(BaseModel):
    task_id: str
    annotator_id: str
    action: Literal["accept", "reject", "relabel"]
    label: Optional[str] = None


class VerdictOut(BaseModel):
    task_id: str
    annotator_id: str
    action: str
    label: Optional[str] = None
    ts: str


class ProgressOut(BaseModel):
    tasks: int
    done: int
    open: int
    verdicts: int
    per_annotator: dict[str, int] = Field(default_factory=dict)


class ResolveOut(BaseModel):
    path: str
    exists: bool
    level: Optional[int] = None
    deepest_valid_prefix: Optional[str] = None


class LevelCountsOut(BaseModel):
    counts: list[int]


class ErrorOut(BaseModel):
    detail: str
