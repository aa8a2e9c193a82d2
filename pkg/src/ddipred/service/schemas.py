"""Pydantic request/response models for the HTTP service."""
from __future__ import annotations

from pydantic import BaseModel


class PairRequest(BaseModel):
    head: str
    tail: str


class PredictRequest(BaseModel):
    pairs: list[PairRequest]


class PairPrediction(BaseModel):
    head: str
    tail: str
    relation: str | None = None  # multiclass top relation
    scores: dict[str, float]


class PredictResponse(BaseModel):
    task: str
    predictions: list[PairPrediction]


class ExplainRequest(BaseModel):
    head: str
    tail: str
    max_paths: int = 20


class PathHop(BaseModel):
    source: str
    relation: str
    target: str
    strength: float
    is_new: bool


class ExplainingPathModel(BaseModel):
    avg_strength: float
    hops: list[PathHop]


class ExplainResponse(BaseModel):
    head: str
    tail: str
    paths: list[ExplainingPathModel]
    dot: str


class HealthResponse(BaseModel):
    status: str
    task: str
    num_nodes: int
    num_relations: int
