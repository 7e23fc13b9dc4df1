"""Pydantic request and response models for the HTTP service.

Experiment endpoints respond with the report JSON produced by the
experiment runners (schema version recorded in the payload); the models
here cover the request side plus the small fixed-shape responses.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


def parse_k_sweep(text: str) -> list[int]:
    """Parse ``start:stop:step`` (stop inclusive) or a comma list of ints."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"k sweep must be start:stop:step, got {text!r}")
        start, stop, step = (int(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError(f"invalid k sweep range {text!r}")
        return list(range(start, stop + 1, step))
    values = [int(p) for p in text.split(",") if p.strip()]
    if not values:
        raise ValueError(f"no cluster counts in {text!r}")
    return values


class EmbeddingSource(BaseModel):
    """Where and how to load an embedding table."""

    embeddings: str
    format: Literal["text", "binary"] = "text"
    lowercase: bool = False


class InspectRequest(BaseModel):
    path: str
    format: Literal["text", "binary"] = "text"
    lowercase: bool = False


class InspectResponse(BaseModel):
    path: str
    dim: int
    count: int
    normalized: bool
    duplicates_dropped: int
    norm_min: float
    norm_mean: float
    norm_max: float


class BuildSvdRequest(BaseModel):
    corpus: str
    out: str
    dim: int = 300
    window: int = 2
    cds: float = 0.75
    shift: int = 1
    eig_weight: float = 0.5
    min_count: int = 5


class BuildSvdResponse(BaseModel):
    out: str
    dim: int
    vocab_size: int


class ClusterRequest(EmbeddingSource):
    triples: str
    k_sweep: str = "10:80:10"
    dev_fraction: float = Field(default=0.15, gt=0.0, lt=1.0)
    subsample_cap: int = 4000
    normalize: bool = True
    seed: int = 0

    @field_validator("k_sweep")
    @classmethod
    def _check_k_sweep(cls, value: str) -> str:
        parse_k_sweep(value)
        return value


class ClosedWorldRequest(EmbeddingSource):
    triples: str
    folds: int = 10
    C: float = 1.0
    normalize: bool = True
    seed: int = 0
    save_model: Optional[str] = None


class BaselineRequest(EmbeddingSource):
    triples: str
    clusters: int = 50
    folds: int = 10
    measure: Literal["rbf", "cosine"] = "rbf"
    gamma: float = 1.0
    subsample_cap: int = 4000
    normalize: bool = True
    seed: int = 0


class OpenWorldRequest(EmbeddingSource):
    triples: str
    freq: str
    with_negatives: bool = False
    annotations: Optional[str] = None
    C: float = 1.0
    gamma: Optional[float] = None
    lexicon_size: int = 500
    test_fraction: float = Field(default=1.0 / 3.0, gt=0.0, lt=1.0)
    normalize: bool = True
    seed: int = 0


class LexicalSplitRequest(EmbeddingSource):
    triples: str
    freq: str
    multipliers: list[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4, 5])
    C: float = 1.0
    gamma: Optional[float] = None
    lexicon_size: int = 500
    test_fraction: float = Field(default=1.0 / 3.0, gt=0.0, lt=1.0)
    normalize: bool = True
    seed: int = 0


class PredictRequest(EmbeddingSource):
    model_config = ConfigDict(protected_namespaces=())

    model_path: str
    pairs: str
    normalize: bool = True


class PairPrediction(BaseModel):
    word1: str
    word2: str
    label: str


class PredictResponse(BaseModel):
    model_config = ConfigDict(protected_namespaces=())

    model_path: str
    predictions: list[PairPrediction]


class HealthResponse(BaseModel):
    status: str
    version: str
