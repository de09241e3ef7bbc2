"""The JSON audit report: schema, assembly and deterministic serialization."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel

from spotlight.core import EmbeddingDataset
from spotlight.errors import UnsupportedMetadataError
from spotlight.optimizer import SpotlightResult
from spotlight.summarize import category_breakdown, relative_token_frequency

CENTER_DIM_LIMIT = 4096
TOKEN_EXCERPT = 12


class DatasetSummary(BaseModel):
    n: int
    d: int
    source_dim: Optional[int] = None
    mean_loss: float
    loss_p50: float
    loss_p90: float
    loss_p99: float
    loss_max: float


class ExampleRecord(BaseModel):
    index: int
    loss: float
    weight: Optional[float] = None
    label: Optional[str] = None
    category: Optional[str] = None
    tokens: Optional[List[str]] = None


class TokenRow(BaseModel):
    token: str
    spotlight_freq: float
    baseline_freq: float
    ratio: float


class CategoryRow(BaseModel):
    category: Optional[str]
    spotlight_freq: float
    baseline_freq: float
    mean_loss: float


class TraceRow(BaseModel):
    step: int
    objective: float
    best_objective: float
    total_weight: float
    lr: float


class SpotlightRecord(BaseModel):
    index: int
    mode: str
    center: Optional[List[float]] = None
    log_precision: Union[float, List[float]]
    size: float
    total_weight: float
    objective: float
    feasible: bool
    degenerate: bool
    steps: int
    top: List[ExampleRecord]
    tokens: Optional[List[TokenRow]] = None
    categories: Optional[List[CategoryRow]] = None
    trace: List[TraceRow]


class AuditReport(BaseModel):
    dataset_summary: DatasetSummary
    high_loss_baseline: List[ExampleRecord]
    spotlights: List[SpotlightRecord]
    config_echo: Dict[str, Any]


def _example(dataset: EmbeddingDataset, i: int, weight=None) -> ExampleRecord:
    rec = (dataset.metadata[i] or {}) if dataset.metadata is not None else {}
    tokens = rec.get("tokens")
    label = rec.get("label")
    category = rec.get("category")
    return ExampleRecord(
        index=int(i),
        loss=float(dataset.losses[i]),
        weight=None if weight is None else float(weight),
        label=None if label is None else str(label),
        category=None if category is None else str(category),
        tokens=None if tokens is None else list(tokens[:TOKEN_EXCERPT]),
    )


def summarize_dataset(dataset: EmbeddingDataset, source_dim: Optional[int] = None) -> DatasetSummary:
    p50, p90, p99 = np.percentile(dataset.losses, [50, 90, 99])
    return DatasetSummary(
        n=dataset.n,
        d=dataset.d,
        source_dim=source_dim,
        mean_loss=float(dataset.losses.mean()),
        loss_p50=float(p50),
        loss_p90=float(p90),
        loss_p99=float(p99),
        loss_max=float(dataset.losses.max()),
    )


def spotlight_record(
    dataset: EmbeddingDataset,
    result: SpotlightResult,
    index: int,
    top_k: int,
    include_center: bool = False,
    top_tokens: int = 10,
) -> SpotlightRecord:
    order = result.weights.weights
    top_idx = np.argsort(-order, kind="stable")[:top_k]
    try:
        tokens = [TokenRow(**e._asdict()) for e in relative_token_frequency(dataset, result.weights, top_tokens).entries]
    except UnsupportedMetadataError:
        tokens = None
    try:
        categories = [CategoryRow(**e._asdict()) for e in category_breakdown(dataset, result.weights)]
    except UnsupportedMetadataError:
        categories = None
    lp = result.params.log_precision
    keep_center = include_center or result.params.d <= CENTER_DIM_LIMIT
    return SpotlightRecord(
        index=index,
        mode=result.params.mode,
        center=result.params.center.tolist() if keep_center else None,
        log_precision=lp if isinstance(lp, float) else lp.tolist(),
        size=result.size,
        total_weight=result.weights.total,
        objective=result.objective,
        feasible=bool(result.feasible),
        degenerate=bool(result.degenerate),
        steps=int(result.steps),
        top=[_example(dataset, i, order[i]) for i in top_idx],
        tokens=tokens,
        categories=categories,
        trace=[TraceRow(**s._asdict()) for s in result.trace],
    )


def build_report(
    dataset: EmbeddingDataset,
    results: List[SpotlightResult],
    config_echo: dict,
    top_k: int = 20,
    include_centers: bool = False,
    source_dim: Optional[int] = None,
) -> AuditReport:
    high = np.argsort(-dataset.losses, kind="stable")[:top_k]
    return AuditReport(
        dataset_summary=summarize_dataset(dataset, source_dim),
        high_loss_baseline=[_example(dataset, i) for i in high],
        spotlights=[
            spotlight_record(dataset, r, i + 1, top_k, include_centers) for i, r in enumerate(results)
        ],
        config_echo=config_echo,
    )


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _encode(obj, indent: int, level: int) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [json.dumps(str(k), ensure_ascii=False) + ": " + _encode(v, indent, level + 1) for k, v in obj.items()]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # scalar lists stay on one line
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(report: AuditReport) -> str:
    """Serialize with fixed field order and 17 significant digits for every float."""
    return _encode(report.model_dump(), 2, 0) + "\n"


def loads_report(text: str) -> AuditReport:
    return AuditReport.model_validate(json.loads(text))


def write_report(report: AuditReport, path) -> None:
    path = Path(path)
    try:
        path.write_text(dumps_report(report), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"could not write report to {path}: {exc.strerror or exc}") from exc


def read_report(path) -> AuditReport:
    return loads_report(Path(path).read_text(encoding="utf-8"))
