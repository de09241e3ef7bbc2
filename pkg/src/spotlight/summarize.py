"""Audit views of a spotlight: top-weighted examples, token lift, category shares."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from spotlight.core import EmbeddingDataset, WeightVector
from spotlight.errors import UnsupportedMetadataError

DEFAULT_MIN_SUPPORT = 5


class TokenEntry(NamedTuple):
    token: str
    spotlight_freq: float
    baseline_freq: float
    ratio: float


class CategoryEntry(NamedTuple):
    category: Optional[str]
    spotlight_freq: float
    baseline_freq: float
    mean_loss: float


@dataclass
class TokenSummary:
    entries: List[TokenEntry]


def top_weighted(result, k: int) -> List[Tuple[int, float]]:
    """The ``k`` heaviest examples of a result (or a bare weight array), ties by index."""
    if k < 1:
        raise ValueError("k must be at least 1")
    weights = result.weights.weights if hasattr(result, "weights") else np.asarray(result, dtype=np.float64)
    order = np.argsort(-weights, kind="stable")[:k]
    return [(int(i), float(weights[i])) for i in order]


def _normalized(weights: WeightVector) -> np.ndarray:
    return weights.weights / weights.total


def relative_token_frequency(
    dataset: EmbeddingDataset,
    weights: WeightVector,
    top_m: int = 10,
    min_support: int = DEFAULT_MIN_SUPPORT,
) -> TokenSummary:
    """Tokens over-represented in the spotlight relative to the whole dataset.

    Frequencies count each token at most once per example. Ratios carry
    additive smoothing of 1/(2N) on both sides; tokens present in fewer than
    ``min_support`` examples are dropped.
    """
    meta = dataset.metadata or []
    if not any(rec and rec.get("tokens") for rec in meta):
        raise UnsupportedMetadataError("relative_token_frequency needs per-example 'tokens' metadata")
    n = dataset.n
    p = _normalized(weights)
    spot = defaultdict(float)
    count = defaultdict(int)
    for i, rec in enumerate(meta):
        for tok in set((rec or {}).get("tokens") or ()):
            spot[tok] += p[i]
            count[tok] += 1
    eps = 1.0 / (2 * n)
    entries = []
    for tok, c in count.items():
        if c < min_support:
            continue
        base = c / n
        entries.append(TokenEntry(tok, spot[tok], base, (spot[tok] + eps) / (base + eps)))
    entries.sort(key=lambda e: (-e.ratio, e.token))
    return TokenSummary(entries[:top_m])


def category_breakdown(dataset: EmbeddingDataset, weights: WeightVector) -> List[CategoryEntry]:
    """Per-category spotlight mass, dataset share and mean loss, heaviest first.

    Examples without a category are grouped under ``None``.
    """
    meta = dataset.metadata or []
    if not any(rec and rec.get("category") is not None for rec in meta):
        raise UnsupportedMetadataError("category_breakdown needs per-example 'category' metadata")
    p = _normalized(weights)
    members = defaultdict(list)
    for i, rec in enumerate(meta):
        members[(rec or {}).get("category")].append(i)
    n = dataset.n
    out = []
    for cat, idx in members.items():
        idx = np.asarray(idx)
        out.append(
            CategoryEntry(cat, float(p[idx].sum()), len(idx) / n, float(dataset.losses[idx].mean()))
        )
    out.sort(key=lambda e: (-e.spotlight_freq, "" if e.category is None else str(e.category)))
    return out
