"""Synthetic fixtures with known answers, and a brute-force reference maximizer."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from spotlight.core import EmbeddingDataset, SpotlightParams, weight_vector, weighted_loss
from spotlight.errors import ConfigError, NoFeasiblePointError

BACKGROUND_VOCAB = [f"w{i:02d}" for i in range(40)]
BACKGROUND_CATEGORIES = [f"topic_{i}" for i in range(5)]
TOKENS_PER_EXAMPLE = 6

ORACLE_MAX_N = 2000
ORACLE_MAX_D = 2


@dataclass
class PlantedSpec:
    n_background: int = 4900
    n_cluster: int = 100
    n_clusters: int = 1
    d: int = 32
    cluster_separation: float = 6.0
    background_loss_mean: float = 0.5
    background_loss_spread: float = 0.25
    cluster_loss_mean: float = 5.0
    cluster_loss_spread: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_background < 1 or self.n_cluster < 1 or self.n_clusters < 0 or self.d < 1:
            raise ConfigError("fixture counts must be positive (n_clusters may be 0)")
        if self.n_clusters > self.d:
            raise ConfigError("need n_clusters <= d for orthogonal cluster directions")
        if self.n_clusters and self.cluster_loss_mean <= self.background_loss_mean:
            raise ConfigError("cluster mean loss must exceed background mean loss")

    def to_dict(self) -> dict:
        return asdict(self)


def _clamped_normal(rng, mean, spread, size):
    return np.maximum(rng.normal(mean, spread, size), 0.0)


def gen_planted_dataset(spec: PlantedSpec) -> Tuple[EmbeddingDataset, List[np.ndarray]]:
    """Gaussian background plus compact high-loss clusters.

    Returns the dataset and one sorted index array per planted cluster. Example
    order is shuffled so cluster members are not contiguous. Cluster directions
    are orthonormal, so two clusters at separation ``s`` sit ``s * sqrt(2)``
    apart.
    """
    rng = np.random.default_rng(spec.seed)
    d = spec.d
    n = spec.n_background + spec.n_clusters * spec.n_cluster

    X = np.empty((n, d))
    losses = np.empty(n)
    group = np.full(n, -1)
    X[: spec.n_background] = rng.standard_normal((spec.n_background, d))
    losses[: spec.n_background] = _clamped_normal(
        rng, spec.background_loss_mean, spec.background_loss_spread, spec.n_background
    )
    if spec.n_clusters:
        q, _ = np.linalg.qr(rng.standard_normal((d, spec.n_clusters)))
        for c in range(spec.n_clusters):
            lo = spec.n_background + c * spec.n_cluster
            hi = lo + spec.n_cluster
            center = spec.cluster_separation * q[:, c]
            X[lo:hi] = center + 0.5 * rng.standard_normal((spec.n_cluster, d))
            losses[lo:hi] = _clamped_normal(rng, spec.cluster_loss_mean, spec.cluster_loss_spread, spec.n_cluster)
            group[lo:hi] = c

    perm = rng.permutation(n)
    X, losses, group = X[perm], losses[perm], group[perm]

    metadata = []
    for i in range(n):
        words = rng.choice(len(BACKGROUND_VOCAB), TOKENS_PER_EXAMPLE, replace=False)
        tokens = [BACKGROUND_VOCAB[w] for w in words]
        if group[i] >= 0:
            tokens.append(f"marker_{group[i]}")
            category = f"planted_{group[i]}"
        else:
            category = BACKGROUND_CATEGORIES[rng.integers(len(BACKGROUND_CATEGORIES))]
        metadata.append({"label": "planted" if group[i] >= 0 else "background", "tokens": tokens, "category": category})

    truth = [np.flatnonzero(group == c) for c in range(spec.n_clusters)]
    for members in truth:
        background = group < 0
        if not losses[members].mean() > losses[background].mean():
            raise AssertionError("planted cluster is not a high-loss positive control")
    return EmbeddingDataset(X, losses, metadata), truth


def grid_search_oracle(
    dataset: EmbeddingDataset,
    S: float,
    centers: Sequence,
    log_precisions: Sequence[float],
) -> Tuple[SpotlightParams, float]:
    """Exhaustive search over spherical spotlights on a ``centers x log_precisions`` grid.

    Infeasible points (total weight below ``S``) are discarded; ties keep the
    first point in lexicographic (center, precision) order.
    """
    if dataset.n > ORACLE_MAX_N or dataset.d > ORACLE_MAX_D:
        raise ConfigError(f"grid oracle limited to N <= {ORACLE_MAX_N}, d <= {ORACLE_MAX_D}")
    centers = np.asarray(centers, dtype=np.float64)
    if centers.ndim == 1:
        centers = centers[:, None]
    if centers.shape[0] == 0 or len(log_precisions) == 0:
        raise ConfigError("grid must be nonempty")

    best, best_obj = None, -np.inf
    for mu in centers:
        for lp in log_precisions:
            params = SpotlightParams(mu, float(lp))
            wv = weight_vector(dataset, params)
            if wv.total < S:
                continue
            obj = weighted_loss(wv, dataset.losses)
            if obj > best_obj:
                best, best_obj = params, obj
    if best is None:
        raise NoFeasiblePointError(f"no grid point reaches total weight {S}")
    return best, best_obj
