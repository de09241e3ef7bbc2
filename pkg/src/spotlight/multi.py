"""Several distinct spotlights on one dataset via loss deflation.

After each spotlight, every example's working loss is scaled down by its
relative weight in that spotlight, so the next search is steered elsewhere.
Deflation compounds across iterations; reported objectives always use the
original losses.
"""

from __future__ import annotations

import dataclasses
from typing import List

import numpy as np

from spotlight.core import EmbeddingDataset, WeightVector
from spotlight.errors import DimensionError
from spotlight.optimizer import SpotlightConfig, SpotlightResult, build_result, init_params, optimize_spotlight


def deflate_losses(losses, weights: WeightVector) -> np.ndarray:
    losses = np.asarray(losses, dtype=np.float64).reshape(-1)
    if losses.shape[0] != len(weights):
        raise DimensionError(f"{len(weights)} weights but {losses.shape[0]} losses")
    w = weights.weights
    factor = 1.0 - w / w.max()
    # the argmax example(s) must land on exactly zero
    factor[w == w.max()] = 0.0
    return np.clip(factor, 0.0, 1.0) * losses


def find_spotlights(dataset: EmbeddingDataset, config: SpotlightConfig, count: int) -> List[SpotlightResult]:
    if count < 1:
        raise ValueError("count must be at least 1")
    S = config.spotlight_size(dataset.n)
    original = dataset.losses
    working = original.copy()
    results = []
    for i in range(count):
        cfg = dataclasses.replace(config, seed=config.seed ^ i)
        if not np.any(working > 0):
            start = init_params(dataset, cfg, np.random.default_rng(cfg.seed))
            results.append(build_result(dataset, start, S, [], losses=original, degenerate=True))
            continue
        found = optimize_spotlight(dataset.with_losses(working), cfg)
        # rescore against the original losses
        rescored = build_result(dataset, found.params, S, found.trace, losses=original, steps=found.steps)
        results.append(rescored)
        working = deflate_losses(working, found.weights)
    return results
