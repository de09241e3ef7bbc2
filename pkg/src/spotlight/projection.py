"""Seeded Gaussian random projection for very wide representations.

Entries are i.i.d. N(0, 1/target_dim), drawn row by row from a seeded PCG64
stream. ``project_seeded`` regenerates the matrix in row blocks so a
300,000-dimensional source never has to be held in memory at once; it yields
the same matrix as :func:`projection_matrix` because the stream is consumed in
the same row-major order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spotlight.errors import ConfigError, DimensionError

DEFAULT_TARGET_DIM = 1000
BLOCK_ROWS = 4096


@dataclass(frozen=True)
class ProjectionSpec:
    source_dim: int
    target_dim: int = DEFAULT_TARGET_DIM
    seed: int = 0

    def __post_init__(self):
        if self.source_dim < 1 or self.target_dim < 1:
            raise ConfigError("projection dimensions must be positive")
        if self.target_dim >= self.source_dim:
            raise ConfigError(
                f"target_dim ({self.target_dim}) must be smaller than source_dim ({self.source_dim})"
            )
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")

    @property
    def shape(self):
        return (self.source_dim, self.target_dim)


def _blocks(spec: ProjectionSpec):
    rng = np.random.default_rng(spec.seed)
    scale = 1.0 / np.sqrt(spec.target_dim)
    for lo in range(0, spec.source_dim, BLOCK_ROWS):
        hi = min(lo + BLOCK_ROWS, spec.source_dim)
        yield lo, hi, rng.standard_normal((hi - lo, spec.target_dim)) * scale


def projection_matrix(spec: ProjectionSpec) -> np.ndarray:
    out = np.empty(spec.shape)
    for lo, hi, block in _blocks(spec):
        out[lo:hi] = block
    return out


def project(embeddings, matrix) -> np.ndarray:
    X = np.asarray(embeddings)
    R = np.asarray(matrix)
    if X.ndim != 2 or R.ndim != 2 or X.shape[1] != R.shape[0]:
        raise DimensionError(f"cannot project {X.shape} with a {R.shape} matrix")
    return X.astype(np.float64, copy=False) @ R


def project_seeded(embeddings, spec: ProjectionSpec) -> np.ndarray:
    """``project(embeddings, projection_matrix(spec))`` without materializing the matrix."""
    X = np.asarray(embeddings)
    if X.ndim != 2 or X.shape[1] != spec.source_dim:
        raise DimensionError(f"embeddings of shape {X.shape} do not match source_dim={spec.source_dim}")
    out = np.zeros((X.shape[0], spec.target_dim))
    for lo, hi, block in _blocks(spec):
        out += X[:, lo:hi].astype(np.float64, copy=False) @ block
    return out
