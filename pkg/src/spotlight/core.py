"""Domain types and the math of a single spotlight.

A spotlight reweights the dataset with a Gaussian-like kernel centred at a point
in representation space. The quantities here are all pure functions of their
inputs: kernel weights, the normalized weighted loss, the hinge barrier that
enforces a minimum total weight, and the analytic gradient of the penalized
objective with respect to the centre and the log-precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from spotlight._kernels import QUAD_CLAMP, S_K, S_KL, S_KLQ, S_KQ, V_KLT, V_KLTT, V_KT, V_KTT, fused_pass
from spotlight.errors import ConfigError, DataError, DimensionError

MIN_STRENGTH = np.finfo(np.float64).eps


@dataclass
class EmbeddingDataset:
    """Representation matrix ``(N, d)``, per-example losses and optional metadata.

    Embeddings keep their storage dtype (float32 dumps stay float32); all
    arithmetic is carried out in float64.
    """

    embeddings: np.ndarray
    losses: np.ndarray
    metadata: Optional[list] = None

    def __post_init__(self):
        X = np.asarray(self.embeddings)
        if X.dtype not in (np.float32, np.float64):
            X = X.astype(np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DimensionError(f"embeddings must be 2-D, got shape {X.shape}")
        n, d = X.shape
        if n < 1 or d < 1:
            raise DataError(f"embeddings must have N >= 1 and d >= 1, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DataError("embeddings contain non-finite values")
        self.embeddings = np.ascontiguousarray(X)

        losses = np.asarray(self.losses, dtype=np.float64).reshape(-1)
        if losses.shape[0] != n:
            raise DimensionError(f"losses has length {losses.shape[0]}, expected N={n}")
        if not np.all(np.isfinite(losses)):
            raise DataError("losses contain non-finite values")
        if np.any(losses < 0):
            raise DataError("losses must be nonnegative")
        self.losses = np.ascontiguousarray(losses)

        if self.metadata is not None:
            self.metadata = list(self.metadata)
            if len(self.metadata) != n:
                raise DataError(f"metadata has {len(self.metadata)} records, expected N={n}")

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d(self) -> int:
        return self.embeddings.shape[1]

    def with_losses(self, losses) -> "EmbeddingDataset":
        return EmbeddingDataset(self.embeddings, losses, self.metadata)


@dataclass
class SpotlightParams:
    """Spotlight centre plus log-precision.

    A scalar ``log_precision`` is a spherical spotlight (precision ``c * I``);
    a length-``d`` vector is an elliptical one with one precision per axis.
    """

    center: np.ndarray
    log_precision: Union[float, np.ndarray]

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(self.center)):
            raise DataError("spotlight center must be finite")
        lp = np.asarray(self.log_precision, dtype=np.float64)
        if lp.ndim == 0:
            self.log_precision = float(lp)
        else:
            lp = lp.reshape(-1)
            if lp.shape[0] != self.center.shape[0]:
                raise DimensionError(
                    f"elliptical log_precision has length {lp.shape[0]}, center has {self.center.shape[0]}"
                )
            self.log_precision = lp
        if not np.all(np.isfinite(self.log_precision)):
            raise DataError("log_precision must be finite")

    @property
    def d(self) -> int:
        return self.center.shape[0]

    @property
    def mode(self) -> str:
        return "spherical" if isinstance(self.log_precision, float) else "elliptical"

    @property
    def precision(self) -> np.ndarray:
        """Precision as a length-1 (spherical) or length-d (elliptical) array."""
        return np.exp(np.atleast_1d(self.log_precision))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.center, np.atleast_1d(self.log_precision)])

    @classmethod
    def from_flat(cls, theta: np.ndarray, d: int, mode: str) -> "SpotlightParams":
        if mode == "spherical":
            return cls(theta[:d].copy(), float(theta[d]))
        return cls(theta[:d].copy(), theta[d:].copy())


@dataclass
class WeightVector:
    weights: np.ndarray
    total: float = field(default=None)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if self.total is None:
            self.total = float(np.sum(self.weights))
        self.total = float(self.total)

    def __len__(self):
        return self.weights.shape[0]


@dataclass
class BarrierSchedule:
    """Hinge penalty of magnitude ``strength`` on a band that narrows from
    ``initial_width`` to ``final_width`` geometrically over ``decay_steps``."""

    strength: float
    initial_width: float
    final_width: float
    decay_steps: int

    def __post_init__(self):
        if not (self.strength > 0 and self.initial_width > 0 and self.final_width > 0):
            raise ConfigError("barrier strength and widths must be strictly positive")
        if self.final_width > self.initial_width:
            raise ConfigError("barrier final_width must not exceed initial_width")
        if int(self.decay_steps) < 1:
            raise ConfigError("barrier decay_steps must be a positive integer")
        self.decay_steps = int(self.decay_steps)

    def width_at(self, step: int) -> float:
        frac = min(step / self.decay_steps, 1.0)
        return self.initial_width * (self.final_width / self.initial_width) ** frac


def _check_dim(d: int, params: SpotlightParams):
    if params.d != d:
        raise DimensionError(f"spotlight has dimension {params.d}, data has dimension {d}")


def kernel_weight(x, params: SpotlightParams) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    _check_dim(x.shape[0], params)
    t = x - params.center
    q = 0.5 * float(np.sum(params.precision * t * t))
    return float(np.exp(-min(q, QUAD_CLAMP)))


def weight_vector(dataset: EmbeddingDataset, params: SpotlightParams) -> WeightVector:
    _check_dim(dataset.d, params)
    k, scal, _ = fused_pass(dataset.embeddings, params.center, params.precision, dataset.losses, False)
    return WeightVector(k, scal[S_K])


def weighted_loss(weights: WeightVector, losses) -> float:
    """Normalized-weight average of ``losses``; always inside ``[min, max]``."""
    losses = np.asarray(losses, dtype=np.float64).reshape(-1)
    if losses.shape[0] != len(weights):
        raise DimensionError(f"{len(weights)} weights but {losses.shape[0]} losses")
    value = float(np.dot(weights.weights, losses) / weights.total)
    # rounding can push a convex combination one ulp outside the hull
    return min(max(value, float(losses.min())), float(losses.max()))


def barrier_penalty(total: float, S: float, width: float, strength: float) -> float:
    if not (S > 0 and width > 0 and strength > 0):
        raise ConfigError("barrier_penalty needs S, width and strength > 0")
    s = (total - S) / width
    return strength * (1.0 - s) ** 2 if s < 1.0 else 0.0


def barrier_slope(total: float, S: float, width: float, strength: float) -> float:
    """Derivative of :func:`barrier_penalty` with respect to ``total``."""
    s = (total - S) / width
    return -2.0 * strength * (1.0 - s) / width if s < 1.0 else 0.0


@dataclass
class Evaluation:
    """Everything one fused pass yields at a parameter point."""

    weights: np.ndarray
    total: float
    loss: float
    penalty: float
    objective: float
    grad_center: Optional[np.ndarray] = None
    grad_log_precision: Optional[Union[float, np.ndarray]] = None


def evaluate(
    dataset: EmbeddingDataset,
    params: SpotlightParams,
    S: float,
    width: float,
    strength: float,
    want_grad: bool = True,
) -> Evaluation:
    _check_dim(dataset.d, params)
    c = params.precision
    k, scal, vec = fused_pass(dataset.embeddings, params.center, c, dataset.losses, want_grad)
    K = scal[S_K]
    L = scal[S_KL] / K
    lo, hi = dataset.losses.min(), dataset.losses.max()
    L = min(max(L, lo), hi)
    P = barrier_penalty(K, S, width, strength)
    ev = Evaluation(k, K, L, P, L - P)
    if not want_grad:
        return ev
    dP = barrier_slope(K, S, width, strength)
    # dF/dk_i = (l_i - L)/K - dP, contracted against dk_i/dtheta
    coef = L / K + dP
    ev.grad_center = c * (vec[V_KLT] / K - coef * vec[V_KT])
    if params.mode == "spherical":
        ev.grad_log_precision = float(-(scal[S_KLQ] / K - coef * scal[S_KQ]))
    else:
        ev.grad_log_precision = -0.5 * c * (vec[V_KLTT] / K - coef * vec[V_KTT])
    return ev


def penalized_objective(
    dataset: EmbeddingDataset, params: SpotlightParams, S: float, width: float, strength: float
) -> float:
    return evaluate(dataset, params, S, width, strength, want_grad=False).objective


def objective_gradient(dataset: EmbeddingDataset, params: SpotlightParams, S: float, width: float, strength: float):
    """Exact gradient of :func:`penalized_objective` as ``(d_center, d_log_precision)``."""
    ev = evaluate(dataset, params, S, width, strength)
    return ev.grad_center, ev.grad_log_precision
