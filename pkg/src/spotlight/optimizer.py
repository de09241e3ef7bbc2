"""Adam ascent on the penalized spotlight objective.

The learning rate halves whenever the objective plateaus, and the barrier band
above the size constraint narrows geometrically over the run so the search
moves through the interior of the feasible region before settling near the
constraint.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional, Sequence

import numpy as np

from spotlight.core import (
    MIN_STRENGTH,
    BarrierSchedule,
    EmbeddingDataset,
    SpotlightParams,
    WeightVector,
    evaluate,
    weight_vector,
    weighted_loss,
)
from spotlight.errors import ConfigError

FEASIBILITY_SLACK = 1e-3
INIT_TOTAL_FRACTION = 0.9
# precision small enough that every weight rounds to 1 for any sane embedding scale
NEAR_UNIFORM_LOG_PRECISION = -60.0
MODES = ("spherical", "elliptical")


@dataclass
class SpotlightConfig:
    size_fraction: float = 0.05
    mode: str = "spherical"
    max_steps: int = 3000
    initial_lr: float = 1e-2
    min_lr: float = 1e-5
    plateau_window: int = 20
    plateau_rel_tol: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    barrier: Optional[BarrierSchedule] = None
    seed: int = 0
    trace_every: int = 10

    def __post_init__(self):
        if not (0.0 < self.size_fraction < 1.0):
            raise ConfigError(f"size_fraction must lie in (0, 1), got {self.size_fraction}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_steps < 1 or self.plateau_window < 1 or self.trace_every < 1:
            raise ConfigError("max_steps, plateau_window and trace_every must be positive")
        if not (0 < self.min_lr < self.initial_lr):
            raise ConfigError("need 0 < min_lr < initial_lr")
        if not (self.plateau_rel_tol > 0 and self.adam_eps > 0):
            raise ConfigError("tolerances must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("Adam betas must lie in [0, 1)")
        if not (0 <= self.seed < 2**64):
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def spotlight_size(self, n: int) -> float:
        S = self.size_fraction * n
        if S < 1.0:
            raise ConfigError(f"spotlight size {S:.4g} = {self.size_fraction} * {n} is below one example")
        return S

    def resolve_barrier(self, n: int, loss_range: float) -> BarrierSchedule:
        """Default schedule for ``n`` examples whose losses span ``loss_range``.

        With strength equal to the loss range, every point at or below the
        constraint is penalized by at least as much as any reweighting can gain.
        """
        if self.barrier is not None:
            return self.barrier
        S = self.spotlight_size(n)
        initial = 0.5 * (n - S)
        return BarrierSchedule(
            strength=max(loss_range, MIN_STRENGTH),
            initial_width=initial,
            final_width=min(0.01 * S, initial),
            decay_steps=self.max_steps,
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out["barrier"] = asdict(self.barrier) if self.barrier is not None else None
        return out


class TraceSample(NamedTuple):
    step: int
    objective: float
    best_objective: float
    total_weight: float
    lr: float


@dataclass
class SpotlightResult:
    params: SpotlightParams
    weights: WeightVector
    objective: float
    baseline_mean_loss: float
    feasible: bool
    trace: List[TraceSample]
    top_indices: np.ndarray
    top_weights: np.ndarray
    size: float
    degenerate: bool = False
    steps: int = 0

    @property
    def top(self):
        return list(zip(self.top_indices.tolist(), self.top_weights.tolist()))


class Adam:
    """Plain Adam on a flat parameter vector; minimizes."""

    def __init__(self, size, lr=1e-2, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray) -> None:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def detect_plateau(history: Sequence[float], window: int, rel_tol: float) -> bool:
    """True when the last ``window`` values fail to improve on the best before them.

    Improvement is relative (``rel_tol``) for a positive best and falls back to
    an absolute 1e-12 margin otherwise.
    """
    if len(history) < window + 1:
        return False
    best = max(history[:-window])
    recent = max(history[-window:])
    if best > 0:
        return recent < best * (1.0 + rel_tol)
    return recent < best + 1e-12


def _total_at(dataset, center, log_precision):
    return weight_vector(dataset, SpotlightParams(center, log_precision)).total


def init_params(dataset: EmbeddingDataset, config: SpotlightConfig, rng: np.random.Generator) -> SpotlightParams:
    """Start at the data mean (plus seeded jitter) with a wide, deeply feasible kernel."""
    X = dataset.embeddings
    n, d = X.shape
    mean = X.mean(axis=0, dtype=np.float64)
    std = X.std(axis=0, dtype=np.float64)
    if not np.any(std > 0):
        lp = 0.0 if config.mode == "spherical" else np.zeros(d)
        return SpotlightParams(X[0].astype(np.float64), lp)

    center = mean + 0.01 * std * rng.standard_normal(d)
    if config.mode == "spherical":
        axis_offset = 0.0
    else:
        # per-axis precision starts proportional to 1/variance
        var = np.where(std > 0, std**2, 1.0)
        axis_offset = -np.log(var)

    S = config.spotlight_size(n)
    target = max(INIT_TOTAL_FRACTION, 0.5 * (1.0 + S / n)) * n

    def total(r):
        return _total_at(dataset, center, r + axis_offset)

    lo, hi = -10.0, 10.0
    while total(lo) < target and lo > -200:
        lo -= 10.0
    while total(hi) > target and hi < 200:
        hi += 10.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        t = total(mid)
        if abs(t - target) <= 1e-4 * target:
            lo = hi = mid
            break
        if t > target:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    lp = float(r) if config.mode == "spherical" else r + axis_offset
    return SpotlightParams(center, lp)


def _near_uniform(dataset: EmbeddingDataset, mode: str) -> SpotlightParams:
    center = dataset.embeddings.mean(axis=0, dtype=np.float64)
    lp = NEAR_UNIFORM_LOG_PRECISION if mode == "spherical" else np.full(dataset.d, NEAR_UNIFORM_LOG_PRECISION)
    return SpotlightParams(center, lp)


def _top(weights: np.ndarray, k: int):
    # stable sort on -w gives ties in ascending index order
    order = np.argsort(-weights, kind="stable")[:k]
    return order, weights[order]


def build_result(
    dataset: EmbeddingDataset,
    params: SpotlightParams,
    S: float,
    trace,
    losses=None,
    degenerate=False,
    steps=0,
) -> SpotlightResult:
    """Assemble a result, scoring ``params`` against ``losses`` (default: the dataset's)."""
    losses = dataset.losses if losses is None else losses
    wv = weight_vector(dataset, params)
    idx, w = _top(wv.weights, max(1, math.ceil(S)))
    return SpotlightResult(
        params=params,
        weights=wv,
        objective=weighted_loss(wv, losses),
        baseline_mean_loss=float(np.mean(losses)),
        feasible=wv.total >= S * (1.0 - FEASIBILITY_SLACK),
        trace=list(trace),
        top_indices=idx,
        top_weights=w,
        size=S,
        degenerate=degenerate,
        steps=steps,
    )


def optimize_spotlight(dataset: EmbeddingDataset, config: SpotlightConfig) -> SpotlightResult:
    n, d = dataset.n, dataset.d
    S = config.spotlight_size(n)
    rng = np.random.default_rng(config.seed)
    start = init_params(dataset, config, rng)

    if not np.any(dataset.losses > 0):
        # constant objective: nothing to climb
        ev = evaluate(dataset, start, S, 1.0, 1.0, want_grad=False)
        trace = [TraceSample(0, ev.loss, ev.loss, ev.total, config.initial_lr)]
        return build_result(dataset, start, S, trace)

    barrier = config.resolve_barrier(n, float(np.ptp(dataset.losses)))
    feasible_floor = S * (1.0 - FEASIBILITY_SLACK)

    best_loss = -math.inf
    best_params = None
    best_penalized = -math.inf
    fallback_params = start

    def consider(params, ev):
        nonlocal best_loss, best_params, best_penalized, fallback_params
        if ev.total >= feasible_floor and ev.loss > best_loss:
            best_loss, best_params = ev.loss, params
        if ev.objective > best_penalized:
            best_penalized, fallback_params = ev.objective, params

    theta = start.flat()
    adam = Adam(theta.size, config.initial_lr, config.adam_beta1, config.adam_beta2, config.adam_eps)
    history: List[float] = []
    trace: List[TraceSample] = []
    step = 0
    for step in range(config.max_steps + 1):
        params = SpotlightParams.from_flat(theta, d, config.mode)
        width = barrier.width_at(step)
        ev = evaluate(dataset, params, S, width, barrier.strength, want_grad=step < config.max_steps)
        consider(params, ev)
        if step == 0:
            # the near-uniform point always attains the mean loss and is feasible
            uniform = _near_uniform(dataset, config.mode)
            consider(uniform, evaluate(dataset, uniform, S, width, barrier.strength, want_grad=False))
        if step % config.trace_every == 0:
            trace.append(TraceSample(step, ev.loss, best_loss, ev.total, adam.lr))
        if step == config.max_steps:
            break

        history.append(ev.objective)
        if detect_plateau(history, config.plateau_window, config.plateau_rel_tol):
            adam.lr *= 0.5
            history = [max(history)]
            if adam.lr < config.min_lr:
                break
        grad = np.concatenate([ev.grad_center, np.atleast_1d(ev.grad_log_precision)])
        adam.step(theta, -grad)

    if trace[-1].step != step:
        trace.append(TraceSample(step, ev.loss, best_loss, ev.total, adam.lr))

    if best_params is not None:
        return build_result(dataset, best_params, S, trace, steps=step)
    return build_result(dataset, fallback_params, S, trace, steps=step)
