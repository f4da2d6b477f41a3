"""Replay sampling and loss composition against an abstract learner.

The task loss sums a per-level classification divergence and a weighted
mean-squared 3D regression error. Replay adds the buffer's contribution:
either ground-truth targets only, or additionally a distillation term
against payloads stored at buffering time, whose regression weight follows
an upper-bound gate (the stored prediction only penalizes the current one
while the current one is worse against ground truth).

The classification term is the KL divergence from the normalized indicator
over the frame's label set to the predicted distribution, so an exact
prediction scores 0 at every level; for single-label sets it equals plain
cross-entropy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Instance, RngHandle, SceneId
from .errors import EmptyBufferError, ShapeMismatchError
from .buffering import Buffer, BufferEntry
from .hierarchy import LabelHierarchy


@dataclass(slots=True)
class RepresentationPayload:
    """Stored model outputs for one frame: pre-softmax logits per level and
    predicted 3D coordinates aligned with ``sorted(observed_points)``."""

    logits_per_level: tuple[np.ndarray, ...]
    predicted_points: np.ndarray


@dataclass(frozen=True, slots=True)
class LossBreakdown:
    """Weighted loss terms for one frame; ``total`` recomposes exactly."""

    per_level_classification: tuple[float, ...]
    regression: float
    weights: tuple[float, ...]  # (alpha_1 .. alpha_L, beta)
    total: float

    @classmethod
    def compose(cls, per_level: tuple[float, ...], regression: float, weights: tuple[float, ...]) -> "LossBreakdown":
        if len(weights) != len(per_level) + 1:
            raise ShapeMismatchError(f"need {len(per_level) + 1} weights, got {len(weights)}")
        if regression < 0 or any(t < -1e-12 for t in per_level):
            raise ValueError("loss terms must be non-negative")
        per_level = tuple(max(t, 0.0) for t in per_level)
        total = sum(a * t for a, t in zip(weights[:-1], per_level)) + weights[-1] * regression
        return cls(per_level, regression, tuple(float(w) for w in weights), total)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


def _set_divergence(label_set: frozenset[int], logits: np.ndarray) -> float:
    """KL from the uniform indicator over ``label_set`` to softmax(logits)."""
    if not label_set:
        raise ShapeMismatchError("a frame's label set cannot be empty")
    idx = np.fromiter(label_set, dtype=np.int64)
    if idx.max() >= logits.shape[0]:
        raise ShapeMismatchError(f"label index {idx.max()} outside logits of length {logits.shape[0]}")
    logq = _log_softmax(np.asarray(logits, dtype=float))
    k = idx.size
    return float(-np.log(k) - logq[idx].mean())


def _kl_between(stored_logits: np.ndarray, current_logits: np.ndarray) -> float:
    if stored_logits.shape != current_logits.shape:
        raise ShapeMismatchError("stored and current logits differ in shape")
    logp = _log_softmax(np.asarray(stored_logits, dtype=float))
    logq = _log_softmax(np.asarray(current_logits, dtype=float))
    p = np.exp(logp)
    return max(float(np.sum(p * (logp - logq))), 0.0)


def _true_coords(inst: Instance, scene_points: np.ndarray) -> np.ndarray:
    ids = np.asarray(sorted(inst.observed_points), dtype=np.int64)
    return scene_points[ids]


def _mean_sq_error(pred: np.ndarray, true: np.ndarray) -> float:
    if pred.shape != true.shape:
        raise ShapeMismatchError(f"predicted points {pred.shape} vs observed points {true.shape}")
    return float(np.mean(np.sum((pred - true) ** 2, axis=1)))


def task_loss(
    inst: Instance,
    pred: RepresentationPayload,
    weights: tuple[float, ...],
    scene_points: np.ndarray,
) -> LossBreakdown:
    """Per-frame loss: label-set divergence at each level plus weighted
    mean squared 3D error over the observed points."""
    levels = len(pred.logits_per_level)
    if len(inst.labels) < levels:
        raise ShapeMismatchError(f"instance has {len(inst.labels)} label levels, prediction has {levels}")
    per_level = tuple(_set_divergence(inst.labels[l], pred.logits_per_level[l]) for l in range(levels))
    regression = _mean_sq_error(np.asarray(pred.predicted_points, dtype=float), _true_coords(inst, scene_points))
    return LossBreakdown.compose(per_level, regression, weights)


def bounded_beta(pred_error_sq: float, stored_error_sq: float, beta_on: float) -> float:
    """Upper-bound gate for the distillation regression weight.

    Returns ``beta_on`` only while the current prediction is strictly worse
    against ground truth than the stored one; once the current prediction
    matches or surpasses the stored target it is not penalized.
    """
    if pred_error_sq < 0 or stored_error_sq < 0:
        raise ValueError("squared errors must be non-negative")
    return beta_on if pred_error_sq > stored_error_sq else 0.0


def distill_loss(
    inst: Instance,
    pred: RepresentationPayload,
    stored: RepresentationPayload,
    weights: tuple[float, ...],
    scene_points: np.ndarray,
) -> LossBreakdown:
    """Distillation terms for one replayed frame.

    Classification terms are KL divergences from the stored softmax to the
    current one (zero at self-distillation). The regression term pulls the
    current prediction toward ground truth, but its weight is gated by
    :func:`bounded_beta` on the stored-vs-current error comparison.
    """
    if len(pred.logits_per_level) != len(stored.logits_per_level):
        raise ShapeMismatchError("payload and prediction have different level counts")
    per_level = tuple(
        _kl_between(s, p) for s, p in zip(stored.logits_per_level, pred.logits_per_level)
    )
    true = _true_coords(inst, scene_points)
    pred_err = _mean_sq_error(np.asarray(pred.predicted_points, dtype=float), true)
    stored_err = _mean_sq_error(np.asarray(stored.predicted_points, dtype=float), true)
    gated = (*weights[:-1], bounded_beta(pred_err, stored_err, weights[-1]))
    return LossBreakdown.compose(per_level, pred_err, gated)


def replay_loss_img(current: LossBreakdown, replayed: list[LossBreakdown]) -> float:
    """Current loss plus the mean of replayed ground-truth losses."""
    if not replayed:
        return current.total
    return current.total + sum(r.total for r in replayed) / len(replayed)


def replay_loss_rep(
    current: LossBreakdown,
    replayed_gt: list[LossBreakdown],
    replayed_distill: list[LossBreakdown],
) -> float:
    """Current loss plus the mean per-sample (ground-truth + distillation) sum."""
    if len(replayed_gt) != len(replayed_distill):
        raise ShapeMismatchError(
            f"replay batch misaligned: {len(replayed_gt)} ground-truth vs {len(replayed_distill)} distill terms"
        )
    if not replayed_gt:
        return current.total
    return current.total + sum(g.total + d.total for g, d in zip(replayed_gt, replayed_distill)) / len(replayed_gt)


def sample_replay_batch(buf: Buffer, k: int, rng: RngHandle) -> list[BufferEntry]:
    """Uniform batch from the buffer: without replacement when it fits,
    with replacement when ``k`` exceeds the occupancy. ``k = 0`` disables
    replay and returns an empty batch."""
    if k == 0:
        return []
    if not buf.entries:
        raise EmptyBufferError("cannot sample a replay batch from an empty buffer")
    n = len(buf.entries)
    if k > n:
        return [buf.entries[rng.uniform_index(n)] for _ in range(k)]
    idx = list(range(n))
    for i in range(k):  # partial Fisher-Yates
        j = i + rng.uniform_index(n - i)
        idx[i], idx[j] = idx[j], idx[i]
    return [buf.entries[i] for i in idx[:k]]


class LearnerOracle:
    """Deterministic scorer stub standing in for a trained localizer.

    Predictions are a parameterized corruption of ground truth: each true
    label survives with probability ``1 - p_flip`` and is otherwise replaced
    by a uniformly random label of its level, and predicted coordinates are
    the true ones plus isotropic Gaussian noise. Identical (instance,
    corruption seed) pairs always produce identical predictions.
    """

    def __init__(
        self,
        scene_points: dict[SceneId, np.ndarray],
        hierarchies: dict[SceneId, LabelHierarchy],
        p_flip: float = 0.1,
        sigma_pred: float = 0.05,
        seed: int = 0,
    ) -> None:
        self.scene_points = scene_points
        self.hierarchies = hierarchies
        self.p_flip = float(p_flip)
        self.sigma_pred = float(sigma_pred)
        self.seed = int(seed)

    def predict(self, inst: Instance) -> RepresentationPayload:
        h = self.hierarchies[inst.scene]
        rng = RngHandle(self.seed, f"learner/{inst.scene}/{inst.frame_index}")
        logits = []
        for level in range(1, h.levels + 1):
            size = h.level_sizes[level - 1]
            kept: set[int] = set()
            for lab in sorted(inst.labels[level - 1]):
                if self.p_flip > 0.0 and rng.uniform() < self.p_flip:
                    kept.add(rng.uniform_index(size))
                else:
                    kept.add(lab)
            vec = np.full(size, -20.0)
            vec[sorted(kept)] = 0.0
            logits.append(vec)
        true = _true_coords(inst, self.scene_points[inst.scene])
        noise = self.sigma_pred * rng.normals(true.size).reshape(true.shape) if self.sigma_pred > 0 else 0.0
        return RepresentationPayload(tuple(logits), true + noise)
