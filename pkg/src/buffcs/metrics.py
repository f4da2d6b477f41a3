"""Reported quantities: buffer coverage, accuracy matrices, and intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .buffering import Buffer
from .core import SceneId
from .errors import IncompleteMatrixError, InsufficientSamplesError, NoHierarchyError
from .hierarchy import LabelHierarchy


@dataclass(frozen=True)
class CoverageReport:
    """Per-scene fraction of realized labels covered by the buffer."""

    per_scene: dict[SceneId, float]
    average: float


def buffer_coverage(
    buf: Buffer,
    hierarchies: dict[SceneId, LabelHierarchy],
    level: int = 1,
) -> CoverageReport:
    """Covered-label fraction per scene at ``level``, averaged over all scenes.

    A scene's denominator is its realized label count at that level (empty
    clusters were compacted away at build time), so a fully covered scene
    scores exactly 1.0; scenes without buffered entries score 0.
    """
    for scene in buf.per_class_count:
        if buf.per_class_count[scene] > 0 and scene not in hierarchies:
            raise NoHierarchyError(f"buffer holds entries of scene {scene} but no hierarchy was given")
    per_scene: dict[SceneId, float] = {}
    for scene in sorted(hierarchies):
        denom = hierarchies[scene].label_count(level)
        per_scene[scene] = len(buf.label_union(scene, level)) / denom
    average = sum(per_scene.values()) / len(per_scene) if per_scene else 0.0
    return CoverageReport(per_scene, average)


class AccuracyMatrix:
    """Grid of a[i, j]: accuracy on scene-task i after completing task j.

    Indices are 1-based to match the usual stage notation; entries are
    defined only for j >= i (a task cannot be evaluated before it is seen).
    """

    def __init__(self, n_scenes: int) -> None:
        if n_scenes < 1:
            raise ValueError("need at least one scene")
        self.n_scenes = n_scenes
        self._a = np.full((n_scenes, n_scenes), np.nan)

    def set(self, i: int, j: int, value: float) -> None:
        self._check(i, j)
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"accuracy {value} outside [0, 1]")
        self._a[i - 1, j - 1] = value

    def get(self, i: int, j: int) -> float:
        self._check(i, j)
        v = self._a[i - 1, j - 1]
        if math.isnan(v):
            raise IncompleteMatrixError(f"a[{i},{j}] is not populated")
        return float(v)

    def defined(self, i: int, j: int) -> bool:
        self._check(i, j)
        return not math.isnan(self._a[i - 1, j - 1])

    def _check(self, i: int, j: int) -> None:
        if not (1 <= i <= self.n_scenes and 1 <= j <= self.n_scenes):
            raise IndexError(f"({i}, {j}) outside a {self.n_scenes}x{self.n_scenes} matrix")
        if j < i:
            raise IndexError(f"a[{i},{j}] is undefined: scene {i} is unseen before task {i}")

    def to_lists(self) -> list[list[float | None]]:
        return [[None if math.isnan(v) else float(v) for v in row] for row in self._a]

    @classmethod
    def from_lists(cls, rows: list[list[float | None]]) -> "AccuracyMatrix":
        m = cls(len(rows))
        m._a = np.array([[np.nan if v is None else v for v in row] for row in rows])
        return m


def average_accuracy(m: AccuracyMatrix, i: int) -> float:
    """Mean accuracy on scene-task ``i`` over stages j = i..N."""
    values = [m.get(i, j) for j in range(i, m.n_scenes + 1)]
    return sum(values) / len(values)


def final_accuracy(m: AccuracyMatrix) -> float:
    """Mean over scenes of the last-stage accuracy a[i, N]."""
    n = m.n_scenes
    return sum(m.get(i, n) for i in range(1, n + 1)) / n


def overall_average_accuracy(m: AccuracyMatrix) -> float:
    """Mean of the per-scene stage averages A_i."""
    n = m.n_scenes
    return sum(average_accuracy(m, i) for i in range(1, n + 1)) / n


def confidence_interval_95(values: list[float]) -> tuple[float, float]:
    """Student-t 95% interval: (mean, half width) from >= 2 samples."""
    n = len(values)
    if n < 2:
        raise InsufficientSamplesError(f"need at least 2 values, got {n}")
    arr = np.asarray(values, dtype=float)
    if float(arr.min()) == float(arr.max()):
        return float(arr[0]), 0.0  # keep zero-variance inputs exactly at width 0
    mean = float(arr.mean())
    s = float(arr.std(ddof=1))
    half = float(stats.t.ppf(0.975, n - 1) * s / math.sqrt(n))
    return mean, half


def class_distribution(buf: Buffer) -> dict[SceneId, int]:
    """Stored-entry count per observed scene; sums to the buffer occupancy."""
    return {scene: buf.per_class_count.get(scene, 0) for scene in sorted(buf.observed_count)}
