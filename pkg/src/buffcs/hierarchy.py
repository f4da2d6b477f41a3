"""Coarse-to-fine label hierarchies over a scene's 3D points.

A hierarchy assigns every point one cluster label per level, with nested
membership: points sharing a level-l label share all coarser labels. Level
cardinalities grow with depth, bounded by ``branching ** level`` and by the
point count. The coarsest level is what makes the buffer's coverage test
cheap: a frame's level-1 label set is tiny compared to its point set.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .core import PointId, RngHandle, SceneId
from .errors import EmptySceneError, UnknownPointError


class ClusterLabel(NamedTuple):
    """A scene-scoped cluster label at one hierarchy level."""

    scene: SceneId
    level: int
    index: int


class LabelHierarchy:
    """Immutable per-scene clustering of points into L nested levels.

    ``assignment`` is an (n_points, levels) int array of per-level cluster
    indices; ``centers[l-1]`` holds the level-l centroids. ``lookups`` is a
    diagnostics counter of assignment-table reads (approximate under
    concurrent use; everything else is safe to share between threads).
    """

    __slots__ = ("scene", "levels", "branching", "assignment", "centers", "level_sizes", "lookups")

    def __init__(
        self,
        scene: SceneId,
        levels: int,
        branching: int,
        assignment: np.ndarray,
        centers: list[np.ndarray],
    ) -> None:
        self.scene = scene
        self.levels = levels
        self.branching = branching
        self.assignment = assignment
        self.centers = centers
        self.level_sizes = tuple(int(assignment[:, l].max()) + 1 for l in range(levels))
        self.lookups = 0

    @property
    def point_count(self) -> int:
        return self.assignment.shape[0]

    def label_count(self, level: int) -> int:
        """Number of realized labels at ``level`` (empty clusters compacted)."""
        self._check_level(level)
        return self.level_sizes[level - 1]

    def label_indices(self, points: Iterable[PointId], level: int) -> frozenset[int]:
        """Scene-scoped level-``level`` cluster indices touched by ``points``."""
        self._check_level(level)
        ids = np.fromiter(points, dtype=np.int64)
        if ids.size == 0:
            return frozenset()
        if ids.min() < 0 or ids.max() >= self.point_count:
            bad = ids[(ids < 0) | (ids >= self.point_count)][0]
            raise UnknownPointError(f"point id {bad} outside [0, {self.point_count})")
        self.lookups += ids.size
        return frozenset(np.unique(self.assignment[ids, level - 1]).tolist())

    def _check_level(self, level: int) -> None:
        if not 1 <= level <= self.levels:
            raise ValueError(f"level {level} outside [1, {self.levels}]")

    def to_dict(self) -> dict:
        return {
            "scene": self.scene,
            "levels": self.levels,
            "branching": self.branching,
            "centers": [c.tolist() for c in self.centers],
            "assignment": self.assignment.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LabelHierarchy":
        assignment = np.asarray(doc["assignment"], dtype=np.int32)
        if assignment.ndim != 2 or assignment.shape[0] == 0:
            raise EmptySceneError("hierarchy document has no point assignments")
        centers = [np.asarray(c, dtype=float) for c in doc["centers"]]
        return cls(int(doc["scene"]), int(doc["levels"]), int(doc["branching"]), assignment, centers)

    def save_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load_json(cls, path: str | Path) -> "LabelHierarchy":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _kmeans(points: np.ndarray, k: int, rng: RngHandle, max_iter: int = 25, tol: float = 1e-6) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns compacted labels.

    Empty clusters are dropped and indices renumbered in center order, so the
    result uses a dense range with every label holding at least one point.
    """
    n = points.shape[0]
    if n <= 1 or k < 2:
        return np.zeros(n, dtype=np.int32)

    # k-means++ seeding driven by the caller's stream
    centers = np.empty((min(k, n), 3))
    centers[0] = points[rng.uniform_index(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    m = 1
    for _ in range(min(k, n) - 1):
        total = float(d2.sum())
        if total <= 0.0:
            break  # remaining points coincide with chosen centers
        cum = np.cumsum(d2)
        idx = int(np.searchsorted(cum, rng.uniform() * total, side="right"))
        idx = min(idx, n - 1)
        centers[m] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[m]) ** 2, axis=1))
        m += 1
    centers = centers[:m]

    labels = np.zeros(n, dtype=np.int32)
    for _ in range(max_iter):
        dist = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        labels = np.argmin(dist, axis=1).astype(np.int32)
        moved = 0.0
        for j in range(centers.shape[0]):
            members = points[labels == j]
            if members.shape[0] == 0:
                continue  # keep the stale center; it may recapture points
            new = members.mean(axis=0)
            moved = max(moved, float(np.max(np.abs(new - centers[j]))))
            centers[j] = new
        if moved < tol:
            break

    used = np.unique(labels)
    remap = np.full(centers.shape[0], -1, dtype=np.int32)
    remap[used] = np.arange(used.size, dtype=np.int32)
    return remap[labels]


def build_hierarchy(
    points: np.ndarray | list,
    levels: int = 2,
    branching: int = 25,
    rng: RngHandle | None = None,
    scene: SceneId = 0,
) -> LabelHierarchy:
    """Cluster ``points`` recursively into ``levels`` nested label layers.

    Each level splits every parent cluster into up to ``branching`` k-means
    children; clusters smaller than the branching factor fan out as far as
    their points allow (down to singletons), and a single point's label
    simply repeats at finer levels. Deterministic given the rng handle.
    """
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptySceneError("cannot build a hierarchy over zero points")
    pts = pts.reshape(-1, 3)
    if levels < 1:
        raise ValueError("levels must be >= 1")
    if branching < 2:
        raise ValueError("branching must be >= 2")
    if rng is None:
        rng = RngHandle(0, f"hierarchy-{scene}")

    n = pts.shape[0]
    assignment = np.zeros((n, levels), dtype=np.int32)
    centers: list[np.ndarray] = []
    groups: list[np.ndarray] = [np.arange(n)]
    for level in range(levels):
        next_groups: list[np.ndarray] = []
        for g in groups:
            if g.size >= 2:
                sub = _kmeans(pts[g], min(branching, g.size), rng)
                for j in range(int(sub.max()) + 1):
                    next_groups.append(g[sub == j])
            else:
                next_groups.append(g)
        for idx, g in enumerate(next_groups):
            assignment[g, level] = idx
        centers.append(np.stack([pts[g].mean(axis=0) for g in next_groups]))
        groups = next_groups

    return LabelHierarchy(scene, levels, branching, assignment, centers)


def labels_of(h: LabelHierarchy, points: Iterable[PointId], level: int) -> frozenset[ClusterLabel]:
    """The set of level-``level`` labels touched by ``points``."""
    return frozenset(ClusterLabel(h.scene, level, i) for i in h.label_indices(points, level))
