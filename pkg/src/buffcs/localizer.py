"""Label-overlap localization oracle.

Stands in for a trained pose regressor at desk scale: a query frame counts
as localized when some memory frame of the same scene shares enough of its
fine-level label set (Jaccard overlap at the configured level). Because
labels are scene-scoped, frames from different scenes always overlap 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Instance, SceneId
from .errors import EmptyTestSetError


@dataclass(frozen=True)
class LocalizerConfig:
    overlap_level: int = 2
    jaccard_threshold: float = 0.3
    require_scene_match: bool = True

    def __post_init__(self) -> None:
        if not 0.0 < self.jaccard_threshold <= 1.0:
            raise ValueError("jaccard_threshold must be in (0, 1]")


@dataclass(slots=True)
class LocalizeResult:
    success: bool
    best_match: tuple[SceneId, int] | None
    best_overlap: float


def jaccard(a: frozenset, b: frozenset) -> float:
    """|a & b| / |a | b|; 0 for two empty sets."""
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def _overlap(query: Instance, frame: Instance, level: int) -> float:
    if frame.scene != query.scene:
        return 0.0  # labels are scene-scoped; cross-scene sets are disjoint
    return jaccard(query.labels[level - 1], frame.labels[level - 1])


def localize(query: Instance, memory: Sequence[Instance], cfg: LocalizerConfig) -> LocalizeResult:
    """Reference single-query matcher: first-best frame in memory order."""
    best_overlap = -1.0
    best: Instance | None = None
    for frame in memory:
        ov = _overlap(query, frame, cfg.overlap_level)
        if ov > best_overlap:
            best_overlap = ov
            best = frame
    if best is None:
        return LocalizeResult(False, None, 0.0)
    success = best_overlap >= cfg.jaccard_threshold and (
        not cfg.require_scene_match or best.scene == query.scene
    )
    return LocalizeResult(success, (best.scene, best.frame_index), best_overlap)


def localize_many(
    queries: Sequence[Instance],
    memory: Sequence[Instance],
    cfg: LocalizerConfig,
) -> list[LocalizeResult]:
    """Vectorized batch matcher, observationally identical to :func:`localize`.

    Only same-scene memory frames can overlap a query, so overlaps are
    computed per scene with a boolean label-incidence matrix product; the
    all-zero case falls back to the reference tie-break (first memory frame).
    """
    if not memory:
        return [LocalizeResult(False, None, 0.0) for _ in queries]
    level = cfg.overlap_level
    results: list[LocalizeResult] = [None] * len(queries)  # type: ignore[list-item]

    by_scene: dict[SceneId, list[int]] = {}
    for qi, q in enumerate(queries):
        by_scene.setdefault(q.scene, []).append(qi)

    mem_idx_by_scene: dict[SceneId, list[int]] = {}
    for mi, m in enumerate(memory):
        mem_idx_by_scene.setdefault(m.scene, []).append(mi)

    fallback = (memory[0].scene, memory[0].frame_index)
    for scene, q_indices in by_scene.items():
        m_indices = mem_idx_by_scene.get(scene, [])
        if not m_indices:
            for qi in q_indices:
                results[qi] = LocalizeResult(False, fallback, 0.0)
            continue
        label_ids: dict[int, int] = {}
        q_sets = [queries[qi].labels[level - 1] for qi in q_indices]
        m_sets = [memory[mi].labels[level - 1] for mi in m_indices]
        for s in q_sets:
            for lab in s:
                label_ids.setdefault(lab, len(label_ids))
        for s in m_sets:
            for lab in s:
                label_ids.setdefault(lab, len(label_ids))
        q_mat = np.zeros((len(q_sets), len(label_ids)))
        for r, s in enumerate(q_sets):
            q_mat[r, [label_ids[lab] for lab in s]] = 1.0
        m_mat = np.zeros((len(m_sets), len(label_ids)))
        for r, s in enumerate(m_sets):
            m_mat[r, [label_ids[lab] for lab in s]] = 1.0
        inter = q_mat @ m_mat.T
        union = q_mat.sum(axis=1)[:, None] + m_mat.sum(axis=1)[None, :] - inter
        overlap = np.where(union > 0, inter / np.maximum(union, 1.0), 0.0)
        best_col = np.argmax(overlap, axis=1)
        for row, qi in enumerate(q_indices):
            ov = float(overlap[row, best_col[row]])
            if ov <= 0.0:
                # reference argmax over all-zero overlaps lands on memory[0]
                results[qi] = LocalizeResult(False, fallback, 0.0)
                continue
            best_frame = memory[m_indices[int(best_col[row])]]
            success = ov >= cfg.jaccard_threshold and (
                not cfg.require_scene_match or best_frame.scene == queries[qi].scene
            )
            results[qi] = LocalizeResult(success, (best_frame.scene, best_frame.frame_index), ov)
    return results


def evaluate_scene(test_frames: Sequence[Instance], memory: Sequence[Instance], cfg: LocalizerConfig) -> float:
    """Fraction of test frames successfully localized against ``memory``."""
    if not test_frames:
        raise EmptyTestSetError("cannot evaluate an empty test set")
    results = localize_many(test_frames, memory, cfg)
    return sum(r.success for r in results) / len(results)


def write_query_results(
    path: str | Path,
    queries: Sequence[Instance],
    results: Sequence[LocalizeResult],
) -> None:
    """Per-query CSV: scene, frame_index, success, best_overlap, matched_scene."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scene", "frame_index", "success", "best_overlap", "matched_scene"])
        for q, r in zip(queries, results):
            writer.writerow(
                [
                    q.scene,
                    q.frame_index,
                    int(r.success),
                    format(r.best_overlap, ".10g"),
                    "" if r.best_match is None else r.best_match[0],
                ]
            )
