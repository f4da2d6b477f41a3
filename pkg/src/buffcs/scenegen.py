"""Synthetic scenes: point clouds, camera trajectories, and frame streams.

Scenes are axis-aligned boxes of uniformly scattered points traversed by a
camera trajectory; each frame observes exactly the points within the view
radius of the camera. Trajectory families control the spatial structure of
the stream -- the dwell-biased family concentrates most frames in one
sub-region and surveys the rest late, which is the regime where coverage-
aware buffering separates from plain class balancing.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .core import Instance, RngHandle, SceneId
from .errors import BadPermutationError, EmptySceneError
from .hierarchy import LabelHierarchy, build_hierarchy


@dataclass(frozen=True)
class SweepGrid:
    """Serpentine sweep over the box at fixed height; reaches far rows late."""

    rows: int = 0  # 0 = auto from frame count


@dataclass(frozen=True)
class RoomLoop:
    """Elliptic circuit around the box center with a gentle vertical bob;
    ``loops`` full revolutions are spread over the frame budget."""

    loops: int = 1


@dataclass(frozen=True)
class BiasedDwell:
    """Random-walk dwell inside a sub-box for most frames, then a serpentine
    survey sweep over the whole box. ``dwell_region`` is given as fractional
    corners of the scene box; the walk keeps the camera a view radius away
    from the region boundary so dwell frames observe dwell-region points
    only, while the late survey pass exposes the rest of the scene."""

    dwell_fraction: float = 0.9
    dwell_region: tuple[tuple[float, float, float], tuple[float, float, float]] = (
        (0.0, 0.0, 0.0),
        (1.0, 0.5, 1.0),
    )

    def __post_init__(self) -> None:
        if not 0.0 <= self.dwell_fraction <= 1.0:
            raise ValueError("dwell_fraction must be in [0, 1]")


Trajectory = SweepGrid | RoomLoop | BiasedDwell


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for one synthetic scene."""

    scene_id: SceneId = 0
    extent: tuple[float, float, float] = (3.0, 3.0, 2.0)
    point_count: int = 2000
    trajectory: Trajectory = field(default_factory=BiasedDwell)
    frames: int = 1000
    view_radius: float = 0.7
    levels: int = 2
    branching: int = 25
    stream: str = ""  # rng sub-stream tag; defaults to "scene-<id>"

    def __post_init__(self) -> None:
        if self.point_count < 1:
            raise EmptySceneError("a scene needs at least one point")
        if self.frames < 1:
            raise ValueError("a scene needs at least one frame")
        if self.view_radius <= 0:
            raise ValueError("view_radius must be positive")

    @property
    def stream_tag(self) -> str:
        return self.stream or f"scene-{self.scene_id}"


@dataclass
class Scene:
    """Generated scene: points, hierarchy, and the trajectory-ordered frames."""

    id: SceneId
    points: np.ndarray
    hierarchy: LabelHierarchy
    frames: list[Instance]
    spec: SceneSpec


def _look_quaternion(forward: np.ndarray) -> tuple[float, float, float, float]:
    """Unit quaternion turning +x onto ``forward`` (yaw about z, then pitch)."""
    n = float(np.linalg.norm(forward))
    if n < 1e-12:
        return (1.0, 0.0, 0.0, 0.0)
    f = forward / n
    yaw = math.atan2(f[1], f[0])
    pitch = math.atan2(-f[2], math.hypot(f[0], f[1]))
    cy, sy = math.cos(yaw / 2), math.sin(yaw / 2)
    cp, sp = math.cos(pitch / 2), math.sin(pitch / 2)
    # q = qz(yaw) * qy(pitch)
    q = (cy * cp, -sy * sp, cy * sp, sy * cp)
    norm = math.sqrt(sum(c * c for c in q))
    return tuple(c / norm for c in q)


def _serpentine(extent: tuple[float, float, float], frames: int, rows: int = 0) -> np.ndarray:
    """Boustrophedon pass over the box at mid height: rows advance in y,
    alternate rows sweep x in opposite directions, so far rows appear late."""
    ex, ey, ez = extent
    if rows < 1:
        rows = max(2, int(round(math.sqrt(frames / 2))))
    rows = min(rows, frames) if frames > 1 else 1
    margin = 0.05
    z = 0.55 * ez
    ys = np.linspace(margin * ey, (1 - margin) * ey, rows) if rows > 1 else np.array([ey / 2])
    per_row = [frames // rows + (1 if r < frames % rows else 0) for r in range(rows)]
    pos = np.empty((frames, 3))
    i = 0
    for r, count in enumerate(per_row):
        if count == 0:
            continue
        xs = np.linspace(margin * ex, (1 - margin) * ex, count) if count > 1 else np.array([ex / 2])
        if r % 2 == 1:
            xs = xs[::-1]
        pos[i : i + count, 0] = xs
        pos[i : i + count, 1] = ys[r]
        pos[i : i + count, 2] = z
        i += count
    return pos


def _sweep_positions(spec: SceneSpec) -> np.ndarray:
    traj = spec.trajectory
    rows = traj.rows if isinstance(traj, SweepGrid) else 0
    return _serpentine(spec.extent, spec.frames, rows)


def _loop_positions(spec: SceneSpec) -> np.ndarray:
    ex, ey, ez = spec.extent
    loops = spec.trajectory.loops if isinstance(spec.trajectory, RoomLoop) else 1
    theta = 2 * math.pi * loops * np.arange(spec.frames) / spec.frames
    pos = np.empty((spec.frames, 3))
    pos[:, 0] = ex / 2 + 0.35 * ex * np.cos(theta)
    pos[:, 1] = ey / 2 + 0.35 * ey * np.sin(theta)
    pos[:, 2] = ez / 2 + 0.1 * ez * np.sin(2 * theta)
    return pos


def _dwell_positions(spec: SceneSpec, rng: RngHandle) -> np.ndarray:
    traj = spec.trajectory
    extent = np.asarray(spec.extent)
    lo = np.asarray(traj.dwell_region[0]) * extent
    hi = np.asarray(traj.dwell_region[1]) * extent
    # erode so the whole view ball stays inside the dwell region
    elo = lo + spec.view_radius
    ehi = hi - spec.view_radius
    mid = (lo + hi) / 2
    collapsed = elo >= ehi
    elo[collapsed] = mid[collapsed]
    ehi[collapsed] = mid[collapsed]

    n_dwell = int(round(traj.dwell_fraction * spec.frames))
    pos = np.empty((spec.frames, 3))
    if n_dwell:
        sigma = 0.08 * float(np.linalg.norm(extent))
        steps = sigma * rng.normals(3 * n_dwell).reshape(n_dwell, 3)
        cur = (elo + ehi) / 2
        for i in range(n_dwell):
            cur = cur + steps[i]
            # reflect back into the eroded box
            for a in range(3):
                span = ehi[a] - elo[a]
                if span <= 0:
                    cur[a] = elo[a]
                    continue
                t = (cur[a] - elo[a]) % (2 * span)
                cur[a] = elo[a] + (t if t <= span else 2 * span - t)
            pos[i] = cur
    n_survey = spec.frames - n_dwell
    if n_survey:
        pos[n_dwell:] = _serpentine(spec.extent, n_survey)
    return pos


def generate_scene(spec: SceneSpec, rng: RngHandle) -> Scene:
    """Build one scene: scatter points, build the hierarchy, walk the
    trajectory, and materialize frames with radius-based visibility.

    Frames that would observe nothing are pulled toward the nearest point so
    every frame observes at least one point; visibility is recomputed after
    the move, so observed sets always equal the within-radius point set.
    """
    extent = np.asarray(spec.extent, dtype=float)
    points = rng.uniforms(3 * spec.point_count).reshape(spec.point_count, 3) * extent
    hierarchy = build_hierarchy(points, spec.levels, spec.branching, rng, scene=spec.scene_id)

    traj = spec.trajectory
    if isinstance(traj, SweepGrid):
        pos = _sweep_positions(spec)
    elif isinstance(traj, RoomLoop):
        pos = _loop_positions(spec)
    elif isinstance(traj, BiasedDwell):
        pos = _dwell_positions(spec, rng)
    else:
        raise TypeError(f"unknown trajectory {traj!r}")

    tree = cKDTree(points)
    frames: list[Instance] = []
    assignment = hierarchy.assignment
    for i in range(spec.frames):
        cam = pos[i]
        seen = tree.query_ball_point(cam, spec.view_radius)
        if not seen:
            dist, nearest = tree.query(cam)
            if dist > 0:
                cam = points[nearest] + (cam - points[nearest]) * (0.9 * spec.view_radius / dist)
            else:
                cam = points[nearest]
            pos[i] = cam
            seen = tree.query_ball_point(cam, spec.view_radius)
        ids = np.sort(np.asarray(seen, dtype=np.int64))
        labels = tuple(
            frozenset(np.unique(assignment[ids, l]).tolist()) for l in range(spec.levels)
        )
        target = pos[i + 1] if i + 1 < spec.frames else (extent / 2)
        forward = np.asarray(target) - cam
        frames.append(
            Instance(
                scene=spec.scene_id,
                frame_index=i,
                position=tuple(float(c) for c in cam),
                orientation=_look_quaternion(forward),
                observed_points=frozenset(ids.tolist()),
                labels=labels,
            )
        )
    return Scene(spec.scene_id, points, hierarchy, frames, spec)


StreamOrder = Sequence[SceneId]


def make_stream(scenes: Sequence[Scene], order: StreamOrder) -> Iterator[tuple[int, Instance]]:
    """Yield ``(task_index, instance)`` for all frames of each scene in
    ``order``; a change of task index marks a task boundary."""
    by_id = {s.id: s for s in scenes}
    if sorted(order) != sorted(by_id):
        raise BadPermutationError(f"order {list(order)} does not permute scene ids {sorted(by_id)}")
    for task, sid in enumerate(order):
        for inst in by_id[sid].frames:
            yield task, inst


def write_frames_csv(scene: Scene, path: str | Path) -> None:
    """Frame table: pose plus the semicolon-joined observed point ids."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_index", "cam_x", "cam_y", "cam_z", "qw", "qx", "qy", "qz", "observed_point_ids"])
        for inst in scene.frames:
            writer.writerow(
                [
                    inst.frame_index,
                    *(format(c, ".10g") for c in inst.position),
                    *(format(c, ".10g") for c in inst.orientation),
                    ";".join(str(p) for p in sorted(inst.observed_points)),
                ]
            )
