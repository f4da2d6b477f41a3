import csv

import numpy as np
import pytest

from buffcs.core import RngHandle
from buffcs.errors import BadPermutationError, EmptySceneError
from buffcs.scenegen import (
    BiasedDwell,
    RoomLoop,
    SceneSpec,
    SweepGrid,
    generate_scene,
    make_stream,
    write_frames_csv,
)


def test_single_point_single_frame_forced_observation():
    spec = SceneSpec(scene_id=0, extent=(2.0, 2.0, 2.0), point_count=1,
                     trajectory=SweepGrid(), frames=1, view_radius=0.3, stream="one")
    scene = generate_scene(spec, RngHandle(0, "one"))
    assert len(scene.frames) == 1
    assert scene.frames[0].observed_points == frozenset([0])


def test_zero_points_rejected():
    with pytest.raises(EmptySceneError):
        SceneSpec(scene_id=0, point_count=0)


def test_total_visibility_covers_every_coarse_label():
    spec = SceneSpec(scene_id=0, extent=(2.0, 2.0, 1.0), point_count=150,
                     trajectory=SweepGrid(), frames=40, view_radius=10.0, stream="all")
    scene = generate_scene(spec, RngHandle(1, "all"))
    full = frozenset(range(scene.hierarchy.level_sizes[0]))
    for inst in scene.frames:
        assert inst.labels[0] == full


def test_biased_dwell_front_half_containment():
    # dwell 0.9 in the front half: at least 85% of frames observe only
    # front-half points, counted directly over 50 seeds
    total = fully_front = 0
    for seed in range(50):
        spec = SceneSpec(scene_id=0, extent=(3.0, 3.0, 2.0), point_count=300,
                         trajectory=BiasedDwell(0.9, ((0.0, 0.0, 0.0), (1.0, 0.5, 1.0))),
                         frames=120, view_radius=0.6, stream="dwell")
        scene = generate_scene(spec, RngHandle(seed, "dwell"))
        half_y = 1.5
        for inst in scene.frames:
            total += 1
            ys = scene.points[sorted(inst.observed_points), 1]
            fully_front += bool(np.all(ys <= half_y + 1e-9))
    assert fully_front / total >= 0.85


def test_visibility_matches_brute_force():
    spec = SceneSpec(scene_id=0, extent=(2.0, 2.0, 1.5), point_count=200,
                     trajectory=BiasedDwell(0.7), frames=60, view_radius=0.5, stream="vis")
    scene = generate_scene(spec, RngHandle(2, "vis"))
    for inst in scene.frames:
        cam = np.asarray(inst.position)
        d = np.linalg.norm(scene.points - cam, axis=1)
        expected = frozenset(np.nonzero(d <= spec.view_radius)[0].tolist())
        assert inst.observed_points == expected
        assert len(inst.observed_points) >= 1


def test_tiny_radius_still_observes_after_repositioning():
    spec = SceneSpec(scene_id=0, extent=(4.0, 4.0, 3.0), point_count=10,
                     trajectory=SweepGrid(), frames=25, view_radius=0.05, stream="tiny")
    scene = generate_scene(spec, RngHandle(3, "tiny"))
    for inst in scene.frames:
        cam = np.asarray(inst.position)
        d = np.linalg.norm(scene.points - cam, axis=1)
        assert inst.observed_points == frozenset(np.nonzero(d <= spec.view_radius)[0].tolist())
        assert len(inst.observed_points) >= 1


def test_generation_deterministic():
    spec = SceneSpec(scene_id=2, point_count=400, frames=100, stream="det")
    a = generate_scene(spec, RngHandle(7, "det"))
    b = generate_scene(spec, RngHandle(7, "det"))
    assert np.array_equal(a.points, b.points)
    assert [f.position for f in a.frames] == [f.position for f in b.frames]
    assert [f.observed_points for f in a.frames] == [f.observed_points for f in b.frames]


def test_orientations_are_unit_quaternions():
    spec = SceneSpec(scene_id=0, point_count=100, frames=50,
                     trajectory=RoomLoop(loops=2), view_radius=1.0, stream="quat")
    scene = generate_scene(spec, RngHandle(4, "quat"))
    for inst in scene.frames:
        assert abs(sum(c * c for c in inst.orientation) - 1.0) <= 1e-9


def test_sweep_exposes_new_labels_late():
    # serpentine rows progress across the box: some coarse label appears only
    # in the second half of the stream
    spec = SceneSpec(scene_id=0, extent=(3.0, 3.0, 1.5), point_count=800,
                     trajectory=SweepGrid(), frames=200, view_radius=0.5, stream="late")
    scene = generate_scene(spec, RngHandle(5, "late"))
    first_seen = {}
    for inst in scene.frames:
        for lab in inst.labels[0]:
            first_seen.setdefault(lab, inst.frame_index)
    appearance = sorted(first_seen.values())
    assert appearance[0] == 0
    assert appearance[-1] >= spec.frames // 2


def test_make_stream_single_scene_equals_frames():
    spec = SceneSpec(scene_id=0, point_count=50, frames=20, view_radius=1.0, stream="s")
    scene = generate_scene(spec, RngHandle(6, "s"))
    out = list(make_stream([scene], [0]))
    assert [inst for _, inst in out] == scene.frames
    assert {t for t, _ in out} == {0}


def test_make_stream_order_and_boundaries():
    scenes = []
    for sid, frames in ((0, 12), (1, 8)):
        spec = SceneSpec(scene_id=sid, point_count=40, frames=frames, view_radius=1.0, stream=f"s{sid}")
        scenes.append(generate_scene(spec, RngHandle(sid, f"s{sid}")))
    forward = list(make_stream(scenes, [0, 1]))
    swapped = list(make_stream(scenes, [1, 0]))
    assert [i for _, i in forward] == scenes[0].frames + scenes[1].frames
    assert [i for _, i in swapped] == scenes[1].frames + scenes[0].frames
    assert [t for t, _ in forward] == [0] * 12 + [1] * 8


def test_make_stream_rejects_bad_permutations():
    spec = SceneSpec(scene_id=0, point_count=30, frames=5, view_radius=1.0, stream="p")
    scene = generate_scene(spec, RngHandle(8, "p"))
    with pytest.raises(BadPermutationError):
        list(make_stream([scene], [0, 0]))
    with pytest.raises(BadPermutationError):
        list(make_stream([scene], [1]))


def test_stream_length_counts():
    scenes = []
    for sid in range(3):
        spec = SceneSpec(scene_id=sid, point_count=30, frames=10, view_radius=1.0, stream=f"c{sid}")
        scenes.append(generate_scene(spec, RngHandle(sid, f"c{sid}")))
    out = list(make_stream(scenes, [2, 0, 1]))
    assert len(out) == 30
    boundaries = [k for k in range(1, len(out)) if out[k][0] != out[k - 1][0]]
    assert len(boundaries) == 2


def test_frames_csv_export(tmp_path):
    spec = SceneSpec(scene_id=0, point_count=40, frames=6, view_radius=1.0, stream="csv")
    scene = generate_scene(spec, RngHandle(9, "csv"))
    path = tmp_path / "frames.csv"
    write_frames_csv(scene, path)
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert rows[0]["frame_index"] == "0"
    ids = {int(v) for v in rows[2]["observed_point_ids"].split(";")}
    assert ids == set(scene.frames[2].observed_points)


def test_dwell_fraction_validation():
    with pytest.raises(ValueError):
        BiasedDwell(1.2)
