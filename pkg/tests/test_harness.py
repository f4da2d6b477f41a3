import csv
import json

import numpy as np
import pytest

from buffcs.buffering import Strategy
from buffcs.errors import BadPermutationError, ConfigError
from buffcs.harness import (
    ExperimentConfig,
    RunRecord,
    config_from_dict,
    config_hash,
    config_to_dict,
    default_profile,
    emit_reports,
    generate_scenes,
    resolve_order,
    run_cell,
    run_experiment,
    stratified_split,
)
from buffcs.scenegen import SceneSpec

from conftest import small_profile


def _mini_cfg(**kw):
    base = dict(scene_profile=small_profile(), strategies=[Strategy.RESERVOIR],
                buffer_sizes=[16], seeds=[0])
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(scene_profile=small_profile(), strategies=[])
    with pytest.raises(ConfigError):
        ExperimentConfig(scene_profile=small_profile(), seeds=[])
    with pytest.raises(ConfigError):
        ExperimentConfig(scene_profile=small_profile(), buffer_sizes=[0])
    with pytest.raises(ConfigError):
        ExperimentConfig(scene_profile=small_profile(), replay_mode="both")
    with pytest.raises(ConfigError):
        ExperimentConfig(scene_profile=small_profile() + small_profile())


def test_resolve_order_variants():
    cfg = _mini_cfg()
    assert resolve_order(cfg) == [0, 1, 2]
    cfg.order = [2, 0, 1]
    assert resolve_order(cfg) == [2, 0, 1]
    cfg.order = [0, 0, 1]
    with pytest.raises(BadPermutationError):
        resolve_order(cfg)
    cfg.order = "random(5)"
    shuffled = resolve_order(cfg)
    assert sorted(shuffled) == [0, 1, 2]
    assert shuffled[-1] == 2  # the last scene keeps its slot
    assert resolve_order(cfg) == shuffled


def test_config_round_trip_and_hash():
    cfg = _mini_cfg(replay_trace_steps=3)
    doc = config_to_dict(cfg)
    again = config_to_dict(config_from_dict(json.loads(json.dumps(doc))))
    assert doc == again
    assert config_hash(cfg) == config_hash(config_from_dict(doc))


def test_stratified_split_spreads_test_frames():
    frames = list(range(100))
    train, test = stratified_split(frames)
    assert len(test) == 20
    assert test == list(range(2, 100, 5))
    assert sorted(train + test) == frames


def test_single_scene_cell_matches_joint_memory(small_config):
    cfg = _mini_cfg(scene_profile=small_profile()[:1])
    scenes = generate_scenes(cfg, 0)
    cell = run_cell(cfg, scenes, [0], Strategy.RESERVOIR, 16, 0)
    assert cell.accuracy.n_scenes == 1
    assert len(cell.coverage_history) == 1
    from buffcs.localizer import evaluate_scene

    train, test = stratified_split(scenes[0].frames)
    buf_insts = None  # joint memory includes the buffer and the task's train frames
    a11 = cell.accuracy.get(1, 1)
    assert 0.0 <= a11 <= 1.0
    assert a11 >= evaluate_scene(test, train, cfg.localizer) - 1e-12


def test_without_buffering_collapses_on_past_scene():
    cfg = _mini_cfg(scene_profile=small_profile()[:2], strategies=[Strategy.WITHOUT_BUFFERING])
    scenes = generate_scenes(cfg, 0)
    cell = run_cell(cfg, scenes, [0, 1], Strategy.WITHOUT_BUFFERING, 16, 0)
    assert cell.accuracy.get(1, 2) == 0.0
    assert cell.accuracy.get(1, 1) > 0.0


def test_scene_generation_is_strategy_independent():
    cfg = _mini_cfg()
    a = generate_scenes(cfg, 3)
    b = generate_scenes(cfg, 3)
    for sid in a:
        assert np.array_equal(a[sid].points, b[sid].points)
        assert a[sid].frames == b[sid].frames


def test_run_experiment_and_reports(tmp_path, small_config):
    record = run_experiment(small_config, out_dir=tmp_path)
    assert len(record.cells) == 6  # 3 strategies x 1 size x 2 seeds
    assert not record.failed_cells
    paths = emit_reports(record, tmp_path)
    names = {p.name for p in paths}
    assert {"coverage.csv", "accuracy.csv", "summary.csv", "distribution.csv"} <= names
    assert any(p.suffix == ".png" for p in paths)

    with (tmp_path / "accuracy.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    n = 3
    assert len(rows) == 6 * n * (n + 1) // 2  # one triangular block per cell

    with (tmp_path / "summary.csv").open() as fh:
        summary = list(csv.DictReader(fh))
    coverage_rows = [r for r in summary if r["metric"] == "coverage"]
    accuracy_rows = [r for r in summary if r["metric"] == "accuracy"]
    assert len(coverage_rows) == 3 and len(accuracy_rows) == 3
    assert all(r["ci95_half_width"] != "" for r in coverage_rows)  # two seeds give a CI

    with (tmp_path / "distribution.csv").open() as fh:
        dist = list(csv.DictReader(fh))
    by_cell = {}
    for r in dist:
        key = (r["strategy"], r["buffer_size"], r["seed"])
        by_cell[key] = by_cell.get(key, 0) + int(r["count"])
    assert all(v == 16 for v in by_cell.values())


def test_emit_reports_empty_record(tmp_path):
    cfg = _mini_cfg()
    record = RunRecord(config_to_dict(cfg), config_hash(cfg), [0, 1, 2], {})
    emit_reports(record, tmp_path)
    for name in ("coverage.csv", "accuracy.csv", "summary.csv", "distribution.csv"):
        lines = (tmp_path / name).read_text().splitlines()
        assert len(lines) == 1  # header only


def test_record_round_trip(tmp_path, small_config):
    record = run_experiment(small_config)
    path = tmp_path / "record.json"
    record.save(path)
    loaded = RunRecord.load(path)
    assert loaded.config_hash == record.config_hash
    assert loaded.order == record.order
    assert set(loaded.cells) == set(record.cells)
    key = next(iter(record.cells))
    assert loaded.cells[key].accuracy.to_lists() == record.cells[key].accuracy.to_lists()
    assert loaded.cells[key].coverage_history[-1].average == record.cells[key].coverage_history[-1].average


def test_resume_reuses_completed_cells_byte_identically(tmp_path):
    cfg = _mini_cfg(strategies=[Strategy.RESERVOIR, Strategy.BUFF_CS], seeds=[0, 1])
    full = run_experiment(cfg)
    emit_reports(full, tmp_path / "full")

    partial = RunRecord(full.config, full.config_hash, full.order, dict(full.cells))
    dropped = ("buff_cs", 16, 1)
    del partial.cells[dropped]
    resumed = run_experiment(cfg, resume=partial)
    assert set(resumed.cells) == set(full.cells)
    emit_reports(resumed, tmp_path / "resumed")
    for name in ("coverage.csv", "accuracy.csv", "summary.csv", "distribution.csv"):
        assert (tmp_path / "full" / name).read_bytes() == (tmp_path / "resumed" / name).read_bytes()


def test_parallel_jobs_match_serial(tmp_path):
    cfg = _mini_cfg(seeds=[0, 1])
    serial = run_experiment(cfg, jobs=1)
    parallel = run_experiment(cfg, jobs=2)
    emit_reports(serial, tmp_path / "s")
    emit_reports(parallel, tmp_path / "p")
    for name in ("coverage.csv", "accuracy.csv", "summary.csv", "distribution.csv"):
        assert (tmp_path / "s" / name).read_bytes() == (tmp_path / "p" / name).read_bytes()


def test_decision_log_and_loss_traces(tmp_path):
    cfg = _mini_cfg(strategies=[Strategy.BUFF_CS], decision_log=True, replay_trace_steps=2)
    run_experiment(cfg, out_dir=tmp_path)
    log_path = tmp_path / "logs" / "decisions_buff_cs_16_0.ndjson"
    records = [json.loads(line) for line in log_path.read_text().splitlines()]
    decisions = [r for r in records if r["record"] == "decision"]
    losses = [r for r in records if r["record"] == "loss"]
    total_train = sum(len(stratified_split(s.frames, 5, 2)[0]) for s in generate_scenes(cfg, 0).values())
    assert len(decisions) == total_train
    assert all(0.0 <= r["buffer_coverage_l1"] <= 1.0 for r in decisions)
    assert losses and all(r["mode"] == "img" for r in losses)


def test_rep_mode_stores_payloads_and_snapshots(tmp_path):
    cfg = _mini_cfg(strategies=[Strategy.CLASS_BALANCE], replay_mode="rep",
                    replay_trace_steps=2, export_snapshots=True, decision_log=True)
    record = run_experiment(cfg, out_dir=tmp_path)
    assert not record.failed_cells
    snap = json.loads((tmp_path / "snapshots" / "buffer_class_balance_16_0.json").read_text())
    assert len(snap["entries"]) == 16
    log_path = tmp_path / "logs" / "decisions_class_balance_16_0.ndjson"
    losses = [json.loads(l) for l in log_path.read_text().splitlines() if '"loss"' in l]
    assert losses and all(r["mode"] == "rep" for r in losses)


def test_default_profile_shape():
    profile = default_profile()
    assert len(profile) == 7
    assert {s.scene_id for s in profile} == set(range(7))
    frames = [s.frames for s in profile]
    assert sorted(frames)[:2] == [450, 500]  # two under-represented scenes
    assert all(isinstance(s, SceneSpec) for s in profile)
