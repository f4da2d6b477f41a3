import csv

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buffcs.buffering import Buffer, Strategy, observe
from buffcs.core import Instance, RngHandle
from buffcs.errors import EmptyTestSetError
from buffcs.harness import stratified_split
from buffcs.localizer import (
    LocalizerConfig,
    evaluate_scene,
    jaccard,
    localize,
    localize_many,
    write_query_results,
)
from buffcs.scenegen import BiasedDwell, SceneSpec, generate_scene


def _frame(scene, idx, l2, l1=(0,)):
    return Instance(scene, idx, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0), frozenset([0]),
                    labels=(frozenset(l1), frozenset(l2)))


CFG = LocalizerConfig()


def test_self_match_is_perfect():
    q = _frame(0, 3, [1, 2, 3])
    r = localize(q, [_frame(0, 9, [5]), q], CFG)
    assert r.success and r.best_overlap == 1.0 and r.best_match == (0, 3)


def test_empty_memory_fails():
    r = localize(_frame(0, 0, [1]), [], CFG)
    assert not r.success and r.best_match is None and r.best_overlap == 0.0


def test_cross_scene_overlap_is_zero():
    q = _frame(0, 0, [1, 2])
    r = localize(q, [_frame(1, 5, [1, 2])], CFG)
    assert not r.success
    assert r.best_overlap == 0.0


def test_scene_match_requirement_toggle():
    q = _frame(0, 0, [1, 2])
    lenient = LocalizerConfig(require_scene_match=False)
    r = localize(q, [_frame(1, 5, [1, 2])], lenient)
    assert not r.success  # cross-scene sets are disjoint, overlap stays 0


def test_jaccard_values():
    assert jaccard(frozenset([1, 2]), frozenset([2, 3])) == 1 / 3
    assert jaccard(frozenset(), frozenset()) == 0.0


@given(a=st.frozensets(st.integers(0, 30)), b=st.frozensets(st.integers(0, 30)))
@settings(max_examples=200, deadline=None)
def test_jaccard_symmetric_and_bounded(a, b):
    assert jaccard(a, b) == jaccard(b, a)
    assert 0.0 <= jaccard(a, b) <= 1.0


def _random_instances(rng, scene, count, label_pool=40, size=6):
    out = []
    for i in range(count):
        l2 = frozenset(rng.uniform_index(label_pool) for _ in range(size))
        out.append(_frame(scene, i, l2 or [0]))
    return out


def test_vectorized_matches_reference():
    rng = RngHandle(0, "vec")
    for case in range(20):
        memory = (
            _random_instances(rng, 0, 15)
            + _random_instances(rng, 1, 10)
            + _random_instances(rng, 2, 5)
        )
        queries = _random_instances(rng, 0, 8) + _random_instances(rng, 1, 6)
        for cfg in (CFG, LocalizerConfig(jaccard_threshold=0.05),
                    LocalizerConfig(require_scene_match=False)):
            fast = localize_many(queries, memory, cfg)
            for q, f in zip(queries, fast):
                ref = localize(q, memory, cfg)
                assert f.success == ref.success
                assert f.best_overlap == ref.best_overlap
                assert f.best_match == ref.best_match


def test_evaluate_scene_matches_brute_force_on_split():
    spec = SceneSpec(scene_id=0, extent=(2.5, 2.5, 1.5), point_count=400,
                     trajectory=BiasedDwell(0.8), frames=120, view_radius=0.5, stream="eval")
    scene = generate_scene(spec, RngHandle(1, "eval"))
    memory, test = stratified_split(scene.frames)
    acc = evaluate_scene(test, memory, CFG)
    brute = sum(localize(q, memory, CFG).success for q in test) / len(test)
    assert acc == brute
    assert acc > 0.9  # neighbors along the trajectory overlap strongly


def test_memory_monotonicity():
    rng = RngHandle(2, "mono")
    memory = _random_instances(rng, 0, 10)
    extra = _random_instances(rng, 0, 10)
    queries = _random_instances(rng, 0, 20)
    for q in queries:
        small = localize(q, memory, CFG)
        grown = localize(q, memory + extra, CFG)
        assert grown.best_overlap >= small.best_overlap
        assert grown.success >= small.success  # success never flips off


def test_threshold_monotonicity():
    rng = RngHandle(3, "tau")
    memory = _random_instances(rng, 0, 12)
    queries = _random_instances(rng, 0, 30)
    accs = []
    for tau in (0.1, 0.3, 0.5, 0.7, 0.9):
        cfg = LocalizerConfig(jaccard_threshold=tau)
        accs.append(sum(localize(q, memory, cfg).success for q in queries) / len(queries))
    assert all(a >= b for a, b in zip(accs, accs[1:]))


def test_empty_test_set_rejected():
    with pytest.raises(EmptyTestSetError):
        evaluate_scene([], [_frame(0, 0, [1])], CFG)


def test_threshold_validation():
    with pytest.raises(ValueError):
        LocalizerConfig(jaccard_threshold=0.0)
    with pytest.raises(ValueError):
        LocalizerConfig(jaccard_threshold=1.5)


def test_coverage_buffer_beats_balance_on_survey_queries():
    # paired seeds: queries outside the dwell region succeed at least as often
    # against the coverage-aware buffer as against the class-balanced one
    wins = 0
    n_seeds = 12
    for seed in range(n_seeds):
        spec = SceneSpec(scene_id=0, extent=(3.0, 3.0, 2.0), point_count=1500,
                         trajectory=BiasedDwell(0.85, ((0.0, 0.0, 0.0), (0.5, 0.5, 1.0))),
                         frames=700, view_radius=0.55, stream="pair")
        scene = generate_scene(spec, RngHandle(seed, "pair"))
        train, test = stratified_split(scene.frames)
        outside = [q for q in test if q.position[0] > 1.5 + 0.55 or q.position[1] > 1.5 + 0.55]
        if not outside:
            continue
        rates = {}
        for strategy in (Strategy.CLASS_BALANCE, Strategy.BUFF_CS):
            buf = Buffer(48)
            rng = RngHandle(seed, f"pair/{strategy.value}")
            for inst in train:
                observe(buf, strategy, inst, scene.hierarchy, rng)
            memory = [e.instance for e in buf.entries]
            rates[strategy] = evaluate_scene(outside, memory, CFG)
        wins += rates[Strategy.BUFF_CS] >= rates[Strategy.CLASS_BALANCE]
    assert wins >= int(0.75 * n_seeds)


def test_query_results_csv(tmp_path):
    queries = [_frame(0, 0, [1, 2]), _frame(0, 1, [9])]
    memory = [_frame(0, 5, [1, 2])]
    results = localize_many(queries, memory, CFG)
    path = tmp_path / "queries.csv"
    write_query_results(path, queries, results)
    with path.open() as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0] == {"scene": "0", "frame_index": "0", "success": "1",
                       "best_overlap": "1", "matched_scene": "0"}
    assert rows[1]["success"] == "0"
