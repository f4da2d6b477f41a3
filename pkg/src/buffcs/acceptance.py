"""Acceptance checks: exact-algorithm, oracle-equivalence, and ordering
properties of the buffering strategies, metrics, and harness.

Each check is deterministic (fixed seeds), self-timed against its stated
runtime cap, and returns a result suitable both for the ``verify`` CLI
subcommand and for the pytest acceptance suite. Statistical bounds are
computed inside the checks (chi-square quantiles, binomial three-sigma
envelopes, closed-form expectations), never hard-coded from observed runs.
"""

from __future__ import annotations

import filecmp
import math
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import stats

from .buffering import EXACT_3D, Buffer, DecisionReason, Strategy, coverage_score_factor, observe
from .core import Instance, RngHandle
from .harness import ExperimentConfig, default_profile, generate_scenes, resolve_order, run_cell
from .hierarchy import build_hierarchy
from .metrics import AccuracyMatrix, average_accuracy
from .replay import LossBreakdown, RepresentationPayload, bounded_beta, replay_loss_img, task_loss
from .scenegen import BiasedDwell, RoomLoop, SceneSpec, SweepGrid


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _light_instances(n: int, scene: int = 0) -> list[Instance]:
    return [Instance(scene, i, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0), frozenset([0])) for i in range(n)]


# -- 1: reservoir exactness ------------------------------------------------------


def check_reservoir_exactness(quick: bool = False) -> tuple[bool, str]:
    """Inclusion frequencies match capacity/N (chi-square at alpha 0.01) and
    victim slots are uniform within 3-sigma binomial bounds."""
    t0 = time.time()
    n_seeds = 200 if quick else 2000
    n_stream, capacity = 10_000, 100
    stream = _light_instances(n_stream)
    inclusion = np.zeros(n_stream, dtype=np.int64)
    victims = np.zeros(capacity, dtype=np.int64)
    for seed in range(n_seeds):
        buf = Buffer(capacity)
        rng = RngHandle(seed, "acceptance/reservoir")
        for inst in stream:
            decision = observe(buf, Strategy.RESERVOIR, inst, None, rng)
            if decision.reason is DecisionReason.RESERVOIR_HIT:
                victims[decision.victim_index] += 1
        for entry in buf.entries:
            inclusion[entry.instance.frame_index] += 1

    expected = n_seeds * capacity / n_stream
    chi2, pvalue = stats.chisquare(inclusion, f_exp=expected)
    chi_ok = pvalue >= 0.01

    total_hits = int(victims.sum())
    mean = total_hits / capacity
    sigma = math.sqrt(total_hits * (1 / capacity) * (1 - 1 / capacity))
    worst = float(np.max(np.abs(victims - mean)))
    if quick:
        # gross-error envelope only: the 3-sigma per-slot bound needs the
        # full sample before max-of-100 fluctuations settle inside it
        victim_ok = bool(np.all(victims > 0)) and worst <= 5.0 * sigma
        bound = 5.0 * sigma
    else:
        bound = 3.0 * sigma
        victim_ok = worst <= bound

    elapsed = time.time() - t0
    cap = 60.0
    ok = chi_ok and victim_ok and elapsed < cap
    return ok, (
        f"chi2={chi2:.1f} p={pvalue:.3f} (need >=0.01); victim max dev {worst:.0f} of "
        f"{bound:.0f} allowed over {total_hits} hits; {elapsed:.1f}s of {cap:.0f}s"
    )


# -- 2: class-balance balancedness ----------------------------------------------


def check_class_balance_balancedness(quick: bool = False) -> tuple[bool, str]:
    """After 7 equal scenes the per-class counts differ by at most one, for
    every buffer size and every seed."""
    t0 = time.time()
    n_seeds = 10 if quick else 100
    streams = {s: _light_instances(1000, scene=s) for s in range(7)}
    failures = 0
    worst_spread = 0
    for seed in range(n_seeds):
        for capacity in (128, 256, 512, 1024):
            buf = Buffer(capacity)
            rng = RngHandle(seed, f"acceptance/balance/{capacity}")
            for s in range(7):
                for inst in streams[s]:
                    observe(buf, Strategy.CLASS_BALANCE, inst, None, rng)
            counts = [buf.per_class_count.get(s, 0) for s in range(7)]
            spread = max(counts) - min(counts)
            worst_spread = max(worst_spread, spread)
            if spread > 1:
                failures += 1
    elapsed = time.time() - t0
    cap = 30.0
    ok = failures == 0 and elapsed < cap
    return ok, f"max-min spread <= 1 in {n_seeds * 4 - failures}/{n_seeds * 4} runs (worst {worst_spread}); {elapsed:.1f}s of {cap:.0f}s"


# -- 3 and 11: paired dominance runs ---------------------------------------------


def _small_scene_tasks(cfg: ExperimentConfig, order: list[int]) -> list[int]:
    frames = {s.scene_id: s.frames for s in cfg.scene_profile}
    small_ids = sorted(frames, key=lambda sid: frames[sid])[:2]
    return sorted(order.index(sid) + 1 for sid in small_ids)


def _coverage_only(cfg, scenes, order, strategy, capacity, seed) -> float:
    from .harness import stratified_split
    from .metrics import buffer_coverage

    buf = Buffer(capacity)
    for sid in order:
        train, _ = stratified_split(scenes[sid].frames)
        rng = RngHandle(seed, f"buffer/{strategy.value}/{capacity}/scene-{sid}")
        for inst in train:
            observe(buf, strategy, inst, scenes[sid].hierarchy, rng)
    return buffer_coverage(buf, {sid: s.hierarchy for sid, s in scenes.items()}, 1).average


def check_coverage_dominance(quick: bool = False) -> tuple[bool, str]:
    """Final buffer coverage orders coverage-aware > class-balance > reservoir
    on the dwell-biased default profile, pairwise per seed and in the mean."""
    t0 = time.time()
    n_seeds = 10 if quick else 100
    strategies = (Strategy.RESERVOIR, Strategy.CLASS_BALANCE, Strategy.BUFF_CS)
    cov = {(s.value, b): [] for s in strategies for b in (128, 256)}
    cfg = ExperimentConfig(scene_profile=default_profile(), seeds=[0], buffer_sizes=[128, 256],
                           strategies=list(strategies))
    order = resolve_order(cfg)
    for seed in range(n_seeds):
        scenes = generate_scenes(cfg, seed)
        for strategy in strategies:
            for capacity in (128, 256):
                cov[(strategy.value, capacity)].append(
                    _coverage_only(cfg, scenes, order, strategy, capacity, seed)
                )
    means = {k: sum(v) / len(v) for k, v in cov.items()}
    mean_ok = all(
        means[("buff_cs", b)] > means[("class_balance", b)] > means[("reservoir", b)] for b in (128, 256)
    )
    wins = {
        b: sum(x >= y for x, y in zip(cov[("buff_cs", b)], cov[("class_balance", b)])) for b in (128, 256)
    }
    need = int(0.9 * n_seeds)
    wins_ok = all(w >= need for w in wins.values())
    gap256 = means[("buff_cs", 256)] - means[("class_balance", 256)]
    gap_ok = gap256 >= 0.02
    elapsed = time.time() - t0
    cap = 300.0
    ok = mean_ok and wins_ok and gap_ok and elapsed < cap
    summary = ", ".join(f"B={b}: " + "/".join(f"{means[(s.value, b)]:.3f}" for s in strategies) for b in (128, 256))
    return ok, (
        f"means res/cb/cs {summary}; cs>=cb in {wins[128]} and {wins[256]} of {n_seeds} "
        f"(need {need}); gap at 256 {gap256 * 100:.1f}pp (need >=2); {elapsed:.0f}s of {cap:.0f}s"
    )


def check_accuracy_trend(quick: bool = False) -> tuple[bool, str]:
    """Past-stage localizer accuracy on the two smallest-stream scenes orders
    coverage-aware >= class-balance >= reservoir in most paired seeds."""
    t0 = time.time()
    n_seeds = 10 if quick else 100
    strategies = (Strategy.RESERVOIR, Strategy.CLASS_BALANCE, Strategy.BUFF_CS)
    cfg = ExperimentConfig(scene_profile=default_profile(), seeds=[0], buffer_sizes=[256],
                           strategies=list(strategies))
    order = resolve_order(cfg)
    small_tasks = _small_scene_tasks(cfg, order)
    n_tasks = len(order)
    acc = {s.value: [] for s in strategies}
    for seed in range(n_seeds):
        scenes = generate_scenes(cfg, seed)
        for strategy in strategies:
            cell = run_cell(cfg, scenes, order, strategy, 256, seed)
            vals = [cell.accuracy.get(i, j) for i in small_tasks for j in range(i + 1, n_tasks + 1)]
            acc[strategy.value].append(sum(vals) / len(vals))
    cs_wins = sum(x >= y for x, y in zip(acc["buff_cs"], acc["class_balance"]))
    cb_wins = sum(x >= y for x, y in zip(acc["class_balance"], acc["reservoir"]))
    need = int(0.8 * n_seeds)
    elapsed = time.time() - t0
    cap = 600.0
    ok = cs_wins >= need and cb_wins >= need and elapsed < cap
    means = {k: sum(v) / len(v) for k, v in acc.items()}
    return ok, (
        f"small-scene past accuracy means res {means['reservoir']:.3f} cb {means['class_balance']:.3f} "
        f"cs {means['buff_cs']:.3f}; cs>=cb {cs_wins}/{n_seeds}, cb>=res {cb_wins}/{n_seeds} "
        f"(need {need}); {elapsed:.0f}s of {cap:.0f}s"
    )


# -- 4: coverage factor oracle ---------------------------------------------------


def check_coverage_factor_oracle(quick: bool = False) -> tuple[bool, str]:
    """The exact point-id factor dominates the coarse-level one: buffering on
    it never ends with less point coverage, and coarse novelty always implies
    point novelty.

    The dominance run uses a revisiting loop trajectory: once the fill phase
    has seen the whole circuit, the exact factor re-acquires any point its
    evictions dropped on the next pass, while the coarse factor only heals
    whole label regions and slowly sheds point coverage."""
    from .scenegen import generate_scene

    t0 = time.time()
    n_seeds = 10 if quick else 50
    spec = SceneSpec(scene_id=0, extent=(2.0, 2.0, 1.2), point_count=200,
                     trajectory=RoomLoop(loops=16), frames=900, view_radius=0.4, stream="oracle")
    dominated = 0
    worst_gap = 1.0
    for seed in range(n_seeds):
        scene = generate_scene(spec, RngHandle(seed, spec.stream_tag))
        point_cov = {}
        for level in (1, EXACT_3D):
            buf = Buffer(40)
            rng = RngHandle(seed, f"acceptance/oracle/{level}")
            for inst in scene.frames:
                observe(buf, Strategy.BUFF_CS, inst, scene.hierarchy, rng, cs_level=level)
            covered = set()
            for entry in buf.entries:
                covered |= entry.instance.observed_points
            point_cov[level] = len(covered) / spec.point_count
        gap = point_cov[EXACT_3D] - point_cov[1]
        worst_gap = min(worst_gap, gap)
        if gap >= 0.0:
            dominated += 1

    implication_checks = 0
    violations = 0
    impl_spec = SceneSpec(scene_id=0, extent=(2.0, 2.0, 1.2), point_count=200,
                          trajectory=SweepGrid(), frames=300, view_radius=0.45, stream="oracle-impl")
    n_impl_seeds = 40 if quick else 350
    for seed in range(n_impl_seeds):
        scene = generate_scene(impl_spec, RngHandle(seed + 10_000, impl_spec.stream_tag))
        buf = Buffer(24)
        rng = RngHandle(seed, "acceptance/oracle-implication")
        for inst in scene.frames:
            cs1 = coverage_score_factor(buf, inst, scene.hierarchy, 1)
            cs3d = coverage_score_factor(buf, inst, None, EXACT_3D)
            implication_checks += 1
            if cs1 and not cs3d:
                violations += 1
            observe(buf, Strategy.BUFF_CS, inst, scene.hierarchy, rng)
        if implication_checks >= 100_000 and not quick:
            break
    elapsed = time.time() - t0
    cap = 120.0
    ok = dominated == n_seeds and violations == 0 and elapsed < cap
    return ok, (
        f"exact factor dominated coarse point coverage in {dominated}/{n_seeds} seeds "
        f"(worst gap {worst_gap * 100:+.1f}pp); {violations} implication violations in "
        f"{implication_checks} cases; {elapsed:.0f}s of {cap:.0f}s"
    )


# -- 5: forgetting surrogate -----------------------------------------------------


def check_forgetting_surrogate(quick: bool = False) -> tuple[bool, str]:
    """Without buffering every past-scene accuracy is exactly zero; with any
    buffering strategy at capacity 128 every past-scene accuracy is positive
    in at least 95% of seeds."""
    t0 = time.time()
    n_wo_seeds = 1 if quick else 3
    n_seeds = 5 if quick else 20
    cfg = ExperimentConfig(scene_profile=default_profile(), seeds=[0], buffer_sizes=[128],
                           strategies=[Strategy.WITHOUT_BUFFERING])
    order = resolve_order(cfg)
    n_tasks = len(order)

    wo_ok = True
    for seed in range(n_wo_seeds):
        scenes = generate_scenes(cfg, seed)
        cell = run_cell(cfg, scenes, order, Strategy.WITHOUT_BUFFERING, 128, seed)
        for i in range(1, n_tasks + 1):
            for j in range(i + 1, n_tasks + 1):
                if cell.accuracy.get(i, j) != 0.0:
                    wo_ok = False

    strategies = (Strategy.RESERVOIR, Strategy.CLASS_BALANCE, Strategy.BUFF_CS)
    positive = {s.value: 0 for s in strategies}
    for seed in range(n_seeds):
        scenes = generate_scenes(cfg, seed)
        for strategy in strategies:
            cell = run_cell(cfg, scenes, order, strategy, 128, seed)
            if all(
                cell.accuracy.get(i, j) > 0.0
                for i in range(1, n_tasks + 1)
                for j in range(i + 1, n_tasks + 1)
            ):
                positive[strategy.value] += 1
    need = math.ceil(0.95 * n_seeds)
    pos_ok = all(v >= need for v in positive.values())
    elapsed = time.time() - t0
    cap = 120.0
    ok = wo_ok and pos_ok and elapsed < cap
    return ok, (
        f"no-buffering past accuracy exactly 0 in {n_wo_seeds} seeds: {wo_ok}; "
        f"positive past accuracy seeds {positive} of {n_seeds} (need {need}); {elapsed:.0f}s of {cap:.0f}s"
    )


# -- 6: average-accuracy metric --------------------------------------------------


def check_average_accuracy_metric(quick: bool = False) -> tuple[bool, str]:
    """Stage-averaged accuracy reproduces hand-computed values exactly."""
    t0 = time.time()
    cases = []

    m = AccuracyMatrix(3)
    for (i, j), v in {(1, 1): 0.9, (1, 2): 0.6, (1, 3): 0.3, (2, 2): 0.8, (2, 3): 0.4, (3, 3): 1.0}.items():
        m.set(i, j, v)
    cases.append((m, 1, (0.9 + 0.6 + 0.3) / 3))
    cases.append((m, 2, (0.8 + 0.4) / 2))
    cases.append((m, 3, 1.0))

    m1 = AccuracyMatrix(1)
    m1.set(1, 1, 0.42)
    cases.append((m1, 1, 0.42))

    m4 = AccuracyMatrix(4)
    vals = {(2, 2): 1.0, (2, 3): 0.5, (2, 4): 0.25}
    for (i, j), v in vals.items():
        m4.set(i, j, v)
    cases.append((m4, 2, (1.0 + 0.5 + 0.25) / 3))

    worst = max(abs(average_accuracy(mat, i) - expected) for mat, i, expected in cases)
    elapsed = time.time() - t0
    ok = worst <= 1e-15 and elapsed < 1.0
    return ok, f"{len(cases)} fixed matrices, worst deviation {worst:.2e}; {elapsed:.2f}s of 1s"


# -- 7: hierarchy invariants -----------------------------------------------------


def check_hierarchy_invariants(quick: bool = False) -> tuple[bool, str]:
    """Nesting and cardinality ordering on random scenes; the 25/625 realized
    label bound on the default profile."""
    t0 = time.time()
    n_scenes = 100 if quick else 1000
    master = RngHandle(7, "acceptance/hierarchy")
    bad = 0
    for k in range(n_scenes):
        n = 10 + master.uniform_index(391)
        levels = 1 + master.uniform_index(4)
        branching = 2 + master.uniform_index(5)
        pts = master.uniforms(3 * n).reshape(n, 3) * np.array([3.0, 2.0, 1.5])
        h = build_hierarchy(pts, levels, branching, master.spawn(f"build-{k}"), scene=0)
        a = h.assignment
        for level in range(1, levels):
            pairs = {(int(a[p, level]), int(a[p, level - 1])) for p in range(n)}
            if len(pairs) != h.level_sizes[level]:  # some fine label spans two parents
                bad += 1
                break
        else:
            sizes = h.level_sizes
            if any(sizes[l] > sizes[l + 1] for l in range(levels - 1)) or sizes[-1] > n:
                bad += 1
            elif any(sizes[l] > branching ** (l + 1) for l in range(levels)):
                bad += 1

    spec = default_profile()[0]
    scene_h = build_hierarchy(
        RngHandle(11, "acceptance/default-points").uniforms(3 * spec.point_count).reshape(-1, 3)
        * np.asarray(spec.extent),
        spec.levels,
        spec.branching,
        RngHandle(11, "acceptance/default-build"),
        scene=0,
    )
    bound_ok = scene_h.level_sizes[0] <= 25 and scene_h.level_sizes[1] <= 625
    elapsed = time.time() - t0
    cap = 60.0
    ok = bad == 0 and bound_ok and elapsed < cap
    return ok, (
        f"{n_scenes - bad}/{n_scenes} random scenes satisfy nesting and ordering; default-profile "
        f"labels {scene_h.level_sizes} within (25, 625); {elapsed:.0f}s of {cap:.0f}s"
    )


# -- 8: bounded-beta rule --------------------------------------------------------


def check_bounded_beta_rule(quick: bool = False) -> tuple[bool, str]:
    """The distillation gate matches its case split on a grid including the
    equality boundary (strictly-greater opens the gate)."""
    t0 = time.time()
    grid = np.linspace(0.0, 2.0, 100)
    beta_on = 100_000.0
    mismatches = 0
    for pred in grid:
        for stored in grid:
            expected = beta_on if pred > stored else 0.0
            if bounded_beta(float(pred), float(stored), beta_on) != expected:
                mismatches += 1
    elapsed = time.time() - t0
    ok = mismatches == 0 and elapsed < 1.0
    return ok, f"100x100 grid, {mismatches} mismatches (equality stays closed); {elapsed:.2f}s of 1s"


# -- 9: loss algebra -------------------------------------------------------------


def check_loss_algebra(quick: bool = False) -> tuple[bool, str]:
    """Empty replay reduces to the task loss; totals recompose from parts;
    uniform logits against a single label cost exactly ln(25)."""
    t0 = time.time()
    pts = RngHandle(3, "acceptance/loss-points").uniforms(3 * 40).reshape(40, 3)
    h = build_hierarchy(pts, 2, 5, RngHandle(3, "acceptance/loss-h"), scene=0)
    inst = Instance(0, 0, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0), frozenset(range(10)),
                    labels=(h.label_indices(range(10), 1), h.label_indices(range(10), 2)))
    ids = sorted(inst.observed_points)
    exact = RepresentationPayload(
        tuple(_indicator_logits(inst.labels[l], h.level_sizes[l]) for l in range(2)),
        pts[ids].copy(),
    )
    weights = (1.0, 1.0, 100000.0)
    perfect = task_loss(inst, exact, weights, pts)
    perfect_ok = perfect.total == 0.0 and perfect.regression == 0.0

    reduction_ok = replay_loss_img(perfect, []) == perfect.total
    noisy = RepresentationPayload(exact.logits_per_level, pts[ids] + 0.01)
    breakdown = task_loss(inst, noisy, weights, pts)
    recompose = abs(
        breakdown.total
        - (sum(a * t for a, t in zip(weights[:2], breakdown.per_level_classification))
           + weights[2] * breakdown.regression)
    )
    recompose_ok = recompose <= 1e-12

    single = Instance(0, 1, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0), frozenset([0]),
                      labels=(frozenset([3]), frozenset([0])))
    uniform_pred = RepresentationPayload(
        (np.zeros(25), _indicator_logits(single.labels[1], 25)), pts[[0]].copy()
    )
    ln25 = task_loss(single, uniform_pred, (1.0, 0.0, 0.0), pts)
    ln25_err = abs(ln25.per_level_classification[0] - math.log(25.0))
    ln25_ok = ln25_err <= 1e-12

    scale_ok = (
        abs(replay_loss_img(perfect, [breakdown, breakdown]) - breakdown.total) <= 1e-12
        and replay_loss_img(breakdown, []) == breakdown.total
    )
    elapsed = time.time() - t0
    ok = perfect_ok and reduction_ok and recompose_ok and ln25_ok and scale_ok and elapsed < 1.0
    return ok, (
        f"perfect-prediction total {perfect.total}; recomposition error {recompose:.1e}; "
        f"ln(25) error {ln25_err:.1e}; {elapsed:.2f}s of 1s"
    )


def _indicator_logits(label_set: frozenset[int], size: int) -> np.ndarray:
    vec = np.full(size, -1e9)
    vec[sorted(label_set)] = 0.0
    return vec


# -- 10: determinism -------------------------------------------------------------


def _determinism_config() -> ExperimentConfig:
    profile = [
        SceneSpec(scene_id=0, extent=(2.0, 2.0, 1.5), point_count=300,
                  trajectory=BiasedDwell(0.8, ((0.0, 0.0, 0.0), (0.5, 1.0, 1.0))),
                  frames=120, view_radius=0.5, stream="scene-0"),
        SceneSpec(scene_id=1, extent=(2.0, 2.0, 1.5), point_count=300,
                  trajectory=SweepGrid(), frames=80, view_radius=0.5, stream="scene-1"),
    ]
    return ExperimentConfig(
        scene_profile=profile,
        strategies=[Strategy.RESERVOIR, Strategy.BUFF_CS],
        buffer_sizes=[16],
        seeds=[0, 1],
        replay_trace_steps=2,
        decision_log=True,
    )


def check_run_determinism(quick: bool = False) -> tuple[bool, str]:
    """Two full runs of the same config produce byte-identical CSVs."""
    import json as _json

    from .cli import main as cli_main
    from .harness import config_to_dict

    t0 = time.time()
    cfg = _determinism_config()
    csvs = ("coverage.csv", "accuracy.csv", "summary.csv", "distribution.csv")
    with tempfile.TemporaryDirectory() as tmp:
        tmp_path = Path(tmp)
        cfg_path = tmp_path / "config.json"
        cfg_path.write_text(_json.dumps(config_to_dict(cfg)))
        rc_a = cli_main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "a")])
        rc_b = cli_main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "b")])
        rc_ok = rc_a == 0 and rc_b == 0
        identical = {
            name: filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False) for name in csvs
        }
    elapsed = time.time() - t0
    cap = 300.0
    ok = rc_ok and all(identical.values()) and elapsed < cap
    return ok, f"exit codes ok: {rc_ok}; byte-identical: {identical}; {elapsed:.0f}s of {cap:.0f}s"


# -- registry --------------------------------------------------------------------


CHECKS: list[tuple[str, Callable[[bool], tuple[bool, str]]]] = [
    ("01-reservoir-exactness", check_reservoir_exactness),
    ("02-class-balance-balancedness", check_class_balance_balancedness),
    ("03-coverage-dominance", check_coverage_dominance),
    ("04-coverage-factor-oracle", check_coverage_factor_oracle),
    ("05-forgetting-surrogate", check_forgetting_surrogate),
    ("06-average-accuracy-metric", check_average_accuracy_metric),
    ("07-hierarchy-invariants", check_hierarchy_invariants),
    ("08-bounded-beta-rule", check_bounded_beta_rule),
    ("09-loss-algebra", check_loss_algebra),
    ("10-run-determinism", check_run_determinism),
    ("11-accuracy-trend", check_accuracy_trend),
]


def run_checks(names: list[str] | None = None, quick: bool = False) -> list[CheckResult]:
    """Run the acceptance checks, printing one pass/fail line per criterion."""
    results: list[CheckResult] = []
    for name, fn in CHECKS:
        if names is not None and name not in names:
            continue
        t0 = time.time()
        try:
            passed, detail = fn(quick)
        except Exception as exc:  # a crashed check is a failed check
            passed, detail = False, f"raised {type(exc).__name__}: {exc}"
        seconds = time.time() - t0
        results.append(CheckResult(name, passed, detail, seconds))
        print(f"[{'PASS' if passed else 'FAIL'}] {name} ({seconds:.1f}s) {detail}")
    return results
