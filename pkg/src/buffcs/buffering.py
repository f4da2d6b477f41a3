"""Fixed-capacity buffer with reservoir, class-balance, and coverage-aware
replacement strategies.

The buffer is a single-writer state machine: :func:`observe` offers one
instance at a time, updates the observation counters, and returns an
auditable :class:`BufferDecision`. The coverage-aware strategy promotes an
incoming instance to a guaranteed insert whenever it observes coarse-level
scene regions that none of its class's buffered instances cover yet.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import IO, TYPE_CHECKING, Union

from .core import Instance, RngHandle, SceneId
from .errors import NoHierarchyError, ZeroCapacityError
from .hierarchy import ClusterLabel, LabelHierarchy, labels_of

if TYPE_CHECKING:
    from .replay import RepresentationPayload

#: Sentinel level selecting the exact point-id coverage factor instead of a
#: cluster level. The exact factor is the oracle the cheap level-1 factor
#: approximates.
EXACT_3D = "exact3d"

CoverageLevel = Union[int, str]


class Strategy(str, Enum):
    RESERVOIR = "reservoir"
    CLASS_BALANCE = "class_balance"
    BUFF_CS = "buff_cs"
    WITHOUT_BUFFERING = "without_buffering"


class DecisionKind(str, Enum):
    INSERTED = "inserted"
    REPLACED = "replaced"
    IGNORED = "ignored"


class DecisionReason(str, Enum):
    FILL = "fill"
    RESERVOIR_HIT = "reservoir_hit"
    RESERVOIR_MISS = "reservoir_miss"
    LARGEST_CLASS_EVICTED = "largest_class_evicted"
    COVERAGE_NOVEL = "coverage_novel"
    BALANCE_PROBABILITY = "balance_probability"
    PROBABILITY_MISS = "probability_miss"
    DISABLED = "disabled"


@dataclass(slots=True)
class BufferDecision:
    """Outcome of one observe call, suitable for audit logging."""

    kind: DecisionKind
    reason: DecisionReason
    victim_index: int | None = None
    victim_scene: SceneId | None = None


@dataclass(slots=True)
class BufferEntry:
    """One stored instance plus an optional representation payload."""

    instance: Instance
    payload: "RepresentationPayload | None"
    insertion_step: int


class Buffer:
    """Fixed-capacity store with per-class counters and label-union caches.

    ``per_class_count[c]`` is the number of stored class-c entries and
    ``observed_count[c]`` the number of class-c instances ever offered;
    ``total_observed`` sums the latter. Payload presence is uniform across
    entries: the first insert fixes whether payloads are stored.
    """

    __slots__ = (
        "capacity",
        "entries",
        "per_class_count",
        "observed_count",
        "total_observed",
        "_class_slots",
        "_slot_pos",
        "_class_version",
        "_union_cache",
        "_has_payload",
    )

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ZeroCapacityError(f"buffer capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.entries: list[BufferEntry] = []
        self.per_class_count: dict[SceneId, int] = {}
        self.observed_count: dict[SceneId, int] = {}
        self.total_observed = 0
        self._class_slots: dict[SceneId, list[int]] = {}
        self._slot_pos: list[int] = []
        self._class_version: dict[SceneId, int] = {}
        self._union_cache: dict[tuple[SceneId, CoverageLevel], tuple[int, frozenset]] = {}
        self._has_payload: bool | None = None

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def is_full(self) -> bool:
        return len(self.entries) >= self.capacity

    def class_slots(self, scene: SceneId) -> list[int]:
        """Slot indices currently holding entries of ``scene``."""
        return self._class_slots.get(scene, [])

    def label_union(self, scene: SceneId, level: CoverageLevel) -> frozenset:
        """Union of level-``level`` label indices (or point ids for
        :data:`EXACT_3D`) over the stored entries of ``scene``. Cached and
        invalidated by inserts/evictions touching the class."""
        version = self._class_version.get(scene, 0)
        key = (scene, level)
        hit = self._union_cache.get(key)
        if hit is not None and hit[0] == version:
            return hit[1]
        union: set = set()
        for slot in self._class_slots.get(scene, ()):
            inst = self.entries[slot].instance
            if level == EXACT_3D:
                union |= inst.observed_points
            else:
                if len(inst.labels) < level:
                    raise NoHierarchyError(f"buffered frame {inst.frame_index} carries no level-{level} labels")
                union |= inst.labels[level - 1]
        out = frozenset(union)
        self._union_cache[key] = (version, out)
        return out

    def snapshot(self) -> dict:
        """JSON-ready view of buffer contents: scenes, frames, label sets."""
        return {
            "capacity": self.capacity,
            "total_observed": self.total_observed,
            "entries": [
                {
                    "scene": e.instance.scene,
                    "frame_index": e.instance.frame_index,
                    "labels": [sorted(s) for s in e.instance.labels],
                }
                for e in self.entries
            ],
        }

    # -- mutation helpers (strategy code only) --------------------------------

    def _check_payload(self, payload) -> None:
        present = payload is not None
        if self._has_payload is None:
            self._has_payload = present
        elif self._has_payload != present:
            raise ValueError("payload presence must be uniform across the buffer")

    def _append(self, entry: BufferEntry) -> None:
        self._check_payload(entry.payload)
        slot = len(self.entries)
        self.entries.append(entry)
        scene = entry.instance.scene
        self.per_class_count[scene] = self.per_class_count.get(scene, 0) + 1
        self._slot_pos.append(len(self._class_slots.setdefault(scene, [])))
        self._class_slots[scene].append(slot)
        self._class_version[scene] = self._class_version.get(scene, 0) + 1

    def _replace(self, slot: int, entry: BufferEntry) -> None:
        self._check_payload(entry.payload)
        old_scene = self.entries[slot].instance.scene
        new_scene = entry.instance.scene
        self.entries[slot] = entry
        if old_scene != new_scene:
            # swap-remove the slot from the old class's index list
            slots = self._class_slots[old_scene]
            pos = self._slot_pos[slot]
            last = slots[-1]
            slots[pos] = last
            self._slot_pos[last] = pos
            slots.pop()
            self.per_class_count[old_scene] -= 1
            new_slots = self._class_slots.setdefault(new_scene, [])
            self._slot_pos[slot] = len(new_slots)
            new_slots.append(slot)
            self.per_class_count[new_scene] = self.per_class_count.get(new_scene, 0) + 1
            self._class_version[new_scene] = self._class_version.get(new_scene, 0) + 1
        self._class_version[old_scene] = self._class_version.get(old_scene, 0) + 1


def observe(
    buf: Buffer,
    strategy: Strategy,
    inst: Instance,
    h: LabelHierarchy | None = None,
    rng: RngHandle | None = None,
    payload: "RepresentationPayload | None" = None,
    cs_level: CoverageLevel = 1,
) -> BufferDecision:
    """Offer one instance to the buffer under the given strategy.

    Observation counters are updated unconditionally (the incoming instance
    counts toward N and n_c before any probability is evaluated). While the
    buffer is filling, every offer is stored; afterwards the strategy decides.
    """
    if buf.capacity < 1:
        raise ZeroCapacityError("buffer has zero capacity")
    scene = inst.scene
    buf.observed_count[scene] = buf.observed_count.get(scene, 0) + 1
    buf.total_observed += 1

    if strategy is Strategy.WITHOUT_BUFFERING:
        return BufferDecision(DecisionKind.IGNORED, DecisionReason.DISABLED)
    if not buf.is_full:
        buf._append(BufferEntry(inst, payload, buf.total_observed))
        return BufferDecision(DecisionKind.INSERTED, DecisionReason.FILL)
    if strategy is Strategy.RESERVOIR:
        return reservoir_decide(buf, inst, rng, payload)
    if strategy is Strategy.CLASS_BALANCE:
        return class_balance_decide(buf, inst, rng, payload)
    if strategy is Strategy.BUFF_CS:
        return buff_cs_decide(buf, inst, h, rng, payload, cs_level)
    raise ValueError(f"unknown strategy {strategy!r}")


def reservoir_decide(
    buf: Buffer,
    inst: Instance,
    rng: RngHandle,
    payload: "RepresentationPayload | None" = None,
) -> BufferDecision:
    """Classic streaming reservoir step on a full buffer.

    With N the number of instances observed so far (including this one), the
    instance replaces a uniformly random slot with probability capacity / N,
    which keeps every observed instance equally likely to be retained.
    Class identity is never consulted.
    """
    if not buf.is_full:
        raise ValueError("reservoir_decide requires a full buffer")
    s = rng.uniform() * buf.total_observed
    if s < buf.capacity:
        victim = rng.uniform_index(len(buf.entries))
        victim_scene = buf.entries[victim].instance.scene
        buf._replace(victim, BufferEntry(inst, payload, buf.total_observed))
        return BufferDecision(DecisionKind.REPLACED, DecisionReason.RESERVOIR_HIT, victim, victim_scene)
    return BufferDecision(DecisionKind.IGNORED, DecisionReason.RESERVOIR_MISS)


def _largest_classes(buf: Buffer) -> tuple[list[SceneId], int]:
    mx = 0
    for count in buf.per_class_count.values():
        if count > mx:
            mx = count
    tied = sorted(c for c, m in buf.per_class_count.items() if m == mx)
    return tied, mx


def _evict_from_largest(buf: Buffer, inst: Instance, rng: RngHandle, payload, largest: list[SceneId]) -> BufferDecision:
    victim_class = largest[rng.uniform_index(len(largest))] if len(largest) > 1 else largest[0]
    slots = buf.class_slots(victim_class)
    victim = slots[rng.uniform_index(len(slots))] if len(slots) > 1 else slots[0]
    buf._replace(victim, BufferEntry(inst, payload, buf.total_observed))
    return BufferDecision(DecisionKind.REPLACED, DecisionReason.LARGEST_CLASS_EVICTED, victim, victim_class)


def _evict_same_class(buf: Buffer, inst: Instance, rng: RngHandle, payload, reason: DecisionReason) -> BufferDecision:
    slots = buf.class_slots(inst.scene)
    victim = slots[rng.uniform_index(len(slots))] if len(slots) > 1 else slots[0]
    buf._replace(victim, BufferEntry(inst, payload, buf.total_observed))
    return BufferDecision(DecisionKind.REPLACED, reason, victim, inst.scene)


def class_balance_decide(
    buf: Buffer,
    inst: Instance,
    rng: RngHandle,
    payload: "RepresentationPayload | None" = None,
) -> BufferDecision:
    """Balanced replacement on a full buffer.

    If the incoming class is not (tied for) the largest stored class, it
    evicts a uniformly random entry of a uniformly chosen largest class and
    is stored with probability 1. Otherwise it replaces a random same-class
    entry with probability m_c / n_c, the per-class analog of the reservoir
    rule. The stream total N is never consulted.
    """
    if not buf.is_full:
        raise ValueError("class_balance_decide requires a full buffer")
    largest, _ = _largest_classes(buf)
    c = inst.scene
    if c not in largest:
        return _evict_from_largest(buf, inst, rng, payload, largest)
    m_c = buf.per_class_count.get(c, 0)
    n_c = buf.observed_count.get(c, 1)
    if rng.uniform() < m_c / n_c:
        return _evict_same_class(buf, inst, rng, payload, DecisionReason.BALANCE_PROBABILITY)
    return BufferDecision(DecisionKind.IGNORED, DecisionReason.PROBABILITY_MISS)


def coverage_score_factor(
    buf: Buffer,
    inst: Instance,
    h: LabelHierarchy | None,
    level: CoverageLevel = 1,
) -> frozenset:
    """Novel coverage the instance would add to its class's buffer slice.

    For a cluster level this is the instance's label set minus the union of
    labels over same-class buffered entries; for :data:`EXACT_3D` the set
    difference is taken over raw point ids. An empty result means every
    region the instance observes is already represented.
    """
    if level == EXACT_3D:
        return frozenset(inst.observed_points - buf.label_union(inst.scene, EXACT_3D))
    if h is None:
        raise NoHierarchyError("coverage factor at a cluster level requires the scene hierarchy")
    if h.scene != inst.scene:
        raise NoHierarchyError(f"hierarchy is for scene {h.scene}, instance is from scene {inst.scene}")
    mine = labels_of(h, inst.observed_points, level)
    covered = buf.label_union(inst.scene, level)
    return frozenset(lab for lab in mine if lab.index not in covered)


def _novel_indices(buf: Buffer, inst: Instance, h: LabelHierarchy | None, level: CoverageLevel) -> frozenset:
    """Fast-path coverage factor over the instance's precomputed label sets."""
    if level == EXACT_3D:
        return inst.observed_points - buf.label_union(inst.scene, EXACT_3D)
    if len(inst.labels) >= level:
        mine = inst.labels[level - 1]
    else:
        if h is None or h.scene != inst.scene:
            raise NoHierarchyError("instance carries no labels and no matching hierarchy was given")
        mine = h.label_indices(inst.observed_points, level)
    return mine - buf.label_union(inst.scene, level)


def victim_unique_labels(buf: Buffer, slot: int, level: CoverageLevel = 1) -> frozenset:
    """Labels covered by the entry at ``slot`` and by no same-class peer."""
    entry = buf.entries[slot]
    scene = entry.instance.scene
    mine = entry.instance.observed_points if level == EXACT_3D else entry.instance.labels[level - 1]
    others: set = set()
    for other in buf.class_slots(scene):
        if other == slot:
            continue
        inst = buf.entries[other].instance
        others |= inst.observed_points if level == EXACT_3D else inst.labels[level - 1]
    return frozenset(mine - others)


def buff_cs_decide(
    buf: Buffer,
    inst: Instance,
    h: LabelHierarchy | None,
    rng: RngHandle,
    payload: "RepresentationPayload | None" = None,
    cs_level: CoverageLevel = 1,
    victim_rule: str = "uniform",
) -> BufferDecision:
    """Coverage-aware replacement on a full buffer.

    Behaves like class-balance except in the largest-class case: before
    falling back to the m_c / n_c coin flip, the incoming instance is stored
    with probability 1 whenever its coverage factor at ``cs_level`` is
    non-empty, i.e. it observes scene regions its class's buffer slice does
    not cover yet. Victims are uniform same-class entries by default;
    ``victim_rule="min_unique_coverage"`` is an extension that prefers
    evicting entries contributing the fewest unique labels.
    """
    if not buf.is_full:
        raise ValueError("buff_cs_decide requires a full buffer")
    largest, _ = _largest_classes(buf)
    c = inst.scene
    if c not in largest:
        return _evict_from_largest(buf, inst, rng, payload, largest)
    novel = _novel_indices(buf, inst, h, cs_level)
    if novel:
        if victim_rule == "min_unique_coverage":
            slots = buf.class_slots(c)
            uniques = [len(victim_unique_labels(buf, s, cs_level)) for s in slots]
            best = min(uniques)
            pool = [s for s, u in zip(slots, uniques) if u == best]
            victim = pool[rng.uniform_index(len(pool))] if len(pool) > 1 else pool[0]
            victim_scene = buf.entries[victim].instance.scene
            buf._replace(victim, BufferEntry(inst, payload, buf.total_observed))
            return BufferDecision(DecisionKind.REPLACED, DecisionReason.COVERAGE_NOVEL, victim, victim_scene)
        return _evict_same_class(buf, inst, rng, payload, DecisionReason.COVERAGE_NOVEL)
    m_c = buf.per_class_count.get(c, 0)
    n_c = buf.observed_count.get(c, 1)
    if rng.uniform() < m_c / n_c:
        return _evict_same_class(buf, inst, rng, payload, DecisionReason.BALANCE_PROBABILITY)
    return BufferDecision(DecisionKind.IGNORED, DecisionReason.PROBABILITY_MISS)


class DecisionLog:
    """Newline-delimited JSON audit log of buffer decisions and loss traces."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._fh: IO[str] = self.path.open("w", encoding="utf-8")

    def log_decision(
        self,
        step: int,
        scene: SceneId,
        strategy: Strategy,
        decision: BufferDecision,
        buffer_coverage_l1: float,
    ) -> None:
        self._fh.write(
            json.dumps(
                {
                    "record": "decision",
                    "step": step,
                    "scene": scene,
                    "strategy": strategy.value,
                    "kind": decision.kind.value,
                    "reason": decision.reason.value,
                    "victim_index": decision.victim_index,
                    "buffer_coverage_l1": round(buffer_coverage_l1, 6),
                },
                sort_keys=True,
            )
            + "\n"
        )

    def log_loss(self, step: int, current_total: float, replay_total: float, mode: str) -> None:
        self._fh.write(
            json.dumps(
                {
                    "record": "loss",
                    "step": step,
                    "current_total": current_total,
                    "replay_total": replay_total,
                    "mode": mode,
                },
                sort_keys=True,
            )
            + "\n"
        )

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "DecisionLog":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
