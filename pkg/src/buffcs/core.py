"""Shared domain types and the deterministic random-source contract.

Every stochastic operation in this package draws through an :class:`RngHandle`.
There is no ambient randomness: functions that need random numbers take a
handle explicitly, and two handles built from the same (seed, stream) pair
replay the identical draw sequence on any platform.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyRangeError

SceneId = int
PointId = int

_BLOCK = 512


def _philox_key(seed: int, stream: str) -> np.ndarray:
    """Derive a 128-bit Philox key from the seed and stream tag."""
    digest = hashlib.sha256(f"{seed & 0xFFFFFFFFFFFFFFFF:#018x}/{stream}".encode()).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


class RngHandle:
    """Deterministic uniform stream keyed by a 64-bit seed and a stream tag.

    Backed by numpy's Philox counter-based generator with the key derived via
    SHA-256 of ``(seed, stream)``, so distinct tags yield independent streams
    and equal tags replay bit-identical sequences. The handle serves a single
    conceptual sequence of float64 uniforms in [0, 1); index and normal draws
    are pure functions of that sequence, which keeps replay audits simple.

    A handle is stateful and not thread-safe; concurrent users must own
    distinct stream tags (see :meth:`spawn`).
    """

    __slots__ = ("seed", "stream", "_gen", "_buf", "_pos")

    def __init__(self, seed: int, stream: str = "root") -> None:
        self.seed = int(seed)
        self.stream = str(stream)
        self._gen = np.random.Generator(np.random.Philox(key=_philox_key(self.seed, self.stream)))
        self._buf = np.empty(0)
        self._pos = 0

    def spawn(self, tag: str) -> "RngHandle":
        """Derive an independent sub-stream; draws here never affect it."""
        return RngHandle(self.seed, f"{self.stream}/{tag}")

    def uniform(self) -> float:
        """Next uniform in [0, 1)."""
        if self._pos >= self._buf.shape[0]:
            self._buf = self._gen.random(_BLOCK)
            self._pos = 0
        v = self._buf[self._pos]
        self._pos += 1
        return float(v)

    def uniforms(self, n: int) -> np.ndarray:
        """Next ``n`` uniforms in [0, 1) as a float64 array."""
        n = int(n)
        out = np.empty(n)
        avail = self._buf.shape[0] - self._pos
        take = min(avail, n)
        if take:
            out[:take] = self._buf[self._pos : self._pos + take]
            self._pos += take
        if n > take:
            out[take:] = self._gen.random(n - take)
        return out

    def uniform_index(self, n: int) -> int:
        """Uniform integer in [0, n). Consumes one uniform draw."""
        if n < 1:
            raise EmptyRangeError(f"cannot draw an index from a range of size {n}")
        i = int(self.uniform() * n)
        return n - 1 if i >= n else i

    def normals(self, n: int) -> np.ndarray:
        """``n`` standard normals via Box-Muller on the uniform stream."""
        pairs = (n + 1) // 2
        u = self.uniforms(2 * pairs).reshape(2, pairs)
        # guard log(0); 2**-53 is below the smallest nonzero uniform
        r = np.sqrt(-2.0 * np.log(np.maximum(u[0], 2.0**-53)))
        theta = 2.0 * math.pi * u[1]
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])
        return z[:n]


def uniform(rng: RngHandle) -> float:
    """Next uniform draw in [0, 1) from the handle's stream."""
    return rng.uniform()


def uniform_index(rng: RngHandle, n: int) -> int:
    """Uniform integer in [0, n); raises :class:`EmptyRangeError` for n < 1."""
    return rng.uniform_index(n)


@dataclass(frozen=True, slots=True)
class Instance:
    """One observed frame: scene id, camera pose, visible points, labels.

    ``labels[l-1]`` is the set of level-``l`` cluster indices touched by
    ``observed_points`` (scene-scoped; see :mod:`buffcs.hierarchy`). The tuple
    may be empty for instances used without a hierarchy.
    """

    scene: SceneId
    frame_index: int
    position: tuple[float, float, float]
    orientation: tuple[float, float, float, float]  # unit quaternion (w, x, y, z)
    observed_points: frozenset[PointId]
    labels: tuple[frozenset[int], ...] = ()

    def __post_init__(self) -> None:
        if not self.observed_points:
            raise ValueError("an instance must observe at least one point")
        norm = math.sqrt(sum(c * c for c in self.orientation))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"orientation quaternion norm {norm!r} is not 1 within 1e-9")
