import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from buffcs.core import Instance, RngHandle, uniform, uniform_index
from buffcs.errors import EmptyRangeError


def test_same_seed_and_stream_replays_identically():
    a = RngHandle(0, "a")
    b = RngHandle(0, "a")
    assert [a.uniform() for _ in range(10)] == [b.uniform() for _ in range(10)]


def test_first_draw_is_stable_and_in_range():
    v0 = RngHandle(0, "root").uniform()
    assert 0.0 <= v0 < 1.0
    assert RngHandle(0, "root").uniform() == v0


def test_distinct_streams_differ():
    assert RngHandle(0, "a").uniform() != RngHandle(0, "b").uniform()
    assert RngHandle(0, "a").uniform() != RngHandle(1, "a").uniform()


def test_uniform_mean_law_of_large_numbers():
    # sigma/sqrt(n) = 0.000289, so 0.002 is a ~7 sigma envelope
    draws = RngHandle(42, "lln").uniforms(10**6)
    assert abs(draws.mean() - 0.5) < 0.002
    assert draws.min() >= 0.0 and draws.max() < 1.0


def test_block_buffering_is_transparent():
    one_by_one = RngHandle(3, "mix")
    vector = RngHandle(3, "mix")
    singles = [one_by_one.uniform() for _ in range(700)]
    assert np.array_equal(np.array(singles), vector.uniforms(700))


def test_uniform_index_singleton():
    assert uniform_index(RngHandle(0, "i"), 1) == 0


def test_uniform_index_empty_range():
    with pytest.raises(EmptyRangeError):
        uniform_index(RngHandle(0, "i"), 0)


def test_uniform_index_frequencies_within_binomial_bound():
    # 70,000 draws over 7 bins: mean 10,000, binomial sigma ~92.5; 400 is ~4.3 sigma
    rng = RngHandle(7, "idx")
    counts = np.bincount([rng.uniform_index(7) for _ in range(70_000)], minlength=7)
    assert counts.sum() == 70_000
    assert np.all(np.abs(counts - 10_000) <= 400)


@given(seed=st.integers(min_value=0, max_value=2**32), n=st.integers(min_value=1, max_value=10**6))
@settings(max_examples=200, deadline=None)
def test_uniform_index_always_in_range(seed, n):
    assert 0 <= RngHandle(seed, "prop").uniform_index(n) < n


def test_spawn_streams_are_independent_of_parent_consumption():
    parent = RngHandle(5, "p")
    child_before = parent.spawn("c").uniform()
    parent.uniforms(1000)
    assert parent.spawn("c").uniform() == child_before


def test_normals_deterministic_and_plausible():
    a = RngHandle(9, "n").normals(50_000)
    b = RngHandle(9, "n").normals(50_000)
    assert np.array_equal(a, b)
    assert abs(a.mean()) < 0.02 and abs(a.std() - 1.0) < 0.02


def test_module_level_uniform_matches_method():
    assert uniform(RngHandle(2, "m")) == RngHandle(2, "m").uniform()


def test_instance_requires_observed_points():
    with pytest.raises(ValueError):
        Instance(0, 0, (0.0, 0.0, 0.0), (1.0, 0.0, 0.0, 0.0), frozenset())


def test_instance_requires_unit_quaternion():
    with pytest.raises(ValueError):
        Instance(0, 0, (0.0, 0.0, 0.0), (1.0, 0.1, 0.0, 0.0), frozenset([1]))
    n = math.sqrt(0.25 + 0.25 + 0.25 + 0.25)
    inst = Instance(0, 0, (0.0, 0.0, 0.0), (0.5 / n, 0.5 / n, 0.5 / n, 0.5 / n), frozenset([1]))
    assert inst.observed_points == frozenset([1])
