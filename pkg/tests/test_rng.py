import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from homodyne_qrng import rng


def test_seed_must_be_u64():
    with pytest.raises(ValueError):
        rng.as_seed_sequence(-1)
    with pytest.raises(ValueError):
        rng.as_seed_sequence(1 << 64)
    rng.as_seed_sequence((1 << 64) - 1)


def test_child_streams_are_distinct_and_stable():
    a = rng.generator(rng.child(7, "shot")).random(4)
    b = rng.generator(rng.child(7, "electronic")).random(4)
    again = rng.generator(rng.child(7, "shot")).random(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, again)


@given(st.integers(0, 2**64 - 1), st.integers(1, 3 * rng.CHUNK + 17))
def test_normals_prefix_stable(seed, count):
    # a longer request extends a shorter one without changing it
    short = rng.standard_normals(seed, count)
    longer = rng.standard_normals(seed, count + 5)
    np.testing.assert_array_equal(short, longer[:count])


def test_workers_do_not_change_output():
    n = 2 * rng.CHUNK + 3
    np.testing.assert_array_equal(rng.standard_normals(3, n), rng.standard_normals(3, n, workers=3))


def test_iterator_matches_bulk():
    it = rng.iter_standard_normals(11)
    chunks = np.concatenate([next(it) for _ in range(2)])
    np.testing.assert_array_equal(chunks, rng.standard_normals(11, 2 * rng.CHUNK))


def test_normals_are_standard():
    x = rng.standard_normals(5, 400_000)
    assert abs(x.mean()) < 0.01
    assert abs(x.var() - 1) < 0.01
