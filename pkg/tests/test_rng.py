import numpy as np
import pytest
from hypothesis import given, strategies as st

from ns2dlab.rng import BLOCK, IncrementStream, block_normals, normals, wiener_increments


@given(st.integers(0, 3 * BLOCK), st.integers(1, 2 * BLOCK), st.integers(0, 5))
def test_random_access_matches_sequential(start, n, replica):
    full = normals(7, replica, 0, start + n, 3)
    assert np.array_equal(normals(7, replica, start, n, 3), full[start:])


def test_stream_matches_per_replica_draws():
    reps = [0, 3, 11]
    stream = IncrementStream(5, reps, 2, 0.01)
    rows = np.stack([stream.step(i) for i in range(BLOCK + 10)])
    for j, r in enumerate(reps):
        assert np.array_equal(rows[:, j], wiener_increments(5, r, 0, BLOCK + 10, 2, 0.01))


def test_replicas_and_seeds_differ():
    a = block_normals(1, 0, 0, 2)
    assert not np.array_equal(a, block_normals(1, 1, 0, 2))
    assert not np.array_equal(a, block_normals(2, 0, 0, 2))
    assert not np.array_equal(a, block_normals(1, 0, 1, 2))


def test_deterministic():
    assert np.array_equal(normals(3, 2, 100, 50, 4), normals(3, 2, 100, 50, 4))


def test_scaling_and_moments():
    z = wiener_increments(9, 0, 0, 8 * BLOCK, 4, 0.25)
    assert z.mean() == pytest.approx(0.0, abs=4 * 0.5 / np.sqrt(z.size))
    assert z.var() == pytest.approx(0.25, rel=0.03)


def test_empty_requests():
    assert normals(0, 0, 10, 0, 3).shape == (0, 3)
    assert normals(0, 0, 10, 5, 0).shape == (5, 0)
