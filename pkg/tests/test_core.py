import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mdaopt.core import (
    TRACE_COLUMNS,
    RngStream,
    RunTrace,
    TraceRow,
    UsageError,
    axpy,
    dot,
    gaussian_vector,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_dot_hand_values():
    assert dot([1, 2], [3, 4]) == 11.0
    assert dot([0, 0, 0], [5.0, -3.0, 7.0]) == 0.0


def test_dot_large_terms_within_one_ulp():
    exact = math.fsum([1e8 * 1e8, 1.0])
    got = dot([1e8, 1], [1e8, 1])
    assert abs(got - exact) <= math.ulp(exact)


def test_dot_and_axpy_reject_length_mismatch():
    with pytest.raises(UsageError):
        dot([1, 2], [1, 2, 3])
    with pytest.raises(UsageError):
        axpy(1.0, [1, 2], [1])


def test_axpy_cases():
    np.testing.assert_array_equal(axpy(2, [1, 1], [0, 1]), [2, 3])
    y = np.array([3.0, -1.0])
    np.testing.assert_array_equal(axpy(0, [9, 9], y), y)
    x = np.array([0.3, 7.1, -2.0])
    np.testing.assert_array_equal(axpy(-1, x, x), np.zeros(3))


@given(st.lists(finite, min_size=1, max_size=20), st.data())
def test_dot_is_symmetric(a, data):
    b = data.draw(st.lists(finite, min_size=len(a), max_size=len(a)))
    assert dot(a, b) == dot(b, a)


def test_gaussian_zero_sigma():
    np.testing.assert_array_equal(gaussian_vector(RngStream(0), 3, 0.0), np.zeros(3))


def test_gaussian_moments():
    v = gaussian_vector(RngStream(42), 100_000, 1.0)
    assert -0.02 <= v.mean() <= 0.02
    assert 0.98 <= v.var() <= 1.02


def test_gaussian_determinism_and_streams():
    a = gaussian_vector(RngStream(7), 50, 2.0)
    b = gaussian_vector(RngStream(7), 50, 2.0)
    np.testing.assert_array_equal(a, b)
    c = gaussian_vector(RngStream(7, index=1), 50, 2.0)
    assert not np.array_equal(a, c)


def test_clone_replays_samples():
    r = RngStream(3)
    r.normal(4)
    twin = r.clone()
    np.testing.assert_array_equal(r.normal(5), twin.normal(5))


def test_choice_without_replacement():
    idx = RngStream(0).choice(10, 10)
    assert sorted(idx.tolist()) == list(range(10))


def test_rng_rejects_negative_seed():
    with pytest.raises(UsageError):
        RngStream(-1)


def _row(k):
    return TraceRow(k, 1.0, 2.0, 0.1, 0.0, 1.0, 0.1, 1.0, 0.0)


def test_trace_steps_strictly_increasing():
    tr = RunTrace(meta={})
    tr.append(_row(0))
    tr.append(_row(1))
    with pytest.raises(UsageError):
        tr.append(_row(1))
    assert len(tr) == 2
    assert [r.step for r in tr] == [0, 1]
    assert tuple(tr.columns) == TRACE_COLUMNS


def test_returned_iterate_modes():
    tr = RunTrace(meta={}, x_final=np.array([1.0]), x_average=np.array([0.5]))
    assert tr.returned_iterate()[0] == 1.0
    assert tr.returned_iterate("average_iterate")[0] == 0.5
    with pytest.raises(UsageError):
        tr.returned_iterate("best")
