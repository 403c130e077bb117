"""Unit Tests for thread.py Module"""

import pytest

from LSTMPlanner.thread import chunk, threading


def job(seed):
    if seed == 3:
        raise RuntimeError("seed 3")
    return [{"seed": seed, "planner": "lstmp", "cost": float(seed)}]


def test_chunk():
    """Consecutive chunks, the last one shorter"""
    assert chunk([1, 2, 3, 4, 5], 2) == [[1, 2], [3, 4], [5]], "Should split"
    assert chunk([], 3) == [], "Should be empty"
    with pytest.raises(ValueError):
        chunk([1], 0)


def test_threading():
    """Rows come back in seed order, failures are kept per seed"""
    result = threading([5, 1, 3, 2], job, threads=3)
    assert list(result.rows["seed"]) == [5, 1, 2], "Should follow the seed order"
    assert list(result.failures) == [3], "Should record seed 3"
    assert not result.ok, "Should not be ok"
    assert "solve_ms_max" in result.rows.columns, "Should use the metrics columns"

    assert threading([0, 1], job, threads=1).ok, "Should be ok"
    assert threading([], job).rows.empty, "Should be empty"
