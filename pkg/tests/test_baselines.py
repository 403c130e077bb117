"""Unit Tests for baselines.py Module"""

import numpy as np
import pytest

from LSTMPlanner.baselines import (
    HybridAStarConfig,
    MipDmConfig,
    build_mipdm,
    completion_windows,
    hybrid_astar_plan,
    lane_change_steps,
    lateral_primitives,
    lateral_profile,
    mipdm_plan,
    relaxed_heuristic,
    relaxed_heuristic_table,
)
from LSTMPlanner.PlanConsts import SolveStatus
from LSTMPlanner.road import EgoState, PlanningProblem, RoadGeometry
from LSTMPlanner.STF import discretize_dynamics


@pytest.mark.parametrize("N, expected", [(10, 610), (15, 915), (20, 1220)])
def test_mipdm_binaries(lane_change_problem, N, expected):
    """Four binaries per slot, lane and step plus one shift binary per step"""
    cfg = MipDmConfig(N=N)
    assert cfg.expected_binaries == expected, f"Should be {expected}"
    assert cfg.stf.N == N, "Should align the STF horizon"
    build = build_mipdm(lane_change_problem, cfg)
    assert build.model.num_binaries == expected, f"Should be {expected}"


def test_mipdm_config(profile):
    """Test validation and profile loading"""
    cfg = MipDmConfig.from_profile(profile, N=15)
    assert (cfg.N, cfg.M, cfg.L) == (15, 3, 5), "Should be (15, 3, 5)"
    assert cfg.stf.N == 15, "Should pass N to the STF"
    with pytest.raises(ValueError):
        MipDmConfig(M=0)


def test_mipdm_lane_keeping(empty_problem):
    """Nothing to do on the goal lane at the reference velocity"""
    result = mipdm_plan(empty_problem)
    assert result.status == SolveStatus.Optimal, "Should be optimal"
    assert result.objective == pytest.approx(0.0, abs=1e-4), "Should be 0"
    assert result.planner == "mipdm", "Should be mipdm"
    assert len(result.states) == 11, "Should be N + 1 states"


def test_mipdm_lane_change(lane_change_problem):
    """The decision maker moves to the goal lane within its horizon"""
    result = mipdm_plan(lane_change_problem)
    assert result.status == SolveStatus.Optimal, "Should be optimal"
    assert result.lam[-1] == 1.0, "Should shift by one lane"
    assert result.lane_indices[-1] == 2, "Should end on lane 2"
    assert np.all(np.diff(result.lam) >= 0), "Should only move towards the goal"


def replay(n, v_n, profile, t_d=0.3):
    A, B = discretize_dynamics(t_d)
    x = np.array([0.0, n, 25.0, v_n])
    for a_n in profile:
        x = A @ x + B @ np.array([0.0, a_n])
    return x


def test_lane_change_steps():
    """Shortest rest-to-rest lane change at the lateral acceleration bound"""
    assert lane_change_steps(3.75, 3.0, 0.3) == 8, "Should be 8"
    assert lane_change_steps(3.75, 100.0, 0.3) == 2, "Should be 2"

    profile = lateral_profile(0.0, 0.0, 3.75, 8, 8, 0.3, 3.0)
    assert profile[:4] == pytest.approx([3.75 / 1.44] * 4), "Should be bang-bang"
    assert profile[4:] == pytest.approx([-3.75 / 1.44] * 4), "Should be bang-bang"
    x = replay(0.0, 0.0, profile)
    assert x[1] == pytest.approx(3.75), "Should move one lane"
    assert x[3] == pytest.approx(0.0, abs=1e-12), "Should end at rest"


@pytest.mark.parametrize("target", [0.0, 3.75])
def test_lateral_profile_mid_change(target):
    """A vehicle between lanes moving sideways can settle on either center"""
    profile = lateral_profile(1.5, 1.0, target, 8, 8, 0.3, 3.0)
    assert profile is not None, "Should be within the bound"
    assert np.all(np.abs(profile) <= 3.0 + 1e-9), "Should respect the bound"
    x = replay(1.5, 1.0, profile)
    assert x[1] == pytest.approx(target), "Should end on the lane center"
    assert x[3] == pytest.approx(0.0, abs=1e-9), "Should end at rest"


def test_lateral_profile_infeasible():
    """Two lanes in two steps exceed the lateral bound"""
    assert lateral_profile(0.0, 0.0, 7.5, 2, 8, 0.3, 3.0) is None, "Should be None"


def test_lateral_primitives():
    """Windows shrink from the full expansion and duplicates are dropped"""
    windows = completion_windows(8, 11)
    assert list(windows) == [8, 7, 6, 5, 4, 3, 2], "Should be 8 down to 2"
    assert list(completion_windows(8, 1)) == [8], "Should be the full expansion"

    still = lateral_primitives(0.0, 0.0, 0.0, 8, 11, 0.3, 3.0)
    assert len(still) == 1 and not np.any(still[0]), "Should be a single zero move"

    moving = lateral_primitives(0.5, 0.5, 0.0, 8, 11, 0.3, 3.0)
    assert len(moving) > 1, "Should offer several windows"
    for i, profile in enumerate(moving):
        x = replay(0.5, 0.5, profile)
        assert x[1] == pytest.approx(0.0, abs=1e-9), "Should end on the center"
        assert x[3] == pytest.approx(0.0, abs=1e-9), "Should end at rest"
        for other in moving[:i]:
            assert not np.allclose(profile, other), "Should be distinct"


def test_hybrid_astar_config(profile):
    """Expansions are long enough for a lane change and sample a = 0"""
    cfg = HybridAStarConfig()
    assert cfg.steps == 8, "Should be raised to 8"
    assert len(cfg.accelerations) == 11, "Should be 11"
    assert 0.0 in cfg.accelerations, "Should contain 0"
    assert HybridAStarConfig.from_profile(profile).max_expansions == 50, "Should be 50"
    with pytest.raises(ValueError):
        HybridAStarConfig(max_expansions=0)


def test_relaxed_heuristic(empty_problem):
    """Zero on the goal lane at the reference, lane cost until halfway"""
    cfg = HybridAStarConfig()
    assert relaxed_heuristic(25.0, 1, 1, 8, cfg, 25.0) == 0.0, "Should be 0"
    # four steps on lane 1 before half of the lane change
    assert relaxed_heuristic(25.0, 1, 2, 8, cfg, 25.0) == pytest.approx(180.0), "180"
    assert relaxed_heuristic(20.0, 1, 1, 1, cfg, 25.0) == pytest.approx(
        0.1 * 3.5**2
    ), "Should assume full acceleration"
    table = relaxed_heuristic_table(empty_problem, 1, cfg, 8)
    assert table.shape == (20,), "Should be one value per velocity bucket"
    assert np.all(table >= 0.0), "Should be nonnegative"


def test_hybrid_astar_single_expansion(empty_problem):
    """One expansion from the root reaches the goal depth"""
    cfg = HybridAStarConfig(horizon_expansions=1)
    result = hybrid_astar_plan(empty_problem, cfg)
    assert result.status == SolveStatus.Optimal, "Should reach the goal depth"
    assert result.node_count == 1, "Should expand the root only"
    assert result.objective == pytest.approx(0.0), "Should coast at v_ref"
    assert len(result.states) == cfg.steps + 1, "Should be one expansion long"


def test_hybrid_astar_lane_change(lane_change_problem):
    """The search ends on the goal lane"""
    cfg = HybridAStarConfig(max_expansions=200)
    result = hybrid_astar_plan(lane_change_problem, cfg)
    assert result.status == SolveStatus.Optimal, "Should reach the goal depth"
    assert result.lane_indices[-1] == 2, "Should end on lane 2"
    assert len(result.states) == 3 * 8 + 1, "Should span three expansions"


def test_hybrid_astar_replay():
    """Plans from a state between lanes follow the dynamics and stay on the road"""
    road = RoadGeometry(3)
    problem = PlanningProblem(road, EgoState(100.0, 1.0, 25.0, 0.5), (), 3, 25.0)
    cfg = HybridAStarConfig()
    result = hybrid_astar_plan(problem, cfg)
    A, B = discretize_dynamics(result.t_d)
    for k, u in enumerate(result.controls):
        expected = A @ result.states[k] + B @ u
        assert np.allclose(expected, result.states[k + 1], atol=1e-9), f"Step {k}"
    low, high = road.lateral_box
    n = result.states[:, 1]
    assert np.all((n > low) & (n < high)), "Should stay on the road"
    ends = result.states[cfg.steps :: cfg.steps]
    offsets = ends[:, 1] / road.lane_width
    assert offsets == pytest.approx(np.round(offsets), abs=1e-9), "Should end centered"
    assert ends[:, 3] == pytest.approx(0.0, abs=1e-9), "Should end at rest"
