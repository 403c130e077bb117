"""Unit Tests for LSTMP.py Module"""

import numpy as np
import pytest
import yaml

from LSTMPlanner._utils import FallbackWarning, PlanInfeasibleError
from LSTMPlanner.LSTMP import (
    LstmpConfig,
    Planner,
    braking_plan,
    build_lstmp,
    consistency_audit,
    plan,
    reindex_for_next_cycle,
    safety_audit,
    shift_plan,
)
from LSTMPlanner.PlanConsts import SolveStatus
from LSTMPlanner.road import EgoState, PlanningProblem, RoadGeometry, SurroundingVehicle
from LSTMPlanner.STF import StfConfig


@pytest.fixture(scope="module")
def keep_result(empty_problem):
    return plan(empty_problem)


@pytest.fixture(scope="module")
def change_result(lane_change_problem):
    return plan(lane_change_problem)


class FailingPlanner(Planner):
    def _plan(self, problem):
        raise PlanInfeasibleError("no plan")


def test_lstmp_config(profile):
    """Profile sections map onto the planner settings"""
    cfg = LstmpConfig.from_profile(profile, lanes=3)
    assert cfg.lanes == 3, "Should apply overrides"
    assert cfg.max_per_lane == 7, "Should be M of the traffic section"
    assert cfg.solve.abs_gap == 1e-2, "Should load the solver section"
    variant = LstmpConfig.from_profile({"traffic": {"dv_lower": 3.0}})
    assert variant.dv_lower == 3.0, "Should merge over the defaults"
    assert cfg.stf_config(20.0).v_ref == 20.0, "Should pass v_ref"
    assert cfg.ltf_config(20.0, 2, 2).lanes == 2, "Should pass the lane count"
    with pytest.raises(ValueError):
        LstmpConfig(lanes=0)
    with pytest.raises(ValueError):
        LstmpConfig(eps_t=0.0)


def test_binary_counts(empty_problem, lane_change_problem, busy_lane):
    """Lane binaries plus one binary per gap and a virtual gap"""
    assert build_lstmp(empty_problem).model.num_binaries == 0, "Should keep the lane"
    assert build_lstmp(lane_change_problem).model.num_binaries == 17, "Should be 15 + 2"
    ego, traffic = busy_lane
    problem = PlanningProblem(RoadGeometry(2), ego, traffic, 2, 25.0)
    build = build_lstmp(problem)
    assert build.model.num_binaries == 24, "Should be 15 + 8 gaps + 1"
    assert build.model.frozen, "Should be frozen"
    assert len(build.tv) == 1, "Should have one transition"


def test_lane_keeping(keep_result):
    """At the reference velocity on the goal lane nothing changes"""
    assert keep_result.status == SolveStatus.Optimal, "Should be optimal"
    assert keep_result.objective == pytest.approx(0.0, abs=1e-4), "Should be 0"
    assert keep_result.lane_change_step is None, "Should keep the lane"
    assert keep_result.transitions == [], "Should have no transitions"
    assert keep_result.states[0, 0] == 100.0, "Should start at the ego"
    assert np.all(keep_result.lane_indices == 1), "Should stay on lane 1"


def test_lane_change(change_result):
    """The plan changes lanes into the first real gap"""
    assert change_result.status == SolveStatus.Optimal, "Should be optimal"
    assert change_result.lane_change_step is not None, "Should change lanes"
    assert change_result.lane_indices[-1] == 2, "Should end on lane 2"
    first = change_result.transitions[0]
    assert not first.virtual and first.lane == 2, "Should enter lane 2"
    horizon = change_result.horizon * change_result.t_d
    assert first.tau < horizon, "Should be within the horizon"
    assert consistency_audit(change_result, tol=1e-4) == [], "Should be consistent"
    assert safety_audit(change_result) == [], "Should be safe"


def test_slow_leader():
    """A slow leader on the goal lane caps the terminal velocity"""
    leader = SurroundingVehicle.nominal(1, 1, 160.0, 15.0)
    problem = PlanningProblem(
        RoadGeometry(3), EgoState(100.0, 0.0, 25.0), (leader,), 1, 25.0
    )
    result = plan(problem)
    assert result.states[-1, 2] <= 15.0 + 1e-4, "Should slow down to the leader"
    assert safety_audit(result) == [], "Should stay behind the leader"


def test_safety_audit(keep_result):
    """A vehicle placed onto the trajectory is reported"""
    blocker = SurroundingVehicle.nominal(9, 1, 103.0, 25.0)
    issues = safety_audit(keep_result, [blocker])
    assert issues and "SV 9" in issues[0], "Should report the blocker"


def test_plan_result_output(keep_result, tmp_path):
    """Trajectory tables and YAML traces"""
    df = keep_result.to_dataframe()
    assert len(df) == keep_result.horizon + 1, "Should be one row per state"
    assert list(df.columns) == [
        "t", "s", "n", "v_s", "v_n", "a_s", "a_n", "lam", "lane"
    ], "Should list all columns"
    assert np.isnan(df["a_s"].iloc[-1]), "Should have no last control"
    assert df["t"].iloc[-1] == pytest.approx(4.5), "Should end at N t_d"

    data = yaml.safe_load(keep_result.write(tmp_path / "plan.yaml").read_text())
    assert data["planner"] == "lstmp", "Should name the planner"
    assert data["status"] == "optimal", "Should store the status value"
    assert len(data["states"]) == 16, "Should store all states"


def test_reindex_for_next_cycle(change_result):
    """Lane binaries move one step, a completed change renumbers lanes"""
    road = RoadGeometry(2)
    warm = reindex_for_next_cycle(change_result, EgoState(107.5, 0.0, 25.0), road)
    assert warm.base_lane == 1, "Should stay on lane 1"
    assert warm.lam[0] == 0.0, "Should start on the ego lane"
    assert warm.lam[1:-1] == tuple(change_result.lam[2:]), "Should shift by one"
    assert warm.gaps == {2: None}, "Should remember the frontmost gap"

    entered = reindex_for_next_cycle(change_result, EgoState(107.5, 3.75, 25.0), road)
    assert entered.base_lane == 2 and entered.gaps == {}, "Should renumber"
    assert not any(entered.lam), "Should reset the lane binaries"
    nothing = reindex_for_next_cycle(None, EgoState(0.0, 0.0, 1.0), road)
    assert nothing is None, "Should be None"


def test_warm_start(lane_change_problem, change_result):
    """A reindexed plan yields a complete binary assignment"""
    ego = EgoState.from_array(change_result.states[1])
    warm = reindex_for_next_cycle(change_result, ego, lane_change_problem.road)
    build = build_lstmp(lane_change_problem)
    assert len(warm.assignment(build)) == 17, "Should assign every binary"
    result = plan(lane_change_problem, warm=warm)
    assert result.status == SolveStatus.Optimal, "Should still be optimal"


def test_braking_plan(lane_change_problem):
    """Full braking ends at standstill on the current lane"""
    stf = StfConfig()
    result = braking_plan(lane_change_problem, stf, "lstmp")
    assert result.fallback, "Should be a fallback"
    assert result.status == SolveStatus.Infeasible, "Should be infeasible"
    assert result.states[-1, 2] == pytest.approx(0.0, abs=1e-9), "Should stop"
    assert np.all(np.diff(result.states[:, 2]) <= 1e-12), "Should only brake"
    assert np.all(result.controls[:, 0] >= stf.a_lon_min), "Should respect a_lon"


def test_shift_plan(keep_result):
    """The previous plan advances by one step"""
    shifted = shift_plan(keep_result, -8.0, 3.0)
    assert np.array_equal(shifted.states[0], keep_result.states[1]), "Should shift"
    assert len(shifted.states) == len(keep_result.states), "Should keep the length"
    assert shifted.fallback and shifted.transitions == [], "Should be a fallback"


def test_planner_fallback(lane_change_problem, keep_result):
    """A failing planner warns and falls back"""
    planner = FailingPlanner(StfConfig())
    with pytest.warns(FallbackWarning):
        result = planner.plan(lane_change_problem)
    assert result.fallback and planner.fallbacks == 1, "Should brake"

    planner.previous = keep_result
    ego = EgoState.from_array(keep_result.states[1])
    problem = PlanningProblem(RoadGeometry(3), ego, (), 1, 25.0)
    with pytest.warns(FallbackWarning):
        shifted = planner.plan(problem)
    assert np.array_equal(shifted.states[0], keep_result.states[1]), "Should shift"
    planner.reset()
    assert planner.previous is None and planner.fallbacks == 0, "Should reset"
