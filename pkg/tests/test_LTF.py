"""Unit Tests for LTF.py Module"""

import numpy as np
import pytest

from LSTMPlanner.config import DEFAULT_PROFILE
from LSTMPlanner.LTF import (
    LtfConfig,
    build_ltf,
    exact_reachable_bounds,
    fit_reachability_parameters,
)
from LSTMPlanner.MIQP import MiqpModel
from LSTMPlanner.PlanConsts import RefCostSign, SolveStatus
from LSTMPlanner.road import (
    RoadGeometry,
    SurroundingVehicle,
    arrival_free_set,
    enumerate_gaps,
)
from LSTMPlanner.solver import solve_miqp


def solve_ltf(traffic, cfg, lanes=3):
    table = enumerate_gaps(traffic, RoadGeometry(lanes))
    model = MiqpModel("ltf")
    tv, cost = build_ltf(model, table, cfg, lanes)
    model.add_objective(cost)
    model.freeze()
    return table, model, tv, solve_miqp(model)


def test_ltf_config():
    """Derived defaults follow the reference velocity"""
    cfg = LtfConfig()
    assert (cfg.v_op_upper, cfg.v_op_lower) == (30.0, 15.0), "Should be (30, 15)"
    assert cfg.t_lc == 2.7, "Should default to t_lc_max"
    assert cfg.r_min == pytest.approx(16.875), "Should be a quarter lane change"
    assert cfg.transitions == 4, "Should be one less than the lanes"
    assert cfg.scale == (25.0, 1.0), "Should measure time at v_ref"
    assert LtfConfig(v_ref=5.0).v_op_lower == 1.0, "Should floor at 1 m/s"
    assert LtfConfig(ref_cost_sign="printed").ref_cost_sign == RefCostSign.Printed

    with pytest.raises(ValueError):
        LtfConfig(v_op_upper=10.0, v_op_lower=20.0)
    with pytest.raises(ValueError):
        LtfConfig(t_f=100.0)
    with pytest.raises(ValueError):
        LtfConfig(goal_lane=0)

    loaded = LtfConfig.from_profile(DEFAULT_PROFILE, goal_lane=3)
    assert loaded.goal_lane == 3, "Should apply overrides"
    assert loaded.s_max == 2000.0, "Should take the road length"
    assert loaded.ref_cost_sign == RefCostSign.Corrected, "Should be corrected"


def test_exact_reachable_bounds():
    """Full throttle until the speed cap, full braking until the floor"""
    t = np.array([0.0, 1.0, 2.0])
    up, lo = exact_reachable_bounds(t, 25.0, 5.0, -8.0, 30.0, 15.0)
    assert np.allclose(up, [0.0, 27.5, 57.5]), "Should cap at 30 m/s after 1 s"
    assert np.allclose(lo, [0.0, 21.0, 36.25]), "Should floor at 15 m/s after 1.25 s"


def test_fit_reachability_parameters():
    """The fitted cone is valid and close to the speed limits"""
    fit = fit_reachability_parameters(25.0)
    assert 25.0 < fit.v_op_upper < 35.0, "Should be near the speed cap"
    assert 10.0 < fit.v_op_lower < 20.0, "Should be near the speed floor"
    assert 0.0 < fit.t_lc < 2.0, "Should be a short traversal"
    assert fit.residual >= 0.0, "Should be nonnegative"
    with pytest.raises(ValueError):
        fit_reachability_parameters(25.0, a_min=1.0)

    cfg = LtfConfig.fitted(25.0, goal_lane=3)
    assert cfg.v_op_upper == pytest.approx(fit.v_op_upper), "Should use the fit"
    assert cfg.goal_lane == 3, "Should pass further settings"


def test_binary_counts(busy_lane):
    """One binary per gap plus a virtual gap on every lane after the ego lane"""
    _, traffic = busy_lane
    table = enumerate_gaps(traffic, RoadGeometry(3))
    model = MiqpModel()
    tv, _ = build_ltf(model, table, LtfConfig(lanes=3, goal_lane=3), 3)
    assert len(tv) == 2, "Should have two transitions"
    assert len(tv.beta[2]) == 9, "Should be 8 gaps plus the virtual gap"
    assert len(tv.beta[3]) == 2, "Should be 1 gap plus the virtual gap"
    assert model.num_binaries == 11, "Should be 11"


def test_empty_road():
    """Transitions are chained by the reachability cone"""
    cfg = LtfConfig(lanes=3, goal_lane=3)
    _, _, tv, solution = solve_ltf([], cfg)
    assert solution.status == SolveStatus.Optimal, "Should be optimal"
    values = solution.values
    assert values[tv.virtual(2).id] == pytest.approx(0.0, abs=1e-6), "Should change"
    assert values[tv.virtual(3).id] == pytest.approx(0.0, abs=1e-6), "Should change"
    assert values[tv.tau[0].id] == pytest.approx(0.0, abs=1e-4), "Should start now"
    # reference spacing 25 m/s fits the cone only after 16.2 s
    assert values[tv.tau[1].id] == pytest.approx(16.2, abs=1e-2), "Should be 16.2"
    d_tau = values[tv.tau[1].id] - values[tv.tau[0].id]
    d_sigma = values[tv.sigma[1].id] - values[tv.sigma[0].id]
    assert d_sigma <= cfg.v_op_upper * (d_tau - cfg.t_lc) + 1e-4, "Should be reachable"
    assert d_sigma >= cfg.v_op_lower * (d_tau + cfg.t_lc) - 1e-4, "Should be reachable"


def test_transition_inside_gap():
    """The chosen gap contains the transition point"""
    traffic = [SurroundingVehicle.nominal(1, 2, 100.0, 20.0)]
    table, model, tv, solution = solve_ltf(traffic, LtfConfig(lanes=3, goal_lane=3))
    assert solution.status == SolveStatus.Optimal, "Should be optimal"
    assert model.max_violation(solution.values) < 1e-4, "Should be feasible"
    gap = tv.selected_gap(2, solution.values)
    assert gap is not None, "Should pick a real gap"
    tau, sigma = (solution.values[v.id] for v in (tv.tau[0], tv.sigma[0]))
    free = arrival_free_set(gap, table)
    assert free.contains(tau, sigma, tol=1e-4), "Should be inside the gap"
