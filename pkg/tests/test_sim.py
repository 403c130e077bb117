"""Unit Tests for sim.py Module"""

import numpy as np
import pytest
import yaml

from LSTMPlanner._utils import ScenarioError
from LSTMPlanner.baselines import HybridAStarPlanner, MipDmPlanner
from LSTMPlanner.config import DEFAULT_PROFILE
from LSTMPlanner.LSTMP import (
    LstmpConfig,
    LstmpPlanner,
    consistency_audit,
    safety_audit,
)
from LSTMPlanner.PlanConsts import PlannerKind
from LSTMPlanner.road import EgoState, RoadGeometry
from LSTMPlanner.sim import (
    CostWeights,
    Leader,
    ScenarioConfig,
    ScenarioTemplate,
    SvState,
    Trace,
    TraceStep,
    collides,
    compute_metrics,
    make_planner,
    planner_label,
    randomize_scenario,
    run_closed_loop,
    step_sv,
    step_traffic,
)


def short_scenario(planner=PlannerKind.HybridAStar, duration=1.5, **options):
    return ScenarioConfig(
        road=RoadGeometry(2, length=600.0),
        ego=EgoState(100.0, 0.0, 25.0),
        goal_lane=2,
        v_ref=25.0,
        planner=planner,
        planner_options=options,
        duration=duration,
    )


def test_step_sv():
    """Desired speed unless a slower leader is close"""
    sv = SvState(1, 1, 100.0, 20.0, 20.0)
    assert step_sv(sv, None, 0.3).s == pytest.approx(106.0), "Should move 6 m"
    assert step_sv(sv, Leader(110.0, 15.0), 0.3).v == 15.0, "Should follow"
    assert step_sv(sv, Leader(130.0, 15.0), 0.3).v == 20.0, "Should ignore far"
    assert step_sv(sv, Leader(110.0, 25.0), 0.3).v == 20.0, "Should ignore faster"
    edge = Leader(114.0, 15.0)
    assert step_sv(sv, edge, 0.3, threshold=14.0).v == 20.0, "Should be strict"
    with pytest.raises(ValueError):
        step_sv(sv, None, 0.0)


def test_step_traffic():
    """Vehicles follow slower vehicles and the ego ahead of them"""
    road = RoadGeometry(2)
    vehicles = [
        SvState(0, 1, 140.0, 20.0, 20.0),
        SvState(1, 2, 200.0, 10.0, 10.0),
        SvState(2, 2, 190.0, 30.0, 30.0),
    ]
    before = np.array([150.0, 0.0, 10.0, 0.0])
    after = np.array([153.0, 0.0, 10.0, 0.0])
    moved = step_traffic(vehicles, before, after, road, 0.3)
    assert [sv.id for sv in moved] == [0, 1, 2], "Should keep the id order"
    assert moved[0].v == pytest.approx(10.0), "Should follow the ego"
    assert moved[1].v == 10.0, "Should drive its desired speed"
    assert moved[2].v == 10.0, "Should follow the slower vehicle"


def test_scenario_validation():
    """Invalid lanes, overlaps and starts are rejected"""
    road = RoadGeometry(3)
    ego = EgoState(100.0, 0.0, 25.0)
    with pytest.raises(ScenarioError):
        ScenarioConfig(road, ego, 4, 25.0)
    with pytest.raises(ScenarioError):
        ScenarioConfig(road, ego, 2, 25.0, (SvState(0, 1, 102.0, 20.0, 20.0),))
    with pytest.raises(ScenarioError):
        ScenarioConfig(
            road,
            ego,
            2,
            25.0,
            (SvState(0, 2, 100.0, 20.0, 20.0), SvState(1, 2, 103.0, 20.0, 20.0)),
        )
    with pytest.raises(ScenarioError):
        ScenarioConfig(
            road,
            ego,
            2,
            25.0,
            (SvState(0, 2, 100.0, 20.0, 20.0), SvState(0, 3, 100.0, 20.0, 20.0)),
        )
    with pytest.raises(ScenarioError):
        ScenarioConfig(road, ego, 2, 25.0, duration=0.0)


def test_scenario_from_dict(tmp_path):
    """Short forms are completed and files round trip"""
    scenario = ScenarioConfig.from_dict(
        {
            "road": {"lanes": 3},
            "ego": {"s": 50.0, "lane": 2, "v": 20.0},
            "goal": {"lane": 3},
            "vehicles": [{"lane": 1, "s": 80.0, "v": 22.0}],
            "planner": {"kind": "mipdm", "horizon": 15},
        }
    )
    assert scenario.ego.n == 3.75 and scenario.ego.v_s == 20.0, "Should place on lane 2"
    assert scenario.vehicles[0].v_desired == 22.0, "Should default to v"
    assert scenario.planner == PlannerKind.MIPDM, "Should be mipdm"
    assert scenario.config_label == "N15", "Should label the horizon"

    loaded = ScenarioConfig.load(scenario.write(tmp_path / "scenario.yaml"))
    assert loaded == scenario, "Should round trip"

    with pytest.raises(ScenarioError):
        ScenarioConfig.from_dict({"ego": {"s": 0.0}})
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ScenarioError):
        ScenarioConfig.load(tmp_path / "list.yaml")


def test_planner_label(profile):
    """Configuration labels of the metrics rows"""
    assert planner_label(PlannerKind.LSTMP, profile, {}) == "L5", "Should be L5"
    label = planner_label(PlannerKind.LSTMP, profile, {"lanes": 3})
    assert label == "L3", "Should be L3"
    assert planner_label(PlannerKind.MIPDM, profile, {}) == "N10", "Should be N10"
    assert planner_label("hastar", profile, {"iters": 500}) == "I500", "Should be I500"


def test_make_planner():
    """Planner options reach the planner configurations"""
    lstmp = make_planner("lstmp", None, {"lanes": 3})
    assert isinstance(lstmp, LstmpPlanner) and lstmp.cfg.lanes == 3, "Should be L3"
    mipdm = make_planner(PlannerKind.MIPDM, None, {"horizon": 15})
    assert isinstance(mipdm, MipDmPlanner) and mipdm.cfg.N == 15, "Should be N15"
    hastar = make_planner("hastar", {"hastar": {"max_expansions": 7}})
    assert isinstance(hastar, HybridAStarPlanner), "Should be hybrid A*"
    assert hastar.cfg.max_expansions == 7, "Should apply the profile"


def test_randomize_scenario():
    """Drawn traffic is reproducible and honors the density"""
    template = ScenarioTemplate(num_lanes=3, road_length=1000.0)
    assert template.per_lane == 12, "Should be 12 per lane"
    first = randomize_scenario(template, 3)
    assert first == randomize_scenario(template, 3), "Should be reproducible"
    assert first != randomize_scenario(template, 4), "Should depend on the seed"
    assert len(first.vehicles) == 36, "Should be 12 on each of 3 lanes"
    assert first.goal_lane == 3, "Should default to the top lane"
    assert first.name == "custom-3" and first.seed == 3, "Should record the seed"

    empty = randomize_scenario(ScenarioTemplate(density=0.0), 0)
    assert empty.vehicles == (), "Should be empty"
    with pytest.raises(ScenarioError):
        ScenarioTemplate(speed_range=(30.0, 20.0))


def test_collides():
    """Only the interior of a vehicle rectangle counts"""
    vehicles = [SvState(0, 1, 100.0, 20.0, 20.0)]
    inside, front, beside = np.array(
        [[97.0, 0.0, 20.0, 0.0], [100.0, 0.0, 20.0, 0.0], [97.0, 3.75, 20.0, 0.0]]
    )
    assert collides(inside, vehicles, 3.75), "Should collide"
    assert not collides(front, vehicles, 3.75), "Should exclude the front"
    assert not collides(beside, vehicles, 3.75), "Should be on lane 2"


def test_lane_cost():
    """One lane away from the goal at the reference costs w_g per second"""
    scenario = short_scenario()
    weights = CostWeights.from_profile(DEFAULT_PROFILE)
    trace = Trace(scenario=scenario, weights=weights, t_d=0.3)
    for k in range(100):
        trace.append(
            TraceStep(
                step=k,
                t=0.3 * k,
                ego=np.array([100.0 + 7.5 * k, 0.0, 25.0, 0.0]),
                control=np.zeros(2),
                vehicles=(),
                plan=np.zeros((1, 4)),
                status="optimal",
                objective=0.0,
                solve_ms=1.0,
                fallback=False,
                collision=False,
                cost=0.0,
            )
        )
    metrics = compute_metrics(trace)
    assert metrics.cost == pytest.approx(6000.0), "Should be 100 * 0.3 * 200"
    assert metrics.dv == 0.0 and metrics.lmax == 1, "Should stay on lane 1"
    assert metrics.lane_changes == 0 and metrics.collisions == 0, "Should be clean"
    assert metrics.solve_ms_median == 1.0, "Should be 1 ms"
    row = metrics.row(0, "lstmp", "L5", timings=False)
    assert row["solve_ms_max"] == 0.0, "Should zero timings"
    with pytest.raises(ValueError):
        compute_metrics(Trace())


def test_closed_loop(tmp_path):
    """Trace, recomputed metrics and files agree"""
    scenario = short_scenario(iters=20)
    metrics, trace = run_closed_loop(scenario)
    assert len(trace) == 5, "Should run 1.5 s in 0.3 s cycles"
    assert trace.states.shape == (6, 4), "Should include the final state"
    assert np.array_equal(trace[1].ego, trace[0].plan[1]), "Should track exactly"
    recomputed = compute_metrics(trace).cost
    assert recomputed == pytest.approx(trace[-1].cost), "Should recompute"
    assert metrics.collisions == 0, "Should not collide on an empty road"

    again, _ = run_closed_loop(scenario)
    assert again.cost == metrics.cost, "Should be deterministic"

    df = trace.to_dataframe(timings=False)
    assert len(df) == 5 and (df["solve_ms"] == 0.0).all(), "Should zero timings"
    path = trace.write(tmp_path / "trace.yaml")
    documents = list(yaml.safe_load_all(path.read_text()))
    assert len(documents) == 6, "Should be a header and one document per cycle"
    assert documents[0]["planner"] == "hastar", "Should name the planner"


@pytest.mark.slow
def test_closed_loop_lane_change():
    """LSTMP reaches the goal lane on an empty road"""
    metrics, trace = run_closed_loop(short_scenario(PlannerKind.LSTMP, duration=4.5))
    assert metrics.lmax == 2, "Should reach lane 2"
    assert metrics.lane_changes == 1, "Should change lanes once"
    assert metrics.collisions == 0, "Should not collide"
    assert metrics.fallbacks == 0, "Should always find a plan"


@pytest.mark.slow
def test_closed_loop_hybrid_astar_three_lanes():
    """Hybrid A* crosses two lanes without leaving the road"""
    road = RoadGeometry(3, length=1000.0)
    scenario = ScenarioConfig(
        road=road,
        ego=EgoState(100.0, 0.0, 25.0),
        goal_lane=3,
        v_ref=25.0,
        planner=PlannerKind.HybridAStar,
        planner_options={"iters": 20},
        duration=12.0,
    )
    metrics, trace = run_closed_loop(scenario)
    low, high = road.lateral_box
    n = trace.states[:, 1]
    assert np.all((n > low) & (n < high)), "Should stay on the road"
    assert metrics.lmax == 3, "Should reach lane 3"
    assert metrics.collisions == 0, "Should not collide"
    assert metrics.fallbacks == 0, "Should always find a plan"


class AuditedPlanner(LstmpPlanner):
    """LSTMP planner collecting consistency and safety violations of its plans"""

    def __init__(self, cfg):
        super().__init__(cfg)
        self.issues = []

    def plan(self, problem):
        result = super().plan(problem)
        self.issues.extend(consistency_audit(result, tol=1e-4))
        self.issues.extend(safety_audit(result))
        return result


def custom_scenarios(count, duration=40.0, planner=PlannerKind.LSTMP, **options):
    template = ScenarioTemplate.custom(duration=duration)
    return [
        randomize_scenario(template, seed, planner, options) for seed in range(count)
    ]


@pytest.mark.slow
@pytest.mark.parametrize("lanes", [2, 3, 4, 5, 6])
def test_randomized_safety(lanes):
    """Custom traffic is driven without collisions, fallbacks or audit findings"""
    for scenario in custom_scenarios(20, lanes=lanes):
        profile = scenario.full_profile
        planner = AuditedPlanner(LstmpConfig.from_profile(profile, lanes=lanes))
        metrics, _ = run_closed_loop(scenario, planner)
        assert metrics.collisions == 0, f"Seed {scenario.seed}: collision"
        assert metrics.fallbacks == 0, f"Seed {scenario.seed}: fallback"
        assert planner.issues == [], f"Seed {scenario.seed}: {planner.issues[:3]}"


@pytest.mark.slow
def test_real_time_budget():
    """Median LSTMP solve time at five lanes and N = 15 stays below t_d"""
    template = ScenarioTemplate.custom(duration=20.0)
    times = []
    for seed in range(5):
        scenario = randomize_scenario(template, seed, "lstmp", {"lanes": 5})
        metrics, _ = run_closed_loop(scenario)
        times.extend(metrics.solve_ms)
        assert metrics.fallbacks == 0, f"Seed {seed}: fallback"
    assert np.median(times) < 300.0, "Should plan within the planning period"


@pytest.mark.slow
def test_performance_ordering():
    """LSTMP tracks the reference better than MIP-DM and plans faster"""
    runs = {}
    for label, planner, options in (
        ("L2", PlannerKind.LSTMP, {"lanes": 2}),
        ("L5", PlannerKind.LSTMP, {"lanes": 5}),
        ("N10", PlannerKind.MIPDM, {"horizon": 10}),
        ("N15", PlannerKind.MIPDM, {"horizon": 15}),
    ):
        runs[label] = [
            run_closed_loop(scenario)[0]
            for scenario in custom_scenarios(50, 20.0, planner, **options)
        ]
    mean = {key: np.mean([m.dv for m in value]) for key, value in runs.items()}
    lmax = {key: np.mean([m.lmax for m in value]) for key, value in runs.items()}
    median = {
        key: np.median([t for m in value for t in m.solve_ms])
        for key, value in runs.items()
    }
    assert mean["L5"] < mean["N10"], "Should track v_ref better than MIP-DM"
    assert lmax["L2"] <= lmax["L5"], "Should reach further with more lanes"
    assert 5.0 * median["L5"] < median["N15"], "Should be faster than MIP-DM"
