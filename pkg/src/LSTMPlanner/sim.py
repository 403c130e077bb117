""" sim
    Deterministic closed-loop simulation: surrounding vehicles at constant
    speed or following a slower leader, exact tracking of the first planned
    step, randomized scenarios and closed-loop metrics.
"""

import dataclasses
import logging
from collections import UserList
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    Any,
    Dict,
    Iterable,
    List,
    Mapping,
    NamedTuple,
    Optional,
    Tuple,
    Union,
)

import numpy as np
import pandas as pd
import yaml

from LSTMPlanner._utils import ScenarioError
from LSTMPlanner.baselines import (
    HybridAStarConfig,
    HybridAStarPlanner,
    MipDmConfig,
    MipDmPlanner,
)
from LSTMPlanner.config import DEFAULT_PROFILE, merge_profile
from LSTMPlanner.LSTMP import LstmpConfig, LstmpPlanner, Planner, PlanResult
from LSTMPlanner.PlanConsts import PlannerKind
from LSTMPlanner.road import (
    EgoState,
    PlanningProblem,
    RoadGeometry,
    SurroundingVehicle,
    lane_of,
)
from LSTMPlanner.STF import StfConfig

logger = logging.getLogger(__name__)

#: Header line of metrics CSV files, bumped when the columns change.
METRICS_HEADER = "# lstmp-metrics v1"

#: Column order of metrics CSV files.
METRICS_COLUMNS = [
    "seed",
    "planner",
    "config",
    "cost",
    "dv",
    "alat_mean",
    "alat_max",
    "alon_mean",
    "alon_max",
    "lmax",
    "lane_changes",
    "collisions",
    "solve_ms_median",
    "solve_ms_max",
]


@dataclass(frozen=True)
class SvState:
    """Simulated surrounding vehicle

    Attributes:
        id (int): vehicle id
        lane (int): lane index
        s (float): front position, m
        v (float): current speed, m/s
        v_desired (float): speed driven when not following
        length (float): vehicle length, m
    """

    id: int
    lane: int
    s: float
    v: float
    v_desired: float
    length: float = 5.0

    @property
    def rear(self) -> float:
        return self.s - self.length

    def observed(self) -> SurroundingVehicle:
        return SurroundingVehicle.nominal(
            self.id, self.lane, self.s, self.v, self.length
        )

    def contains(self, s: float, lane: int) -> bool:
        """Point on the physical rectangle's interior"""
        return lane == self.lane and self.rear < s < self.s


class Leader(NamedTuple):
    """Rear position at the start of a step and the speed over the step"""

    rear: float
    v: float


def step_sv(
    sv: SvState, leader: Optional[Leader], dt: float, threshold: float = 15.0
) -> SvState:
    """Advance a surrounding vehicle by `dt`

    The vehicle drives its desired speed unless its leader is slower and
    closer than `threshold`, then it takes over the leader's speed.

    Args:
        sv (SvState): vehicle at the start of the step
        leader (Leader, optional): nearest vehicle ahead on the same lane
        dt (float): step length in s
        threshold (float, optional): following distance, m

    Returns:
        SvState: vehicle at the end of the step
    """
    if not dt > 0:
        raise ValueError(f"Step length must be positive, got {dt}")
    v = sv.v_desired
    if leader is not None and leader.v < v and leader.rear - sv.s < threshold:
        v = leader.v
    return dataclasses.replace(sv, s=sv.s + v * dt, v=v)


def step_traffic(
    vehicles: Iterable[SvState],
    ego_before: np.ndarray,
    ego_after: np.ndarray,
    road: RoadGeometry,
    dt: float,
    threshold: float = 15.0,
) -> Tuple[SvState, ...]:
    """Advance all vehicles, front to back per lane; the ego leads the
    vehicles behind it on its current lane
    """
    ego_lane = road.lane_of(ego_before[1])
    ego_leader = Leader(float(ego_before[0]), float(ego_after[0] - ego_before[0]) / dt)
    by_lane: Dict[int, List[SvState]] = {}
    for sv in vehicles:
        by_lane.setdefault(sv.lane, []).append(sv)
    result = []
    for lane in sorted(by_lane):
        ahead: Optional[Leader] = None
        for sv in sorted(by_lane[lane], key=lambda sv: (-sv.s, sv.id)):
            candidates = [ahead] if ahead is not None else []
            if lane == ego_lane and ego_leader.rear >= sv.s:
                candidates.append(ego_leader)
            leader = min(candidates, key=lambda c: c.rear, default=None)
            moved = step_sv(sv, leader, dt, threshold)
            result.append(moved)
            ahead = Leader(sv.rear, moved.v)
    return tuple(sorted(result, key=lambda sv: sv.id))


@dataclass(frozen=True)
class ScenarioConfig:
    """One closed-loop scenario

    Attributes:
        road (RoadGeometry): road geometry
        ego (EgoState): initial ego state
        goal_lane (int): goal lane
        v_ref (float): reference velocity
        vehicles (tuple): initial surrounding vehicles
        planner (PlannerKind): planner to run
        planner_options (dict): `lanes`, `horizon` or `iters` overrides
        duration (float): simulated time, s
        seed (int, optional): seed the scenario was drawn with
        profile (dict): profile overrides applied on top of the defaults
        follow_threshold (float): following distance of the vehicles, m
        name (str): scenario name
    """

    road: RoadGeometry
    ego: EgoState
    goal_lane: int
    v_ref: float
    vehicles: Tuple[SvState, ...] = ()
    planner: PlannerKind = PlannerKind.LSTMP
    planner_options: Dict[str, Any] = field(default_factory=dict)
    duration: float = 40.0
    seed: Optional[int] = None
    profile: Dict[str, Any] = field(default_factory=dict)
    follow_threshold: float = 15.0
    name: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "vehicles", tuple(self.vehicles))
        object.__setattr__(self, "planner", PlannerKind(self.planner))
        self.validate()

    def validate(self):
        """Check lanes, overlaps and the ego position

        Raises:
            ScenarioError: any violation
        """
        if not 1 <= self.goal_lane <= self.road.num_lanes:
            raise ScenarioError(f"Goal lane {self.goal_lane} is not on the road")
        if not self.v_ref > 0 or not self.duration > 0:
            raise ScenarioError("Reference velocity and duration must be positive")
        ego_lane = self.road.lane_of(self.ego.n)
        if not 1 <= ego_lane <= self.road.num_lanes:
            raise ScenarioError(f"Ego at n={self.ego.n} is not on the road")
        ids = [sv.id for sv in self.vehicles]
        if len(set(ids)) != len(ids):
            raise ScenarioError("Vehicle ids must be unique")
        by_lane: Dict[int, List[SvState]] = {}
        for sv in self.vehicles:
            if not 1 <= sv.lane <= self.road.num_lanes:
                raise ScenarioError(
                    f"Vehicle {sv.id} on lane {sv.lane} is not on the road"
                )
            if sv.v < 0 or sv.v_desired < 0 or not sv.length > 0:
                raise ScenarioError(f"Vehicle {sv.id} has an invalid speed or length")
            if sv.contains(self.ego.s, ego_lane):
                raise ScenarioError(f"Ego starts inside vehicle {sv.id}")
            by_lane.setdefault(sv.lane, []).append(sv)
        for lane, vehicles in by_lane.items():
            ordered = sorted(vehicles, key=lambda sv: sv.s)
            for rear, front in zip(ordered, ordered[1:]):
                if front.rear < rear.s:
                    raise ScenarioError(
                        f"Vehicles {rear.id} and {front.id} overlap on lane {lane}"
                    )

    @property
    def full_profile(self) -> Dict[str, Any]:
        return merge_profile(DEFAULT_PROFILE, self.profile)

    @property
    def config_label(self) -> str:
        return planner_label(self.planner, self.full_profile, self.planner_options)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "road": {
                "lanes": self.road.num_lanes,
                "lane_width": self.road.lane_width,
                "length": self.road.length,
            },
            "ego": {
                "s": self.ego.s,
                "n": self.ego.n,
                "v_s": self.ego.v_s,
                "v_n": self.ego.v_n,
            },
            "goal": {"lane": self.goal_lane, "v_ref": self.v_ref},
            "vehicles": [dataclasses.asdict(sv) for sv in self.vehicles],
            "planner": dict(kind=self.planner.value, **self.planner_options),
            "duration": self.duration,
            "seed": self.seed,
            "profile": dict(self.profile),
            "follow_threshold": self.follow_threshold,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ScenarioConfig":
        """Scenario from plain data, see `to_dict` for the layout

        The ego may be given by `lane` instead of `n`, vehicles may omit
        `id`, `v_desired` and `length`.
        """
        try:
            road_data = data.get("road", {})
            road = RoadGeometry(
                int(road_data.get("lanes", 3)),
                float(road_data.get("lane_width", 3.75)),
                float(road_data.get("length", 2000.0)),
            )
            ego_data = data["ego"]
            n = ego_data.get("n")
            if n is None:
                n = road.centerline(int(ego_data.get("lane", 1)))
            ego = EgoState(
                float(ego_data.get("s", 0.0)),
                float(n),
                float(ego_data.get("v_s", ego_data.get("v", 0.0))),
                float(ego_data.get("v_n", 0.0)),
            )
            goal = data["goal"]
            vehicles = []
            for i, sv in enumerate(data.get("vehicles") or []):
                v = float(sv["v"])
                vehicles.append(
                    SvState(
                        int(sv.get("id", i)),
                        int(sv["lane"]),
                        float(sv["s"]),
                        v,
                        float(sv.get("v_desired", v)),
                        float(sv.get("length", 5.0)),
                    )
                )
            options = dict(data.get("planner") or {})
            kind = PlannerKind(options.pop("kind", PlannerKind.LSTMP.value))
            return cls(
                road=road,
                ego=ego,
                goal_lane=int(goal["lane"]),
                v_ref=float(goal.get("v_ref", 25.0)),
                vehicles=tuple(vehicles),
                planner=kind,
                planner_options=options,
                duration=float(data.get("duration", 40.0)),
                seed=data.get("seed"),
                profile=dict(data.get("profile") or {}),
                follow_threshold=float(data.get("follow_threshold", 15.0)),
                name=str(data.get("name", "scenario")),
            )
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"Malformed scenario: {exc!r}") from exc
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"Invalid scenario: {exc}") from exc

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
        if not isinstance(data, Mapping):
            raise ScenarioError(f"Scenario file {path} must hold a mapping")
        return cls.from_dict(data)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False)
        return path

    def problem(self, ego: EgoState, vehicles: Iterable[SvState]) -> PlanningProblem:
        return PlanningProblem(
            self.road,
            ego,
            tuple(sv.observed() for sv in vehicles),
            self.goal_lane,
            self.v_ref,
        )


def planner_label(kind: PlannerKind, profile: Mapping, options: Mapping) -> str:
    """Configuration column of metrics rows: L_p, N or the expansion budget"""
    kind = PlannerKind(kind)
    if kind == PlannerKind.LSTMP:
        return f"L{options.get('lanes', profile['ltf']['lanes'])}"
    if kind == PlannerKind.MIPDM:
        return f"N{options.get('horizon', profile['mipdm']['N'])}"
    return f"I{options.get('iters', profile['hastar']['max_expansions'])}"


def make_planner(
    kind: Union[PlannerKind, str],
    profile: Optional[Mapping] = None,
    options: Optional[Mapping] = None,
) -> Planner:
    """Planner instance for one closed-loop run

    Args:
        kind (PlannerKind, str): planner id
        profile (Mapping, optional): profile overrides
        options (Mapping, optional): `lanes` (LSTMP), `horizon` (MIP-DM) or
            `iters` (hybrid A*)
    """
    kind = PlannerKind(kind)
    options = dict(options or {})
    profile = merge_profile(DEFAULT_PROFILE, profile)
    if kind == PlannerKind.LSTMP:
        overrides = {"lanes": int(options["lanes"])} if "lanes" in options else {}
        return LstmpPlanner(LstmpConfig.from_profile(profile, **overrides))
    if kind == PlannerKind.MIPDM:
        overrides = {"N": int(options["horizon"])} if "horizon" in options else {}
        return MipDmPlanner(MipDmConfig.from_profile(profile, **overrides))
    overrides = {"max_expansions": int(options["iters"])} if "iters" in options else {}
    return HybridAStarPlanner(HybridAStarConfig.from_profile(profile, **overrides))


@dataclass(frozen=True)
class CostWeights:
    w_n: float
    w_v: float
    w_g: float
    R: Tuple[Tuple[float, float], Tuple[float, float]]

    @classmethod
    def from_profile(cls, profile: Mapping) -> "CostWeights":
        profile = merge_profile(DEFAULT_PROFILE, profile)
        stf = StfConfig.from_profile(profile)
        return cls(stf.w_n, stf.w_v, float(profile["ltf"]["w_g"]), stf.R)

    def stage_cost(
        self,
        x: np.ndarray,
        u: np.ndarray,
        goal_lane: int,
        v_ref: float,
        lane_width: float,
    ) -> float:
        """Reference and lane cost rates at state `x` under control `u`"""
        lane = lane_of(x[1], lane_width)
        center = (lane - 1) * lane_width
        R = np.asarray(self.R)
        g_ref = (
            self.w_n * (x[1] - center) ** 2
            + self.w_v * (x[2] - v_ref) ** 2
            + float(u @ R @ u)
        )
        return g_ref + self.w_g * abs(goal_lane - lane)


@dataclass
class TraceStep:
    """One simulation cycle

    Attributes:
        step (int): cycle index
        t (float): simulation time at the start of the cycle
        ego (np.ndarray): realized ego state at the start of the cycle
        control (np.ndarray): control applied during the cycle
        vehicles (tuple): surrounding vehicles at the start of the cycle
        plan (np.ndarray): planned states of the cycle
        status (str): solver status
        objective (float): planner objective
        solve_ms (float): planner wall time
        fallback (bool): the plan came from the fallback path
        collision (bool): ego inside a vehicle rectangle at the start of the cycle
        cost (float): accumulated closed-loop cost after the cycle
    """

    step: int
    t: float
    ego: np.ndarray
    control: np.ndarray
    vehicles: Tuple[SvState, ...]
    plan: np.ndarray
    status: str
    objective: float
    solve_ms: float
    fallback: bool
    collision: bool
    cost: float

    def to_dict(self, timings: bool = True) -> Dict[str, Any]:
        return {
            "step": self.step,
            "t": float(self.t),
            "ego": [float(v) for v in self.ego],
            "control": [float(v) for v in self.control],
            "vehicles": [dataclasses.asdict(sv) for sv in self.vehicles],
            "plan": self.plan.tolist(),
            "status": self.status,
            "objective": float(self.objective),
            "solve_ms": float(self.solve_ms) if timings else 0.0,
            "fallback": bool(self.fallback),
            "collision": bool(self.collision),
            "cost": float(self.cost),
        }


class Trace(UserList):
    """Closed-loop trace, one `TraceStep` per cycle

    Args:
        steps (list, optional): initial steps
        scenario (ScenarioConfig, optional): simulated scenario
        planner (str, optional): planner name
        weights (CostWeights, optional): closed-loop cost weights
        t_d (float, optional): cycle length
    """

    def __init__(
        self,
        steps: Optional[Iterable[TraceStep]] = None,
        scenario: Optional[ScenarioConfig] = None,
        planner: str = "",
        weights: Optional[CostWeights] = None,
        t_d: float = 0.3,
    ):
        super().__init__(steps or [])
        self.scenario = scenario
        self.planner = planner
        self.weights = weights
        self.t_d = t_d
        self.final_ego: Optional[np.ndarray] = None
        self.final_collision = False

    def __repr__(self):
        return f"Trace({self.planner}, {len(self)} steps)"

    @property
    def states(self) -> np.ndarray:
        """Realized ego states, including the state after the last cycle"""
        rows = [step.ego for step in self.data]
        if self.final_ego is not None:
            rows.append(self.final_ego)
        return np.array(rows).reshape(-1, 4)

    @property
    def controls(self) -> np.ndarray:
        return np.array([step.control for step in self.data]).reshape(-1, 2)

    def to_dataframe(self, timings: bool = True) -> pd.DataFrame:
        """Realized trajectory with per-cycle diagnostics"""
        df = pd.DataFrame(
            np.hstack([self.states[: len(self)], self.controls]),
            columns=["s", "n", "v_s", "v_n", "a_s", "a_n"],
        )
        df.insert(0, "t", [step.t for step in self.data])
        df["lane"] = [lane_of(n, self.lane_width) for n in df["n"]]
        df["status"] = [step.status for step in self.data]
        df["solve_ms"] = [step.solve_ms if timings else 0.0 for step in self.data]
        df["fallback"] = [step.fallback for step in self.data]
        df["collision"] = [step.collision for step in self.data]
        df["cost"] = [step.cost for step in self.data]
        df.index.name = "step"
        return df

    @property
    def lane_width(self) -> float:
        return self.scenario.road.lane_width if self.scenario is not None else 3.75

    def write(self, path: Union[str, Path], timings: bool = True) -> Path:
        """YAML documents: a header followed by one document per cycle"""
        path = Path(path)
        final_ego = None
        if self.final_ego is not None:
            final_ego = [float(v) for v in self.final_ego]
        header = {
            "planner": self.planner,
            "t_d": self.t_d,
            "scenario": None if self.scenario is None else self.scenario.to_dict(),
            "final_ego": final_ego,
        }
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump_all(
                [header] + [step.to_dict(timings) for step in self.data],
                f,
                sort_keys=False,
            )
        return path


@dataclass
class Metrics:
    """Closed-loop quality of one run

    Attributes:
        cost (float): closed-loop cost
        dv (float): mean |v_s - v_ref|
        alat_mean (float): mean |a_n|
        alat_max (float): max |a_n|
        alon_mean (float): mean |a_s|
        alon_max (float): max |a_s|
        lmax (int): highest lane index reached, counted towards the goal
        lane_changes (int): number of lane changes
        collisions (int): cycles with the ego inside a vehicle rectangle
        solve_ms (list): planner time per cycle
        fallbacks (int): cycles served by the fallback path
    """

    cost: float = 0.0
    dv: float = 0.0
    alat_mean: float = 0.0
    alat_max: float = 0.0
    alon_mean: float = 0.0
    alon_max: float = 0.0
    lmax: int = 1
    lane_changes: int = 0
    collisions: int = 0
    solve_ms: List[float] = field(default_factory=list)
    fallbacks: int = 0

    @property
    def solve_ms_median(self) -> float:
        return float(np.median(self.solve_ms)) if self.solve_ms else 0.0

    @property
    def solve_ms_max(self) -> float:
        return float(np.max(self.solve_ms)) if self.solve_ms else 0.0

    def row(
        self, seed: Optional[int], planner: str, config: str, timings: bool = True
    ) -> Dict[str, Any]:
        """Metrics CSV row in `METRICS_COLUMNS` order"""
        return {
            "seed": seed,
            "planner": planner,
            "config": config,
            "cost": self.cost,
            "dv": self.dv,
            "alat_mean": self.alat_mean,
            "alat_max": self.alat_max,
            "alon_mean": self.alon_mean,
            "alon_max": self.alon_max,
            "lmax": self.lmax,
            "lane_changes": self.lane_changes,
            "collisions": self.collisions,
            "solve_ms_median": self.solve_ms_median if timings else 0.0,
            "solve_ms_max": self.solve_ms_max if timings else 0.0,
        }


def collides(ego: np.ndarray, vehicles: Iterable[SvState], lane_width: float) -> bool:
    """Ego point inside any physical vehicle rectangle"""
    lane = lane_of(ego[1], lane_width)
    return any(sv.contains(ego[0], lane) for sv in vehicles)


def compute_metrics(trace: Trace, goal_lane: Optional[int] = None) -> Metrics:
    """Metrics recomputed from the stored trace

    The closed-loop cost sums t_d times the reference and lane cost rates at
    the start of every cycle. Lane indices are counted from the start lane
    towards the goal.

    Args:
        trace (Trace): complete trace
        goal_lane (int, optional): defaults to the scenario goal lane

    Returns:
        Metrics: closed-loop metrics
    """
    scenario = trace.scenario
    if scenario is None or trace.weights is None:
        raise ValueError("Trace carries no scenario or cost weights")
    goal = scenario.goal_lane if goal_lane is None else goal_lane
    metrics = Metrics()
    if not len(trace):
        return metrics
    d = scenario.road.lane_width
    states = trace.states
    controls = trace.controls
    cost = 0.0
    stage_cost = trace.weights.stage_cost
    for step in trace.data:
        cost += trace.t_d * stage_cost(step.ego, step.control, goal, scenario.v_ref, d)
    lanes = np.array([lane_of(n, d) for n in states[:, 1]])
    start = lanes[0]
    direction = 1 if goal >= start else -1
    metrics.cost = cost
    metrics.dv = float(np.mean(np.abs(states[: len(trace), 2] - scenario.v_ref)))
    metrics.alat_mean = float(np.mean(np.abs(controls[:, 1])))
    metrics.alat_max = float(np.max(np.abs(controls[:, 1])))
    metrics.alon_mean = float(np.mean(np.abs(controls[:, 0])))
    metrics.alon_max = float(np.max(np.abs(controls[:, 0])))
    metrics.lmax = int(np.max(1 + direction * (lanes - start)))
    metrics.lane_changes = int(np.count_nonzero(np.diff(lanes)))
    metrics.collisions = sum(step.collision for step in trace.data)
    metrics.collisions += int(trace.final_collision)
    metrics.solve_ms = [step.solve_ms for step in trace.data]
    metrics.fallbacks = sum(step.fallback for step in trace.data)
    return metrics


def run_closed_loop(
    scenario: ScenarioConfig, planner: Optional[Planner] = None
) -> Tuple[Metrics, Trace]:
    """Simulate a scenario with exact tracking of the first planned step

    Each cycle plans from the realized state, moves the ego to the second
    planned state and advances the surrounding vehicles by the same t_d.
    The run stops after `scenario.duration` or at the end of the road.

    Args:
        scenario (ScenarioConfig): scenario to simulate
        planner (Planner, optional): defaults to the scenario's planner

    Returns:
        Tuple[Metrics, Trace]: metrics and the full trace
    """
    profile = scenario.full_profile
    planner = planner or make_planner(
        scenario.planner, profile, scenario.planner_options
    )
    planner.reset()
    weights = CostWeights.from_profile(profile)
    t_d = planner.stf.t_d
    trace = Trace(scenario=scenario, planner=planner.name, weights=weights, t_d=t_d)
    d = scenario.road.lane_width
    ego = scenario.ego
    vehicles = scenario.vehicles
    cost = 0.0
    steps = int(round(scenario.duration / t_d))
    for k in range(steps):
        if ego.s >= scenario.road.length:
            logger.debug("Reached the end of the road after %d cycles", k)
            break
        x = ego.as_array()
        result: PlanResult = planner.plan(scenario.problem(ego, vehicles))
        x_next = np.array(result.states[1], dtype=float)
        control = np.array(result.controls[0], dtype=float)
        cost += t_d * weights.stage_cost(
            x, control, scenario.goal_lane, scenario.v_ref, d
        )
        trace.append(
            TraceStep(
                step=k,
                t=k * t_d,
                ego=x,
                control=control,
                vehicles=vehicles,
                plan=np.array(result.states),
                status=result.status.value,
                objective=float(result.objective),
                solve_ms=float(result.solve_ms),
                fallback=bool(result.fallback),
                collision=collides(x, vehicles, d),
                cost=cost,
            )
        )
        vehicles = step_traffic(
            vehicles, x, x_next, scenario.road, t_d, scenario.follow_threshold
        )
        ego = EgoState.from_array(x_next)
    trace.final_ego = ego.as_array()
    trace.final_collision = collides(trace.final_ego, vehicles, d)
    metrics = compute_metrics(trace)
    logger.debug(
        "%s on %s: cost %.6g, %d lane changes, %d collisions",
        planner.name,
        scenario.name,
        metrics.cost,
        metrics.lane_changes,
        metrics.collisions,
    )
    return metrics, trace


@dataclass
class ScenarioTemplate:
    """Traffic targets of randomized scenarios

    Attributes:
        num_lanes (int): lanes of the road
        density (float): vehicles per lane and km
        flow (float): vehicles per lane and minute, informative only
        speed_range (tuple): bounds of the uniform vehicle speeds, m/s
        v_ref (float): ego reference velocity
        road_length (float): road length, m
        lane_width (float): lane width, m
        vehicle_length (float): vehicle length, m
        ego_s (float): ego start position, m
        ego_lane (int): ego start lane
        goal_lane (int, optional): defaults to the top lane
        clear_ahead (float): free stretch ahead of the ego on its lane, m
        clear_behind (float): free stretch behind the ego on its lane, m
        min_spacing (float): minimal bumper distance between vehicles, m
        duration (float): simulated time, s
        max_retries (int): draws per vehicle before giving up
    """

    num_lanes: int = 9
    density: float = 12.2
    flow: float = 14.6
    speed_range: Tuple[float, float] = (15.0, 35.0)
    v_ref: float = 25.0
    road_length: float = 2000.0
    lane_width: float = 3.75
    vehicle_length: float = 5.0
    ego_s: float = 200.0
    ego_lane: int = 1
    goal_lane: Optional[int] = None
    clear_ahead: float = 50.0
    clear_behind: float = 20.0
    min_spacing: float = 1.0
    duration: float = 40.0
    max_retries: int = 1000

    def __post_init__(self):
        if self.density < 0:
            raise ScenarioError(f"Density must be nonnegative, got {self.density}")
        lo, hi = self.speed_range
        if not 0 <= lo <= hi:
            raise ScenarioError(f"Invalid speed range {self.speed_range}")

    @classmethod
    def custom(cls, **overrides) -> "ScenarioTemplate":
        """Deterministic custom traffic: 9 lanes, 12.2 vehicles per lane and km"""
        return cls(**overrides)

    @property
    def per_lane(self) -> int:
        return int(round(self.density * self.road_length / 1000.0))


def randomize_scenario(
    template: ScenarioTemplate,
    seed: int,
    planner: Union[PlannerKind, str] = PlannerKind.LSTMP,
    planner_options: Optional[Mapping] = None,
    profile: Optional[Mapping] = None,
) -> ScenarioConfig:
    """Draw vehicle positions and speeds for a template

    Positions are uniform along the road and rejected when they overlap an
    earlier vehicle or the ego's clearance zone.

    Args:
        template (ScenarioTemplate): traffic targets
        seed (int): random seed
        planner (PlannerKind, str, optional): planner to run
        planner_options (Mapping, optional): planner overrides
        profile (Mapping, optional): profile overrides

    Returns:
        ScenarioConfig: the drawn scenario

    Raises:
        ScenarioError: a vehicle could not be placed within `max_retries`
    """
    rng = np.random.default_rng(seed)
    road = RoadGeometry(template.num_lanes, template.lane_width, template.road_length)
    length = template.vehicle_length
    vehicles: List[SvState] = []
    for lane in range(1, template.num_lanes + 1):
        fronts: List[float] = []
        for _ in range(template.per_lane):
            for _ in range(template.max_retries):
                s = float(rng.uniform(length, template.road_length))
                spaced = all(
                    abs(s - other) >= length + template.min_spacing for other in fronts
                )
                near_ego = (
                    lane == template.ego_lane
                    and template.ego_s - template.clear_behind
                    < s
                    < template.ego_s + template.clear_ahead + length
                )
                if spaced and not near_ego:
                    break
            else:
                raise ScenarioError(
                    f"Could not place a vehicle on lane {lane} "
                    f"after {template.max_retries} draws"
                )
            fronts.append(s)
            v = float(rng.uniform(*template.speed_range))
            vehicles.append(SvState(len(vehicles), lane, s, v, v, length))
    goal = template.goal_lane or template.num_lanes
    return ScenarioConfig(
        road=road,
        ego=EgoState(
            template.ego_s, road.centerline(template.ego_lane), template.v_ref
        ),
        goal_lane=goal,
        v_ref=template.v_ref,
        vehicles=tuple(vehicles),
        planner=PlannerKind(planner),
        planner_options=dict(planner_options or {}),
        duration=template.duration,
        seed=seed,
        profile=dict(profile or {}),
        name=f"custom-{seed}",
    )
