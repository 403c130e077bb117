""" LSTMP
    Combined short- and long-term planner: both formulations coupled in one
    MIQP per cycle, solution extraction, warm starts between cycles and the
    fallback shared by every planner.
"""

import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union
from warnings import warn

import numpy as np
import pandas as pd
import yaml

from LSTMPlanner._utils import FallbackWarning, PlanInfeasibleError
from LSTMPlanner.config import DEFAULT_PROFILE, merge_profile
from LSTMPlanner.LTF import (
    LtfConfig,
    TransitionVariables,
    create_transition_variables,
    gap_disjunctions,
    ltf_costs,
)
from LSTMPlanner.MIQP import (
    AffineExpr,
    MiqpModel,
    QuadraticObjective,
    Variable,
    implication_activate,
)
from LSTMPlanner.PlanConsts import PlannerKind, SolveStatus
from LSTMPlanner.road import (
    EgoState,
    Gap,
    GapTable,
    PlanningProblem,
    RelativeFrame,
    SurroundingVehicle,
    enumerate_gaps,
    lane_change_free_set,
    lane_keep_free_set,
    lane_of,
    preprocess_traffic,
)
from LSTMPlanner.solver import SolveOptions, solve_miqp
from LSTMPlanner.STF import StfConfig, StfVariables, build_stf, discretize_dynamics

logger = logging.getLogger(__name__)

#: Marker of a virtual (no transition) gap in warm starts.
VIRTUAL = "virtual"


@dataclass
class LstmpConfig:
    """Planner settings around the two formulations

    The STF and LTF configurations depend on the goal and reference velocity
    of each cycle and are derived from `profile` on demand.

    Attributes:
        profile (dict): full planner profile, see `config.DEFAULT_PROFILE`
        lanes (int): lanes considered L_p, including the ego lane
        eps_t (float): time separation replacing strict inequalities, s
        eps_s (float): position separation replacing strict inequalities, m
        lateral_margin (float): margin inside every lane, m
        sv_position_margin (float): longitudinal inflation of SV bounds, m
        dv_lower (float): SV velocity spread below the measurement
        dv_upper (float): SV velocity spread above the measurement
        merge_threshold (float): distance below which SVs are merged, m
        max_per_lane (int): SVs kept per lane
        solve (SolveOptions): branch-and-bound settings
    """

    profile: Dict[str, Any] = field(
        default_factory=lambda: merge_profile(DEFAULT_PROFILE, None)
    )
    lanes: int = 5
    eps_t: float = 1e-3
    eps_s: float = 1e-2
    lateral_margin: float = 0.3
    sv_position_margin: float = 0.5
    dv_lower: float = 0.0
    dv_upper: float = 0.0
    merge_threshold: float = 15.0
    max_per_lane: int = 7
    solve: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if self.lanes < 1:
            raise ValueError(f"lanes must be at least 1, got {self.lanes}")
        if not (self.eps_t > 0 and self.eps_s > 0):
            raise ValueError("Separations eps_t and eps_s must be positive")
        if self.sv_position_margin < 0 or self.dv_lower < 0 or self.dv_upper < 0:
            raise ValueError("SV margins must be nonnegative")
        if self.max_per_lane < 1:
            raise ValueError(
                f"max_per_lane must be at least 1, got {self.max_per_lane}"
            )

    @classmethod
    def from_profile(
        cls, profile: Optional[Mapping] = None, **overrides
    ) -> "LstmpConfig":
        profile = merge_profile(DEFAULT_PROFILE, profile)
        traffic = profile["traffic"]
        coupling = profile["coupling"]
        kwargs = dict(
            profile=profile,
            lanes=profile["ltf"]["lanes"],
            eps_t=coupling["eps_t"],
            eps_s=coupling["eps_s"],
            lateral_margin=traffic["lateral_margin"],
            sv_position_margin=traffic["sv_position_margin"],
            dv_lower=traffic["dv_lower"],
            dv_upper=traffic["dv_upper"],
            merge_threshold=traffic["merge_threshold"],
            max_per_lane=traffic["M"],
            solve=SolveOptions.from_profile(profile),
        )
        kwargs.update(overrides)
        return cls(**kwargs)

    def stf_config(self, v_ref: float, **overrides) -> StfConfig:
        return StfConfig.from_profile(self.profile, v_ref=v_ref, **overrides)

    def ltf_config(self, v_ref: float, goal_lane: int, lanes: int) -> LtfConfig:
        return LtfConfig.from_profile(
            self.profile, v_ref=v_ref, goal_lane=goal_lane, lanes=lanes
        )


@dataclass(frozen=True)
class Transition:
    """Extracted transition into `lane` (absolute index)"""

    tau: float
    sigma: float
    r: float
    lane: int
    leader: Optional[int]
    virtual: bool


@dataclass
class PlanResult:
    """Planned trajectory and diagnostics of one cycle, absolute coordinates

    Attributes:
        planner (str): planner id
        status (SolveStatus): solver status
        objective (float): objective value of the returned point
        t_d (float): sampling time
        states (np.ndarray): (N+1) x 4 states [s, n, v_s, v_n]
        controls (np.ndarray): N x 2 controls [a_s, a_n]
        lam (np.ndarray): lane binaries per step, relative to the start lane
        transitions (list): long-term transitions, empty for baselines
        binaries (int): number of binary variables of the solved model
        continuous (int): number of continuous variables
        node_count (int): branch-and-bound nodes (expansions for graph search)
        relaxations (int): QP relaxations solved
        solve_ms (float): wall time of build and solve in ms
        stf_cost (float): short-term part of the objective
        ltf_cost (float): long-term part of the objective
        base_lane (int): start lane
        direction (int): +1 when lane changes increase the lane index
        origin (float): start position
        lane_width (float): lane width
        fallback (bool): plan reused from the previous cycle
        traffic (tuple): preprocessed vehicles the plan was made against
    """

    planner: str
    status: SolveStatus
    objective: float
    t_d: float
    states: np.ndarray
    controls: np.ndarray
    lam: np.ndarray
    transitions: List[Transition] = field(default_factory=list)
    binaries: int = 0
    continuous: int = 0
    node_count: int = 0
    relaxations: int = 0
    solve_ms: float = 0.0
    stf_cost: float = 0.0
    ltf_cost: float = 0.0
    base_lane: int = 1
    direction: int = 1
    origin: float = 0.0
    lane_width: float = 3.75
    fallback: bool = False
    traffic: Tuple[SurroundingVehicle, ...] = field(default=(), repr=False)

    @property
    def horizon(self) -> int:
        return len(self.controls)

    @property
    def lane_indices(self) -> np.ndarray:
        return np.array([lane_of(n, self.lane_width) for n in self.states[:, 1]])

    @property
    def lane_change_step(self) -> Optional[int]:
        """First step with lambda = 1, None when the plan keeps its lane"""
        hits = np.flatnonzero(self.lam > 0.5)
        return int(hits[0]) if len(hits) else None

    def to_dict(self) -> Dict[str, Any]:
        """Plain data for YAML traces"""
        return {
            "planner": self.planner,
            "status": self.status.value,
            "objective": float(self.objective),
            "t_d": float(self.t_d),
            "states": self.states.tolist(),
            "controls": self.controls.tolist(),
            "lam": self.lam.tolist(),
            "transitions": [dataclasses.asdict(t) for t in self.transitions],
            "binaries": int(self.binaries),
            "continuous": int(self.continuous),
            "node_count": int(self.node_count),
            "relaxations": int(self.relaxations),
            "stf_cost": float(self.stf_cost),
            "ltf_cost": float(self.ltf_cost),
            "base_lane": int(self.base_lane),
            "direction": int(self.direction),
            "fallback": bool(self.fallback),
        }

    def to_dataframe(self) -> pd.DataFrame:
        """Trajectory table, controls of the last state are NaN"""
        controls = np.vstack([self.controls, np.full((1, 2), np.nan)])
        df = pd.DataFrame(
            np.hstack([self.states, controls]),
            columns=["s", "n", "v_s", "v_n", "a_s", "a_n"],
        )
        df.insert(0, "t", np.arange(len(df)) * self.t_d)
        df["lam"] = self.lam
        df["lane"] = self.lane_indices
        df.index.name = "k"
        return df

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", encoding="utf-8") as f:
            yaml.safe_dump(self.to_dict(), f, sort_keys=False)
        return path


@dataclass
class LstmpBuild:
    """Model of one cycle with the handles needed to read it back"""

    model: MiqpModel
    frame: RelativeFrame
    table: GapTable
    stf: StfVariables
    tv: Optional[TransitionVariables]
    stf_cost: QuadraticObjective
    ltf_cost: QuadraticObjective
    stf_cfg: StfConfig
    ltf_cfg: Optional[LtfConfig]
    traffic: Tuple[SurroundingVehicle, ...]
    build_ms: float = 0.0


def _slowest(table: GapTable, gap: Gap) -> Optional[float]:
    leaders = table.leaders(gap)
    if not leaders:
        return None
    return min(table.vehicles[i].v_lower for i in leaders)


def couple_formulations(
    model: MiqpModel,
    vars: StfVariables,
    tv: TransitionVariables,
    stf_cfg: StfConfig,
    ltf_cfg: LtfConfig,
    eps_t: float = 1e-3,
    eps_s: float = 1e-2,
) -> int:
    """Tie the first transition to the lane binaries of the trajectory

    lambda_k = 1 puts step k at or after (tau_1, sigma_1), lambda_k = 0 strictly
    before it; without a lane change inside the horizon the transition must be
    reachable from the terminal state. A lane change inside the horizon also
    rules out the virtual gap of the first transition.

    Returns:
        int: number of emitted rows
    """
    before = len(model.constraints)
    tau, sigma = tv.tau[0], tv.sigma[0]
    for k in range(stf_cfg.N + 1):
        lam = vars.lam_at(k)
        t_k = k * stf_cfg.t_d
        s_k = AffineExpr.of(vars.s(k))
        implication_activate(model, lam, t_k - AffineExpr.of(tau), name=f"after_t_{k}")
        implication_activate(model, lam, s_k - sigma, name=f"after_s_{k}")
        implication_activate(
            model, 1 - lam, tau - t_k - eps_t, name=f"before_t_{k}"
        )
        implication_activate(model, 1 - lam, sigma - s_k - eps_s, name=f"before_s_{k}")
    N = stf_cfg.N
    lam_N = vars.lam_at(N)
    dt = tau - N * stf_cfg.t_d
    ds = sigma - vars.s(N)
    implication_activate(
        model,
        1 - lam_N,
        ltf_cfg.v_op_upper * (dt - ltf_cfg.t_lc) - ds,
        name="terminal_reach_up",
    )
    implication_activate(
        model,
        1 - lam_N,
        ds - ltf_cfg.v_op_lower * (dt + ltf_cfg.t_lc),
        name="terminal_reach_lo",
    )
    model.add_le(lam_N + tv.virtual(2), 1.0, "lane_change_needs_gap")
    return len(model.constraints) - before


def prepare_traffic(
    problem: PlanningProblem, cfg: LstmpConfig
) -> Tuple[Tuple[SurroundingVehicle, ...], List[SurroundingVehicle]]:
    """Preprocessed nominal vehicles and their inflated planning copies"""
    nominal = tuple(
        preprocess_traffic(
            problem.traffic, problem.ego, cfg.merge_threshold, cfg.max_per_lane
        )
    )
    inflated = [
        sv.inflated(cfg.sv_position_margin, cfg.dv_lower, cfg.dv_upper)
        for sv in nominal
    ]
    return nominal, inflated


def build_lstmp(
    problem: PlanningProblem, cfg: Optional[LstmpConfig] = None
) -> LstmpBuild:
    """Assemble the coupled MIQP of one planning cycle

    Lanes are counted from the ego lane towards the goal (mirrored when the
    goal has a lower index) and positions from the ego. Vehicles behind the
    ego on its own lane are ignored. With the goal on the ego lane the model
    reduces to lane keeping without any binary.

    Args:
        problem (PlanningProblem): current state, traffic and goal
        cfg (LstmpConfig, optional): planner settings

    Returns:
        LstmpBuild: frozen model and extraction handles
    """
    started = time.perf_counter()
    cfg = cfg or LstmpConfig()
    nominal, inflated = prepare_traffic(problem, cfg)
    frame = RelativeFrame(problem.road, problem.ego, problem.goal_lane, cfg.lanes)
    ego = frame.ego(problem.ego)
    traffic = [
        sv
        for sv in frame.traffic(inflated)
        if not (sv.lane == 1 and sv.s_upper <= ego.s)
    ]
    road = frame.relative_road
    table = enumerate_gaps(traffic, road, protected_lane=1)
    ego_gap = table.gap_at(1, ego.s)

    stf_cfg = cfg.stf_config(problem.v_ref)
    if frame.direction < 0:
        stf_cfg = dataclasses.replace(
            stf_cfg, alpha_l=-stf_cfg.alpha_r, alpha_r=-stf_cfg.alpha_l
        )
    model = MiqpModel(f"lstmp-L{frame.num_lanes}")
    free_keep = lane_keep_free_set(ego_gap, table, cfg.lateral_margin)

    tv, ltf_cfg = None, None
    branches, targets = [], []
    if frame.num_lanes >= 2:
        ltf_cfg = cfg.ltf_config(problem.v_ref, frame.goal, frame.num_lanes)
        tv = create_transition_variables(model, table, ltf_cfg, frame.num_lanes)
        for gap, beta in zip(tv.gaps[2], tv.beta[2]):
            branches.append(
                (
                    beta,
                    lane_change_free_set(ego_gap, gap, table, cfg.lateral_margin),
                    lane_keep_free_set(gap, table, cfg.lateral_margin),
                )
            )
            targets.append((beta, _slowest(table, gap)))

    stf, stf_cost = build_stf(
        model,
        ego,
        stf_cfg,
        road,
        free_keep,
        branches,
        v_keep=_slowest(table, ego_gap),
        targets=targets,
    )
    ltf_cost = QuadraticObjective()
    if tv is not None:
        gap_disjunctions(model, tv, table, ltf_cfg)
        ltf_cost = ltf_costs(model, tv, ltf_cfg)
        couple_formulations(model, stf, tv, stf_cfg, ltf_cfg, cfg.eps_t, cfg.eps_s)
    model.add_objective(stf_cost)
    model.add_objective(ltf_cost)
    model.freeze()
    build_ms = (time.perf_counter() - started) * 1000.0
    logger.debug("Built %r in %.1f ms (%s)", model, build_ms, frame)
    return LstmpBuild(
        model,
        frame,
        table,
        stf,
        tv,
        stf_cost,
        ltf_cost,
        stf_cfg,
        ltf_cfg,
        nominal,
        build_ms,
    )


def _extract(build: LstmpBuild, solution, opts_ms: float) -> PlanResult:
    values = solution.values
    frame = build.frame
    states = frame.states_to_absolute(build.stf.states(values))
    controls = build.stf.controls(values)
    controls[:, 1] *= frame.direction
    lam = np.round(build.stf.lanes(values), 9)
    transitions = []
    if build.tv is not None:
        for l in range(len(build.tv)):
            lane = l + 2
            gap = build.tv.selected_gap(lane, values)
            leader = None
            if gap is not None and gap.leader is not None:
                leader = build.table.vehicles[gap.leader].id
            transitions.append(
                Transition(
                    tau=float(values[build.tv.tau[l].id]),
                    sigma=float(values[build.tv.sigma[l].id]) + frame.origin,
                    r=float(values[build.tv.r[l].id]),
                    lane=frame.to_absolute_lane(lane),
                    leader=leader,
                    virtual=gap is None,
                )
            )
    return PlanResult(
        planner=PlannerKind.LSTMP.value,
        status=solution.status,
        objective=float(solution.objective),
        t_d=build.stf_cfg.t_d,
        states=states,
        controls=controls,
        lam=lam,
        transitions=transitions,
        binaries=build.model.num_binaries,
        continuous=build.model.num_continuous,
        node_count=solution.node_count,
        relaxations=solution.relaxations,
        solve_ms=opts_ms,
        stf_cost=float(build.stf_cost.evaluate(values)),
        ltf_cost=float(build.ltf_cost.evaluate(values)),
        base_lane=frame.base_lane,
        direction=frame.direction,
        origin=frame.origin,
        lane_width=frame.road.lane_width,
        traffic=build.traffic,
    )


def plan(
    problem: PlanningProblem,
    cfg: Optional[LstmpConfig] = None,
    opts: Optional[SolveOptions] = None,
    warm: Optional["WarmStart"] = None,
) -> PlanResult:
    """Build and solve one cycle

    Args:
        problem (PlanningProblem): current state, traffic and goal
        cfg (LstmpConfig, optional): planner settings
        opts (SolveOptions, optional): overrides `cfg.solve`
        warm (WarmStart, optional): previous solution mapped to this cycle

    Returns:
        PlanResult: optimal or best incumbent plan

    Raises:
        PlanInfeasibleError: no feasible plan was found
    """
    started = time.perf_counter()
    cfg = cfg or LstmpConfig()
    build = build_lstmp(problem, cfg)
    opts = opts or cfg.solve
    if warm is not None:
        assignment = warm.assignment(build)
        if assignment:
            opts = dataclasses.replace(opts, incumbent=assignment)
    solution = solve_miqp(build.model, opts)
    if not solution.has_solution:
        raise PlanInfeasibleError(
            f"No feasible LSTMP plan ({solution.status.value}) for {build.model!r}",
            solution,
        )
    elapsed = (time.perf_counter() - started) * 1000.0
    result = _extract(build, solution, elapsed)
    logger.debug(
        "LSTMP plan: objective %.6g, lane change at %s, %d nodes, %.1f ms",
        result.objective,
        result.lane_change_step,
        result.node_count,
        elapsed,
    )
    return result


@dataclass
class WarmStart:
    """Previous solution expressed in absolute lanes and vehicle ids

    Attributes:
        lam (tuple): lane binaries shifted by one step
        base_lane (int): ego lane of the new cycle
        direction (int): lane-change direction
        gaps (dict): absolute lane -> leader id of the chosen gap, None for a
            frontmost gap or `VIRTUAL`
    """

    lam: Tuple[float, ...]
    base_lane: int
    direction: int
    gaps: Dict[int, Any]

    def assignment(self, build: LstmpBuild) -> Dict[int, float]:
        """Binary values by variable id of `build`, empty when not applicable"""
        frame = build.frame
        if frame.base_lane != self.base_lane or frame.direction != self.direction:
            return {}
        values: Dict[int, float] = {}
        for k, lam in enumerate(build.stf.lam):
            if isinstance(lam, Variable) and k < len(self.lam):
                values[lam.id] = float(self.lam[k])
        if build.tv is None:
            return values
        for lane, betas in build.tv.beta.items():
            choice = self.gaps.get(frame.to_absolute_lane(lane), VIRTUAL)
            index = len(betas) - 1
            if choice != VIRTUAL:
                for i, gap in enumerate(build.tv.gaps[lane]):
                    leader = None
                    if gap.leader is not None:
                        leader = build.table.vehicles[gap.leader].id
                    if leader == choice:
                        index = i
                        break
                else:
                    logger.debug("Warm start gap on lane %d vanished", lane)
                    return {}
            for i, beta in enumerate(betas):
                values[beta.id] = 1.0 if i == index else 0.0
        return values


def reindex_for_next_cycle(
    previous: Optional[PlanResult], ego: EgoState, road
) -> Optional[WarmStart]:
    """Map the previous plan onto the next cycle

    The lane binaries move one step forward. When the ego has entered the
    next lane the lanes are renumbered, so all lambda values drop to 0 and the
    transition into the new ego lane is forgotten.

    Returns:
        WarmStart: None when there is nothing reusable
    """
    if (
        previous is None
        or previous.fallback
        or previous.planner != PlannerKind.LSTMP.value
    ):
        return None
    lane = road.lane_of(ego.n)
    shift = previous.direction * (lane - previous.base_lane)
    if shift not in (0, 1):
        return None
    lam = list(previous.lam[1:]) + [previous.lam[-1]]
    gaps = {
        t.lane: (VIRTUAL if t.virtual else t.leader) for t in previous.transitions
    }
    if shift == 1:
        lam = [0.0] * len(lam)
        gaps.pop(lane, None)
    lam[0] = 0.0
    return WarmStart(tuple(lam), lane, previous.direction, gaps)


def _braking_step(
    x: np.ndarray, t_d: float, a_lon_min: float, a_lat_max: float
) -> Tuple[np.ndarray, np.ndarray]:
    A, B = discretize_dynamics(t_d)
    u = np.array(
        [
            max(a_lon_min, -x[2] / t_d),
            float(np.clip(-x[3] / t_d, -a_lat_max, a_lat_max)),
        ]
    )
    x_next = A @ x + B @ u
    x_next[2] = max(x_next[2], 0.0)
    return u, x_next


def shift_plan(previous: PlanResult, a_lon_min: float, a_lat_max: float) -> PlanResult:
    """Previous plan advanced by one step, padded with a braking step"""
    u, x_next = _braking_step(previous.states[-1], previous.t_d, a_lon_min, a_lat_max)
    states = np.vstack([previous.states[1:], x_next])
    controls = np.vstack([previous.controls[1:], u[None, :]])
    return dataclasses.replace(
        previous,
        states=states,
        controls=controls,
        lam=np.append(previous.lam[1:], previous.lam[-1]),
        transitions=[],
        origin=previous.origin,
        fallback=True,
        solve_ms=0.0,
        node_count=0,
        relaxations=0,
    )


def braking_plan(
    problem: PlanningProblem, stf: StfConfig, planner: str
) -> PlanResult:
    """Full braking on the current lane, used when no previous plan exists"""
    x = problem.ego.as_array()
    states, controls = [x], []
    for _ in range(stf.N):
        u, x = _braking_step(x, stf.t_d, stf.a_lon_min, stf.a_lat_max)
        states.append(x)
        controls.append(u)
    return PlanResult(
        planner=planner,
        status=SolveStatus.Infeasible,
        objective=math.inf,
        t_d=stf.t_d,
        states=np.array(states),
        controls=np.array(controls),
        lam=np.zeros(stf.N + 1),
        base_lane=problem.ego_lane,
        origin=problem.ego.s,
        lane_width=problem.road.lane_width,
        fallback=True,
    )


class Planner:
    """Base class running one planner per cycle with the shared fallback

    Subclasses implement `_plan`. When it raises `PlanInfeasibleError` the
    previous plan is advanced by one step (or a braking plan is made) and a
    `FallbackWarning` is issued.

    Args:
        stf (StfConfig): dynamics and horizon used for fallback plans
    """

    kind = PlannerKind.LSTMP

    def __init__(self, stf: StfConfig):
        self.stf = stf
        self.previous: Optional[PlanResult] = None
        self.fallbacks = 0

    def __repr__(self):
        return f"{self.__class__.__name__}()"

    @property
    def name(self) -> str:
        return self.kind.value

    def reset(self):
        self.previous = None
        self.fallbacks = 0

    def _plan(self, problem: PlanningProblem) -> PlanResult:
        raise NotImplementedError

    def plan(self, problem: PlanningProblem) -> PlanResult:
        try:
            result = self._plan(problem)
        except PlanInfeasibleError as exc:
            self.fallbacks += 1
            warn(f"{self.name}: {exc}; reusing the previous plan", FallbackWarning)
            if self.previous is not None and np.allclose(
                self.previous.states[1], problem.ego.as_array(), atol=1e-9
            ):
                result = shift_plan(
                    self.previous, self.stf.a_lon_min, self.stf.a_lat_max
                )
            else:
                result = braking_plan(problem, self.stf, self.name)
        self.previous = result
        return result


class LstmpPlanner(Planner):
    """LSTMP planner with warm starts between cycles

    Args:
        cfg (LstmpConfig, optional): planner settings
        warm_start (bool, optional): offer the previous solution as incumbent
    """

    kind = PlannerKind.LSTMP

    def __init__(self, cfg: Optional[LstmpConfig] = None, warm_start: bool = True):
        self.cfg = cfg or LstmpConfig()
        super().__init__(StfConfig.from_profile(self.cfg.profile))
        self.warm_start = warm_start

    def __repr__(self):
        return f"LstmpPlanner(lanes={self.cfg.lanes})"

    def _plan(self, problem: PlanningProblem) -> PlanResult:
        warm = None
        if self.warm_start:
            warm = reindex_for_next_cycle(self.previous, problem.ego, problem.road)
        return plan(problem, self.cfg, warm=warm)


def consistency_audit(
    plan: PlanResult, eps_t: float = 1e-3, tol: float = 1e-6
) -> List[str]:
    """Violations of trajectory/transition consistency, empty when consistent

    Steps strictly before the first transition time must stay on the start
    lane behind sigma_1; steps at or after it must be on the next lane at or
    ahead of sigma_1.
    """
    if plan.fallback or not plan.transitions:
        return []
    first = plan.transitions[0]
    d = plan.lane_width
    center = (plan.base_lane - 1) * d
    issues = []
    for k, (s, n, _, _) in enumerate(plan.states):
        t = k * plan.t_d
        n_rel = plan.direction * (n - center)
        if t <= first.tau - eps_t + tol:
            if n_rel > d / 2 + tol or s > first.sigma + tol:
                issues.append(f"step {k} before transition at n={n_rel:.4f}, s={s:.4f}")
        elif t >= first.tau - tol:
            if n_rel < d / 2 - tol or s < first.sigma - tol:
                issues.append(f"step {k} after transition at n={n_rel:.4f}, s={s:.4f}")
        else:
            issues.append(f"step {k} at t={t} within eps of tau={first.tau}")
    return issues


def safety_audit(
    plan: PlanResult,
    traffic: Optional[Sequence[SurroundingVehicle]] = None,
    tol: float = 1e-6,
) -> List[str]:
    """Trajectory points inside a predicted occupied set, empty when safe

    A vehicle that is behind the ego when the ego enters its lane is a
    follower and keeps the distance itself; it is not audited.
    """
    traffic = plan.traffic if traffic is None else traffic
    lanes = plan.lane_indices
    times = np.arange(len(plan.states)) * plan.t_d
    issues = []
    for sv in traffic:
        steps = np.flatnonzero(lanes == sv.lane)
        if not len(steps):
            continue
        first = steps[0]
        if plan.states[first, 0] >= sv.occupied(times[first])[1] - tol:
            continue
        for k in steps:
            lo, hi = sv.occupied(times[k])
            s = plan.states[k, 0]
            if lo + tol < s < hi - tol:
                issues.append(
                    f"step {k} at s={s:.3f} inside SV {sv.id} [{lo:.3f}, {hi:.3f}]"
                )
    return issues
