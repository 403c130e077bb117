""" baselines
    Comparison planners: a discrete-time MIQP with per-vehicle, per-step
    avoidance binaries over all lanes (MIP-DM) and a hybrid A* search over
    (s, lane, v_s) with longitudinal and lane-change motion primitives.
"""

import dataclasses
import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from LSTMPlanner._utils import PlanInfeasibleError
from LSTMPlanner.config import DEFAULT_PROFILE, merge_profile
from LSTMPlanner.LSTMP import Planner, PlanResult
from LSTMPlanner.MIQP import (
    AffineExpr,
    MiqpModel,
    QuadraticObjective,
    implication_activate,
)
from LSTMPlanner.PlanConsts import PlannerKind, SolveStatus
from LSTMPlanner.road import (
    PlanningProblem,
    RelativeFrame,
    SurroundingVehicle,
    lane_of,
    preprocess_traffic,
)
from LSTMPlanner.solver import SolveOptions, solve_miqp
from LSTMPlanner.STF import (
    StfConfig,
    StfVariables,
    add_dynamics,
    add_motion_constraints,
    create_stf_variables,
)

logger = logging.getLogger(__name__)

#: Avoidance sides of the rectangle disjunction, in binary order.
SIDES = ("ahead", "behind", "left", "right")


def _planning_traffic(
    problem: PlanningProblem, frame: RelativeFrame, max_per_lane: int, margin: float,
    dv_lower: float, dv_upper: float, merge_threshold: float,
) -> Tuple[Tuple[SurroundingVehicle, ...], List[SurroundingVehicle]]:
    nominal = tuple(
        preprocess_traffic(problem.traffic, problem.ego, merge_threshold, max_per_lane)
    )
    inflated = [sv.inflated(margin, dv_lower, dv_upper) for sv in nominal]
    return nominal, frame.traffic(inflated)


def _mirrored(stf: StfConfig, frame: RelativeFrame) -> StfConfig:
    if frame.direction > 0:
        return stf
    return dataclasses.replace(stf, alpha_l=-stf.alpha_r, alpha_r=-stf.alpha_l)


@dataclass
class MipDmConfig:
    """MIP-DM settings

    Attributes:
        N (int): horizon in steps
        M (int): vehicle slots per lane
        L (int): lanes considered, including the ego lane
        stf (StfConfig): dynamics, bounds and weights shared with the STF
        w_g (float): lane weight
        lateral_margin (float): clearance to a lane occupied by a vehicle, m
        sv_position_margin (float): longitudinal inflation of SV bounds, m
        dv_lower (float): SV velocity spread below the measurement
        dv_upper (float): SV velocity spread above the measurement
        merge_threshold (float): distance below which SVs are merged, m
        solve (SolveOptions): branch-and-bound settings
    """

    N: int = 10
    M: int = 3
    L: int = 5
    stf: StfConfig = field(default_factory=StfConfig)
    w_g: float = 200.0
    lateral_margin: float = 0.3
    sv_position_margin: float = 0.5
    dv_lower: float = 0.0
    dv_upper: float = 0.0
    merge_threshold: float = 15.0
    solve: SolveOptions = field(default_factory=SolveOptions)

    def __post_init__(self):
        if self.N < 1 or self.M < 1 or self.L < 1:
            raise ValueError(
                f"N, M and L must be positive, got {self.N}, {self.M}, {self.L}"
            )
        if self.stf.N != self.N:
            self.stf = dataclasses.replace(self.stf, N=self.N)

    @property
    def expected_binaries(self) -> int:
        return 4 * self.N * self.M * self.L + self.N

    @classmethod
    def from_profile(
        cls, profile: Optional[Mapping] = None, **overrides
    ) -> "MipDmConfig":
        profile = merge_profile(DEFAULT_PROFILE, profile)
        section = profile["mipdm"]
        traffic = profile["traffic"]
        N = overrides.pop("N", section["N"])
        kwargs = dict(
            N=N,
            M=section["M"],
            L=section["L"],
            stf=StfConfig.from_profile(profile, N=N),
            w_g=profile["ltf"]["w_g"],
            lateral_margin=traffic["lateral_margin"],
            sv_position_margin=traffic["sv_position_margin"],
            dv_lower=traffic["dv_lower"],
            dv_upper=traffic["dv_upper"],
            merge_threshold=traffic["merge_threshold"],
            solve=SolveOptions.from_profile(profile),
        )
        kwargs.update(overrides)
        return cls(**kwargs)


def _avoidance_rows(
    sv: SurroundingVehicle, t: float, s_k, n_k, lane_width: float, margin: float
) -> List[AffineExpr]:
    c = (sv.lane - 1) * lane_width
    return [
        AffineExpr.of(s_k) - (sv.s_upper + t * sv.v_upper),
        (sv.s_lower + t * sv.v_lower) - AffineExpr.of(s_k),
        AffineExpr.of(n_k) - (c + lane_width / 2 + margin),
        (c - lane_width / 2 - margin) - AffineExpr.of(n_k),
    ]


@dataclass
class MipDmBuild:
    """Frozen MIP-DM model of one cycle with the handles needed to read a
    solution back
    """

    model: MiqpModel
    vars: StfVariables
    shift: List[AffineExpr]
    frame: RelativeFrame
    stf: StfConfig
    traffic: Tuple[SurroundingVehicle, ...]


def build_mipdm(
    problem: PlanningProblem, cfg: Optional[MipDmConfig] = None
) -> MipDmBuild:
    """Build the MIP-DM problem of one cycle

    Every vehicle slot of every lane gets four binaries per step selecting on
    which side of the vehicle's lane-wide rectangle the ego is; unused slots
    and vehicles behind the ego on its own lane get fixed binaries, so the
    model always has 4 N M L + N binaries. Lane changes only go towards the
    goal, at most one per step.

    Args:
        problem (PlanningProblem): current state, traffic and goal
        cfg (MipDmConfig, optional): settings

    Returns:
        MipDmBuild: frozen model and extraction handles
    """
    cfg = cfg or MipDmConfig()
    frame = RelativeFrame(problem.road, problem.ego, problem.goal_lane, cfg.L)
    nominal, traffic = _planning_traffic(
        problem, frame, cfg.M, cfg.sv_position_margin, cfg.dv_lower, cfg.dv_upper,
        cfg.merge_threshold,
    )
    ego = frame.ego(problem.ego)
    stf = _mirrored(dataclasses.replace(cfg.stf, v_ref=problem.v_ref), frame)
    road = frame.relative_road
    d = road.lane_width

    model = MiqpModel(f"mipdm-N{cfg.N}")
    vars = create_stf_variables(model, ego, stf, road, lane_change=False)
    add_dynamics(model, vars, stf)
    add_motion_constraints(model, vars, stf)
    model.add_eq(vars.v_n(cfg.N), 0.0, "terminal_vn")

    deltas = [model.add_binary(f"delta_{k}", priority=1) for k in range(1, cfg.N + 1)]
    shift = [AffineExpr()]
    for delta in deltas:
        shift.append(shift[-1] + delta)
    model.add_le(shift[-1], road.num_lanes - 1, "lane_changes")
    for k in range(1, cfg.N + 1):
        model.add_ge(vars.n(k) - d * shift[k], -d / 2, f"band_lo_{k}")
        model.add_le(vars.n(k) - d * shift[k], d / 2, f"band_hi_{k}")

    by_lane: Dict[int, List[SurroundingVehicle]] = {}
    for sv in traffic:
        if sv.lane == 1 and sv.s_upper <= ego.s:
            continue
        by_lane.setdefault(sv.lane, []).append(sv)
        if sv.changing_lane and sv.target_lane not in (None, sv.lane):
            by_lane.setdefault(sv.target_lane, []).append(
                dataclasses.replace(sv, lane=sv.target_lane)
            )
    for lane in range(1, cfg.L + 1):
        slots = sorted(by_lane.get(lane, []), key=lambda sv: sv.s_hat)[: cfg.M]
        for m in range(cfg.M):
            sv = slots[m] if m < len(slots) else None
            for k in range(1, cfg.N + 1):
                name = f"o_{lane}_{m}_{k}"
                if sv is None:
                    for i, side in enumerate(SIDES):
                        fixed = 1.0 if i == 0 else 0.0
                        model.add_binary(f"{name}_{side}", lower=fixed, upper=fixed)
                    continue
                rows = _avoidance_rows(
                    sv, k * stf.t_d, vars.s(k), vars.n(k), d, cfg.lateral_margin
                )
                binaries = [model.add_binary(f"{name}_{side}") for side in SIDES]
                for side, beta, f in zip(SIDES, binaries, rows):
                    implication_activate(model, beta, f, name=f"{name}_{side}_on")
                model.add_ge(sum(binaries, AffineExpr()), 1.0, f"{name}_any")

    cost = QuadraticObjective()
    R = np.asarray(stf.R)
    for k in range(1, cfg.N + 1):
        cost.add_square(d * shift[k] - vars.n(k), stf.w_n)
        cost.add_square(problem.v_ref - vars.v_s(k), stf.w_v)
        cost.add_linear(frame.goal - 1 - shift[k], cfg.w_g * stf.t_d)
    for a_s, a_n in vars.u:
        cost.add_quadratic(a_s.id, a_s.id, R[0, 0])
        cost.add_quadratic(a_n.id, a_n.id, R[1, 1])
        if R[0, 1]:
            cost.add_quadratic(a_s.id, a_n.id, 2.0 * R[0, 1])
    model.add_objective(cost)
    model.freeze()
    return MipDmBuild(model, vars, shift, frame, stf, nominal)


def mipdm_plan(
    problem: PlanningProblem,
    cfg: Optional[MipDmConfig] = None,
    opts: Optional[SolveOptions] = None,
) -> PlanResult:
    """Build and solve the MIP-DM problem of one cycle

    Args:
        problem (PlanningProblem): current state, traffic and goal
        cfg (MipDmConfig, optional): settings
        opts (SolveOptions, optional): overrides `cfg.solve`

    Returns:
        PlanResult: optimal or best incumbent plan

    Raises:
        PlanInfeasibleError: no feasible plan was found
    """
    started = time.perf_counter()
    cfg = cfg or MipDmConfig()
    build = build_mipdm(problem, cfg)
    model, vars, frame = build.model, build.vars, build.frame
    solution = solve_miqp(model, opts or cfg.solve)
    if not solution.has_solution:
        raise PlanInfeasibleError(
            f"No feasible MIP-DM plan ({solution.status.value}) for {model!r}", solution
        )
    values = solution.values
    controls = vars.controls(values)
    controls[:, 1] *= frame.direction
    elapsed = (time.perf_counter() - started) * 1000.0
    logger.debug(
        "MIP-DM plan: objective %.6g, %d nodes, %.1f ms",
        solution.objective,
        solution.node_count,
        elapsed,
    )
    return PlanResult(
        planner=PlannerKind.MIPDM.value,
        status=solution.status,
        objective=float(solution.objective),
        t_d=build.stf.t_d,
        states=frame.states_to_absolute(vars.states(values)),
        controls=controls,
        lam=np.round([s.evaluate(values) for s in build.shift], 9),
        binaries=model.num_binaries,
        continuous=model.num_continuous,
        node_count=solution.node_count,
        relaxations=solution.relaxations,
        solve_ms=elapsed,
        stf_cost=float(solution.objective),
        base_lane=frame.base_lane,
        direction=frame.direction,
        origin=frame.origin,
        lane_width=frame.road.lane_width,
        traffic=build.traffic,
    )


class MipDmPlanner(Planner):
    kind = PlannerKind.MIPDM

    def __init__(self, cfg: Optional[MipDmConfig] = None):
        self.cfg = cfg or MipDmConfig()
        super().__init__(self.cfg.stf)

    def __repr__(self):
        return f"MipDmPlanner(N={self.cfg.N})"

    def _plan(self, problem: PlanningProblem) -> PlanResult:
        return mipdm_plan(problem, self.cfg)


def lane_change_steps(lane_width: float, a_lat_max: float, t_d: float) -> int:
    """Fewest steps of a rest-to-rest lateral move by one lane

    Bang-bang acceleration over h steps (with one coasting step when h is odd)
    covers a t_d^2 h^2 / 4 (even h) or a t_d^2 (h^2 - 1) / 4 (odd h).
    """
    h = 2
    while _lateral_accel(h, lane_width, t_d) > a_lat_max + 1e-12:
        h += 1
    return h


def _lateral_accel(h: int, lane_width: float, t_d: float) -> float:
    if h % 2 == 0:
        return 4.0 * lane_width / (t_d**2 * h**2)
    return 4.0 * lane_width / (t_d**2 * (h**2 - 1))


def _rollout(
    p: float, v: float, accels: np.ndarray, t_d: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Positions and velocities after each step of a zero-order-hold double
    integrator"""
    vel = v + np.cumsum(accels) * t_d
    before = np.concatenate(([v], vel[:-1]))
    pos = p + np.cumsum(before * t_d + 0.5 * accels * t_d**2)
    return pos, vel


def completion_windows(steps: int, count: int) -> np.ndarray:
    """Distinct step counts in which a lateral move completes, longest first

    `count` windows are spread evenly between the full expansion and 2 steps.
    """
    windows = np.unique(np.linspace(steps, 2, count).round().astype(int))
    return windows[::-1]


def lateral_profile(
    n: float,
    v_n: float,
    target: float,
    window: int,
    steps: int,
    t_d: float,
    a_lat_max: float,
) -> Optional[np.ndarray]:
    """Two-phase lateral accelerations from (n, v_n) to rest at `target`

    The first `window // 2` steps share one acceleration, the last
    `window // 2` steps of the window another one, an odd window coasts in
    the middle step. After the window the accelerations are 0.

    Returns:
        np.ndarray: `steps` accelerations, None if the bound is exceeded
    """
    half = window // 2
    first = np.zeros(steps)
    first[:half] = 1.0
    second = np.zeros(steps)
    second[window - half : window] = 1.0
    effect = np.array(
        [
            [axis[-1] for axis in _rollout(0.0, 0.0, unit[:window], t_d)]
            for unit in (first, second)
        ]
    ).T
    rhs = np.array([target - n - v_n * window * t_d, -v_n])
    a_first, a_second = np.linalg.solve(effect, rhs)
    profile = a_first * first + a_second * second
    if np.max(np.abs(profile)) > a_lat_max + 1e-9:
        return None
    return profile


def lateral_primitives(
    n: float,
    v_n: float,
    target: float,
    steps: int,
    count: int,
    t_d: float,
    a_lat_max: float,
) -> List[np.ndarray]:
    """Distinct feasible `lateral_profile` moves over `completion_windows`"""
    profiles: List[np.ndarray] = []
    for window in completion_windows(steps, count):
        profile = lateral_profile(n, v_n, target, window, steps, t_d, a_lat_max)
        if profile is None:
            continue
        if any(np.allclose(profile, other) for other in profiles):
            continue
        profiles.append(profile)
    return profiles


@dataclass
class HybridAStarConfig:
    """Hybrid A* settings

    Attributes:
        expansion_steps (int): steps per expansion, raised to the shortest
            feasible lane change when needed
        accel_samples (int): longitudinal acceleration samples, 0 is always
            one of them
        lane_change_primitives (int): completion windows of the lateral
            moves towards each reachable lane center
        position_bins (int): position buckets of the closed set
        velocity_bins (int): velocity buckets of the closed set
        max_expansions (int): expansion budget
        horizon_expansions (int): expansions from the root to a goal node
        stf (StfConfig): dynamics, bounds and weights
        w_g (float): lane weight
        sv_position_margin (float): longitudinal inflation of SV bounds, m
        dv_lower (float): SV velocity spread below the measurement
        dv_upper (float): SV velocity spread above the measurement
        merge_threshold (float): distance below which SVs are merged, m
        max_per_lane (int): SVs kept per lane
    """

    expansion_steps: int = 7
    accel_samples: int = 11
    lane_change_primitives: int = 11
    position_bins: int = 100
    velocity_bins: int = 20
    max_expansions: int = 50
    horizon_expansions: int = 3
    stf: StfConfig = field(default_factory=StfConfig)
    w_g: float = 200.0
    sv_position_margin: float = 0.5
    dv_lower: float = 0.0
    dv_upper: float = 0.0
    merge_threshold: float = 15.0
    max_per_lane: int = 7

    def __post_init__(self):
        for name in (
            "expansion_steps",
            "accel_samples",
            "lane_change_primitives",
            "position_bins",
            "velocity_bins",
            "max_expansions",
            "horizon_expansions",
        ):
            if getattr(self, name) < 1:
                raise ValueError(
                    f"{name} must be at least 1, got {getattr(self, name)}"
                )

    @property
    def steps(self) -> int:
        """Steps per expansion actually used"""
        return max(
            self.expansion_steps,
            lane_change_steps(self.stf.lane_width, self.stf.a_lat_max, self.stf.t_d),
        )

    @property
    def accelerations(self) -> np.ndarray:
        samples = np.linspace(
            self.stf.a_lon_min, self.stf.a_lon_max, self.accel_samples
        )
        samples[np.argmin(np.abs(samples))] = 0.0
        return samples

    @classmethod
    def from_profile(
        cls, profile: Optional[Mapping] = None, **overrides
    ) -> "HybridAStarConfig":
        profile = merge_profile(DEFAULT_PROFILE, profile)
        traffic = profile["traffic"]
        kwargs = dict(profile["hastar"])
        kwargs.update(
            stf=StfConfig.from_profile(profile),
            w_g=profile["ltf"]["w_g"],
            sv_position_margin=traffic["sv_position_margin"],
            dv_lower=traffic["dv_lower"],
            dv_upper=traffic["dv_upper"],
            merge_threshold=traffic["merge_threshold"],
            max_per_lane=traffic["M"],
        )
        kwargs.update(overrides)
        return cls(**kwargs)


def relaxed_heuristic(
    v: float,
    lane: int,
    goal_lane: int,
    steps: int,
    cfg: HybridAStarConfig,
    v_ref: float,
) -> float:
    """Obstacle-free lower bound of the cost of the next `steps` steps

    The velocity term assumes the reference is approached at the acceleration
    bounds; the lane term assumes every lane change counts from half of its
    duration on and changes follow each other immediately. Control and
    lateral terms are bounded by 0.
    """
    stf = cfg.stf
    h = cfg.steps
    cost = 0.0
    for j in range(1, steps + 1):
        lo = max(v + stf.a_lon_min * stf.t_d * j, 0.0)
        hi = v + stf.a_lon_max * stf.t_d * j
        gap = max(lo - v_ref, v_ref - hi, 0.0)
        cost += stf.w_v * gap**2
        reached = min(lane + (j + h // 2) // h, goal_lane)
        cost += cfg.w_g * stf.t_d * max(goal_lane - reached, 0)
    return cost


def relaxed_heuristic_table(
    problem: PlanningProblem, lane: int, cfg: HybridAStarConfig, steps: int
) -> np.ndarray:
    """`relaxed_heuristic` over the centers of the velocity buckets"""
    frame = RelativeFrame(
        problem.road, problem.ego, problem.goal_lane, problem.road.num_lanes
    )
    v_top = problem.v_ref + 10.0
    centers = (np.arange(cfg.velocity_bins) + 0.5) * v_top / cfg.velocity_bins
    return np.array(
        [
            relaxed_heuristic(v, lane, frame.goal, steps, cfg, problem.v_ref)
            for v in centers
        ]
    )


@dataclass
class _Node:
    id: int
    depth: int
    lane: int
    g: float
    h: float
    states: np.ndarray
    controls: np.ndarray
    parent: Optional["_Node"] = field(default=None, repr=False)

    @property
    def f(self) -> float:
        return self.g + self.h

    @property
    def state(self) -> np.ndarray:
        return self.states[-1]

    def path(self) -> Tuple[np.ndarray, np.ndarray]:
        chain = []
        node = self
        while node is not None:
            chain.append(node)
            node = node.parent
        chain.reverse()
        states = [chain[0].states]
        controls = []
        for node in chain[1:]:
            states.append(node.states[1:])
            controls.append(node.controls)
        controls = np.vstack(controls) if controls else np.zeros((0, 2))
        return np.vstack(states), controls


class _Search:
    def __init__(
        self,
        problem: PlanningProblem,
        cfg: HybridAStarConfig,
        frame: RelativeFrame,
        traffic: Sequence[SurroundingVehicle],
    ):
        self.cfg = cfg
        self.frame = frame
        self.stf = _mirrored(dataclasses.replace(cfg.stf, v_ref=problem.v_ref), frame)
        self.v_ref = problem.v_ref
        self.traffic = traffic
        self.R = np.asarray(self.stf.R)
        self.h = cfg.steps
        self.ids = itertools.count()
        total = self.h * cfg.horizon_expansions * self.stf.t_d
        self.v_top = problem.v_ref + 10.0
        reach = (max(problem.ego.v_s, self.v_top) + self.stf.a_lon_max * total) * total
        self.ds = max(reach / cfg.position_bins, 1e-6)

    def key(self, node: _Node) -> Tuple[int, int, int, int]:
        s, _, v, _ = node.state
        bins = self.cfg.velocity_bins
        v_bin = min(int(v / self.v_top * bins), bins - 1)
        return node.depth, node.lane, int(s // self.ds), v_bin

    def heuristic(self, v: float, lane: int, depth: int) -> float:
        remaining = (self.cfg.horizon_expansions - depth) * self.h
        return relaxed_heuristic(
            v, lane, self.frame.goal, remaining, self.cfg, self.v_ref
        )

    def collides(self, s: float, n: float, t: float) -> bool:
        lane = lane_of(n, self.frame.road.lane_width)
        return any(
            (sv.lane == lane or (sv.changing_lane and sv.target_lane == lane))
            and sv.occupies(t, s)
            for sv in self.traffic
        )

    def lateral_moves(self, node: _Node) -> List[Tuple[int, np.ndarray]]:
        """Lateral accelerations from the node state to rest on the current
        or a neighboring lane center, off-road moves excluded"""
        _, n, _, v_n = node.state
        d = self.frame.road.lane_width
        low, high = self.frame.relative_road.lateral_box
        moves = []
        for lane in (node.lane, node.lane + 1, node.lane - 1):
            if not 1 <= lane <= self.frame.num_lanes:
                continue
            for profile in lateral_primitives(
                n,
                v_n,
                (lane - 1) * d,
                self.h,
                self.cfg.lane_change_primitives,
                self.stf.t_d,
                self.stf.a_lat_max,
            ):
                path, _ = _rollout(n, v_n, profile, self.stf.t_d)
                if np.all((path > low) & (path < high)):
                    moves.append((lane, profile))
        return moves

    def longitudinal(self, v: float, a: float) -> np.ndarray:
        """Sampled acceleration, raised where it would reverse the vehicle"""
        t_d = self.stf.t_d
        used = np.empty(self.h)
        for j in range(self.h):
            used[j] = max(a, -v / t_d)
            v = max(v + used[j] * t_d, 0.0)
        return used

    def expand(self, node: _Node) -> List[_Node]:
        stf = self.stf
        d = self.frame.road.lane_width
        s0, n0, v0, vn0 = node.state
        steps = np.arange(1, self.h + 1) + node.depth * self.h
        moves = [
            (lane, profile, *_rollout(n0, vn0, profile, stf.t_d))
            for lane, profile in self.lateral_moves(node)
        ]
        children = []
        for lane, profile, n, v_n in moves:
            current = np.array([lane_of(value, d) for value in n])
            behind = np.maximum(self.frame.goal - current, 0)
            lane_cost = self.cfg.w_g * stf.t_d * behind
            offset_cost = stf.w_n * (n - (lane - 1) * d) ** 2
            for a in self.cfg.accelerations:
                a_s = self.longitudinal(v0, a)
                s, v_s = _rollout(s0, v0, a_s, stf.t_d)
                v_s = np.maximum(v_s, 0.0)
                lo, hi = stf.alpha_l * v_s, stf.alpha_r * v_s
                if np.any(v_n < lo - 1e-9) or np.any(v_n > hi + 1e-9):
                    continue
                if any(
                    self.collides(s[j], n[j], steps[j] * stf.t_d)
                    for j in range(self.h)
                ):
                    continue
                controls = np.column_stack([a_s, profile])
                effort = np.einsum("ki,ij,kj->k", controls, self.R, controls)
                g = node.g + float(
                    np.sum(
                        offset_cost
                        + stf.w_v * (self.v_ref - v_s) ** 2
                        + effort
                        + lane_cost
                    )
                )
                states = np.vstack([node.state, np.column_stack([s, n, v_s, v_n])])
                depth = node.depth + 1
                children.append(
                    _Node(
                        next(self.ids),
                        depth,
                        lane,
                        g,
                        self.heuristic(v_s[-1], lane, depth),
                        states,
                        controls,
                        node,
                    )
                )
        return children


def hybrid_astar_plan(
    problem: PlanningProblem, cfg: Optional[HybridAStarConfig] = None
) -> PlanResult:
    """Best-first search over (s, lane, v_s) with an admissible heuristic

    Nodes are popped by lowest f, then highest velocity, then lowest id. A
    node `horizon_expansions` deep is a goal. When the expansion budget runs
    out, the expanded node with the lowest heuristic is returned instead.

    Args:
        problem (PlanningProblem): current state, traffic and goal
        cfg (HybridAStarConfig, optional): settings

    Returns:
        PlanResult: trajectory only, without transitions

    Raises:
        PlanInfeasibleError: the root has no collision-free successor
    """
    started = time.perf_counter()
    cfg = cfg or HybridAStarConfig()
    frame = RelativeFrame(
        problem.road, problem.ego, problem.goal_lane, problem.road.num_lanes
    )
    nominal, traffic = _planning_traffic(
        problem,
        frame,
        cfg.max_per_lane,
        cfg.sv_position_margin,
        cfg.dv_lower,
        cfg.dv_upper,
        cfg.merge_threshold,
    )
    ego = frame.ego(problem.ego)
    traffic = [sv for sv in traffic if not (sv.lane == 1 and sv.s_upper <= ego.s)]
    search = _Search(problem, cfg, frame, traffic)
    root = _Node(
        next(search.ids),
        0,
        1,
        0.0,
        search.heuristic(ego.v_s, 1, 0),
        ego.as_array()[None, :],
        np.zeros((0, 2)),
    )
    heap = [(root.f, -root.state[2], root.id, root)]
    closed = set()
    expanded: List[_Node] = []
    goal = None
    while heap and len(expanded) < cfg.max_expansions:
        _, _, _, node = heapq.heappop(heap)
        if node.depth == cfg.horizon_expansions:
            goal = node
            break
        key = search.key(node)
        if key in closed:
            continue
        closed.add(key)
        expanded.append(node)
        for child in search.expand(node):
            heapq.heappush(heap, (child.f, -child.state[2], child.id, child))
    if goal is None:
        best = min(expanded, key=lambda n: (n.h, n.f, n.id))
        if best is root:
            raise PlanInfeasibleError("Hybrid A* found no collision-free successor")
        logger.debug(
            "Hybrid A* budget exhausted, best partial path at depth %d", best.depth
        )
        goal = best
    states, controls = goal.path()
    controls = controls.copy()
    controls[:, 1] *= frame.direction
    elapsed = (time.perf_counter() - started) * 1000.0
    lam = np.array(
        [lane_of(n, frame.road.lane_width) - 1 for n in states[:, 1]], dtype=float
    )
    complete = goal.depth == cfg.horizon_expansions
    return PlanResult(
        planner=PlannerKind.HybridAStar.value,
        status=SolveStatus.Optimal if complete else SolveStatus.NodeLimit,
        objective=float(goal.g),
        t_d=search.stf.t_d,
        states=frame.states_to_absolute(states),
        controls=controls,
        lam=lam,
        node_count=len(expanded),
        solve_ms=elapsed,
        stf_cost=float(goal.g),
        base_lane=frame.base_lane,
        direction=frame.direction,
        origin=frame.origin,
        lane_width=frame.road.lane_width,
        traffic=nominal,
    )


class HybridAStarPlanner(Planner):
    kind = PlannerKind.HybridAStar

    def __init__(self, cfg: Optional[HybridAStarConfig] = None):
        self.cfg = cfg or HybridAStarConfig()
        super().__init__(self.cfg.stf)

    def __repr__(self):
        return f"HybridAStarPlanner(max_expansions={self.cfg.max_expansions})"

    def _plan(self, problem: PlanningProblem) -> PlanResult:
        return hybrid_astar_plan(problem, self.cfg)
