""" STF
    Short-term formulation: discrete point-mass trajectory over N steps with
    lane binaries, three-stage lane-change free sets, a terminal set and the
    reference cost.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from LSTMPlanner.MIQP import (
    AffineExpr,
    Expr,
    MiqpModel,
    QuadraticObjective,
    Variable,
    bilinear_product,
    implication_activate,
)
from LSTMPlanner.road import EgoState, HalfPlaneSet, RoadGeometry

logger = logging.getLogger(__name__)

#: Speed box of every longitudinal and lateral velocity variable, m/s.
V_MAX = 60.0
#: Branching priority of the lane binaries, above every gap binary.
LANE_PRIORITY = 1000


@dataclass
class StfConfig:
    """Settings of the short-term formulation

    Attributes:
        N (int): number of steps
        t_d (float): sampling time in s
        w_n (float): lateral reference weight
        w_v (float): velocity reference weight
        R (tuple): 2x2 control weight
        a_lon_min (float): longitudinal deceleration bound (negative)
        a_lon_max (float): longitudinal acceleration bound
        a_lat_max (float): lateral acceleration bound
        alpha_l (float): lower slope of the lateral velocity cone
        alpha_r (float): upper slope of the lateral velocity cone
        t_lc_max (float): upper bound of the lane-change duration in s
        v_ref (float): reference velocity in m/s
        lane_width (float): lane width in m
    """

    N: int = 15
    t_d: float = 0.3
    w_n: float = 1e-2
    w_v: float = 1e-1
    R: Tuple[Tuple[float, float], Tuple[float, float]] = ((5e-4, 0.0), (0.0, 2e-3))
    a_lon_min: float = -8.0
    a_lon_max: float = 5.0
    a_lat_max: float = 3.0
    alpha_l: float = -0.17
    alpha_r: float = 0.17
    t_lc_max: float = 2.7
    v_ref: float = 25.0
    lane_width: float = 3.75

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"N must be at least 2, got {self.N}")
        if not self.t_d > 0:
            raise ValueError(f"t_d must be positive, got {self.t_d}")
        if not self.a_lon_min < 0 < self.a_lon_max:
            raise ValueError(
                f"Longitudinal bounds [{self.a_lon_min}, {self.a_lon_max}] "
                "must enclose 0"
            )
        if not self.a_lat_max > 0:
            raise ValueError(f"a_lat_max must be positive, got {self.a_lat_max}")
        if not self.alpha_l <= 0 <= self.alpha_r:
            raise ValueError(
                f"Cone slopes [{self.alpha_l}, {self.alpha_r}] must enclose 0"
            )
        if self.w_n < 0 or self.w_v < 0:
            raise ValueError("Weights must be nonnegative")
        R = np.asarray(self.R, dtype=float)
        if R.shape != (2, 2) or not np.allclose(R, R.T):
            raise ValueError(f"R must be a symmetric 2x2 matrix, got {self.R}")
        if np.linalg.eigvalsh(R)[0] < 0:
            raise ValueError(f"R must be positive semidefinite, got {self.R}")
        self.R = tuple(tuple(float(v) for v in row) for row in R)
        if self.n_lc > self.N:
            raise ValueError(
                f"Lane change needs {self.n_lc} steps on each side, "
                f"horizon has {self.N}"
            )

    @property
    def n_lc(self) -> int:
        """Half lane-change duration in steps"""
        return int(math.ceil(self.t_lc_max / (2 * self.t_d) - 1e-9))

    @classmethod
    def from_profile(cls, profile: Mapping, **overrides) -> "StfConfig":
        section = dict(profile.get("stf", {}))
        R = section.pop("R", None)
        if R is not None:
            R = np.asarray(R, dtype=float)
            if R.ndim == 1:
                R = np.diag(R)
            section["R"] = tuple(map(tuple, R))
        lane_width = profile.get("road", {}).get("lane_width")
        if lane_width is not None:
            section.setdefault("lane_width", lane_width)
        section.update(overrides)
        return cls(**section)


@dataclass
class StfVariables:
    """Variables of the short-term formulation

    `lam[0]` is the constant 0 since the ego lane is always lane 1; `q[k]`
    equals `lam[k] * n_k` at every integer point.
    """

    x: List[List[Variable]]
    u: List[List[Variable]]
    lam: List[Expr]
    q: List[Expr] = field(default_factory=list)

    @property
    def N(self) -> int:
        return len(self.u)

    def s(self, k: int) -> Variable:
        return self.x[k][0]

    def n(self, k: int) -> Variable:
        return self.x[k][1]

    def v_s(self, k: int) -> Variable:
        return self.x[k][2]

    def v_n(self, k: int) -> Variable:
        return self.x[k][3]

    def lam_at(self, k: int) -> AffineExpr:
        """Lane binary with out-of-range indices padded by the first or last"""
        return AffineExpr.of(self.lam[min(max(k, 0), self.N)])

    @property
    def lane_binaries(self) -> List[Variable]:
        return [lam for lam in self.lam if isinstance(lam, Variable)]

    def states(self, values: np.ndarray) -> np.ndarray:
        return np.array([[values[v.id] for v in row] for row in self.x])

    def controls(self, values: np.ndarray) -> np.ndarray:
        return np.array([[values[v.id] for v in row] for row in self.u])

    def lanes(self, values: np.ndarray) -> np.ndarray:
        return np.array([AffineExpr.of(lam).evaluate(values) for lam in self.lam])


def discretize_dynamics(t_d: float) -> Tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold double integrator on [s, n, v_s, v_n] with u = [a_s, a_n]

    Args:
        t_d (float): sampling time, 0 gives the identity map

    Returns:
        (np.ndarray, np.ndarray): A (4x4) and B (4x2)
    """
    if t_d < 0:
        raise ValueError(f"Sampling time must be nonnegative, got {t_d}")
    A = np.eye(4)
    A[0, 2] = A[1, 3] = t_d
    B = np.zeros((4, 2))
    B[0, 0] = B[1, 1] = 0.5 * t_d**2
    B[2, 0] = B[3, 1] = t_d
    return A, B


def create_stf_variables(
    model: MiqpModel,
    ego: EgoState,
    cfg: StfConfig,
    road: RoadGeometry,
    lane_change: bool = True,
) -> StfVariables:
    """Create states, controls and lane binaries; x_0 is fixed to `ego`

    Args:
        model (MiqpModel): model to extend
        ego (EgoState): initial state in the planning frame
        cfg (StfConfig): formulation settings
        road (RoadGeometry): road in the planning frame
        lane_change (bool, optional): create lane binaries, otherwise every
            lambda is the constant 0
    """
    n_lo, n_hi = road.lateral_box
    n_lo = min(n_lo, ego.n)
    x = [
        [
            model.add_continuous("s_0", ego.s, ego.s),
            model.add_continuous("n_0", ego.n, ego.n),
            model.add_continuous("vs_0", ego.v_s, ego.v_s),
            model.add_continuous("vn_0", ego.v_n, ego.v_n),
        ]
    ]
    for k in range(1, cfg.N + 1):
        x.append(
            [
                model.add_continuous(f"s_{k}", 0.0, road.length),
                model.add_continuous(f"n_{k}", n_lo, n_hi),
                model.add_continuous(f"vs_{k}", 0.0, V_MAX),
                model.add_continuous(f"vn_{k}", -V_MAX, V_MAX),
            ]
        )
    u = [
        [model.add_continuous(f"as_{k}"), model.add_continuous(f"an_{k}")]
        for k in range(cfg.N)
    ]
    lam: List[Expr] = [AffineExpr()]
    for k in range(1, cfg.N + 1):
        if lane_change:
            lam.append(model.add_binary(f"lam_{k}", priority=LANE_PRIORITY + cfg.N - k))
        else:
            lam.append(AffineExpr())
    return StfVariables(x, u, lam, [AffineExpr()] * (cfg.N + 1))


def add_dynamics(model: MiqpModel, vars: StfVariables, cfg: StfConfig):
    """x_{k+1} = A x_k + B u_k for every step"""
    A, B = discretize_dynamics(cfg.t_d)
    for k in range(cfg.N):
        for i in range(4):
            rhs = AffineExpr()
            for j in range(4):
                if A[i, j]:
                    rhs = rhs + A[i, j] * vars.x[k][j]
            for j in range(2):
                if B[i, j]:
                    rhs = rhs + B[i, j] * vars.u[k][j]
            model.add_eq(vars.x[k + 1][i] - rhs, 0.0, f"dyn_{k}_{i}")


def add_motion_constraints(model: MiqpModel, vars: StfVariables, cfg: StfConfig):
    """Control box and the lateral velocity cone alpha_l v_s <= v_n <= alpha_r v_s"""
    for k, (a_s, a_n) in enumerate(vars.u):
        model.set_bounds(a_s, cfg.a_lon_min, cfg.a_lon_max)
        model.set_bounds(a_n, -cfg.a_lat_max, cfg.a_lat_max)
    for k in range(1, cfg.N + 1):
        model.add_ge(vars.v_n(k) - cfg.alpha_l * vars.v_s(k), 0.0, f"cone_l_{k}")
        model.add_le(vars.v_n(k) - cfg.alpha_r * vars.v_s(k), 0.0, f"cone_r_{k}")


def add_lane_binaries(model: MiqpModel, vars: StfVariables, cfg: StfConfig):
    """Monotone lane binaries and the lateral band around d_lane * lambda_k"""
    d = cfg.lane_width
    for k in range(1, cfg.N + 1):
        lam = vars.lam_at(k)
        if k > 1:
            model.add_ge(lam - vars.lam_at(k - 1), 0.0, f"lam_mono_{k}")
        model.add_ge(vars.n(k) - d * lam, -d / 2, f"band_lo_{k}")
        model.add_le(vars.n(k) - d * lam, d / 2, f"band_hi_{k}")


def _set_rows(
    vars: StfVariables, k: int, free: HalfPlaneSet, t_d: float
) -> List[AffineExpr]:
    t = k * t_d
    rows = [
        AffineExpr(constant=b - a_t * t) - a_s * AffineExpr.of(vars.s(k))
        for a_t, a_s, b in free.rows
    ]
    if free.lateral is not None:
        lo, hi = free.lateral
        rows.append(vars.n(k) - lo)
        rows.append(hi - vars.n(k))
    return rows


def _widen(free: HalfPlaneSet, n_0: float) -> HalfPlaneSet:
    if free.lateral is None:
        return free
    lo, hi = free.lateral
    return free.with_lateral((min(lo, n_0), max(hi, n_0)))


def add_stage_constraints(
    model: MiqpModel,
    vars: StfVariables,
    free_keep: HalfPlaneSet,
    branches: Sequence[Tuple[Expr, HalfPlaneSet, HalfPlaneSet]],
    cfg: StfConfig,
) -> int:
    """Keep, transition and next-lane stages for steps 1..N

    Step k lies in F+ of the ego gap while lambda_{k+n_lc} = 0, in the
    lane-change set while lambda_{k+n_lc} - lambda_{k-n_lc} = 1 and in F+ of
    the target gap once lambda_{k-n_lc} = 1. Every target gap comes with a
    selector so that the transition and next-lane stages only bind for the
    chosen gap; a selector of 1 stands for a single fixed target.

    For the first n_lc steps the lateral interval of the stage sets is
    widened to contain the initial lateral position, so that a vehicle
    close to a lane boundary is not declared infeasible.

    Args:
        model (MiqpModel): model to extend
        vars (StfVariables): STF variables
        free_keep (HalfPlaneSet): F+ of the ego gap
        branches (list): (selector, F_lc, F+ of target) per target gap
        cfg (StfConfig): formulation settings

    Returns:
        int: number of emitted rows
    """
    n_lc = cfg.n_lc
    n_0 = vars.x[0][1].lower
    count = 0
    for k in range(1, cfg.N + 1):
        widen = k <= n_lc
        keep = _widen(free_keep, n_0) if widen else free_keep
        indicator = 1 - vars.lam_at(k + n_lc)
        for j, f in enumerate(_set_rows(vars, k, keep, cfg.t_d)):
            row = implication_activate(model, indicator, f, name=f"keep_{k}_{j}")
            count += row is not None
        transition = vars.lam_at(k + n_lc) - vars.lam_at(k - n_lc)
        arrived = vars.lam_at(k - n_lc)
        for g, (selector, free_lc, free_next) in enumerate(branches):
            selector = AffineExpr.of(selector)
            lc = _widen(free_lc, n_0) if widen else free_lc
            for j, f in enumerate(_set_rows(vars, k, lc, cfg.t_d)):
                row = implication_activate(
                    model, transition + selector - 1, f, name=f"lc_{k}_{g}_{j}"
                )
                count += row is not None
            for j, f in enumerate(_set_rows(vars, k, free_next, cfg.t_d)):
                row = implication_activate(
                    model, arrived + selector - 1, f, name=f"next_{k}_{g}_{j}"
                )
                count += row is not None
    return count


def add_terminal_constraints(
    model: MiqpModel,
    vars: StfVariables,
    v_keep: Optional[float],
    targets: Sequence[Tuple[Expr, Optional[float]]],
) -> int:
    """Terminal velocity caps and v_{n,N} = 0

    Args:
        model (MiqpModel): model to extend
        vars (StfVariables): STF variables
        v_keep (float, optional): lowest velocity bound of the leaders on the
            ego lane, None when there is no leader
        targets (list): (selector, cap) per target gap, cap None for a
            frontmost gap

    Returns:
        int: number of emitted rows
    """
    N = vars.N
    lam_N = vars.lam_at(N)
    v_N = AffineExpr.of(vars.v_s(N))
    count = 0
    model.add_eq(vars.v_n(N), 0.0, "terminal_vn")
    if v_keep is not None:
        row = implication_activate(
            model, 1 - lam_N, v_keep - v_N, name="terminal_keep"
        )
        count += row is not None
    for g, (selector, cap) in enumerate(targets):
        if cap is None:
            continue
        row = implication_activate(
            model, lam_N + AffineExpr.of(selector) - 1, cap - v_N, name=f"terminal_{g}"
        )
        count += row is not None
    return count + 1


def stf_cost(
    model: MiqpModel, vars: StfVariables, cfg: StfConfig
) -> QuadraticObjective:
    """Reference tracking cost with the lambda_k * n_k products reformulated

    w_n (d lambda_k - n_k)^2 expands to w_n (d^2 lambda_k - 2 d q_k + n_k^2)
    using lambda_k^2 = lambda_k, which keeps the objective convex.

    Returns:
        QuadraticObjective: the cost, not yet added to `model`
    """
    d = cfg.lane_width
    cost = QuadraticObjective()
    R = np.asarray(cfg.R)
    for k in range(1, cfg.N + 1):
        lam = vars.lam_at(k)
        n_k = vars.n(k)
        if lam.is_constant:
            cost.add_square(d * lam.constant - n_k, cfg.w_n)
        else:
            q = bilinear_product(model, lam, n_k, name=f"qbin_{k}")
            vars.q[k] = q
            cost.add_linear(lam, cfg.w_n * d * d)
            cost.add_linear(q, -2.0 * cfg.w_n * d)
            cost.add_square(n_k, cfg.w_n)
        cost.add_square(cfg.v_ref - vars.v_s(k), cfg.w_v)
    for a_s, a_n in vars.u:
        cost.add_quadratic(a_s.id, a_s.id, R[0, 0])
        cost.add_quadratic(a_n.id, a_n.id, R[1, 1])
        if R[0, 1]:
            cost.add_quadratic(a_s.id, a_n.id, 2.0 * R[0, 1])
    return cost


def build_stf(
    model: MiqpModel,
    ego: EgoState,
    cfg: StfConfig,
    road: RoadGeometry,
    free_keep: HalfPlaneSet,
    branches: Sequence[Tuple[Expr, HalfPlaneSet, HalfPlaneSet]] = (),
    v_keep: Optional[float] = None,
    targets: Sequence[Tuple[Expr, Optional[float]]] = (),
) -> Tuple[StfVariables, QuadraticObjective]:
    """Emit the complete short-term formulation into `model`

    Returns:
        (StfVariables, QuadraticObjective): variables and the STF cost, the
        cost is not yet added to `model`
    """
    vars = create_stf_variables(model, ego, cfg, road, lane_change=bool(branches))
    add_dynamics(model, vars, cfg)
    add_motion_constraints(model, vars, cfg)
    add_lane_binaries(model, vars, cfg)
    rows = add_stage_constraints(model, vars, free_keep, branches, cfg)
    rows += add_terminal_constraints(model, vars, v_keep, targets)
    cost = stf_cost(model, vars, cfg)
    logger.debug("STF: %d steps, %d stage and terminal rows", cfg.N, rows)
    return vars, cost
