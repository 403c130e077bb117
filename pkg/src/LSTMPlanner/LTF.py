""" LTF
    Long-term formulation: one continuous transition (tau, sigma) per lane
    change towards the goal, placed at the Chebyshev center of the selected
    gap and chained by shifted reachability cones.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from LSTMPlanner.MIQP import (
    AffineExpr,
    Expr,
    MiqpModel,
    QuadraticObjective,
    Variable,
    bilinear_product,
    chebyshev_constraints,
    disjunction,
)
from LSTMPlanner.PlanConsts import RefCostSign
from LSTMPlanner.road import Gap, GapTable, arrival_free_set, front_free_set

logger = logging.getLogger(__name__)


@dataclass
class LtfConfig:
    """Settings of the long-term formulation

    Operating velocities, the lane traversal time and the minimum radius
    default to values derived from `v_ref` and `t_lc_max` when left None.

    Attributes:
        lanes (int): lanes considered, including the ego lane
        goal_lane (int): goal lane counted from the ego lane (1 = ego lane)
        v_ref (float): reference velocity in m/s
        t_lc_max (float): lane-change duration bound of the STF in s
        v_op_upper (float): upper operating velocity
        v_op_lower (float): lower operating velocity
        t_lc (float): time spent traversing a lane in s
        r_min (float): minimum Chebyshev radius in scaled meters
        w_g (float): lane weight
        w_v (float): reference velocity weight
        w_safe (float): radius reward
        t_f (float): cost horizon of a lane without transition in s
        T_max (float): upper bound of every transition time in s
        s_max (float): upper bound of every transition position in m
        ref_cost_sign (RefCostSign): sign inside the reference cost square
    """

    lanes: int = 5
    goal_lane: int = 2
    v_ref: float = 25.0
    t_lc_max: float = 2.7
    v_op_upper: Optional[float] = None
    v_op_lower: Optional[float] = None
    t_lc: Optional[float] = None
    r_min: Optional[float] = None
    w_g: float = 200.0
    w_v: float = 1e-1
    w_safe: float = 1e-5
    t_f: float = 1e5
    T_max: float = 120.0
    s_max: float = 2000.0
    ref_cost_sign: RefCostSign = RefCostSign.Corrected

    def __post_init__(self):
        if self.v_op_upper is None:
            self.v_op_upper = self.v_ref + 5.0
        if self.v_op_lower is None:
            self.v_op_lower = max(self.v_ref - 10.0, 1.0)
        if self.t_lc is None:
            self.t_lc = self.t_lc_max
        if self.r_min is None:
            self.r_min = max(0.5 * self.t_lc_max * self.v_ref / 2.0, 5.0)
        self.ref_cost_sign = RefCostSign(self.ref_cost_sign)
        if self.lanes < 1 or self.goal_lane < 1:
            raise ValueError(
                f"Lane counts must be positive, got lanes={self.lanes}, "
                f"goal_lane={self.goal_lane}"
            )
        if not self.v_op_lower < self.v_op_upper:
            raise ValueError(
                "Operating velocities must satisfy "
                f"{self.v_op_lower} < {self.v_op_upper}"
            )
        if not self.r_min > 0:
            raise ValueError(f"r_min must be positive, got {self.r_min}")
        if not self.v_ref > 0:
            raise ValueError(f"v_ref must be positive, got {self.v_ref}")
        if not self.t_f > self.T_max:
            raise ValueError(f"t_f={self.t_f} must exceed T_max={self.T_max}")
        if self.r_min > self.s_max:
            raise ValueError(f"r_min={self.r_min} exceeds the road length {self.s_max}")

    @property
    def transitions(self) -> int:
        return max(self.lanes - 1, 0)

    @property
    def scale(self) -> Tuple[float, float]:
        """Per-axis scale of (t, s): time is measured in meters at v_ref"""
        return (self.v_ref, 1.0)

    @classmethod
    def from_profile(cls, profile: Mapping, **overrides) -> "LtfConfig":
        section = dict(profile.get("ltf", {}))
        kwargs = {
            "lanes": section.get("lanes", cls.lanes),
            "w_g": section.get("w_g", cls.w_g),
            "w_safe": section.get("w_safe", cls.w_safe),
            "t_f": section.get("t_f", cls.t_f),
            "T_max": section.get("T_max", cls.T_max),
            "ref_cost_sign": RefCostSign(section.get("ref_cost_sign", "corrected")),
            "w_v": profile.get("stf", {}).get("w_v", cls.w_v),
            "t_lc_max": profile.get("stf", {}).get("t_lc_max", cls.t_lc_max),
            "s_max": profile.get("road", {}).get("length", cls.s_max),
        }
        for key in ("v_op_upper", "v_op_lower", "t_lc", "r_min"):
            if section.get(key) is not None:
                kwargs[key] = section[key]
        kwargs.update(overrides)
        return cls(**kwargs)

    @classmethod
    def fitted(
        cls,
        v_ref: float,
        a_max: float = 5.0,
        a_min: float = -8.0,
        horizon: float = 20.0,
        **kwargs,
    ) -> "LtfConfig":
        """Configuration with cone parameters from `fit_reachability_parameters`"""
        fit = fit_reachability_parameters(v_ref, a_max, a_min, horizon=horizon)
        return cls(
            v_ref=v_ref,
            v_op_upper=fit.v_op_upper,
            v_op_lower=fit.v_op_lower,
            t_lc=fit.t_lc,
            **kwargs,
        )


@dataclass(frozen=True)
class ReachabilityFit:
    v_op_upper: float
    v_op_lower: float
    t_lc: float
    residual: float


def exact_reachable_bounds(
    t: np.ndarray,
    v_0: float,
    a_max: float,
    a_min: float,
    v_max: float,
    v_min: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """Farthest and nearest position of a double integrator starting at v_0

    Full acceleration (braking) until `v_max` (`v_min`) is reached, constant
    speed afterwards.
    """
    t = np.asarray(t, dtype=float)
    t_up = max((v_max - v_0) / a_max, 0.0)
    up = np.where(
        t <= t_up,
        v_0 * t + 0.5 * a_max * t**2,
        v_0 * t_up + 0.5 * a_max * t_up**2 + v_max * (t - t_up),
    )
    t_lo = max((v_0 - v_min) / -a_min, 0.0)
    lo = np.where(
        t <= t_lo,
        v_0 * t + 0.5 * a_min * t**2,
        v_0 * t_lo + 0.5 * a_min * t_lo**2 + v_min * (t - t_lo),
    )
    return up, lo


def fit_reachability_parameters(
    v_ref: float,
    a_max: float = 5.0,
    a_min: float = -8.0,
    v_max: Optional[float] = None,
    v_min: Optional[float] = None,
    horizon: float = 20.0,
    samples: int = 200,
) -> ReachabilityFit:
    """Fit the shifted cone to the exact reachable set of a double integrator

    The cone v_op_upper (t - t_lc) <= s <= ... is fitted in least squares to
    the exact upper bound, and v_op_lower (t + t_lc) to the exact lower one,
    over [0, horizon]. Cone bounds outside the exact set are penalized so
    that the fit stays an inner approximation where it matters.

    Args:
        v_ref (float): initial and reference velocity
        a_max (float, optional): acceleration bound
        a_min (float, optional): deceleration bound (negative)
        v_max (float, optional): speed cap, defaults to v_ref + 5
        v_min (float, optional): speed floor, defaults to max(v_ref - 10, 1)
        horizon (float, optional): fitting horizon in s
        samples (int, optional): number of time samples

    Returns:
        ReachabilityFit: fitted operating velocities, traversal time and the
        remaining mean squared residual
    """
    if not a_min < 0 < a_max:
        raise ValueError(f"Acceleration bounds [{a_min}, {a_max}] must enclose 0")
    v_max = v_ref + 5.0 if v_max is None else v_max
    v_min = max(v_ref - 10.0, 1.0) if v_min is None else v_min
    t = np.linspace(0.0, horizon, samples)
    up, lo = exact_reachable_bounds(t, v_ref, a_max, a_min, v_max, v_min)

    def mismatch(p):
        v_up, v_lo, t_lc = p
        cone_up = v_up * (t - t_lc)
        cone_lo = v_lo * (t + t_lc)
        outside = np.maximum(cone_up - up, 0.0) + np.maximum(lo - cone_lo, 0.0)
        fit = np.mean((cone_up - up) ** 2 + (cone_lo - lo) ** 2)
        return float(fit + 100.0 * np.mean(outside**2))

    start = np.array([v_max, v_min, 1.0])
    res = minimize(
        mismatch,
        start,
        method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-9},
    )
    v_up, v_lo, t_lc = res.x
    if not 0 < v_lo < v_up or t_lc <= 0:
        raise ValueError(f"Reachability fit did not converge to a valid cone: {res.x}")
    logger.debug("Reachability fit %s, residual %.3g", res.x, res.fun)
    return ReachabilityFit(float(v_up), float(v_lo), float(t_lc), float(res.fun))


@dataclass
class TransitionVariables:
    """Variables of the long-term formulation

    Index l of `tau`, `sigma`, `r` and `q` is the transition from lane l + 1
    to lane l + 2 (0-based). `beta[lane]` holds one binary per gap of that
    lane followed by the binary of the virtual no-transition gap; `gaps[lane]`
    lists the matching gaps.
    """

    tau: List[Variable]
    sigma: List[Variable]
    r: List[Variable]
    beta: Dict[int, List[Variable]]
    gaps: Dict[int, List[Gap]]
    q: List[Variable] = field(default_factory=list)

    def __len__(self):
        return len(self.tau)

    def virtual(self, lane: int) -> Variable:
        return self.beta[lane][-1]

    def selected_gap(self, lane: int, values: np.ndarray) -> Optional[Gap]:
        """Gap chosen on `lane`, None for the virtual gap"""
        picks = [values[b.id] for b in self.beta[lane]]
        index = int(np.argmax(picks))
        if index == len(self.gaps[lane]):
            return None
        return self.gaps[lane][index]


def create_transition_variables(
    model: MiqpModel, table: GapTable, cfg: LtfConfig, lanes: int
) -> TransitionVariables:
    """Transition triples and gap binaries for lanes 2..lanes"""
    tau, sigma, r = [], [], []
    beta: Dict[int, List[Variable]] = {}
    gaps: Dict[int, List[Gap]] = {}
    for l in range(1, lanes):
        tau.append(model.add_continuous(f"tau_{l}", 0.0, cfg.T_max))
        sigma.append(model.add_continuous(f"sigma_{l}", 0.0, cfg.s_max))
        r.append(model.add_continuous(f"r_{l}", cfg.r_min, cfg.s_max))
        lane = l + 1
        gaps[lane] = table.gaps_on(lane)
        beta[lane] = [model.add_binary(f"beta_{g.index}") for g in gaps[lane]]
        beta[lane].append(model.add_binary(f"beta_virtual_{lane}"))
    return TransitionVariables(tau, sigma, r, beta, gaps)


def reachability_constraints(
    model: MiqpModel,
    start: Tuple[Expr, Expr],
    end: Tuple[Expr, Expr],
    cfg: LtfConfig,
    name: str = "reach",
):
    """Shifted cone between two (time, position) points

        sigma' <= sigma + v_op_upper (tau' - tau - t_lc)
        sigma' >= sigma + v_op_lower (tau' - tau + t_lc)
    """
    tau, sigma = (AffineExpr.of(v) for v in start)
    tau_next, sigma_next = (AffineExpr.of(v) for v in end)
    dt = tau_next - tau
    ds = sigma_next - sigma
    model.add_le(ds - cfg.v_op_upper * dt, -cfg.v_op_upper * cfg.t_lc, f"{name}_up")
    model.add_ge(ds - cfg.v_op_lower * dt, cfg.v_op_lower * cfg.t_lc, f"{name}_lo")


def _centered(
    free, tv: TransitionVariables, l: int, cfg: LtfConfig
) -> List[AffineExpr]:
    if not len(free):
        return []
    rows = chebyshev_constraints(free, (tv.tau[l], tv.sigma[l]), tv.r[l], cfg.scale)
    return rows[:-1]


def centering_constraints(
    tv: TransitionVariables, l: int, table: GapTable, cfg: LtfConfig
) -> Tuple[List[List[AffineExpr]], Optional[List[List[AffineExpr]]]]:
    """Branch rows placing transition l at the center of its gaps

    Returns:
        (list, list): arrival branches, one per gap of lane l + 2 and an
        empty one for the virtual gap; departure branches over the gaps of
        lane l + 1, or None for the first transition which departs from the
        ego gap
    """
    arrive_lane = l + 2
    arrival = [
        _centered(arrival_free_set(g, table), tv, l, cfg) for g in tv.gaps[arrive_lane]
    ]
    arrival.append([])
    if l == 0:
        return arrival, None
    depart_lane = l + 1
    departure = [
        _centered(front_free_set(g, table), tv, l, cfg) for g in tv.gaps[depart_lane]
    ]
    departure.append([])
    return arrival, departure


def gap_disjunctions(
    model: MiqpModel, tv: TransitionVariables, table: GapTable, cfg: LtfConfig
) -> int:
    """Exactly one gap per arriving lane, departures reuse the arrival binaries
    of the previous transition and the virtual gaps form a monotone chain

    Returns:
        int: number of emitted rows
    """
    before = len(model.constraints)
    for l in range(len(tv)):
        arrival, departure = centering_constraints(tv, l, table, cfg)
        disjunction(
            model, arrival, tv.beta[l + 2], name=f"arrive_{l + 1}", exclusive=True
        )
        if departure is not None:
            disjunction(
                model,
                departure,
                tv.beta[l + 1],
                name=f"depart_{l + 1}",
                require_one=False,
            )
            model.add_ge(
                tv.virtual(l + 2) - tv.virtual(l + 1), 0.0, f"virtual_chain_{l + 1}"
            )
    for l in range(len(tv) - 1):
        reachability_constraints(
            model,
            (tv.tau[l], tv.sigma[l]),
            (tv.tau[l + 1], tv.sigma[l + 1]),
            cfg,
            name=f"reach_{l + 1}",
        )
    return len(model.constraints) - before


def ltf_costs(
    model: MiqpModel, tv: TransitionVariables, cfg: LtfConfig
) -> QuadraticObjective:
    """Lane, reference and safety costs of the transitions

    The lane cost w_g sum(tau_l (1 - b_l) + t_f b_l) of the virtual binaries
    b_l uses the product b_l tau_l reformulated as a continuous variable.

    Returns:
        QuadraticObjective: the cost, not yet added to `model`
    """
    cost = QuadraticObjective()
    for l in range(len(tv)):
        virtual = tv.virtual(l + 2)
        q = bilinear_product(model, virtual, tv.tau[l], name=f"qbi_{l + 1}")
        tv.q.append(q)
        cost.add_linear(tv.tau[l] - q + cfg.t_f * AffineExpr.of(virtual), cfg.w_g)
        cost.add_linear(tv.r[l], -cfg.w_safe)
    sign = -1.0 if cfg.ref_cost_sign == RefCostSign.Corrected else 1.0
    last = min(cfg.goal_lane, len(tv))
    weight = cfg.w_v * cfg.t_f / cfg.goal_lane
    for l in range(1, last):
        d_sigma = tv.sigma[l] - tv.sigma[l - 1]
        d_tau = tv.tau[l] - tv.tau[l - 1]
        cost.add_square(d_sigma + sign * cfg.v_ref * d_tau, weight)
    return cost


def build_ltf(
    model: MiqpModel, table: GapTable, cfg: LtfConfig, lanes: int
) -> Tuple[TransitionVariables, QuadraticObjective]:
    """Emit the long-term formulation for transitions between lanes 1..lanes

    Returns:
        (TransitionVariables, QuadraticObjective): variables and the LTF cost,
        the cost is not yet added to `model`
    """
    tv = create_transition_variables(model, table, cfg, lanes)
    rows = gap_disjunctions(model, tv, table, cfg)
    cost = ltf_costs(model, tv, cfg)
    logger.debug("LTF: %d transitions, %d rows", len(tv), rows)
    return tv, cost
