""" render
    SVG figures of plans and traces: a top-down lane snapshot and the
    space-time view with occupied sets, stage regions and transitions.
"""

import logging
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Ellipse, Rectangle  # noqa: E402

from LSTMPlanner.LSTMP import PlanResult  # noqa: E402
from LSTMPlanner.PlanConsts import SolveStatus  # noqa: E402
from LSTMPlanner.road import RoadGeometry, SurroundingVehicle  # noqa: E402
from LSTMPlanner.sim import SvState, Trace  # noqa: E402

logger = logging.getLogger(__name__)

#: Fixed salt so that SVG ids, and with them the files, are reproducible.
matplotlib.rcParams["svg.hashsalt"] = "lstmp"

STYLES = ("snapshot", "st")
_STAGE_COLORS = ("tab:blue", "tab:orange", "tab:green")


def _as_vehicles(
    vehicles: Iterable[Union[SurroundingVehicle, SvState]]
) -> Sequence[SurroundingVehicle]:
    return [sv.observed() if isinstance(sv, SvState) else sv for sv in vehicles]


def _draw_lanes(ax, road: RoadGeometry, s_range):
    lo, hi = s_range
    for lane in range(road.num_lanes + 1):
        n = (lane - 0.5) * road.lane_width
        style = "-" if lane in (0, road.num_lanes) else "--"
        ax.plot([lo, hi], [n, n], style, color="0.4", linewidth=0.8)
    ax.set_xlim(lo, hi)
    ax.set_ylim(-road.lane_width / 2, (road.num_lanes - 0.5) * road.lane_width)
    ax.set_xlabel("s [m]")
    ax.set_ylabel("n [m]")


def _snapshot(ax, road, plan: Optional[PlanResult], vehicles, s_range):
    _draw_lanes(ax, road, s_range)
    for sv in vehicles:
        c = road.centerline(sv.lane)
        ax.add_patch(
            Rectangle(
                (sv.s_hat - sv.length, c - road.lane_width / 4),
                sv.length,
                road.lane_width / 2,
                facecolor="0.6",
                edgecolor="0.2",
            )
        )
    if plan is None:
        return
    ax.plot(plan.states[:, 0], plan.states[:, 1], "-", color="k", linewidth=1.2)
    for tr in plan.transitions:
        if not tr.virtual:
            ax.plot(
                tr.sigma, road.centerline(tr.lane), "o", color="tab:green", markersize=4
            )


def _stage_spans(plan: PlanResult):
    """Time spans of lane keeping, lane change and the next lane"""
    t = np.arange(len(plan.states)) * plan.t_d
    lanes = plan.lane_indices
    on_next = np.flatnonzero(lanes != lanes[0])
    moving = np.flatnonzero(np.abs(plan.states[:, 3]) > 1e-6)
    if not len(moving):
        return [(t[0], t[-1])]
    start = t[max(moving[0] - 1, 0)]
    switch = t[on_next[0]] if len(on_next) else t[-1]
    end = t[min(moving[-1] + 1, len(t) - 1)]
    return [(t[0], start), (start, switch), (switch, end)]


def _space_time(
    ax, road, plan: Optional[PlanResult], vehicles, v_ref: float, horizon: float
):
    ax.set_xlabel("t [s]")
    ax.set_ylabel("s [m]")
    t = np.array([0.0, horizon])
    for sv in vehicles:
        lower = sv.s_lower + t * sv.v_lower
        upper = sv.s_upper + t * sv.v_upper
        ax.fill_between(t, lower, upper, color="tab:red", alpha=0.3, linewidth=0)
    ax.set_xlim(0.0, horizon)
    if plan is None:
        return
    for (a, b), color in zip(_stage_spans(plan), _STAGE_COLORS):
        if b > a:
            ax.axvspan(a, b, color=color, alpha=0.15, linewidth=0)
    times = np.arange(len(plan.states)) * plan.t_d
    ax.plot(times, plan.states[:, 0], "-", color="k", linewidth=1.2)
    for tr in plan.transitions:
        if tr.virtual:
            continue
        ax.plot(tr.tau, tr.sigma, "o", color="tab:green", markersize=4)
        ax.add_patch(
            Ellipse(
                (tr.tau, tr.sigma),
                2 * tr.r / v_ref,
                2 * tr.r,
                fill=False,
                edgecolor="tab:green",
            )
        )


def render_svg(
    obj: Optional[Union[PlanResult, Trace]],
    path: Union[str, Path],
    style: str = "snapshot",
    road: Optional[RoadGeometry] = None,
    vehicles: Optional[Iterable[Union[SurroundingVehicle, SvState]]] = None,
    step: int = -1,
    v_ref: float = 25.0,
) -> Path:
    """Write a plan or one trace step as SVG

    Args:
        obj (PlanResult, Trace, optional): what to draw, None draws the
            lanes only
        path (str, Path): output file
        style (str, optional): "snapshot" (top-down lanes) or "st"
            (position over time)
        road (RoadGeometry, optional): defaults to the trace scenario's road
        vehicles (Iterable, optional): vehicles to draw, defaults to those
            stored with the plan or trace step
        step (int, optional): trace step to draw
        v_ref (float, optional): time scale of the transition circles

    Returns:
        Path: the written file

    Raises:
        ValueError: unknown style or no road to draw on
    """
    if style not in STYLES:
        raise ValueError(f"Unknown style {style!r}, expected one of {STYLES}")
    plan = obj
    if isinstance(obj, Trace):
        if obj.scenario is None or not len(obj):
            raise ValueError("Trace has no scenario or no steps to draw")
        road = road or obj.scenario.road
        v_ref = obj.scenario.v_ref
        record = obj[step]
        if vehicles is None:
            vehicles = record.vehicles
        plan = PlanResult(
            planner=obj.planner,
            status=SolveStatus(record.status),
            objective=record.objective,
            t_d=obj.t_d,
            states=record.plan,
            controls=np.zeros((max(len(record.plan) - 1, 0), 2)),
            lam=np.zeros(len(record.plan)),
            lane_width=road.lane_width,
        )
    if road is None:
        raise ValueError("A road is needed to render")
    if vehicles is None:
        vehicles = plan.traffic if plan is not None else ()
    vehicles = _as_vehicles(vehicles)

    fig = Figure(figsize=(8, 3) if style == "snapshot" else (6, 4))
    ax = fig.add_subplot(1, 1, 1)
    if style == "snapshot":
        if plan is not None:
            s0 = float(plan.states[0, 0])
            s_range = (s0 - 50.0, max(float(plan.states[-1, 0]), s0) + 100.0)
        else:
            s_range = (0.0, road.length)
        _snapshot(ax, road, plan, vehicles, s_range)
    else:
        horizon = 10.0
        if plan is not None:
            horizon = max(
                [plan.t_d * (len(plan.states) - 1)]
                + [tr.tau for tr in plan.transitions if not tr.virtual]
            )
            origin = float(plan.states[0, 0])
            vehicles = [sv for sv in vehicles if sv.s_upper > origin - 50.0]
        _space_time(ax, road, plan, vehicles, v_ref, max(horizon, 1e-3))
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    logger.debug("Wrote %s figure to %s", style, path)
    return path
