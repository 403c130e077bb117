""" road
    Straight multi-lane road, surrounding vehicles, gap enumeration and the
    polyhedral obstacle-free sets in (t, s) and (t, s, n).
"""

import dataclasses
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from LSTMPlanner._utils import RoadModelError

logger = logging.getLogger(__name__)

#: Default longitudinal distance below which same-lane vehicles are merged.
MERGE_THRESHOLD = 15.0
#: Default number of vehicles kept per lane after preprocessing.
MAX_PER_LANE = 7


def lane_of(n: float, d_lane: float) -> int:
    """Lane index of lateral position `n`, lane 1 centered at n = 0"""
    return int(math.ceil(n / d_lane + 0.5))


@dataclass(frozen=True)
class RoadGeometry:
    """Straight road with `num_lanes` lanes of equal width

    Attributes:
        num_lanes (int): number of lanes L
        lane_width (float): lane width in m
        length (float): road length in m
    """

    num_lanes: int
    lane_width: float = 3.75
    length: float = 2000.0

    def __post_init__(self):
        if self.num_lanes < 1:
            raise RoadModelError(
                f"A road needs at least one lane, got {self.num_lanes}"
            )
        if not self.lane_width > 0:
            raise RoadModelError(f"Lane width must be positive, got {self.lane_width}")
        if not self.length > 0:
            raise RoadModelError(f"Road length must be positive, got {self.length}")

    def centerline(self, lane: int) -> float:
        return (lane - 1) * self.lane_width

    def lane_of(self, n: float) -> int:
        return lane_of(n, self.lane_width)

    def band(self, lane: int) -> Tuple[float, float]:
        """Physical lateral extent of a lane"""
        c = self.centerline(lane)
        return c - self.lane_width / 2, c + self.lane_width / 2

    @property
    def lateral_box(self) -> Tuple[float, float]:
        return -self.lane_width / 2, (self.num_lanes - 0.5) * self.lane_width


@dataclass(frozen=True)
class EgoState:
    """Point-mass Frenet state [s, n, v_s, v_n]"""

    s: float
    n: float
    v_s: float
    v_n: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.s, self.n, self.v_s, self.v_n)):
            raise ValueError(f"Ego state must be finite, got {self}")
        if self.s < 0:
            raise ValueError(f"Ego position must be nonnegative, got s={self.s}")

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.n, self.v_s, self.v_n], dtype=float)

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "EgoState":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


@dataclass(frozen=True)
class SurroundingVehicle:
    """Surrounding vehicle with interval bounds on position and velocity

    `s_hat` is the front of the vehicle; its nominal occupied stretch is
    [s_hat - length, s_hat].
    """

    id: int
    lane: int
    s_hat: float
    v_hat: float
    length: float
    s_lower: float
    s_upper: float
    v_lower: float
    v_upper: float
    follow_gap: float
    changing_lane: bool = False
    target_lane: Optional[int] = None

    def __post_init__(self):
        if not self.s_lower <= self.s_hat <= self.s_upper:
            raise RoadModelError(
                f"SV {self.id}: position bounds [{self.s_lower}, {self.s_upper}] "
                f"do not contain {self.s_hat}"
            )
        if not self.v_lower <= self.v_hat <= self.v_upper:
            raise RoadModelError(
                f"SV {self.id}: velocity bounds [{self.v_lower}, {self.v_upper}] "
                f"do not contain {self.v_hat}"
            )

    @classmethod
    def nominal(
        cls,
        id: int,
        lane: int,
        s: float,
        v: float,
        length: float = 5.0,
        dv_lower: float = 0.0,
        dv_upper: float = 0.0,
        follow_gap: Optional[float] = None,
        margin: float = 0.0,
        changing_lane: bool = False,
        target_lane: Optional[int] = None,
    ) -> "SurroundingVehicle":
        """Bounds from a measured front position and speed

        Args:
            id (int): vehicle id
            lane (int): lane index
            s (float): front position
            v (float): speed
            length (float, optional): vehicle length
            dv_lower (float, optional): speed uncertainty below `v`
            dv_upper (float, optional): speed uncertainty above `v`
            follow_gap (float, optional): following distance, defaults to
                the merge threshold plus the vehicle length
            margin (float, optional): longitudinal inflation of both ends
        """
        if follow_gap is None:
            follow_gap = MERGE_THRESHOLD + length
        return cls(
            id=id,
            lane=lane,
            s_hat=s,
            v_hat=v,
            length=length,
            s_lower=s - length - margin,
            s_upper=s + margin,
            v_lower=max(v - dv_lower, 0.0),
            v_upper=v + dv_upper,
            follow_gap=follow_gap,
            changing_lane=changing_lane,
            target_lane=target_lane,
        )

    def inflated(
        self, margin: float = 0.0, dv_lower: float = 0.0, dv_upper: float = 0.0
    ) -> "SurroundingVehicle":
        """Copy with position bounds widened by `margin` and velocity bounds by
        the given spreads
        """
        return dataclasses.replace(
            self,
            s_lower=self.s_lower - margin,
            s_upper=self.s_upper + margin,
            v_lower=max(self.v_lower - dv_lower, 0.0),
            v_upper=self.v_upper + dv_upper,
        )

    def occupied(self, t: float) -> Tuple[float, float]:
        """Interval of the occupied set O_i at time t"""
        return self.s_lower + t * self.v_lower, self.s_upper + t * self.v_upper

    def occupies(self, t: float, s: float) -> bool:
        lo, hi = self.occupied(t)
        return lo < s < hi


@dataclass(frozen=True)
class HalfPlaneSet:
    """Intersection of half-planes `a_t t + a_s s <= b`, optionally times a
    lateral interval `[n_lo, n_hi]`
    """

    rows: Tuple[Tuple[float, float, float], ...] = ()
    lateral: Optional[Tuple[float, float]] = None

    @classmethod
    def blocked(cls) -> "HalfPlaneSet":
        """Set without any member"""
        return cls(((0.0, 0.0, -1.0),))

    @property
    def is_blocked(self) -> bool:
        return any(a_t == 0.0 and a_s == 0.0 and b < 0 for a_t, a_s, b in self.rows)

    def contains(
        self, t: float, s: float, n: Optional[float] = None, tol: float = 1e-9
    ) -> bool:
        for a_t, a_s, b in self.rows:
            if a_t * t + a_s * s > b + tol:
                return False
        if n is not None and self.lateral is not None:
            lo, hi = self.lateral
            if not lo - tol <= n <= hi + tol:
                return False
        return True

    def intersect(self, other: "HalfPlaneSet") -> "HalfPlaneSet":
        if self.lateral is None:
            lateral = other.lateral
        elif other.lateral is None:
            lateral = self.lateral
        else:
            lateral = (
                max(self.lateral[0], other.lateral[0]),
                min(self.lateral[1], other.lateral[1]),
            )
        return HalfPlaneSet(self.rows + other.rows, lateral)

    def with_lateral(self, interval: Tuple[float, float]) -> "HalfPlaneSet":
        return HalfPlaneSet(self.rows, (float(interval[0]), float(interval[1])))

    def as_matrix(self) -> Tuple[np.ndarray, np.ndarray]:
        """(A, b) over the (t, s) axes"""
        if not self.rows:
            return np.zeros((0, 2)), np.zeros(0)
        data = np.array(self.rows, dtype=float)
        return data[:, :2], data[:, 2]

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class Gap:
    """Free stretch of a lane behind `leader` and ahead of `follower`

    Both refer to positions in `GapTable.vehicles`; `leader` is None for the
    frontmost gap of a lane and `follower` is None for the rearmost one.
    """

    index: int
    lane: int
    leader: Optional[int]
    follower: Optional[int]

    @property
    def is_frontmost(self) -> bool:
        return self.leader is None


class GapTable:
    """Vehicles and gaps enumerated lane by lane, rear to front

    Args:
        vehicles (list): vehicles sorted by (lane, s_hat)
        road (RoadGeometry): road the vehicles drive on
        blocked_lanes (Iterable[int], optional): lanes whose gaps are closed
    """

    def __init__(
        self,
        vehicles: Sequence[SurroundingVehicle],
        road: RoadGeometry,
        blocked_lanes: Iterable[int] = (),
    ):
        self.vehicles: Tuple[SurroundingVehicle, ...] = tuple(vehicles)
        self.road = road
        self.blocked_lanes: FrozenSet[int] = frozenset(blocked_lanes)
        self._on_lane: Dict[int, List[int]] = defaultdict(list)
        for i, sv in enumerate(self.vehicles):
            self._on_lane[sv.lane].append(i)
        gaps = []
        for lane in range(1, road.num_lanes + 1):
            members = self._on_lane.get(lane, [])
            follower = None
            for i in members:
                gaps.append(Gap(len(gaps), lane, i, follower))
                follower = i
            gaps.append(Gap(len(gaps), lane, None, follower))
        self.gaps: Tuple[Gap, ...] = tuple(gaps)

    def __repr__(self):
        return f"GapTable({len(self.vehicles)} vehicles, {len(self.gaps)} gaps)"

    def __len__(self):
        return len(self.gaps)

    @property
    def l_veh(self) -> Dict[int, int]:
        """Lane of every vehicle index"""
        return {i: sv.lane for i, sv in enumerate(self.vehicles)}

    @property
    def l_gap(self) -> Dict[int, int]:
        """Lane of every gap index"""
        return {g.index: g.lane for g in self.gaps}

    @property
    def M_lane(self) -> Dict[int, int]:
        """Number of vehicles per lane"""
        return {
            lane: len(self._on_lane.get(lane, []))
            for lane in range(1, self.road.num_lanes + 1)
        }

    def vehicles_on(self, lane: int) -> List[int]:
        return list(self._on_lane.get(lane, []))

    def gaps_on(self, lane: int) -> List[Gap]:
        return [g for g in self.gaps if g.lane == lane]

    def leaders(self, gap: Gap) -> List[int]:
        """Vehicle indices ahead of a gap, nearest first"""
        if gap.leader is None:
            return []
        members = self._on_lane[gap.lane]
        return members[members.index(gap.leader) :]

    def gap_at(self, lane: int, s: float) -> Gap:
        """Gap of `lane` containing position `s`; vehicles whose front is at
        or behind `s` count as followers
        """
        for gap in self.gaps_on(lane):
            if gap.leader is None or self.vehicles[gap.leader].s_upper > s:
                return gap
        raise RoadModelError(f"No gap on lane {lane}")


def blocked_lanes(
    traffic: Iterable[SurroundingVehicle], protected_lane: Optional[int] = None
) -> FrozenSet[int]:
    """Lanes closed by vehicles that are changing lanes

    Both the source and the target lane of a lane-changing vehicle are
    closed for the whole horizon, except `protected_lane`.
    """
    lanes = set()
    for sv in traffic:
        if sv.changing_lane:
            lanes.add(sv.lane)
            if sv.target_lane is not None:
                lanes.add(sv.target_lane)
    lanes.discard(protected_lane)
    return frozenset(lanes)


def enumerate_gaps(
    traffic: Iterable[SurroundingVehicle],
    road: RoadGeometry,
    protected_lane: Optional[int] = None,
) -> GapTable:
    """Enumerate gaps lane by lane, rear to front, plus a frontmost gap

    Args:
        traffic (Iterable[SurroundingVehicle]): preprocessed vehicles
        road (RoadGeometry): road geometry
        protected_lane (int, optional): lane never closed by lane-changing
            vehicles, usually the ego lane

    Returns:
        GapTable: vehicles and gaps

    Raises:
        RoadModelError: vehicle outside the road or two vehicles at the
            same position on one lane
    """
    vehicles = sorted(traffic, key=lambda sv: (sv.lane, sv.s_hat, sv.id))
    for sv in vehicles:
        if not 1 <= sv.lane <= road.num_lanes:
            raise RoadModelError(
                f"SV {sv.id} on lane {sv.lane} outside road with {road.num_lanes} lanes"
            )
    for a, b in zip(vehicles, vehicles[1:]):
        if a.lane == b.lane and a.s_hat == b.s_hat:
            raise RoadModelError(
                f"SVs {a.id} and {b.id} share position {a.s_hat} on lane {a.lane}"
            )
    return GapTable(vehicles, road, blocked_lanes(vehicles, protected_lane))


def rear_free_set(sv: SurroundingVehicle) -> HalfPlaneSet:
    """Region ahead of a vehicle: s >= s_upper + t v_upper"""
    return HalfPlaneSet(((sv.v_upper, -1.0, -sv.s_upper),))


def front_free_set(gap: Gap, table: GapTable) -> HalfPlaneSet:
    """Region behind every vehicle ahead of a gap

    Each vehicle k ahead contributes s <= s_lower_k + t v_lower_k minus the
    following distances of all vehicles between the gap and k, since a slow
    vehicle further ahead makes its followers brake as well.
    """
    if gap.lane in table.blocked_lanes:
        return HalfPlaneSet.blocked()
    rows = []
    offset = 0.0
    for k in table.leaders(gap):
        sv = table.vehicles[k]
        rows.append((-sv.v_lower, 1.0, sv.s_lower - offset))
        offset += sv.follow_gap
    return HalfPlaneSet(tuple(rows))


def lateral_free_set(
    lane: int, road: RoadGeometry, margin: float = 0.0
) -> Tuple[float, float]:
    """Lateral interval N_l of a lane, shrunk by `margin` on both sides"""
    if not 1 <= lane <= road.num_lanes:
        raise RoadModelError(f"Lane {lane} outside road with {road.num_lanes} lanes")
    if not 0.0 <= margin <= road.lane_width / 2:
        raise RoadModelError(
            f"Margin {margin} must lie in [0, {road.lane_width / 2}]"
        )
    c = road.centerline(lane)
    return c - road.lane_width / 2 + margin, c + road.lane_width / 2 - margin


def lane_keep_free_set(
    gap: Gap, table: GapTable, margin: float = 0.0
) -> HalfPlaneSet:
    """F+ of a gap: behind its leaders and inside its lane"""
    return front_free_set(gap, table).with_lateral(
        lateral_free_set(gap.lane, table.road, margin)
    )


def lane_change_free_set(
    gap: Gap, gap_next: Gap, table: GapTable, margin: float = 0.0
) -> HalfPlaneSet:
    """Free set while moving from `gap` into `gap_next` on the next lane

    Behind the leaders of both gaps, ahead of the closest rear vehicle of
    `gap_next`, laterally anywhere between the two lanes.

    Raises:
        RoadModelError: `gap_next` is not on the lane after `gap`
    """
    if gap_next.lane != gap.lane + 1:
        raise RoadModelError(
            f"Gap {gap_next.index} on lane {gap_next.lane} does not follow "
            f"gap {gap.index} on lane {gap.lane}"
        )
    free = front_free_set(gap, table).intersect(front_free_set(gap_next, table))
    if gap_next.follower is not None:
        free = free.intersect(rear_free_set(table.vehicles[gap_next.follower]))
    lo, _ = lateral_free_set(gap.lane, table.road, margin)
    _, hi = lateral_free_set(gap_next.lane, table.road, margin)
    return free.with_lateral((lo, hi))


def arrival_free_set(gap: Gap, table: GapTable) -> HalfPlaneSet:
    """Region of a gap between its leaders and its closest rear vehicle"""
    free = front_free_set(gap, table)
    if gap.follower is not None:
        free = free.intersect(rear_free_set(table.vehicles[gap.follower]))
    return free


def _merge(group: List[SurroundingVehicle]) -> SurroundingVehicle:
    if len(group) == 1:
        return group[0]
    front = max(sv.s_hat for sv in group)
    rear = min(sv.s_hat - sv.length for sv in group)
    return SurroundingVehicle(
        id=min(sv.id for sv in group),
        lane=group[0].lane,
        s_hat=front,
        v_hat=min(sv.v_hat for sv in group),
        length=front - rear,
        s_lower=min(sv.s_lower for sv in group),
        s_upper=max(sv.s_upper for sv in group),
        v_lower=min(sv.v_lower for sv in group),
        v_upper=max(sv.v_upper for sv in group),
        follow_gap=max(sv.follow_gap for sv in group),
        changing_lane=any(sv.changing_lane for sv in group),
        target_lane=next((sv.target_lane for sv in group if sv.target_lane), None),
    )


def preprocess_traffic(
    raw: Iterable[SurroundingVehicle],
    ego: EgoState,
    threshold: float = MERGE_THRESHOLD,
    max_per_lane: int = MAX_PER_LANE,
) -> List[SurroundingVehicle]:
    """Merge close same-lane vehicles and keep the nearest ones per lane

    Vehicles whose longitudinal clearance is below `threshold` become one
    vehicle covering the union of their occupied intervals, with the minimum
    lower and maximum upper velocity bound.

    Args:
        raw (Iterable[SurroundingVehicle]): vehicles as observed
        ego (EgoState): ego state, distances are measured from `ego.s`
        threshold (float, optional): merge distance in m
        max_per_lane (int, optional): vehicles kept per lane

    Returns:
        List[SurroundingVehicle]: processed vehicles sorted by (lane, s_hat)
    """
    per_lane: Dict[int, List[SurroundingVehicle]] = defaultdict(list)
    for sv in raw:
        per_lane[sv.lane].append(sv)
    result = []
    for lane in sorted(per_lane):
        ordered = sorted(per_lane[lane], key=lambda sv: (sv.s_hat, sv.id))
        merged = []
        group = [ordered[0]]
        upper = ordered[0].s_upper
        for sv in ordered[1:]:
            if sv.s_lower - upper < threshold:
                group.append(sv)
            else:
                merged.append(_merge(group))
                group = [sv]
            upper = max(upper, sv.s_upper)
        merged.append(_merge(group))
        if len(merged) > 1:
            logger.debug(
                "Lane %d: %d vehicles merged into %d", lane, len(ordered), len(merged)
            )
        nearest = sorted(
            merged,
            key=lambda sv: (abs(0.5 * (sv.s_lower + sv.s_upper) - ego.s), sv.id),
        )[:max_per_lane]
        result.extend(sorted(nearest, key=lambda sv: sv.s_hat))
    return result


class RelativeFrame:
    """Planning frame with the ego at s = 0 on lane 1, lanes counted
    towards the goal lane

    When the goal lies at lower lane indices the lateral axis is mirrored so
    that a lane change towards the goal always increases n.

    Args:
        road (RoadGeometry): absolute road
        ego (EgoState): absolute ego state
        goal_lane (int): absolute goal lane
        max_lanes (int): lanes considered, including the ego lane
    """

    def __init__(
        self, road: RoadGeometry, ego: EgoState, goal_lane: int, max_lanes: int
    ):
        if not 1 <= goal_lane <= road.num_lanes:
            raise RoadModelError(f"Goal lane {goal_lane} outside the road")
        self.road = road
        self.origin = ego.s
        self.base_lane = road.lane_of(ego.n)
        if not 1 <= self.base_lane <= road.num_lanes:
            raise RoadModelError(f"Ego at n={ego.n} is not on the road")
        self.direction = 1 if goal_lane >= self.base_lane else -1
        self.goal = 1 + abs(goal_lane - self.base_lane)
        if self.direction > 0:
            available = road.num_lanes - self.base_lane + 1
        else:
            available = self.base_lane
        self.num_lanes = max(1, min(max_lanes, self.goal, available))
        self.relative_road = RoadGeometry(self.num_lanes, road.lane_width, road.length)

    def __repr__(self):
        return (
            f"RelativeFrame(base lane {self.base_lane}, direction {self.direction:+d}, "
            f"{self.num_lanes} lanes, goal {self.goal})"
        )

    def to_relative_lane(self, lane: int) -> int:
        return 1 + self.direction * (lane - self.base_lane)

    def to_absolute_lane(self, lane: int) -> int:
        return self.base_lane + self.direction * (lane - 1)

    def ego(self, ego: EgoState) -> EgoState:
        c = self.road.centerline(self.base_lane)
        return EgoState(
            0.0 if ego.s == self.origin else ego.s - self.origin,
            self.direction * (ego.n - c),
            ego.v_s,
            self.direction * ego.v_n,
        )

    def states_to_absolute(self, states: np.ndarray) -> np.ndarray:
        """Map an array of relative [s, n, v_s, v_n] rows back"""
        out = np.array(states, dtype=float, copy=True)
        out[:, 0] += self.origin
        out[:, 1] = self.road.centerline(self.base_lane) + self.direction * out[:, 1]
        out[:, 3] *= self.direction
        return out

    def traffic(
        self, traffic: Iterable[SurroundingVehicle]
    ) -> List[SurroundingVehicle]:
        """Vehicles on the considered lanes, shifted into the frame"""
        result = []
        for sv in traffic:
            lane = self.to_relative_lane(sv.lane)
            if not 1 <= lane <= self.num_lanes:
                continue
            target = None
            if sv.target_lane is not None:
                target = self.to_relative_lane(sv.target_lane)
            result.append(
                dataclasses.replace(
                    sv,
                    lane=lane,
                    s_hat=sv.s_hat - self.origin,
                    s_lower=sv.s_lower - self.origin,
                    s_upper=sv.s_upper - self.origin,
                    target_lane=target,
                )
            )
        return result


@dataclass(frozen=True)
class PlanningProblem:
    """Everything a planner needs for one cycle, in absolute coordinates

    Attributes:
        road (RoadGeometry): road geometry
        ego (EgoState): current ego state
        traffic (tuple): observed surrounding vehicles
        goal_lane (int): goal lane index
        v_ref (float): reference velocity in m/s
    """

    road: RoadGeometry
    ego: EgoState
    traffic: Tuple[SurroundingVehicle, ...]
    goal_lane: int
    v_ref: float

    def __post_init__(self):
        object.__setattr__(self, "traffic", tuple(self.traffic))
        if not 1 <= self.goal_lane <= self.road.num_lanes:
            raise RoadModelError(
                f"Goal lane {self.goal_lane} outside road "
                f"with {self.road.num_lanes} lanes"
            )
        if not self.v_ref > 0:
            raise ValueError(f"Reference velocity must be positive, got {self.v_ref}")

    @property
    def ego_lane(self) -> int:
        return self.road.lane_of(self.ego.n)
