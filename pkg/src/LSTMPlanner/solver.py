""" solver
    Branch-and-bound for mixed-integer convex QPs. Node relaxations are
    convex QPs solved with OSQP; only variable bounds change between nodes so
    one factorisation is reused for a whole search.
"""

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import osqp
from scipy import sparse
from scipy.optimize import Bounds as ScipyBounds
from scipy.optimize import LinearConstraint as ScipyLinearConstraint
from scipy.optimize import milp

from LSTMPlanner._utils import ModelError, OracleLimitError
from LSTMPlanner.MIQP import MiqpModel, Variable
from LSTMPlanner.PlanConsts import BranchingRule, NodeOrder, SolveStatus

logger = logging.getLogger(__name__)

#: OSQP settings of standalone relaxations and of incumbent candidates.
OSQP_SETTINGS: Dict[str, Any] = {
    "verbose": False,
    "eps_abs": 1e-7,
    "eps_rel": 1e-7,
    "eps_prim_inf": 1e-7,
    "eps_dual_inf": 1e-7,
    "max_iter": 20000,
    "polish": True,
    "polish_refine_iter": 10,
}

#: Looser settings of branch-and-bound node relaxations. Their bounds come
#: from the multipliers, so an early stop only weakens pruning.
NODE_SETTINGS: Dict[str, Any] = dict(
    OSQP_SETTINGS, eps_abs=1e-5, eps_rel=1e-5, max_iter=4000
)


@dataclass
class SolveOptions:
    """Branch-and-bound settings

    Attributes:
        abs_gap (float): absolute optimality gap
        rel_gap (float): gap relative to the incumbent objective
        int_tol (float): distance to {0, 1} accepted as integral
        feas_tol (float): maximum row violation of an accepted incumbent
        node_limit (int): maximum number of processed nodes
        time_limit_ms (float, optional): wall-clock limit, None for no limit
        branching (BranchingRule): variable selection rule
        node_order (NodeOrder): open node selection rule
        dive (bool): round the root relaxation towards an incumbent when
            none is known
        incumbent (Mapping[int, float], optional): binary assignment by
            variable id tried before the search to seed the upper bound
    """

    abs_gap: float = 1e-6
    rel_gap: float = 1e-4
    int_tol: float = 1e-6
    feas_tol: float = 1e-6
    node_limit: int = 100000
    time_limit_ms: Optional[float] = None
    branching: BranchingRule = BranchingRule.MostFractional
    node_order: NodeOrder = NodeOrder.BestBound
    dive: bool = True
    incumbent: Optional[Mapping[int, float]] = None

    def __post_init__(self):
        for name in ("abs_gap", "rel_gap", "int_tol", "feas_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(
                    f"{name} must be positive, got {getattr(self, name)!r}"
                )
        if self.node_limit < 1:
            raise ValueError(f"node_limit must be >= 1, got {self.node_limit!r}")
        if self.time_limit_ms is not None and not self.time_limit_ms > 0:
            raise ValueError(
                f"time_limit_ms must be positive, got {self.time_limit_ms!r}"
            )

    @classmethod
    def from_profile(cls, profile: Mapping) -> "SolveOptions":
        section = profile.get("solver", {})
        return cls(
            abs_gap=section.get("abs_gap", cls.abs_gap),
            rel_gap=section.get("rel_gap", cls.rel_gap),
            int_tol=section.get("int_tol", cls.int_tol),
            node_limit=section.get("node_limit", cls.node_limit),
            time_limit_ms=section.get("time_limit_ms"),
            dive=section.get("dive", cls.dive),
        )

    def gap(self, objective: float) -> float:
        return max(self.abs_gap, self.rel_gap * abs(objective))


@dataclass
class Solution:
    """Result of a solver call

    `values` is indexed by variable id and is None when no feasible point was
    found.
    """

    status: SolveStatus
    objective: float
    values: Optional[np.ndarray]
    node_count: int = 0
    relaxations: int = 0
    wall_time: float = 0.0
    best_bound: float = -math.inf
    bound_history: List[float] = field(default_factory=list, repr=False)

    @property
    def has_solution(self) -> bool:
        return self.values is not None

    def value(self, var: Variable) -> float:
        if self.values is None:
            raise ValueError(
                f"No solution values available (status {self.status.value})"
            )
        return float(self.values[var.id])


@dataclass
class RelaxationResult:
    """Relaxation outcome

    `objective` is evaluated at the returned point, `bound` is a lower bound
    certified by the multipliers and -inf when none is available.
    """

    status: SolveStatus
    objective: float
    x: Optional[np.ndarray]
    accurate: bool = True
    bound: float = -math.inf


class QpRelaxation:
    """Continuous relaxation of a model with replaceable variable bounds

    Args:
        model (MiqpModel): validated model
        settings (dict, optional): OSQP settings overriding `OSQP_SETTINGS`
    """

    def __init__(self, model: MiqpModel, settings: Optional[Mapping] = None):
        m = model.matrices()
        n = len(model.variables)
        self.n = n
        self._P_full = m.P
        self._P = sparse.triu(m.P, format="csc")
        self._q = m.q
        self._constant = m.constant
        self._A = sparse.vstack(
            [m.A, sparse.identity(n, format="csc")], format="csc"
        )
        self._A_rows = m.A
        self._l_rows = m.l
        self._u_rows = m.u
        self._settings = dict(OSQP_SETTINGS, **(settings or {}))
        self._solver = None
        self.solves = 0

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ (self._P_full @ x) + self._q @ x + self._constant)

    def dual_bound(
        self, x: np.ndarray, y: np.ndarray, lower: np.ndarray, upper: np.ndarray
    ) -> float:
        """Lower bound of the relaxation from row multipliers `y`

        The Lagrangian is convex in x, so its linearization at `x` minimized
        over the variable box bounds it from below for any multipliers. Signs
        that would price an infinite row bound are dropped.
        """
        finite_u = np.isfinite(self._u_rows)
        finite_l = np.isfinite(self._l_rows)
        y_up = np.where(finite_u, np.maximum(y, 0.0), 0.0)
        y_down = np.where(finite_l, np.minimum(y, 0.0), 0.0)
        y = y_up + y_down
        u_rows = np.where(finite_u, self._u_rows, 0.0)
        l_rows = np.where(finite_l, self._l_rows, 0.0)
        support = u_rows @ y_up + l_rows @ y_down
        lagrangian = self.objective(x) + y @ (self._A_rows @ x) - support
        g = self._P_full @ x + self._q + self._A_rows.T @ y
        step = np.where(g > 0, lower - x, np.where(g < 0, upper - x, 0.0))
        with np.errstate(invalid="ignore"):
            bound = float(lagrangian + np.sum(g * step))
        return bound if math.isfinite(bound) else -math.inf

    def solve(self, lower: np.ndarray, upper: np.ndarray) -> RelaxationResult:
        """Solve with the given variable bounds (binaries relaxed to them)"""
        if np.any(lower > upper + 1e-12):
            return RelaxationResult(SolveStatus.Infeasible, math.inf, None)
        l = np.concatenate([self._l_rows, lower])
        u = np.concatenate([self._u_rows, upper])
        if self._solver is None:
            self._solver = osqp.OSQP()
            self._solver.setup(
                P=self._P, q=self._q, A=self._A, l=l, u=u, **self._settings
            )
        else:
            self._solver.update(l=l, u=u)
        self.solves += 1
        res = self._solver.solve()
        status = str(res.info.status).lower()
        if status in ("solved", "solved inaccurate") or (
            "maximum iterations" in status and res.x is not None
        ):
            x = np.clip(np.asarray(res.x, dtype=float), lower, upper)
            bound = -math.inf
            if res.y is not None:
                y = np.asarray(res.y, dtype=float)[: len(self._l_rows)]
                if np.all(np.isfinite(y)):
                    bound = self.dual_bound(x, y, lower, upper)
            return RelaxationResult(
                SolveStatus.Optimal, self.objective(x), x, status == "solved", bound
            )
        if "primal infeasible" in status:
            return RelaxationResult(SolveStatus.Infeasible, math.inf, None)
        if "dual infeasible" in status:
            raise ModelError("Relaxation is unbounded, check variable boxes")
        logger.warning("OSQP returned status %r, treating node as infeasible", status)
        return RelaxationResult(SolveStatus.Infeasible, math.inf, None)


def solve_qp_relaxation(
    model: MiqpModel,
    lower: Optional[np.ndarray] = None,
    upper: Optional[np.ndarray] = None,
) -> RelaxationResult:
    """Solve the continuous relaxation, binaries relaxed to their bounds

    Args:
        model (MiqpModel): model to relax
        lower (np.ndarray, optional): replacement variable lower bounds
        upper (np.ndarray, optional): replacement variable upper bounds

    Returns:
        RelaxationResult: optimal point and objective, or an infeasible status
    """
    model.validate()
    lower = model.lower_bounds() if lower is None else np.asarray(lower, dtype=float)
    upper = model.upper_bounds() if upper is None else np.asarray(upper, dtype=float)
    if not model.variables:
        return RelaxationResult(
            SolveStatus.Optimal, model.objective.constant, np.zeros(0)
        )
    return QpRelaxation(model).solve(lower, upper)


class _Search:
    """State of one branch-and-bound run"""

    def __init__(self, model: MiqpModel, opts: SolveOptions):
        self.model = model
        self.opts = opts
        self.relax = QpRelaxation(model, NODE_SETTINGS)
        self.exact = QpRelaxation(model)
        self.lower = model.lower_bounds()
        self.upper = model.upper_bounds()
        self.bins = model.binary_ids
        self.priority = np.array(
            [model.variables[i].priority for i in self.bins], dtype=float
        )
        self.incumbent: Optional[np.ndarray] = None
        self.incumbent_obj = math.inf

    def try_assignment(self, binary_values: np.ndarray, source: str) -> bool:
        """Fix binaries to the rounded values and keep the point if it improves"""
        fixed = np.round(np.clip(binary_values, 0.0, 1.0))
        lower, upper = self.lower[self.bins], self.upper[self.bins]
        if np.any(fixed < lower) or np.any(fixed > upper):
            return False
        lo, up = self.lower.copy(), self.upper.copy()
        lo[self.bins] = fixed
        up[self.bins] = fixed
        res = self.exact.solve(lo, up)
        if res.status != SolveStatus.Optimal:
            return False
        x = res.x.copy()
        x[self.bins] = fixed
        violation = self.model.max_violation(x)
        if violation > self.opts.feas_tol:
            logger.debug("Rejected %s candidate, violation %.2e", source, violation)
            return False
        objective = self.model.evaluate(x)
        if objective < self.incumbent_obj:
            logger.debug("New incumbent %.9g from %s", objective, source)
            self.incumbent, self.incumbent_obj = x, objective
            return True
        return False

    def branching_index(self, x: np.ndarray) -> Optional[int]:
        values = x[self.bins]
        frac = np.abs(values - np.round(values))
        candidates = np.flatnonzero(frac > self.opts.int_tol)
        if not len(candidates):
            return None
        best = min(
            candidates, key=lambda k: (-self.priority[k], -frac[k], self.bins[k])
        )
        return int(self.bins[best])

    def free_index(self, lower: np.ndarray, upper: np.ndarray) -> Optional[int]:
        free = np.flatnonzero(lower[self.bins] < upper[self.bins])
        return int(self.bins[free[0]]) if len(free) else None

    def dive(self, lower: np.ndarray, upper: np.ndarray, x: np.ndarray) -> bool:
        """Round a relaxed point towards an incumbent

        Every round fixes the binaries that are already integral together
        with the least fractional one, then solves again. A fix that makes
        the relaxation infeasible is flipped once before the dive gives up.
        """
        lower, upper = lower.copy(), upper.copy()
        for _ in range(len(self.bins)):
            values = np.clip(x[self.bins], 0.0, 1.0)
            rounded = np.round(values)
            frac = np.abs(values - rounded)
            free = lower[self.bins] < upper[self.bins]
            candidates = np.flatnonzero(free & (frac > self.opts.int_tol))
            if not len(candidates):
                break
            settled = self.bins[free & (frac <= self.opts.int_tol)]
            lower[settled] = upper[settled] = np.round(x[settled])
            k = min(candidates, key=lambda c: (frac[c], self.bins[c]))
            j = int(self.bins[k])
            for value in (rounded[k], 1.0 - rounded[k]):
                lo, up = lower.copy(), upper.copy()
                lo[j] = up[j] = value
                res = self.relax.solve(lo, up)
                if res.status == SolveStatus.Optimal:
                    break
            if res.status != SolveStatus.Optimal:
                logger.debug("Dive stopped at binary %d", j)
                return False
            lower, upper, x = lo, up, res.x
        return self.try_assignment(x[self.bins], "dive")


def _single_relaxation(model: MiqpModel, started: float) -> Solution:
    res = solve_qp_relaxation(model)
    wall = time.perf_counter() - started
    if res.status != SolveStatus.Optimal:
        return Solution(SolveStatus.Infeasible, math.inf, None, 1, 1, wall)
    return Solution(
        SolveStatus.Optimal,
        res.objective,
        res.x,
        1,
        1,
        wall,
        res.objective,
        [res.objective],
    )


def solve_miqp(model: MiqpModel, opts: Optional[SolveOptions] = None) -> Solution:
    """Branch-and-bound with best-bound node order and most-fractional branching

    Args:
        model (MiqpModel): model to solve, validated on entry
        opts (SolveOptions, optional): gaps, limits and warm start

    Returns:
        Solution: `Optimal` within the gap, `Infeasible`, or a limit status
        with the best incumbent found so far
    """
    started = time.perf_counter()
    opts = opts or SolveOptions()
    model.validate()
    if not len(model.binary_ids):
        return _single_relaxation(model, started)

    search = _Search(model, opts)
    if opts.incumbent is not None:
        warm = np.array([opts.incumbent.get(int(i), np.nan) for i in search.bins])
        if np.all(np.isfinite(warm)):
            if not search.try_assignment(warm, "warm start"):
                logger.info("Warm start rejected, solving cold")
        else:
            logger.debug("Warm start incomplete, ignored")

    counter = itertools.count()
    heap = [(-math.inf, next(counter), search.lower.copy(), search.upper.copy())]
    history: List[float] = []
    nodes = 0
    status = None
    deadline = None
    if opts.time_limit_ms is not None:
        deadline = started + opts.time_limit_ms / 1000.0

    while heap:
        bound = heap[0][0]
        if search.incumbent is not None and bound >= search.incumbent_obj - opts.gap(
            search.incumbent_obj
        ):
            break
        if nodes >= opts.node_limit:
            status = SolveStatus.NodeLimit
            break
        if deadline is not None and time.perf_counter() > deadline:
            status = SolveStatus.TimeLimit
            break
        bound, _, lo, up = heapq.heappop(heap)
        history.append(max(bound, history[-1]) if history else bound)
        nodes += 1
        res = search.relax.solve(lo, up)
        if res.status != SolveStatus.Optimal:
            continue
        if not res.accurate:
            logger.debug("Node %d relaxation is inexact, bound %.6g", nodes, res.bound)
        node_bound = max(res.bound, bound)
        if node_bound >= search.incumbent_obj - opts.gap(search.incumbent_obj):
            continue
        if nodes == 1:
            search.try_assignment(res.x[search.bins], "root rounding")
            if opts.dive and search.incumbent is None:
                search.dive(lo, up, res.x)
        j = search.branching_index(res.x)
        if j is None:
            search.try_assignment(res.x[search.bins], f"node {nodes}")
            if node_bound >= search.incumbent_obj - opts.gap(search.incumbent_obj):
                continue
            # integral point with a loose bound: tighten, then branch if still open
            tight = search.exact.solve(lo, up)
            if tight.status != SolveStatus.Optimal:
                continue
            node_bound = max(node_bound, tight.bound)
            if node_bound >= search.incumbent_obj - opts.gap(search.incumbent_obj):
                continue
            j = search.free_index(lo, up)
            if j is None:
                continue
        down_up = up.copy()
        down_up[j] = 0.0
        heapq.heappush(heap, (node_bound, next(counter), lo, down_up))
        up_lo = lo.copy()
        up_lo[j] = 1.0
        heapq.heappush(heap, (node_bound, next(counter), up_lo, up))

    if status is None:
        found = search.incumbent is not None
        status = SolveStatus.Optimal if found else SolveStatus.Infeasible
    open_bounds = [entry[0] for entry in heap]
    best_bound = min(open_bounds + [search.incumbent_obj]) if status in (
        SolveStatus.NodeLimit,
        SolveStatus.TimeLimit,
    ) else search.incumbent_obj
    wall = time.perf_counter() - started
    logger.debug(
        "Solved %r: %s, objective %.9g, %d nodes, %d relaxations, %.1f ms",
        model,
        status.value,
        search.incumbent_obj,
        nodes,
        search.relax.solves + search.exact.solves,
        wall * 1000.0,
    )
    return Solution(
        status,
        search.incumbent_obj,
        search.incumbent,
        nodes,
        search.relax.solves + search.exact.solves,
        wall,
        best_bound,
        history,
    )


def enumerate_oracle(model: MiqpModel, max_binaries: int = 20) -> Solution:
    """Exact optimum by solving the QP of every binary assignment

    Binaries whose bounds already fix them are not enumerated. Among equal
    objectives the first assignment in lexicographic order wins.

    Raises:
        OracleLimitError: more than `max_binaries` free binaries
    """
    started = time.perf_counter()
    model.validate()
    if not len(model.binary_ids):
        return _single_relaxation(model, started)
    lower, upper = model.lower_bounds(), model.upper_bounds()
    free = [int(i) for i in model.binary_ids if lower[i] < upper[i]]
    if len(free) > max_binaries:
        raise OracleLimitError(
            f"Enumeration over {len(free)} binaries exceeds the limit of {max_binaries}"
        )
    relax = QpRelaxation(model)
    best_x, best_obj = None, math.inf
    for assignment in itertools.product((0.0, 1.0), repeat=len(free)):
        lo, up = lower.copy(), upper.copy()
        lo[free] = assignment
        up[free] = assignment
        res = relax.solve(lo, up)
        if res.status != SolveStatus.Optimal:
            continue
        x = res.x.copy()
        x[model.binary_ids] = np.round(x[model.binary_ids])
        objective = model.evaluate(x)
        if objective < best_obj:
            best_x, best_obj = x, objective
    status = SolveStatus.Optimal if best_x is not None else SolveStatus.Infeasible
    count = 2 ** len(free)
    return Solution(
        status,
        best_obj,
        best_x,
        count,
        relax.solves,
        time.perf_counter() - started,
        best_obj,
    )


def solve_with_scipy_milp(model: MiqpModel) -> Solution:
    """Cross-check linear-objective models with scipy's HiGHS MILP

    Raises:
        ModelError: the objective has quadratic terms
    """
    started = time.perf_counter()
    if any(c != 0.0 for c in model.objective.quadratic.values()):
        raise ModelError("scipy milp only handles linear objectives")
    m = model.matrices()
    integrality = np.array([1 if v.is_binary else 0 for v in model.variables])
    constraints = []
    if m.A.shape[0]:
        constraints.append(ScipyLinearConstraint(m.A, m.l, m.u))
    res = milp(
        m.q,
        integrality=integrality,
        bounds=ScipyBounds(model.lower_bounds(), model.upper_bounds()),
        constraints=constraints,
    )
    wall = time.perf_counter() - started
    if res.status == 0:
        objective = float(res.fun) + m.constant
        return Solution(
            SolveStatus.Optimal, objective, np.asarray(res.x), wall_time=wall
        )
    if res.status == 2:
        return Solution(SolveStatus.Infeasible, math.inf, None, wall_time=wall)
    return Solution(SolveStatus.NodeLimit, math.inf, None, wall_time=wall)
