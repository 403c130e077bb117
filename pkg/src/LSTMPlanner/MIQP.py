""" MIQP
    Modeling layer for mixed-integer convex quadratic programs: variables,
    affine expressions, linear rows, a convex quadratic objective and the
    big-M reformulations used to express logic over binary variables.
"""

import dataclasses
import logging
import math
import numbers
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from LSTMPlanner._utils import ModelError, NonConvexError
from LSTMPlanner.PlanConsts import Sense, VarKind

logger = logging.getLogger(__name__)

_INF = math.inf


class _Arithmetic:
    """Operator support shared by variables and affine expressions"""

    def _expr(self) -> "AffineExpr":
        raise NotImplementedError

    def __add__(self, other):
        return self._expr()._combine(other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        return self._expr()._combine(other, -1.0)

    def __rsub__(self, other):
        return AffineExpr.of(other)._combine(self, -1.0)

    def __neg__(self):
        return self._expr() * -1.0

    def __mul__(self, factor):
        if not isinstance(factor, numbers.Real):
            raise TypeError(
                "Affine expressions can only be scaled by real numbers, "
                f"got {type(factor).__name__}"
            )
        expr = self._expr()
        return AffineExpr(
            {i: c * float(factor) for i, c in expr.terms.items()},
            expr.constant * float(factor),
        )

    __rmul__ = __mul__

    def __truediv__(self, factor):
        return self * (1.0 / factor)


class AffineExpr(_Arithmetic):
    """Sum of coefficient * variable terms plus a constant

    Args:
        terms (Mapping[int, float], optional): coefficient per variable id
        constant (float, optional): constant offset, defaults to 0
    """

    __slots__ = ("terms", "constant")

    def __init__(self, terms: Optional[Mapping[int, float]] = None, constant=0.0):
        self.terms: Dict[int, float] = {}
        for i, c in (terms or {}).items():
            if c != 0.0:
                self.terms[int(i)] = self.terms.get(int(i), 0.0) + float(c)
        self.constant = float(constant)

    @classmethod
    def of(cls, value) -> "AffineExpr":
        """Coerce a variable, number or expression into an expression"""
        if isinstance(value, AffineExpr):
            return value
        if isinstance(value, Variable):
            return cls({value.id: 1.0})
        if isinstance(value, numbers.Real):
            return cls(constant=float(value))
        raise TypeError(f"Cannot build an affine expression from {value!r}")

    def _expr(self) -> "AffineExpr":
        return self

    def _combine(self, other, sign: float) -> "AffineExpr":
        other = AffineExpr.of(other)
        terms = dict(self.terms)
        for i, c in other.terms.items():
            terms[i] = terms.get(i, 0.0) + sign * c
        return AffineExpr(terms, self.constant + sign * other.constant)

    @property
    def is_constant(self) -> bool:
        return not self.terms

    def evaluate(self, values: Sequence[float]) -> float:
        """Value of the expression at a point indexed by variable id"""
        return self.constant + sum(c * values[i] for i, c in self.terms.items())

    def __repr__(self):
        parts = [f"{c:+g}*x{i}" for i, c in sorted(self.terms.items())]
        return f"AffineExpr({' '.join(parts) or '0'} {self.constant:+g})"


@dataclass(frozen=True, eq=False)
class Variable(_Arithmetic):
    """Model variable, identified by its position in the model

    Attributes:
        id (int): index into the model's variable list
        kind (VarKind): continuous or binary
        lower (float): lower bound
        upper (float): upper bound
        name (str): human readable name
        priority (int): branching priority, larger values are branched first
    """

    id: int
    kind: VarKind
    lower: float
    upper: float
    name: str = ""
    priority: int = 0

    def _expr(self) -> AffineExpr:
        return AffineExpr({self.id: 1.0})

    @property
    def is_binary(self) -> bool:
        return self.kind == VarKind.Binary


Expr = Union[AffineExpr, Variable, float, int]


@dataclass(frozen=True)
class LinearConstraint:
    """Row `sum(coefficients) <sense> rhs`"""

    coefficients: Tuple[Tuple[int, float], ...]
    sense: Sense
    rhs: float
    name: str = ""

    def lhs(self, values: Sequence[float]) -> float:
        return sum(c * values[i] for i, c in self.coefficients)

    def violation(self, values: Sequence[float]) -> float:
        """Amount by which the row is violated at `values`, 0 if satisfied"""
        lhs = self.lhs(values)
        if self.sense == Sense.LessEqual:
            return max(0.0, lhs - self.rhs)
        if self.sense == Sense.GreaterEqual:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class Bounds:
    """Big-M pair enclosing the range of an affine expression"""

    lower: float
    upper: float

    @property
    def finite(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    def __post_init__(self):
        if self.lower > self.upper:
            raise ModelError(
                f"Invalid bounds, lower {self.lower} exceeds upper {self.upper}"
            )


class QuadraticObjective:
    """Objective `sum c_ij x_i x_j + sum l_i x_i + constant` with i <= j"""

    def __init__(self):
        self.quadratic: Dict[Tuple[int, int], float] = {}
        self.linear: Dict[int, float] = {}
        self.constant = 0.0

    def add_quadratic(self, i: int, j: int, value: float):
        key = (min(i, j), max(i, j))
        self.quadratic[key] = self.quadratic.get(key, 0.0) + float(value)

    def add_linear(self, expr: Expr, weight: float = 1.0):
        expr = AffineExpr.of(expr)
        for i, c in expr.terms.items():
            self.linear[i] = self.linear.get(i, 0.0) + weight * c
        self.constant += weight * expr.constant

    def add_square(self, expr: Expr, weight: float = 1.0):
        """Add `weight * expr**2`, expanded into monomials"""
        if weight < 0:
            raise NonConvexError(f"Negative weight {weight} on a squared term")
        expr = AffineExpr.of(expr)
        items = sorted(expr.terms.items())
        for a, (i, ci) in enumerate(items):
            self.add_quadratic(i, i, weight * ci * ci)
            for j, cj in items[a + 1 :]:
                self.add_quadratic(i, j, 2.0 * weight * ci * cj)
            self.linear[i] = self.linear.get(i, 0.0) + 2.0 * weight * ci * expr.constant
        self.constant += weight * expr.constant**2

    def __iadd__(self, other: "QuadraticObjective"):
        for key, value in other.quadratic.items():
            self.add_quadratic(key[0], key[1], value)
        for i, value in other.linear.items():
            self.linear[i] = self.linear.get(i, 0.0) + value
        self.constant += other.constant
        return self

    def evaluate(self, values: Sequence[float]) -> float:
        total = self.constant
        total += sum(c * values[i] for i, c in self.linear.items())
        total += sum(c * values[i] * values[j] for (i, j), c in self.quadratic.items())
        return total

    def __repr__(self):
        return (
            f"QuadraticObjective({len(self.quadratic)} quadratic, "
            f"{len(self.linear)} linear terms)"
        )


@dataclass(frozen=True)
class ModelMatrices:
    """Solver-ready arrays: min 1/2 x'Px + q'x + constant s.t. l <= Ax <= u"""

    P: sparse.csc_matrix
    q: np.ndarray
    A: sparse.csc_matrix
    l: np.ndarray
    u: np.ndarray
    constant: float


class MiqpModel:
    """Mixed-integer convex quadratic program under construction

    Args:
        name (str, optional): name used in logs and exports
    """

    def __init__(self, name: str = "model"):
        self.name = name
        self.variables: List[Variable] = []
        self.constraints: List[LinearConstraint] = []
        self.objective = QuadraticObjective()
        self._frozen = False
        self._matrices: Optional[ModelMatrices] = None

    def __repr__(self):
        return (
            f"MiqpModel({self.name!r}, {self.num_continuous} continuous, "
            f"{self.num_binaries} binary, {len(self.constraints)} rows)"
        )

    def _check_open(self):
        if self._frozen:
            raise ModelError(f"Model {self.name!r} is frozen")
        self._matrices = None

    @property
    def frozen(self) -> bool:
        return self._frozen

    def freeze(self) -> "MiqpModel":
        """Mark the model complete; further modification raises ModelError"""
        self._frozen = True
        return self

    def add_variable(
        self,
        name: str = "",
        kind: VarKind = VarKind.Continuous,
        lower: float = -_INF,
        upper: float = _INF,
        priority: int = 0,
    ) -> Variable:
        self._check_open()
        lower, upper = float(lower), float(upper)
        if kind == VarKind.Binary and (lower < 0.0 or upper > 1.0):
            raise ModelError(f"Binary {name!r} bounds [{lower}, {upper}] exceed [0, 1]")
        if lower > upper:
            raise ModelError(f"Variable {name!r} has lower {lower} > upper {upper}")
        var = Variable(len(self.variables), kind, lower, upper, name, priority)
        self.variables.append(var)
        return var

    def add_continuous(self, name: str = "", lower=-_INF, upper=_INF) -> Variable:
        return self.add_variable(name, VarKind.Continuous, lower, upper)

    def add_binary(
        self, name: str = "", priority: int = 0, lower: float = 0.0, upper: float = 1.0
    ) -> Variable:
        return self.add_variable(name, VarKind.Binary, lower, upper, priority)

    def set_bounds(
        self,
        var: Variable,
        lower: Optional[float] = None,
        upper: Optional[float] = None,
    ) -> Variable:
        """Tighten or replace the bounds of an existing variable"""
        self._check_open()
        current = self.variables[var.id]
        lower = current.lower if lower is None else float(lower)
        upper = current.upper if upper is None else float(upper)
        if lower > upper:
            raise ModelError(
                f"Variable {current.name!r} would get lower {lower} > upper {upper}"
            )
        if current.is_binary and (lower < 0.0 or upper > 1.0):
            raise ModelError(f"Binary {current.name!r} bounds must stay in [0, 1]")
        updated = dataclasses.replace(current, lower=lower, upper=upper)
        self.variables[var.id] = updated
        return updated

    def add_constraint(
        self, expr: Expr, sense: Sense, rhs: float = 0.0, name: str = ""
    ) -> LinearConstraint:
        """Add `expr <sense> rhs`, moving the constant of `expr` to the rhs"""
        self._check_open()
        expr = AffineExpr.of(expr)
        rhs = float(rhs) - expr.constant
        coefficients = tuple(sorted(expr.terms.items()))
        for i, c in coefficients:
            if not math.isfinite(c):
                raise ModelError(f"Row {name!r} has non-finite coefficient on x{i}")
            if not 0 <= i < len(self.variables):
                raise ModelError(f"Row {name!r} refers to unknown variable x{i}")
        if math.isnan(rhs):
            raise ModelError(f"Row {name!r} has a NaN right-hand side")
        row = LinearConstraint(coefficients, sense, rhs, name)
        self.constraints.append(row)
        return row

    def add_le(self, expr: Expr, rhs: float = 0.0, name: str = "") -> LinearConstraint:
        return self.add_constraint(expr, Sense.LessEqual, rhs, name)

    def add_ge(self, expr: Expr, rhs: float = 0.0, name: str = "") -> LinearConstraint:
        return self.add_constraint(expr, Sense.GreaterEqual, rhs, name)

    def add_eq(self, expr: Expr, rhs: float = 0.0, name: str = "") -> LinearConstraint:
        return self.add_constraint(expr, Sense.Equal, rhs, name)

    def add_objective(self, terms: QuadraticObjective):
        self._check_open()
        self.objective += terms

    @property
    def num_binaries(self) -> int:
        return sum(1 for v in self.variables if v.is_binary)

    @property
    def num_continuous(self) -> int:
        return len(self.variables) - self.num_binaries

    @property
    def binary_ids(self) -> np.ndarray:
        return np.array([v.id for v in self.variables if v.is_binary], dtype=int)

    def lower_bounds(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables], dtype=float)

    def upper_bounds(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables], dtype=float)

    def bounds_of(self, expr: Expr) -> Bounds:
        """Interval-arithmetic range of `expr` over the variable box"""
        expr = AffineExpr.of(expr)
        lower = upper = expr.constant
        for i, c in expr.terms.items():
            var = self.variables[i]
            if c > 0:
                lower += c * var.lower
                upper += c * var.upper
            else:
                lower += c * var.upper
                upper += c * var.lower
        if math.isnan(lower) or math.isnan(upper):
            raise ModelError(f"Cannot bound {expr!r}")
        return Bounds(lower, upper)

    def matrices(self) -> ModelMatrices:
        """Assemble (and cache) the sparse solver arrays"""
        if self._matrices is not None:
            return self._matrices
        n = len(self.variables)
        rows, cols, vals = [], [], []
        for (i, j), c in self.objective.quadratic.items():
            if i == j:
                rows.append(i)
                cols.append(i)
                vals.append(2.0 * c)
            else:
                rows.extend((i, j))
                cols.extend((j, i))
                vals.extend((c, c))
        P = sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))
        q = np.zeros(n)
        for i, c in self.objective.linear.items():
            q[i] += c

        rows, cols, vals = [], [], []
        l = np.empty(len(self.constraints))
        u = np.empty(len(self.constraints))
        for r, row in enumerate(self.constraints):
            for i, c in row.coefficients:
                rows.append(r)
                cols.append(i)
                vals.append(c)
            l[r] = row.rhs if row.sense != Sense.LessEqual else -_INF
            u[r] = row.rhs if row.sense != Sense.GreaterEqual else _INF
        A = sparse.csc_matrix((vals, (rows, cols)), shape=(len(self.constraints), n))
        self._matrices = ModelMatrices(P, q, A, l, u, self.objective.constant)
        return self._matrices

    def validate(self, tolerance: float = 1e-9) -> "MiqpModel":
        """Check bounds and convexity of the objective

        Raises:
            ModelError: inconsistent bounds
            NonConvexError: the quadratic part is not positive semidefinite
        """
        for var in self.variables:
            if var.lower > var.upper:
                raise ModelError(f"Variable {var.name!r} has empty bounds")
        P = self.matrices().P
        if P.nnz:
            touched = np.unique(P.indices)
            block = P[touched][:, touched].toarray()
            eigenvalues = np.linalg.eigvalsh(block)
            scale = max(1.0, float(np.max(np.abs(eigenvalues))))
            if eigenvalues[0] < -tolerance * scale:
                raise NonConvexError(
                    f"Objective of {self.name!r} is not convex, smallest "
                    f"eigenvalue {eigenvalues[0]:.3e}"
                )
        return self

    def evaluate(self, values: Sequence[float]) -> float:
        return self.objective.evaluate(values)

    def max_violation(self, values: Sequence[float]) -> float:
        """Largest row or bound violation at `values`"""
        x = np.asarray(values, dtype=float)
        worst = 0.0
        if len(x):
            worst = max(
                float(np.max(self.lower_bounds() - x)),
                float(np.max(x - self.upper_bounds())),
                0.0,
            )
        if self.constraints:
            m = self.matrices()
            ax = m.A @ x
            worst = max(worst, float(np.max(m.l - ax)), float(np.max(ax - m.u)))
        return worst

    def is_feasible(self, values: Sequence[float], tolerance: float = 1e-6) -> bool:
        return self.max_violation(values) <= tolerance


def bilinear_product(
    model: MiqpModel,
    beta: Expr,
    expr: Expr,
    bounds: Optional[Bounds] = None,
    name: str = "",
) -> Variable:
    """Continuous variable equal to `beta * expr` at every integer point

    Emits the four rows

        M_lo beta <= y <= M_up beta
        f - M_up (1 - beta) <= y <= f - M_lo (1 - beta)

    Args:
        model (MiqpModel): model to extend
        beta (Variable, AffineExpr): binary (or 0/1 valued binary expression)
        expr (AffineExpr, Variable): affine factor f(x)
        bounds (Bounds, optional): range of f, derived from the variable box
            when omitted
        name (str, optional): name of the product variable

    Returns:
        Variable: the product variable y

    Raises:
        ModelError: f is unbounded over the box
    """
    f = AffineExpr.of(expr)
    b = bounds if bounds is not None else model.bounds_of(f)
    if not b.finite:
        raise ModelError(f"Cannot reformulate product with unbounded factor {f!r}")
    lo, hi = b.lower, b.upper
    ind = AffineExpr.of(beta)
    y = model.add_continuous(
        name or f"y{len(model.variables)}", min(0.0, lo), max(0.0, hi)
    )
    model.add_ge(y - lo * ind, 0.0, f"{y.name}_lo")
    model.add_le(y - hi * ind, 0.0, f"{y.name}_up")
    model.add_ge(y - f + hi * (1.0 - ind), 0.0, f"{y.name}_flo")
    model.add_le(y - f + lo * (1.0 - ind), 0.0, f"{y.name}_fup")
    return y


def implication_activate(
    model: MiqpModel,
    beta: Expr,
    expr: Expr,
    m_lower: Optional[float] = None,
    name: str = "",
) -> Optional[LinearConstraint]:
    """Row `f(x) >= M_lo (1 - beta)`: beta = 1 enforces f(x) >= 0

    `beta` may be any affine expression in binaries taking values <= 1. A
    constant indicator of at most 0 leaves f unconstrained and emits nothing;
    a constant indicator of 1 emits the plain row f(x) >= 0.
    """
    f = AffineExpr.of(expr)
    ind = AffineExpr.of(beta)
    if ind.is_constant:
        if ind.constant <= 0.0:
            return None
        return model.add_ge(f, 0.0, name)
    m = m_lower if m_lower is not None else model.bounds_of(f).lower
    if not math.isfinite(m):
        raise ModelError(f"Expression {f!r} is unbounded below over the box")
    m = min(m, 0.0)
    return model.add_ge(f + m * ind, m, name)


def implication_indicate(
    model: MiqpModel,
    expr: Expr,
    beta: Expr,
    m_upper: Optional[float] = None,
    name: str = "",
) -> LinearConstraint:
    """Row `f(x) <= M_up beta`: f(x) > 0 forces beta = 1"""
    f = AffineExpr.of(expr)
    m = m_upper if m_upper is not None else model.bounds_of(f).upper
    if not math.isfinite(m):
        raise ModelError(f"Expression {f!r} is unbounded above over the box")
    m = max(m, 0.0)
    return model.add_le(f - m * AffineExpr.of(beta), 0.0, name)


def disjunction(
    model: MiqpModel,
    branches: Sequence[Sequence[Expr]],
    binaries: Optional[Sequence[Variable]] = None,
    name: str = "d",
    exclusive: bool = False,
    require_one: bool = True,
) -> List[Variable]:
    """Union of branches, each a list of expressions required to be >= 0

    Args:
        model (MiqpModel): model to extend
        branches (list): one list of `f >= 0` expressions per branch, an empty
            list is an unconstrained branch
        binaries (list, optional): existing selector binaries to reuse
        name (str, optional): prefix for created binaries
        exclusive (bool, optional): require exactly one selected branch
        require_one (bool, optional): emit the selection row at all, disable
            when the same binaries already carry it

    Returns:
        List[Variable]: the branch selector binaries

    Raises:
        ModelError: no branches or selector count mismatch
    """
    if not branches:
        raise ModelError(f"Disjunction {name!r} has no branches")
    if binaries is None:
        binaries = [model.add_binary(f"{name}_{i}") for i in range(len(branches))]
    elif len(binaries) != len(branches):
        raise ModelError(
            f"Disjunction {name!r} got {len(binaries)} binaries for "
            f"{len(branches)} branches"
        )
    for i, (beta, branch) in enumerate(zip(binaries, branches)):
        for j, f in enumerate(branch):
            implication_activate(model, beta, f, name=f"{name}_{i}_{j}")
    if require_one:
        total = AffineExpr()
        for beta in binaries:
            total = total + beta
        if exclusive:
            model.add_eq(total, 1.0, f"{name}_one")
        else:
            model.add_ge(total, 1.0, f"{name}_any")
    return list(binaries)


def _as_matrix(polytope) -> Tuple[np.ndarray, np.ndarray]:
    if hasattr(polytope, "as_matrix"):
        return polytope.as_matrix()
    A, b = polytope
    return np.atleast_2d(np.asarray(A, dtype=float)), np.asarray(b, dtype=float)


def _scaled_norms(A: np.ndarray, scale: Optional[Sequence[float]]) -> np.ndarray:
    if scale is None:
        scale = np.ones(A.shape[1])
    scale = np.asarray(scale, dtype=float)
    if scale.shape != (A.shape[1],) or np.any(scale <= 0):
        raise ModelError(f"Scale {scale} must be positive with one entry per axis")
    return np.linalg.norm(A / scale, axis=1)


def chebyshev_constraints(
    polytope,
    center: Sequence[Expr],
    radius: Expr,
    scale: Optional[Sequence[float]] = None,
) -> List[AffineExpr]:
    """Inscribed-ball rows of a polytope in scaled coordinates

    For each row `a x <= b` of the polytope the expression
    `b - a x - r ||a diag(scale)^-1||` is returned; all of them being
    nonnegative (together with `r >= 0`, the last entry) means the ball of
    radius r around the scaled center lies inside the polytope.

    Args:
        polytope: object with `as_matrix()` or an `(A, b)` pair
        center (list): one expression per axis, in unscaled units
        radius (Variable, AffineExpr): ball radius in scaled units
        scale (list, optional): per-axis scaling applied before measuring

    Returns:
        List[AffineExpr]: expressions required to be >= 0

    Raises:
        ModelError: polytope without rows or invalid scale
    """
    A, b = _as_matrix(polytope)
    if A.size == 0 or A.shape[0] == 0:
        raise ModelError("Chebyshev constraints need at least one half-plane")
    if A.shape[1] != len(center):
        raise ModelError(f"Polytope has {A.shape[1]} axes, center has {len(center)}")
    norms = _scaled_norms(A, scale)
    rows = []
    for a, bi, norm in zip(A, b, norms):
        f = AffineExpr(constant=float(bi)) - float(norm) * AffineExpr.of(radius)
        for coefficient, coordinate in zip(a, center):
            f = f - float(coefficient) * AffineExpr.of(coordinate)
        rows.append(f)
    rows.append(AffineExpr.of(radius))
    return rows


@dataclass(frozen=True)
class ChebyshevBall:
    center: np.ndarray
    radius: float


def chebyshev_center(
    polytope,
    scale: Optional[Sequence[float]] = None,
    r_min: float = 0.0,
    r_max: Optional[float] = None,
) -> Optional[ChebyshevBall]:
    """Largest inscribed ball by linear programming

    Args:
        polytope: object with `as_matrix()` or an `(A, b)` pair
        scale (list, optional): per-axis scaling applied before measuring
        r_min (float, optional): required minimum radius
        r_max (float, optional): cap for unbounded polytopes

    Returns:
        ChebyshevBall: center in unscaled coordinates, None if infeasible
    """
    A, b = _as_matrix(polytope)
    if A.shape[0] == 0:
        raise ModelError("Chebyshev center needs at least one half-plane")
    norms = _scaled_norms(A, scale)
    n = A.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_ub = np.hstack([A, norms[:, None]])
    bounds = [(None, None)] * n + [(r_min, r_max)]
    res = linprog(c, A_ub=A_ub, b_ub=b, bounds=bounds, method="highs")
    if res.status == 2:
        return None
    if res.status != 0:
        raise ModelError(f"Chebyshev LP failed: {res.message}")
    return ChebyshevBall(np.asarray(res.x[:n]), float(res.x[-1]))


def _fmt(value: float) -> str:
    if value == _INF:
        return "+inf"
    if value == -_INF:
        return "-inf"
    return "{:.15g}".format(value)


def _fmt_terms(terms: Sequence[Tuple[str, float]]) -> str:
    parts = []
    for label, c in terms:
        magnitude = _fmt(abs(c))
        if parts:
            parts.append(f"{'-' if c < 0 else '+'} {magnitude} {label}")
        else:
            parts.append(f"{'-' if c < 0 else ''}{magnitude} {label}")
    return " ".join(parts)


def export_lp(model: MiqpModel, path: Union[str, Path]) -> Path:
    """Write the model in CPLEX LP format, ordered by variable id

    Variables are written as `x<id>` and rows as `c<index>`. A nonzero
    objective constant is recorded as a comment line since the format has no
    portable syntax for it.

    Args:
        model (MiqpModel): model to export
        path (str, Path): destination file

    Returns:
        Path: the written file
    """
    path = Path(path)
    lines = [f"\\ LSTMPlanner LP export: {model.name}"]
    if model.objective.constant != 0.0:
        lines.append(f"\\ objective constant: {_fmt(model.objective.constant)}")
    lines.append("Minimize")
    linear = [(f"x{i}", c) for i, c in sorted(model.objective.linear.items()) if c != 0]
    quadratic = []
    for (i, j), c in sorted(model.objective.quadratic.items()):
        if c == 0:
            continue
        label = f"x{i} ^2" if i == j else f"x{i} * x{j}"
        quadratic.append((label, 2.0 * c))
    objective = _fmt_terms(linear)
    if quadratic:
        joined = f"[ {_fmt_terms(quadratic)} ] / 2"
        objective = f"{objective} + {joined}" if objective else joined
    lines.append(f" obj: {objective or '0'}")
    lines.append("Subject To")
    for r, row in enumerate(model.constraints):
        terms = [(f"x{i}", c) for i, c in row.coefficients if c != 0]
        lhs = _fmt_terms(terms) or "0 x0"
        lines.append(f" c{r}: {lhs} {row.sense.value} {_fmt(row.rhs)}")
    bounds = []
    for var in model.variables:
        lo, hi = var.lower, var.upper
        if var.is_binary:
            if (lo, hi) != (0.0, 1.0):
                bounds.append(f" {_fmt(lo)} <= x{var.id} <= {_fmt(hi)}")
        elif lo == -_INF and hi == _INF:
            bounds.append(f" x{var.id} free")
        elif lo == hi:
            bounds.append(f" x{var.id} = {_fmt(lo)}")
        elif (lo, hi) != (0.0, _INF):
            bounds.append(f" {_fmt(lo)} <= x{var.id} <= {_fmt(hi)}")
    if bounds:
        lines.append("Bounds")
        lines.extend(bounds)
    binaries = [f"x{v.id}" for v in model.variables if v.is_binary]
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(binaries))
    lines.append("End")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.debug("Exported %r to %s", model, path)
    return path
