import enum


class VarKind(enum.IntEnum):
    """Domain of a model variable."""

    #: Real-valued variable within its bounds.
    Continuous = 0
    #: Variable restricted to {0, 1}; relaxed to [0, 1] in relaxations.
    Binary = 1


class Sense(enum.Enum):
    """Relation between the left-hand side and the right-hand side of a row."""

    #: lhs <= rhs
    LessEqual = "<="
    #: lhs == rhs
    Equal = "="
    #: lhs >= rhs
    GreaterEqual = ">="


class SolveStatus(enum.Enum):
    """Outcome of a solver call.

    Only `Optimal` guarantees the objective lies within the requested gap of
    the true optimum. The limit statuses may still carry an incumbent.
    """

    #: Proven optimal within the gap tolerances.
    Optimal = "optimal"
    #: Relaxation or fixed problem has no feasible point.
    Infeasible = "infeasible"
    #: Node limit reached before the gap closed.
    NodeLimit = "node-limit"
    #: Wall-clock limit reached before the gap closed.
    TimeLimit = "time-limit"


class BranchingRule(enum.Enum):
    #: Pick the binary whose relaxed value is closest to 0.5; ties by lowest id.
    MostFractional = "most-fractional"


class NodeOrder(enum.Enum):
    #: Process the open node with the lowest parent bound first.
    BestBound = "best-bound"


class PlannerKind(enum.Enum):
    """Planners known to the simulator and the command line."""

    #: Long/short-horizon MIQP planner.
    LSTMP = "lstmp"
    #: Discrete-time mixed-integer decision maker baseline.
    MIPDM = "mipdm"
    #: Hybrid A* graph search baseline.
    HybridAStar = "hastar"


class RefCostSign(enum.Enum):
    """Sign used inside the long-horizon reference velocity cost.

    `Corrected` yields zero cost when consecutive transitions are spaced at
    the reference velocity. `Printed` keeps the plus sign of the original
    derivation and is available for comparison runs.
    """

    #: ((sigma_l - sigma_{l-1}) - (tau_l - tau_{l-1}) * v_ref)^2
    Corrected = "corrected"
    #: ((sigma_l - sigma_{l-1}) + (tau_l - tau_{l-1}) * v_ref)^2
    Printed = "printed"
