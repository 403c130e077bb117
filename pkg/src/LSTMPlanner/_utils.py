class InitialisationWarning(UserWarning):
    pass


class FallbackWarning(UserWarning):
    """A planner reused the tail of its previous plan."""

    pass


class ModelError(ValueError):
    """A model is malformed or a reformulation cannot be bounded."""

    pass


class NonConvexError(ModelError):
    pass


class OracleLimitError(ModelError):
    pass


class RoadModelError(ValueError):
    pass


class ScenarioError(ValueError):
    pass


class PlanInfeasibleError(RuntimeError):
    """Raised when a planning problem has no feasible solution.

    Args:
        message (str): diagnostic
        solution (Solution, optional): solver result that triggered the error
    """

    def __init__(self, message: str, solution=None):
        super().__init__(message)
        self.solution = solution
