""" LSTMPlanner
    Long- and short-term lane-change planning for multi-lane roads as one
    mixed-integer quadratic program, with baselines and a closed-loop harness.
"""

# pragma pylint: disable=unused-import
from LSTMPlanner.config import LSTMPConfig, load_profile
from LSTMPlanner.road import (
    EgoState,
    PlanningProblem,
    RoadGeometry,
    SurroundingVehicle,
)
from LSTMPlanner.LSTMP import LstmpConfig, LstmpPlanner, PlanResult, plan
from LSTMPlanner.baselines import (
    HybridAStarConfig,
    HybridAStarPlanner,
    MipDmConfig,
    MipDmPlanner,
)
import LSTMPlanner.sim
import LSTMPlanner.thread

# pragma pylint: enable=unused-import
__version__ = "0.1.0"

__all__ = [
    "EgoState",
    "HybridAStarConfig",
    "HybridAStarPlanner",
    "LSTMPConfig",
    "LstmpConfig",
    "LstmpPlanner",
    "MipDmConfig",
    "MipDmPlanner",
    "PlanResult",
    "PlanningProblem",
    "RoadGeometry",
    "SurroundingVehicle",
    "load_profile",
    "plan",
]
