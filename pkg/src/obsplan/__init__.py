"""Viewpoint planning toolkit for free-flying observation robots.

Plans where a camera robot should hold, move, and perch to watch a person
work, balancing coverage reward against collision, intrusion, and power
costs. Two planners share one model: scalarized backwards induction over
the time-expanded process, and an occupancy-measure linear program with
hard cost budgets. A rollout harness replays solved policies against
sampled human trajectories.
"""

from .cmdp import ConstraintThresholds, StochasticPolicy, build_cmdp_lp, solve_cmdp
from .config import ScenarioConfig, load_config
from .geometry import CameraModel, CostParams, HumanPose, RegionOfInterest
from .momdp import DeterministicPolicy, ScalarizationWeights, policy_value, solve_momdp
from .smdp import (
    Action,
    ObservationModel,
    RobotState,
    Waypoint,
    WorldState,
    available_actions,
    enumerate_states,
    make_model,
    time_expand,
)
from .trajectory import (
    SampledTrajectory,
    TaskSegment,
    TrajectoryDistribution,
    exact_rates,
    expected_rates,
    sample_trajectory,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CameraModel",
    "ConstraintThresholds",
    "CostParams",
    "DeterministicPolicy",
    "HumanPose",
    "ObservationModel",
    "RegionOfInterest",
    "RobotState",
    "SampledTrajectory",
    "ScalarizationWeights",
    "ScenarioConfig",
    "StochasticPolicy",
    "TaskSegment",
    "TrajectoryDistribution",
    "Waypoint",
    "WorldState",
    "available_actions",
    "build_cmdp_lp",
    "enumerate_states",
    "exact_rates",
    "expected_rates",
    "load_config",
    "make_model",
    "policy_value",
    "sample_trajectory",
    "solve_cmdp",
    "solve_momdp",
    "time_expand",
]
