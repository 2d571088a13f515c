"""Observation reward and proxemic cost models.

All rates are per-second quantities on [0, 1]. The observation reward
scores camera coverage of the task region in front of the human, scaled
down with viewing distance. Two human-centric costs decay exponentially
with distance (collision risk against the workspace box, intrusiveness
against the head, halved while perched); the robot-centric power cost is a
per-action lookup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from . import quat
from .smdp import ACTION_HOLD, ACTION_KINDS, ACTION_MOVE, ACTION_PERCH, ACTION_UNPERCH, Vec3

COVERAGE_GRID = 5  # per-axis sample count for the frustum/ROI estimate
AIM_EPSILON = 1e-6  # metres; closer than this to the aim point is degenerate

DEFAULT_ALPHA0 = 2.0  # 1/m, collision falloff
DEFAULT_ALPHA1 = 1.0  # 1/m, intrusion falloff


class DegenerateAimError(ValueError):
    """The camera position coincides with the point it must aim at."""


def _unit_grid(k: int) -> np.ndarray:
    """k^3 midpoint-rule sample offsets covering [-1, 1]^3, shape (k^3, 3)."""
    axis = (2.0 * np.arange(k) + 1.0) / k - 1.0
    gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])


_GRID = _unit_grid(COVERAGE_GRID)


@dataclass(frozen=True)
class HumanPose:
    """Torso-centred pose with a body-frame workspace box.

    ``orientation`` is a unit quaternion (w, x, y, z) rotating body-frame
    vectors into the world frame; the workspace box is axis-aligned in the
    body frame, offset by ``workspace_offset`` from the torso centre.
    """

    position: Vec3
    orientation: quat.Quat
    head_position: Vec3
    workspace_offset: Vec3
    workspace_half_extents: Vec3

    def __post_init__(self):
        if abs(quat.norm(self.orientation) - 1.0) > 1e-9:
            raise ValueError("orientation quaternion must have unit norm")
        if any(h <= 0.0 for h in self.workspace_half_extents):
            raise ValueError("workspace half-extents must be strictly positive")

    @cached_property
    def rotation(self) -> np.ndarray:
        return quat.to_matrix(self.orientation)

    @cached_property
    def position_a(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)

    @cached_property
    def head_a(self) -> np.ndarray:
        return np.asarray(self.head_position, dtype=float)

    @cached_property
    def workspace_center_world(self) -> np.ndarray:
        return self.position_a + self.rotation @ np.asarray(self.workspace_offset, dtype=float)


@dataclass(frozen=True)
class RegionOfInterest:
    """Oriented box the camera should capture (world-frame center)."""

    center: Vec3
    half_extents: Vec3
    orientation: quat.Quat

    def __post_init__(self):
        if any(h <= 0.0 for h in self.half_extents):
            raise ValueError("ROI half-extents must be strictly positive")

    @cached_property
    def rotation(self) -> np.ndarray:
        return quat.to_matrix(self.orientation)

    @cached_property
    def center_a(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)

    @cached_property
    def sample_points(self) -> np.ndarray:
        """World-frame midpoint grid over the box, shape (COVERAGE_GRID^3, 3)."""
        local = _GRID * np.asarray(self.half_extents, dtype=float)
        return self.center_a + local @ self.rotation.T


def task_roi(human: HumanPose) -> RegionOfInterest:
    """The observation target: the human's workspace box in world frame."""
    return RegionOfInterest(
        center=tuple(human.workspace_center_world),
        half_extents=human.workspace_half_extents,
        orientation=human.orientation,
    )


@dataclass(frozen=True)
class CameraModel:
    horizontal_fov: float  # radians
    vertical_fov: float
    max_range: float  # metres along the boresight
    min_range: float = 0.2

    def __post_init__(self):
        for fov in (self.horizontal_fov, self.vertical_fov):
            if not 0.0 < fov < math.pi:
                raise ValueError("field of view must lie in (0, pi)")
        if not 0.0 <= self.min_range < self.max_range:
            raise ValueError("need 0 <= min_range < max_range")

    @cached_property
    def half_tangents(self) -> tuple[float, float]:
        return (math.tan(self.horizontal_fov / 2.0), math.tan(self.vertical_fov / 2.0))


def default_camera() -> CameraModel:
    return CameraModel(
        horizontal_fov=math.radians(60.0),
        vertical_fov=math.radians(45.0),
        max_range=10.0,
        min_range=0.2,
    )


def default_power_table() -> dict[tuple[str, bool], float]:
    """Per-action, per-perch-status power draw rates on [0, 1]."""
    return {
        (ACTION_HOLD, True): 0.125,
        (ACTION_HOLD, False): 0.25,
        (ACTION_PERCH, False): 0.5,
        (ACTION_PERCH, True): 0.5,
        (ACTION_UNPERCH, True): 0.5,
        (ACTION_UNPERCH, False): 0.5,
        (ACTION_MOVE, False): 1.0,
        (ACTION_MOVE, True): 1.0,
    }


@dataclass(frozen=True, eq=False)
class CostParams:
    alpha0: float = DEFAULT_ALPHA0
    alpha1: float = DEFAULT_ALPHA1
    power_table: Mapping[tuple[str, bool], float] = field(default_factory=default_power_table)

    def __post_init__(self):
        if self.alpha0 <= 0.0 or self.alpha1 <= 0.0:
            raise ValueError("distance falloff parameters must be positive")
        for key, rate in self.power_table.items():
            if key[0] not in ACTION_KINDS:
                raise ValueError(f"unknown action kind in power table: {key[0]!r}")
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"power rate {rate} outside [0, 1]")


def camera_frame(robot_position: np.ndarray, roi: RegionOfInterest) -> np.ndarray:
    """Orthonormal (forward, right, up) rows for a camera aimed at the ROI.

    The boresight points at the ROI centre; roll is anchored to the ROI's
    own axes (preferring its z axis as "up") so that coverage is invariant
    under rigid transforms applied to the camera position and ROI together.
    """
    robot_position = np.asarray(robot_position, dtype=float)
    offset = roi.center_a - robot_position
    distance = float(np.linalg.norm(offset))
    if distance < AIM_EPSILON:
        raise DegenerateAimError("camera position coincides with the ROI centre")
    forward = offset / distance
    up = None
    for axis in (roi.rotation[:, 2], roi.rotation[:, 1], roi.rotation[:, 0]):
        residual = axis - np.dot(axis, forward) * forward
        n = float(np.linalg.norm(residual))
        if n > 1e-9:
            up = residual / n
            break
    if up is None:  # pragma: no cover - three orthonormal axes cannot all align
        raise DegenerateAimError("cannot anchor the camera roll")
    right = np.cross(forward, up)
    return np.stack([forward, right, up])


def coverage_fraction(camera: CameraModel, robot_position, roi: RegionOfInterest) -> float:
    """Fraction of the ROI volume inside the viewing frustum.

    Estimated on a fixed deterministic COVERAGE_GRID^3 midpoint grid of
    sample points over the box.
    """
    robot_position = np.asarray(robot_position, dtype=float)
    frame = camera_frame(robot_position, roi)
    rel = roi.sample_points - robot_position
    depth = rel @ frame[0]
    lateral = rel @ frame[1]
    vertical = rel @ frame[2]
    tan_h, tan_v = camera.half_tangents
    inside = (
        (depth >= camera.min_range)
        & (depth <= camera.max_range)
        & (np.abs(lateral) <= depth * tan_h)
        & (np.abs(vertical) <= depth * tan_v)
    )
    return float(np.count_nonzero(inside)) / inside.size


def observation_reward_rate(
    robot_position,
    action_kind: str,
    human: HumanPose,
    camera: CameraModel,
    norm_distance: float = 1.0,
) -> float:
    """Coverage-per-distance reward while holding position, zero otherwise.

    The raw coverage/distance ratio is scaled by ``norm_distance`` (the
    best-achievable viewing distance for the scenario) and clamped so a
    perfect view from that distance scores exactly 1.0 per second.
    """
    if action_kind != ACTION_HOLD:
        return 0.0
    roi = task_roi(human)
    robot_position = np.asarray(robot_position, dtype=float)
    fraction = coverage_fraction(camera, robot_position, roi)
    distance = max(float(np.linalg.norm(roi.center_a - robot_position)), camera.min_range)
    return min(1.0, fraction * norm_distance / distance)


def workspace_distance(robot_position, human: HumanPose) -> float:
    """Euclidean distance from a point to the human's workspace box surface."""
    body = human.rotation.T @ (np.asarray(robot_position, dtype=float) - human.position_a)
    excess = np.abs(body - np.asarray(human.workspace_offset, dtype=float)) - np.asarray(
        human.workspace_half_extents, dtype=float
    )
    return float(np.linalg.norm(np.maximum(excess, 0.0)))


def collision_cost_rate(robot_position, human: HumanPose, params: CostParams) -> float:
    return math.exp(-params.alpha0 * workspace_distance(robot_position, human))


def intrusion_cost_rate(
    robot_position, perched: bool, human: HumanPose, params: CostParams
) -> float:
    distance = float(np.linalg.norm(np.asarray(robot_position, dtype=float) - human.head_a))
    scale = 0.5 if perched else 1.0
    return scale * math.exp(-params.alpha1 * distance)


def power_cost_rate(action_kind: str, perched: bool, params: CostParams) -> float:
    try:
        return params.power_table[(action_kind, perched)]
    except KeyError:
        raise ValueError(f"no power rate for action {action_kind!r} (perched={perched})") from None
