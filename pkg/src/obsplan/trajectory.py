"""Human-task trajectory distributions, samplers, and planning rate tables.

A task is an ordered list of segments, each with a Gaussian-perturbed key
pose and Gaussian duration. Sampling realizes a dense per-epoch pose array;
rate tables average the per-epoch reward/cost rates of sampled trajectories
over every (epoch, robot state, action) triple in the model's canonical
indexing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import quat
from .geometry import (
    CameraModel,
    CostParams,
    HumanPose,
    collision_cost_rate,
    coverage_fraction,
    intrusion_cost_rate,
    power_cost_rate,
    task_roi,
)
from .smdp import ACTION_HOLD, ObservationModel, TimeExpandedGraph, Vec3, time_expand

DWELL = "dwell"
LINEAR_MOVE = "linear_move_to_next"

# Evaluation trajectories are drawn from a stream namespace disjoint from
# planning samples so the two sets never share randomness.
EVAL_STREAM_BASE = 1_000_000

DEFAULT_ORIENTATION_STDDEV = 0.1  # radians


class HorizonMismatchError(ValueError):
    """A sampled trajectory does not cover the model horizon."""


@dataclass(frozen=True)
class TaskSegment:
    key_pose_mean: HumanPose
    key_pose_position_stddev: Vec3 = (0.0, 0.0, 0.0)
    duration_mean: float = 1.0
    duration_stddev: float = 0.0
    motion: str = DWELL

    def __post_init__(self):
        if self.duration_mean <= 0.0:
            raise ValueError("segment duration mean must be positive")
        if self.duration_stddev < 0.0 or any(s < 0.0 for s in self.key_pose_position_stddev):
            raise ValueError("standard deviations must be non-negative")
        if self.motion not in (DWELL, LINEAR_MOVE):
            raise ValueError(f"unknown segment motion {self.motion!r}")


@dataclass(frozen=True)
class TrajectoryDistribution:
    segments: tuple[TaskSegment, ...]
    seed: int = 0
    orientation_stddev: float = DEFAULT_ORIENTATION_STDDEV

    def __post_init__(self):
        if not self.segments:
            raise ValueError("a trajectory distribution needs at least one segment")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.orientation_stddev < 0.0:
            raise ValueError("orientation stddev must be non-negative")

    def mean_total_epochs(self) -> int:
        return sum(_round_half_up(max(1.0, seg.duration_mean)) for seg in self.segments)


@dataclass(frozen=True)
class SampledTrajectory:
    """Dense pose array: one HumanPose per epoch 0..total_epochs inclusive."""

    poses: tuple[HumanPose, ...]
    total_epochs: int

    def __post_init__(self):
        if len(self.poses) != self.total_epochs + 1:
            raise ValueError("pose array must cover every epoch in [0, total_epochs]")

    def pose_at(self, epoch: int) -> HumanPose:
        if not 0 <= epoch <= self.total_epochs:
            raise HorizonMismatchError(
                f"epoch {epoch} outside the sampled range [0, {self.total_epochs}]"
            )
        return self.poses[epoch]

    def extended(self, horizon: int) -> "SampledTrajectory":
        """Pad by holding the final pose so the trajectory covers ``horizon``."""
        if horizon <= self.total_epochs:
            return self
        pad = (horizon - self.total_epochs) * (self.poses[-1],)
        return SampledTrajectory(self.poses + pad, horizon)


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _body_head_offset(pose: HumanPose) -> np.ndarray:
    return pose.rotation.T @ (pose.head_a - pose.position_a)


def _sample_key_pose(segment: TaskSegment, orientation_stddev: float, rng) -> HumanPose:
    mean = segment.key_pose_mean
    stddev = np.asarray(segment.key_pose_position_stddev, dtype=float)
    delta = rng.normal(size=3) * stddev
    delta = np.clip(delta, -3.0 * stddev, 3.0 * stddev)
    axis = rng.normal(size=3)
    while np.linalg.norm(axis) < 1e-12:  # pragma: no cover - essentially impossible
        axis = rng.normal(size=3)
    angle = float(np.clip(rng.normal() * orientation_stddev, -3 * orientation_stddev, 3 * orientation_stddev))
    orientation = mean.orientation
    if orientation_stddev > 0.0:
        orientation = quat.normalize(
            quat.multiply(quat.from_axis_angle(tuple(axis), angle), mean.orientation)
        )
    position = mean.position_a + delta
    head = position + quat.to_matrix(orientation) @ _body_head_offset(mean)
    return HumanPose(
        position=tuple(position),
        orientation=orientation,
        head_position=tuple(head),
        workspace_offset=mean.workspace_offset,
        workspace_half_extents=mean.workspace_half_extents,
    )


def _sample_duration(segment: TaskSegment, rng) -> int:
    raw = rng.normal(loc=segment.duration_mean, scale=segment.duration_stddev)
    return max(1, _round_half_up(raw))


def _interpolate(a: HumanPose, b: HumanPose, alpha: float) -> HumanPose:
    position = (1.0 - alpha) * a.position_a + alpha * b.position_a
    orientation = quat.slerp(a.orientation, b.orientation, alpha)
    head_offset = (1.0 - alpha) * _body_head_offset(a) + alpha * _body_head_offset(b)
    head = position + quat.to_matrix(orientation) @ head_offset
    offset = tuple(
        (1.0 - alpha) * oa + alpha * ob
        for oa, ob in zip(a.workspace_offset, b.workspace_offset)
    )
    half = tuple(
        (1.0 - alpha) * ha + alpha * hb
        for ha, hb in zip(a.workspace_half_extents, b.workspace_half_extents)
    )
    return HumanPose(tuple(position), orientation, tuple(head), offset, half)


def sample_trajectory(dist: TrajectoryDistribution, rng_stream: int) -> SampledTrajectory:
    """Draw one trajectory; bit-reproducible given (dist.seed, rng_stream).

    Key-pose positions get Gaussian offsets clipped at three sigma, key-pose
    orientations a Gaussian-angle rotation about a random axis, and segment
    durations are Gaussian, floored at one second and rounded half-up to
    whole epochs. Dwell segments hold their key pose; linear segments
    interpolate position (lerp) and orientation (slerp) to the next key pose.
    """
    rng = np.random.default_rng([dist.seed, rng_stream])
    keys = [_sample_key_pose(seg, dist.orientation_stddev, rng) for seg in dist.segments]
    durations = [_sample_duration(seg, rng) for seg in dist.segments]

    poses: list[HumanPose] = []
    for i, seg in enumerate(dist.segments):
        tau = durations[i]
        target = keys[i + 1] if (seg.motion == LINEAR_MOVE and i + 1 < len(keys)) else None
        for step in range(tau):
            if target is None:
                poses.append(keys[i])
            else:
                poses.append(_interpolate(keys[i], target, step / tau))
    final = keys[-1]
    poses.append(final)
    return SampledTrajectory(tuple(poses), len(poses) - 1)


@dataclass(frozen=True, eq=False)
class RateTable:
    """Per-epoch reward/cost rates on the model's canonical (t, s, a) grid.

    Arrays have shape (horizon, n_states, max_actions); entries beyond a
    state's action count are zero and never read. ``layout`` records the
    (states, actions-per-state) tuples the table was built against so
    solvers can reject mismatched models.
    """

    reward: np.ndarray
    costs: tuple[np.ndarray, np.ndarray, np.ndarray]
    layout: tuple

    def __post_init__(self):
        arrays = (self.reward,) + self.costs
        for arr in arrays:
            if not np.all(np.isfinite(arr)):
                raise ValueError("rate tables must be finite")
            if arr.min() < -1e-12 or arr.max() > 1.0 + 1e-9:
                raise ValueError("rates must lie in [0, 1]")

    @property
    def horizon(self) -> int:
        return self.reward.shape[0]

    @cached_property
    def stacked(self) -> np.ndarray:
        """All four rates as one (horizon, states, actions, 4) array."""
        return np.stack([self.reward, *self.costs], axis=-1)

    def vector(self, t: int, s: int, a: int) -> np.ndarray:
        return np.array(
            [self.reward[t, s, a], self.costs[0][t, s, a], self.costs[1][t, s, a], self.costs[2][t, s, a]]
        )


def rate_layout(graph: TimeExpandedGraph) -> tuple:
    return (graph.states, graph.actions)


def reward_normalization(model: ObservationModel, dist: TrajectoryDistribution) -> float:
    """Best-achievable viewing distance used to anchor reward 1.0.

    Distance from the closest waypoint to the centroid of the task's mean
    ROI centres, floored at zero-distance safety by the caller's camera
    min range when applied.
    """
    centers = np.array(
        [task_roi(seg.key_pose_mean).center_a for seg in dist.segments]
    )
    centroid = centers.mean(axis=0)
    dists = [np.linalg.norm(w.position_array() - centroid) for w in model.waypoints]
    return float(min(dists))


def exact_rates(
    model: ObservationModel,
    traj: SampledTrajectory,
    camera: CameraModel,
    params: CostParams,
    norm_distance: float = 1.0,
    graph: TimeExpandedGraph | None = None,
) -> RateTable:
    """Rate table computed from a single known trajectory.

    The trajectory must cover the model horizon; shorter samples should be
    passed through ``SampledTrajectory.extended`` first.
    """
    if traj.total_epochs < model.horizon:
        raise HorizonMismatchError(
            f"trajectory covers {traj.total_epochs} epochs, model horizon is {model.horizon}"
        )
    if graph is None:
        graph = time_expand(model)
    horizon, states, actions = model.horizon, graph.states, graph.actions
    n_states, max_actions = len(states), graph.max_actions
    norm_distance = max(norm_distance, camera.min_range)

    reward = np.zeros((horizon, n_states, max_actions))
    c0 = np.zeros_like(reward)
    c1 = np.zeros_like(reward)
    c2 = np.zeros_like(reward)

    positions = [w.position_array() for w in model.waypoints]
    for t in range(horizon):
        human = traj.pose_at(t)
        roi = task_roi(human)
        for si, state in enumerate(states):
            pos = positions[state.waypoint]
            hold_reward = 0.0
            fraction = coverage_fraction(camera, pos, roi)
            if fraction > 0.0:
                distance = max(float(np.linalg.norm(roi.center_a - pos)), camera.min_range)
                hold_reward = min(1.0, fraction * norm_distance / distance)
            collision = collision_cost_rate(pos, human, params)
            intrusion = intrusion_cost_rate(pos, state.perched, human, params)
            for ai, action in enumerate(actions[si]):
                if action.kind == ACTION_HOLD:
                    reward[t, si, ai] = hold_reward
                c0[t, si, ai] = collision
                c1[t, si, ai] = intrusion
                c2[t, si, ai] = power_cost_rate(action.kind, state.perched, params)
    return RateTable(reward, (c0, c1, c2), rate_layout(graph))


def expected_rates(
    model: ObservationModel,
    dist: TrajectoryDistribution,
    n_samples: int,
    camera: CameraModel,
    params: CostParams,
    norm_distance: float | None = None,
    graph: TimeExpandedGraph | None = None,
) -> RateTable:
    """Mean rate table over ``n_samples`` planning trajectories (streams 0..N-1)."""
    if n_samples < 1:
        raise ValueError("need at least one planning sample")
    if graph is None:
        graph = time_expand(model)
    if norm_distance is None:
        norm_distance = reward_normalization(model, dist)
    tables = [
        exact_rates(
            model,
            sample_trajectory(dist, stream).extended(model.horizon),
            camera,
            params,
            norm_distance,
            graph,
        )
        for stream in range(n_samples)
    ]
    reward = sum(t.reward for t in tables) / n_samples
    costs = tuple(
        sum(t.costs[k] for t in tables) / n_samples for k in range(3)
    )
    return RateTable(reward, costs, rate_layout(graph))


def evaluation_trajectories(
    dist: TrajectoryDistribution, count: int, horizon: int
) -> list[SampledTrajectory]:
    """Held-out trajectories from the evaluation stream namespace."""
    return [
        sample_trajectory(dist, EVAL_STREAM_BASE + i).extended(horizon)
        for i in range(count)
    ]


def write_trajectory_csv(path, traj: SampledTrajectory) -> None:
    """Dump a sampled trajectory: epoch, position, quaternion, head position."""
    with open(path, "w") as fh:
        fh.write("epoch,x,y,z,qw,qx,qy,qz,head_x,head_y,head_z\n")
        for epoch in range(traj.total_epochs + 1):
            p = traj.pose_at(epoch)
            row = [epoch, *p.position, *p.orientation, *p.head_position]
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(value) -> str:
    if isinstance(value, int):
        return str(value)
    return format(float(value), ".10g")
