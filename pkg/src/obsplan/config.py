"""Scenario configuration: a versioned YAML file drives every experiment.

Built-in names expand to full specifications (tasks experiment /
inspection / transfer, scenarios scenario1..scenario4, waypoints
"default"), so a canonical loaded config is self-contained and
re-serializable: dumping and reloading yields an equivalent config.
Unknown keys are rejected everywhere, and validation errors name the
offending field.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import yaml

from . import quat, templates
from .cmdp import ConstraintThresholds
from .geometry import CameraModel, CostParams, HumanPose
from .momdp import ScalarizationWeights
from .smdp import (
    ACTION_HOLD,
    ACTION_MOVE,
    ACTION_PERCH,
    ACTION_UNPERCH,
    ModelError,
    ObservationModel,
    RobotState,
    Waypoint,
    make_model,
)
from .trajectory import TaskSegment, TrajectoryDistribution

CONFIG_VERSION = 1
METHODS = ("momdp", "cmdp", "both")


class ConfigError(ValueError):
    """Bad configuration file; the message names the field."""


def _require_mapping(value, context: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{context}: expected a mapping, got {type(value).__name__}")
    return value


def _check_keys(mapping: dict, allowed: set[str], context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"{context}: unknown keys {sorted(unknown)}")


def _get(mapping: dict, key: str, kind, default, context: str):
    if key not in mapping:
        if default is _REQUIRED:
            raise ConfigError(f"{context}.{key}: required field is missing")
        return default
    value = mapping[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(
            f"{context}.{key}: expected {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}"
        )
    return value


_REQUIRED = object()


def _vector(mapping: dict, key: str, length: int, context: str, default=_REQUIRED):
    value = _get(mapping, key, list, default, context)
    if value is default and default is not _REQUIRED:
        return default
    if len(value) != length or not all(isinstance(v, (int, float)) for v in value):
        raise ConfigError(f"{context}.{key}: expected {length} numbers")
    return [float(v) for v in value]


SEGMENT_KEYS = {
    "position", "orientation", "yaw_deg", "head_offset", "workspace_offset",
    "workspace_half_extents", "position_stddev", "duration_mean",
    "duration_stddev", "motion",
}


def _normalize_segment(seg, context: str) -> dict:
    seg = _require_mapping(seg, context)
    _check_keys(seg, SEGMENT_KEYS, context)
    position = _vector(seg, "position", 3, context)
    if "orientation" in seg and "yaw_deg" in seg:
        raise ConfigError(f"{context}: give orientation or yaw_deg, not both")
    if "yaw_deg" in seg:
        half = math.radians(_get(seg, "yaw_deg", float, 0.0, context)) / 2.0
        orientation = [math.cos(half), 0.0, 0.0, math.sin(half)]
    else:
        orientation = _vector(seg, "orientation", 4, context, default=[1.0, 0.0, 0.0, 0.0])
        try:
            orientation = list(quat.normalize(tuple(orientation)))
        except ValueError as err:
            raise ConfigError(f"{context}.orientation: {err}") from None
    duration_mean = _get(seg, "duration_mean", float, _REQUIRED, context)
    motion = _get(seg, "motion", str, "dwell", context)
    if motion not in ("dwell", "linear_move_to_next"):
        raise ConfigError(f"{context}.motion: unknown motion {motion!r}")
    return {
        "position": position,
        "orientation": orientation,
        "head_offset": _vector(seg, "head_offset", 3, context,
                               default=list(templates.HEAD_OFFSET)),
        "workspace_offset": _vector(seg, "workspace_offset", 3, context,
                                    default=list(templates.WORKSPACE_OFFSET)),
        "workspace_half_extents": _vector(seg, "workspace_half_extents", 3, context,
                                          default=list(templates.WORKSPACE_HALF_EXTENTS)),
        "position_stddev": _vector(seg, "position_stddev", 3, context,
                                   default=[0.0, 0.0, 0.0]),
        "duration_mean": float(duration_mean),
        "duration_stddev": _get(seg, "duration_stddev", float, 0.0, context),
        "motion": motion,
    }


def _normalize_task(entry, index: int) -> dict:
    context = f"tasks[{index}]"
    if isinstance(entry, str):
        try:
            entry = templates.task_template(entry)
        except KeyError as err:
            raise ConfigError(f"{context}: {err.args[0]}") from None
    entry = _require_mapping(entry, context)
    _check_keys(entry, {"name", "orientation_stddev", "segments"}, context)
    name = _get(entry, "name", str, f"task{index}", context)
    segments = _get(entry, "segments", list, _REQUIRED, context)
    if not segments:
        raise ConfigError(f"{context}.segments: need at least one segment")
    return {
        "name": name,
        "orientation_stddev": _get(entry, "orientation_stddev", float, 0.1, context),
        "segments": [
            _normalize_segment(seg, f"{context}.segments[{i}]")
            for i, seg in enumerate(segments)
        ],
    }


def _normalize_scenario(entry, index: int, method: str) -> dict:
    context = f"scenarios[{index}]"
    if isinstance(entry, str):
        try:
            entry = templates.scenario_template(entry)
        except KeyError as err:
            raise ConfigError(f"{context}: {err.args[0]}") from None
    entry = _require_mapping(entry, context)
    _check_keys(entry, {"name", "weights", "thresholds"}, context)
    name = _get(entry, "name", str, f"scenario{index}", context)
    weights = _vector(entry, "weights", 4, context, default=None)
    thresholds = _vector(entry, "thresholds", 3, context, default=None)
    if method in ("momdp", "both") and weights is None:
        raise ConfigError(f"{context}.weights: required for method {method!r}")
    if method in ("cmdp", "both") and thresholds is None:
        raise ConfigError(f"{context}.thresholds: required for method {method!r}")
    out = {"name": name}
    if weights is not None:
        out["weights"] = weights
    if thresholds is not None:
        out["thresholds"] = thresholds
    return out


def _normalize_waypoints(value) -> list[dict]:
    if value == "default" or value is None:
        return templates.default_waypoints()
    if not isinstance(value, list) or not value:
        raise ConfigError("waypoints: expected 'default' or a non-empty list")
    out = []
    for i, entry in enumerate(value):
        context = f"waypoints[{i}]"
        entry = _require_mapping(entry, context)
        _check_keys(entry, {"position", "handrail"}, context)
        out.append(
            {
                "position": _vector(entry, "position", 3, context),
                "handrail": bool(_get(entry, "handrail", bool, False, context)),
            }
        )
    return out


TOP_LEVEL_KEYS = {
    "version", "seed", "horizon", "method", "task", "tasks", "scenario",
    "scenarios", "waypoints", "initial_waypoint", "camera", "cost_params",
    "n_planning_samples", "n_eval_trajectories", "n_runs", "move_speed",
    "perch_epochs", "baseline",
}

CAMERA_KEYS = {"horizontal_fov_deg", "vertical_fov_deg", "min_range", "max_range"}
COST_KEYS = {"alpha0", "alpha1", "power"}
POWER_KEYS = {"hold_pos_perched", "hold_pos_unperched", "perch", "unperch", "move"}


def _plural(raw: dict, singular: str, plural: str):
    if singular in raw and plural in raw:
        raise ConfigError(f"{plural}: give {singular!r} or {plural!r}, not both")
    value = raw.get(plural, raw.get(singular))
    if value is None:
        raise ConfigError(f"{plural}: required field is missing")
    return value if isinstance(value, list) else [value]


def normalize(raw: dict) -> dict:
    """Validate a parsed YAML mapping and expand it to canonical form."""
    raw = _require_mapping(raw, "config")
    _check_keys(raw, TOP_LEVEL_KEYS, "config")
    version = _get(raw, "version", int, _REQUIRED, "config")
    if version != CONFIG_VERSION:
        raise ConfigError(f"config.version: expected {CONFIG_VERSION}, got {version}")
    method = _get(raw, "method", str, "both", "config")
    if method not in METHODS:
        raise ConfigError(f"config.method: expected one of {METHODS}, got {method!r}")

    camera = _require_mapping(raw.get("camera", {}), "camera")
    _check_keys(camera, CAMERA_KEYS, "camera")
    cost = _require_mapping(raw.get("cost_params", {}), "cost_params")
    _check_keys(cost, COST_KEYS, "cost_params")
    power = _require_mapping(cost.get("power", {}), "cost_params.power")
    _check_keys(power, POWER_KEYS, "cost_params.power")

    canonical = {
        "version": version,
        "seed": _get(raw, "seed", int, 0, "config"),
        "horizon": _get(raw, "horizon", int, 180, "config"),
        "method": method,
        "baseline": bool(_get(raw, "baseline", bool, True, "config")),
        "n_planning_samples": _get(raw, "n_planning_samples", int, 10, "config"),
        "n_eval_trajectories": _get(raw, "n_eval_trajectories", int, 5, "config"),
        "n_runs": _get(raw, "n_runs", int, 5, "config"),
        "move_speed": _get(raw, "move_speed", float, 0.25, "config"),
        "perch_epochs": _get(raw, "perch_epochs", int, 3, "config"),
        "initial_waypoint": _get(raw, "initial_waypoint", int, 0, "config"),
        "waypoints": _normalize_waypoints(raw.get("waypoints")),
        "camera": {
            "horizontal_fov_deg": _get(camera, "horizontal_fov_deg", float, 60.0, "camera"),
            "vertical_fov_deg": _get(camera, "vertical_fov_deg", float, 45.0, "camera"),
            "min_range": _get(camera, "min_range", float, 0.2, "camera"),
            "max_range": _get(camera, "max_range", float, 10.0, "camera"),
        },
        "cost_params": {
            "alpha0": _get(cost, "alpha0", float, 2.0, "cost_params"),
            "alpha1": _get(cost, "alpha1", float, 1.0, "cost_params"),
            "power": {
                "hold_pos_perched": _get(power, "hold_pos_perched", float, 0.125,
                                         "cost_params.power"),
                "hold_pos_unperched": _get(power, "hold_pos_unperched", float, 0.25,
                                           "cost_params.power"),
                "perch": _get(power, "perch", float, 0.5, "cost_params.power"),
                "unperch": _get(power, "unperch", float, 0.5, "cost_params.power"),
                "move": _get(power, "move", float, 1.0, "cost_params.power"),
            },
        },
        "tasks": [
            _normalize_task(entry, i)
            for i, entry in enumerate(_plural(raw, "task", "tasks"))
        ],
        "scenarios": [
            _normalize_scenario(entry, i, method)
            for i, entry in enumerate(_plural(raw, "scenario", "scenarios"))
        ],
    }
    for key in ("seed", "horizon", "n_planning_samples", "n_eval_trajectories", "n_runs"):
        minimum = 0 if key == "seed" else 1
        if canonical[key] < minimum:
            raise ConfigError(f"config.{key}: must be >= {minimum}")
    names = [t["name"] for t in canonical["tasks"]]
    if len(set(names)) != len(names):
        raise ConfigError("tasks: duplicate task names")
    names = [s["name"] for s in canonical["scenarios"]]
    if len(set(names)) != len(names):
        raise ConfigError("scenarios: duplicate scenario names")
    return canonical


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """A validated experiment description (canonical dict plus builders)."""

    canonical: dict

    # -- plain accessors ---------------------------------------------------
    @property
    def seed(self) -> int:
        return self.canonical["seed"]

    @property
    def horizon(self) -> int:
        return self.canonical["horizon"]

    @property
    def method(self) -> str:
        return self.canonical["method"]

    @property
    def methods(self) -> tuple[str, ...]:
        return ("momdp", "cmdp") if self.method == "both" else (self.method,)

    @property
    def baseline(self) -> bool:
        return self.canonical["baseline"]

    @property
    def n_planning_samples(self) -> int:
        return self.canonical["n_planning_samples"]

    @property
    def n_eval_trajectories(self) -> int:
        return self.canonical["n_eval_trajectories"]

    @property
    def n_runs(self) -> int:
        return self.canonical["n_runs"]

    @property
    def tasks(self) -> list[dict]:
        return self.canonical["tasks"]

    @property
    def scenarios(self) -> list[dict]:
        return self.canonical["scenarios"]

    # -- object builders ---------------------------------------------------
    def build_model(self) -> ObservationModel:
        waypoints = tuple(
            Waypoint(i, tuple(w["position"]), w["handrail"])
            for i, w in enumerate(self.canonical["waypoints"])
        )
        initial = self.canonical["initial_waypoint"]
        if not 0 <= initial < len(waypoints):
            raise ConfigError("config.initial_waypoint: outside the waypoint list")
        try:
            return make_model(
                waypoints,
                horizon=self.horizon,
                initial=RobotState(initial, False),
                move_speed=self.canonical["move_speed"],
                perch_epochs=self.canonical["perch_epochs"],
            )
        except ModelError as err:
            raise ConfigError(f"waypoints: {err}") from None

    def build_camera(self) -> CameraModel:
        cam = self.canonical["camera"]
        try:
            return CameraModel(
                horizontal_fov=math.radians(cam["horizontal_fov_deg"]),
                vertical_fov=math.radians(cam["vertical_fov_deg"]),
                max_range=cam["max_range"],
                min_range=cam["min_range"],
            )
        except ValueError as err:
            raise ConfigError(f"camera: {err}") from None

    def build_cost_params(self) -> CostParams:
        cp = self.canonical["cost_params"]
        power = cp["power"]
        table = {
            (ACTION_HOLD, True): power["hold_pos_perched"],
            (ACTION_HOLD, False): power["hold_pos_unperched"],
            (ACTION_PERCH, False): power["perch"],
            (ACTION_PERCH, True): power["perch"],
            (ACTION_UNPERCH, True): power["unperch"],
            (ACTION_UNPERCH, False): power["unperch"],
            (ACTION_MOVE, False): power["move"],
            (ACTION_MOVE, True): power["move"],
        }
        try:
            return CostParams(alpha0=cp["alpha0"], alpha1=cp["alpha1"], power_table=table)
        except ValueError as err:
            raise ConfigError(f"cost_params: {err}") from None

    def build_distribution(self, task: dict) -> TrajectoryDistribution:
        segments = []
        for i, seg in enumerate(task["segments"]):
            orientation = tuple(seg["orientation"])
            position = tuple(seg["position"])
            rotation = quat.to_matrix(orientation)
            head = tuple(np.asarray(position) + rotation @ np.asarray(seg["head_offset"]))
            try:
                pose = HumanPose(
                    position=position,
                    orientation=orientation,
                    head_position=head,
                    workspace_offset=tuple(seg["workspace_offset"]),
                    workspace_half_extents=tuple(seg["workspace_half_extents"]),
                )
                segments.append(
                    TaskSegment(
                        key_pose_mean=pose,
                        key_pose_position_stddev=tuple(seg["position_stddev"]),
                        duration_mean=seg["duration_mean"],
                        duration_stddev=seg["duration_stddev"],
                        motion=seg["motion"],
                    )
                )
            except ValueError as err:
                raise ConfigError(f"tasks.{task['name']}.segments[{i}]: {err}") from None
        return TrajectoryDistribution(
            tuple(segments),
            seed=self.seed,
            orientation_stddev=task["orientation_stddev"],
        )

    @staticmethod
    def weights_of(scenario: dict) -> ScalarizationWeights:
        try:
            return ScalarizationWeights(*scenario["weights"])
        except (KeyError, ValueError, TypeError) as err:
            raise ConfigError(f"scenarios.{scenario.get('name')}.weights: {err}") from None

    @staticmethod
    def thresholds_of(scenario: dict) -> ConstraintThresholds:
        try:
            return ConstraintThresholds(*scenario["thresholds"])
        except (KeyError, ValueError, TypeError) as err:
            raise ConfigError(
                f"scenarios.{scenario.get('name')}.thresholds: {err}") from None


def loads_config(text: str) -> ScenarioConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        where = ""
        mark = getattr(err, "problem_mark", None)
        if mark is not None:
            where = f" at line {mark.line + 1} column {mark.column + 1}"
        raise ConfigError(f"config parse error{where}: {err}") from None
    if raw is None:
        raise ConfigError("config file is empty")
    return ScenarioConfig(normalize(raw))


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return loads_config(fh.read())


def dump_config(config: ScenarioConfig) -> str:
    return yaml.safe_dump(config.canonical, sort_keys=True, default_flow_style=None)
