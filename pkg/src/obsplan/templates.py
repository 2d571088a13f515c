"""Built-in scenario ingredients: module geometry, tasks, cost weightings.

The workspace is a 10 m x 4 m x 4 m station module with a 3 x 2 x 2
waypoint lattice (four waypoints carry handrails; the robot docks at
waypoint 0 in the near corner). Three task templates place the human in
the far half of the module: a multi-station experiment, a slow surface
inspection sweep, and a repeated equipment-transfer loop, each averaging
180 seconds. Station coordinates are qualitative defaults and fully
config-overridable.
"""

from __future__ import annotations

import math

TASK_NAMES = ("experiment", "inspection", "transfer")
SCENARIO_NAMES = ("scenario1", "scenario2", "scenario3", "scenario4")

# Cost weighting scenarios: scalarization weights [w_r, w_c0, w_c1, w_c2]
# for the weighted planner, budget thresholds [d_c0, d_c1, d_c2] for the
# constrained planner. Scenario 1 only avoids collisions; 2 adds a power
# budget; 3 caps intrusiveness instead; 4 limits everything at once.
SCENARIO_TABLE = {
    "scenario1": {"weights": [0.67, 0.33, 0.0, 0.0], "thresholds": [1.0, 180.0, 180.0]},
    "scenario2": {"weights": [0.33, 0.41, 0.0, 0.26], "thresholds": [1.0, 180.0, 40.0]},
    "scenario3": {"weights": [0.35, 0.43, 0.22, 0.0], "thresholds": [1.0, 20.0, 180.0]},
    "scenario4": {"weights": [0.27, 0.34, 0.17, 0.22], "thresholds": [1.0, 20.0, 40.0]},
}

HANDRAIL_IDS = (0, 5, 6, 11)

# Human body defaults shared by the task templates.
HEAD_OFFSET = [0.0, 0.0, 0.35]
WORKSPACE_OFFSET = [0.45, 0.0, 0.15]
WORKSPACE_HALF_EXTENTS = [0.35, 0.45, 0.75]
POSITION_STDDEV = [0.1, 0.1, 0.05]


def default_waypoints() -> list[dict]:
    """3 x 2 x 2 lattice spanning the module, handrails on four corners."""
    waypoints = []
    idx = 0
    for x in (1.0, 5.0, 9.0):
        for y in (-1.5, 1.5):
            for z in (-1.3, 1.3):
                waypoints.append(
                    {
                        "position": [x, y, z],
                        "handrail": idx in HANDRAIL_IDS,
                    }
                )
                idx += 1
    return waypoints


def _yaw_quat(yaw_deg: float) -> list[float]:
    half = math.radians(yaw_deg) / 2.0
    return [math.cos(half), 0.0, 0.0, math.sin(half)]


def _segment(position, yaw_deg, duration_mean, duration_stddev, motion) -> dict:
    return {
        "position": list(position),
        "orientation": _yaw_quat(yaw_deg),
        "head_offset": list(HEAD_OFFSET),
        "workspace_offset": list(WORKSPACE_OFFSET),
        "workspace_half_extents": list(WORKSPACE_HALF_EXTENTS),
        "position_stddev": list(POSITION_STDDEV),
        "duration_mean": duration_mean,
        "duration_stddev": duration_stddev,
        "motion": motion,
    }


def _dwell(position, yaw_deg, duration_mean, duration_stddev) -> dict:
    return _segment(position, yaw_deg, duration_mean, duration_stddev, "dwell")


def _walk(position, yaw_deg, duration_mean, duration_stddev) -> dict:
    return _segment(position, yaw_deg, duration_mean, duration_stddev, "linear_move_to_next")


def _experiment_task() -> list[dict]:
    # Three experiment stations held for long dwells, short walks between.
    a, b, c = (4.8, -1.0, 0.0), (6.5, 1.0, 0.3), (8.4, 0.0, -0.6)
    return [
        _dwell(a, -90.0, 50.0, 8.0),
        _walk(a, 0.0, 8.0, 2.0),
        _dwell(b, 90.0, 50.0, 8.0),
        _walk(b, 0.0, 8.0, 2.0),
        _dwell(c, 0.0, 64.0, 10.0),
    ]


def _inspection_task() -> list[dict]:
    # A continuous sweep along the far wall, in motion nearly throughout.
    path = [
        (4.5, -1.0, 0.6),
        (5.4, -1.1, -0.5),
        (6.3, -0.9, 0.6),
        (7.2, -1.1, -0.5),
        (8.2, -0.9, 0.5),
        (8.9, -1.0, -0.3),
    ]
    segments = [_walk(p, -90.0, 34.0, 6.0) for p in path[:-1]]
    segments.append(_dwell(path[-1], -90.0, 10.0, 2.0))
    return segments


def _transfer_task() -> list[dict]:
    # Two pick-up points and a drop-off, cycled over long carries.
    pick_a, drop, pick_b = (6.2, -1.2, 0.0), (8.6, 0.8, 0.2), (4.6, 1.2, -0.4)
    return [
        _dwell(pick_a, -90.0, 10.0, 2.0),
        _walk(pick_a, 0.0, 14.0, 3.0),
        _dwell(drop, 90.0, 7.0, 2.0),
        _walk(drop, 0.0, 14.0, 3.0),
        _dwell(pick_b, 90.0, 10.0, 2.0),
        _walk(pick_b, 0.0, 14.0, 3.0),
        _dwell(drop, 90.0, 7.0, 2.0),
        _walk(drop, 0.0, 14.0, 3.0),
        _dwell(pick_a, -90.0, 10.0, 2.0),
        _walk(pick_a, 0.0, 14.0, 3.0),
        _dwell(drop, 90.0, 7.0, 2.0),
        _walk(drop, 0.0, 14.0, 3.0),
        _dwell(pick_b, 90.0, 10.0, 2.0),
        _walk(pick_b, 0.0, 14.0, 3.0),
        _dwell(drop, 90.0, 21.0, 3.0),
    ]


_TASKS = {
    "experiment": _experiment_task,
    "inspection": _inspection_task,
    "transfer": _transfer_task,
}


def task_template(name: str) -> dict:
    if name not in _TASKS:
        raise KeyError(f"unknown task template {name!r}; choose from {TASK_NAMES}")
    return {"name": name, "orientation_stddev": 0.1, "segments": _TASKS[name]()}


def scenario_template(name: str) -> dict:
    if name not in SCENARIO_TABLE:
        raise KeyError(f"unknown scenario {name!r}; choose from {SCENARIO_NAMES}")
    entry = SCENARIO_TABLE[name]
    return {
        "name": name,
        "weights": list(entry["weights"]),
        "thresholds": list(entry["thresholds"]),
    }
