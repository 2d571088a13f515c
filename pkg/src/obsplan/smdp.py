"""Semi-Markov decision model for waypoint-based observation planning.

The robot occupies one waypoint of a fixed graph and may additionally be
perched on a handrail. Actions take whole-epoch durations drawn from
per-action distributions (one decision epoch = one second); transitions are
deterministic in outcome but stochastic in duration. ``time_expand`` unrolls
the model over a finite horizon, truncating any transition that would land
past the final epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

Vec3 = tuple[float, float, float]

ACTION_HOLD = "hold_pos"
ACTION_PERCH = "perch"
ACTION_UNPERCH = "unperch"
ACTION_MOVE = "move"

ACTION_KINDS = (ACTION_HOLD, ACTION_PERCH, ACTION_UNPERCH, ACTION_MOVE)

DEFAULT_MOVE_SPEED = 0.25  # m/s
DEFAULT_PERCH_EPOCHS = 3


class ModelError(ValueError):
    """The model or a queried state violates a structural invariant."""


@dataclass(frozen=True)
class Waypoint:
    id: int
    position: Vec3
    has_handrail: bool = False

    def position_array(self) -> np.ndarray:
        return np.asarray(self.position, dtype=float)


@dataclass(frozen=True)
class RobotState:
    waypoint: int
    perched: bool = False

    def label(self) -> str:
        return f"w{self.waypoint}{'+perched' if self.perched else ''}"


@dataclass(frozen=True)
class WorldState:
    robot: RobotState
    epoch: int


@dataclass(frozen=True)
class Action:
    """One of hold_pos, perch, unperch, or move(target waypoint)."""

    kind: str
    target: int | None = None

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ModelError(f"unknown action kind {self.kind!r}")
        if self.kind == ACTION_MOVE:
            if self.target is None:
                raise ModelError("move action requires a target waypoint")
        elif self.target is not None:
            raise ModelError(f"{self.kind} action takes no target")

    def __str__(self) -> str:
        if self.kind == ACTION_MOVE:
            return f"move({self.target})"
        return self.kind


HOLD_POS = Action(ACTION_HOLD)
PERCH = Action(ACTION_PERCH)
UNPERCH = Action(ACTION_UNPERCH)


def move_to(target: int) -> Action:
    return Action(ACTION_MOVE, target)


def parse_action(text: str) -> Action:
    """Inverse of ``str(action)``, used by policy/trace file readers."""
    text = text.strip()
    if text.startswith("move(") and text.endswith(")"):
        return move_to(int(text[5:-1]))
    for kind, action in ((ACTION_HOLD, HOLD_POS), (ACTION_PERCH, PERCH), (ACTION_UNPERCH, UNPERCH)):
        if text == kind:
            return action
    raise ModelError(f"unparseable action {text!r}")


@dataclass(frozen=True)
class DurationDistribution:
    """Discrete distribution over whole-epoch action durations (>= 1)."""

    support: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.support:
            raise ModelError("duration distribution needs at least one entry")
        entries = sorted((int(d), float(p)) for d, p in self.support)
        durations = [d for d, _ in entries]
        if len(set(durations)) != len(durations):
            raise ModelError("duplicate durations in distribution support")
        total = 0.0
        for d, p in entries:
            if d < 1:
                raise ModelError(f"duration {d} is below one epoch")
            if not 0.0 <= p <= 1.0 + 1e-12:
                raise ModelError(f"duration probability {p} outside [0, 1]")
            total += p
        if abs(total - 1.0) > 1e-9:
            raise ModelError(f"duration probabilities sum to {total}, not 1")
        object.__setattr__(self, "support", tuple(entries))

    @classmethod
    def fixed(cls, epochs: int) -> "DurationDistribution":
        return cls(((epochs, 1.0),))

    @classmethod
    def of(cls, table: Mapping[int, float]) -> "DurationDistribution":
        return cls(tuple(table.items()))

    def expected(self) -> float:
        return sum(d * p for d, p in self.support)

    @cached_property
    def _cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        durations = np.array([d for d, _ in self.support], dtype=int)
        cum = np.cumsum([p for _, p in self.support])
        cum[-1] = 1.0
        return durations, cum

    def sample(self, rng: np.random.Generator) -> int:
        durations, cum = self._cumulative
        return int(durations[np.searchsorted(cum, rng.random(), side="right")])


HOLD_DURATION = DurationDistribution.fixed(1)


@dataclass(frozen=True)
class Outcome:
    next_state: RobotState
    probability: float
    durations: DurationDistribution


@dataclass(frozen=True, eq=False)
class TransitionModel:
    """Action outcomes: deterministic next state, stochastic duration.

    ``move_durations`` maps ordered waypoint-id pairs to the duration
    distribution of that traversal. Perch/unperch durations are shared by
    all handrail waypoints; hold_pos always lasts exactly one epoch.
    """

    move_durations: Mapping[tuple[int, int], DurationDistribution]
    perch_duration: DurationDistribution = field(
        default_factory=lambda: DurationDistribution.fixed(DEFAULT_PERCH_EPOCHS)
    )
    unperch_duration: DurationDistribution = field(
        default_factory=lambda: DurationDistribution.fixed(DEFAULT_PERCH_EPOCHS)
    )

    def outcomes(self, state: RobotState, action: Action) -> tuple[Outcome, ...]:
        if action.kind == ACTION_HOLD:
            return (Outcome(state, 1.0, HOLD_DURATION),)
        if action.kind == ACTION_PERCH:
            return (Outcome(RobotState(state.waypoint, True), 1.0, self.perch_duration),)
        if action.kind == ACTION_UNPERCH:
            return (Outcome(RobotState(state.waypoint, False), 1.0, self.unperch_duration),)
        key = (state.waypoint, action.target)
        if key not in self.move_durations:
            raise ModelError(f"no move duration configured for waypoints {key}")
        return (Outcome(RobotState(action.target, False), 1.0, self.move_durations[key]),)


def default_move_durations(
    waypoints: Iterable[Waypoint], speed: float = DEFAULT_MOVE_SPEED
) -> dict[tuple[int, int], DurationDistribution]:
    """Two-point travel-time distributions from straight-line distances.

    ceil(dist/speed) epochs with probability 0.6, one epoch more with 0.4.
    """
    wps = list(waypoints)
    table: dict[tuple[int, int], DurationDistribution] = {}
    for a in wps:
        pa = a.position_array()
        for b in wps:
            if a.id == b.id:
                continue
            base = max(1, math.ceil(float(np.linalg.norm(pa - b.position_array())) / speed))
            table[(a.id, b.id)] = DurationDistribution.of({base: 0.6, base + 1: 0.4})
    return table


@dataclass(frozen=True, eq=False)
class ObservationModel:
    """The full decision model: waypoint graph, transitions, horizon, start."""

    waypoints: tuple[Waypoint, ...]
    transition: TransitionModel
    horizon: int
    initial: RobotState

    def __post_init__(self):
        ids = [w.id for w in self.waypoints]
        if ids != list(range(len(ids))) or not ids:
            raise ModelError("waypoint ids must be contiguous from 0")
        if self.horizon < 1:
            raise ModelError("horizon must be at least one epoch")
        self._check_state(self.initial)
        for a in self.waypoints:
            for b in self.waypoints:
                if a.id != b.id and (a.id, b.id) not in self.transition.move_durations:
                    raise ModelError(f"missing move duration for pair ({a.id}, {b.id})")

    def _check_state(self, state: RobotState) -> None:
        if not 0 <= state.waypoint < len(self.waypoints):
            raise ModelError(f"waypoint {state.waypoint} outside the graph")
        if state.perched and not self.waypoints[state.waypoint].has_handrail:
            raise ModelError(f"state {state} is perched at a waypoint without a handrail")

    def waypoint_of(self, state: RobotState) -> Waypoint:
        return self.waypoints[state.waypoint]


def make_model(
    waypoints: Iterable[Waypoint],
    horizon: int,
    initial: RobotState | None = None,
    move_speed: float = DEFAULT_MOVE_SPEED,
    move_durations: Mapping[tuple[int, int], DurationDistribution] | None = None,
    perch_epochs: int = DEFAULT_PERCH_EPOCHS,
) -> ObservationModel:
    wps = tuple(waypoints)
    if move_durations is None:
        move_durations = default_move_durations(wps, move_speed)
    transition = TransitionModel(
        move_durations=dict(move_durations),
        perch_duration=DurationDistribution.fixed(perch_epochs),
        unperch_duration=DurationDistribution.fixed(perch_epochs),
    )
    return ObservationModel(wps, transition, horizon, initial or RobotState(0, False))


def available_actions(model: ObservationModel, state: RobotState) -> tuple[Action, ...]:
    """Legal actions in canonical order: hold, perch, unperch, moves by id."""
    model._check_state(state)
    if state.perched:
        return (HOLD_POS, UNPERCH)
    actions = [HOLD_POS]
    if model.waypoints[state.waypoint].has_handrail:
        actions.append(PERCH)
    actions.extend(move_to(w.id) for w in model.waypoints if w.id != state.waypoint)
    return tuple(actions)


def enumerate_states(model: ObservationModel) -> tuple[RobotState, ...]:
    """All robot states: per waypoint ascending, unperched before perched."""
    states: list[RobotState] = []
    for w in model.waypoints:
        states.append(RobotState(w.id, False))
        if w.has_handrail:
            states.append(RobotState(w.id, True))
    return tuple(states)


@dataclass(frozen=True)
class ExpandedEdge:
    """One (outcome, effective duration) branch of an action at some epoch."""

    next_index: int
    probability: float
    duration: int


class TimeExpandedGraph:
    """The model unrolled over epochs 0..horizon with duration truncation.

    Indexing is canonical and shared across solvers: states follow
    ``enumerate_states`` order, actions per state follow
    ``available_actions`` order. ``edges[t][s][a]`` lists merged
    (next-state, probability, effective-duration) branches where the
    effective duration is clamped so no edge lands past the horizon.
    """

    def __init__(self, model: ObservationModel):
        self.model = model
        self.horizon = model.horizon
        self.states = enumerate_states(model)
        self.state_index = {s: i for i, s in enumerate(self.states)}
        self.actions = tuple(available_actions(model, s) for s in self.states)
        self.max_actions = max(len(a) for a in self.actions)

        n_states = len(self.states)
        horizon = self.horizon
        # Raw branches per (state, action); truncation only depends on the
        # remaining epochs, so variants are cached per remaining time.
        raw: list[list[list[tuple[int, float, int]]]] = []
        for si, s in enumerate(self.states):
            per_action = []
            for a in self.actions[si]:
                branches = []
                for outcome in model.transition.outcomes(s, a):
                    ni = self.state_index[outcome.next_state]
                    for d, p in outcome.durations.support:
                        branches.append((ni, outcome.probability * p, d))
                per_action.append(branches)
            raw.append(per_action)

        variant_cache: dict[tuple[int, int, int], tuple[ExpandedEdge, ...]] = {}

        def variant(si: int, ai: int, remaining: int) -> tuple[ExpandedEdge, ...]:
            branches = raw[si][ai]
            cap = min(remaining, max(d for _, _, d in branches))
            key = (si, ai, cap)
            hit = variant_cache.get(key)
            if hit is not None:
                return hit
            merged: dict[tuple[int, int], float] = {}
            for ni, p, d in branches:
                eff = min(d, cap)
                merged[(ni, eff)] = merged.get((ni, eff), 0.0) + p
            edges = tuple(
                ExpandedEdge(ni, p, d) for (ni, d), p in sorted(merged.items())
            )
            variant_cache[key] = edges
            return edges

        self.edges: list[list[tuple[tuple[ExpandedEdge, ...], ...]]] = []
        self.expected_durations = np.zeros((horizon, n_states, self.max_actions))
        for t in range(horizon):
            row = []
            for si in range(n_states):
                cell = tuple(variant(si, ai, horizon - t) for ai in range(len(self.actions[si])))
                row.append(cell)
                for ai, edges in enumerate(cell):
                    self.expected_durations[t, si, ai] = sum(
                        e.probability * e.duration for e in edges
                    )
            self.edges.append(row)

    def edges_at(self, epoch: int, state: RobotState):
        """Spec-shaped view: (action, next state, probability, duration)."""
        si = self.state_index[state]
        out = []
        for ai, action in enumerate(self.actions[si]):
            for e in self.edges[epoch][si][ai]:
                out.append((action, self.states[e.next_index], e.probability, e.duration))
        return out

    @cached_property
    def reachable(self) -> np.ndarray:
        """Boolean (horizon+1, n_states): nodes reachable from the start."""
        mask = np.zeros((self.horizon + 1, len(self.states)), dtype=bool)
        mask[0, self.state_index[self.model.initial]] = True
        for t in range(self.horizon):
            for si in np.flatnonzero(mask[t]):
                for branches in self.edges[t][si]:
                    for e in branches:
                        mask[t + e.duration, e.next_index] = True
        return mask


def time_expand(model: ObservationModel) -> TimeExpandedGraph:
    return TimeExpandedGraph(model)
