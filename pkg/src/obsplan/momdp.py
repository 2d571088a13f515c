"""Scalarized multi-objective planning by exact backwards induction.

The reward/cost 4-vector is collapsed to a single objective with fixed
non-negative weights (costs entering negatively), then the time-expanded
model is solved backwards from the final epoch. Multi-epoch actions accrue
their start-epoch rates for every epoch of their (horizon-truncated)
duration, matching the rate-times-duration semi-Markov objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .smdp import Action, ObservationModel, RobotState, TimeExpandedGraph, time_expand
from .trajectory import RateTable, rate_layout


@dataclass(frozen=True)
class ScalarizationWeights:
    w_r: float
    w_c0: float = 0.0
    w_c1: float = 0.0
    w_c2: float = 0.0

    def __post_init__(self):
        vals = (self.w_r, self.w_c0, self.w_c1, self.w_c2)
        if any(v < 0.0 for v in vals):
            raise ValueError("scalarization weights must be non-negative")
        if all(v == 0.0 for v in vals):
            raise ValueError("at least one scalarization weight must be positive")

    def signed(self) -> np.ndarray:
        """Weight vector with cost signs applied: [w_r, -w_c0, -w_c1, -w_c2]."""
        return np.array([self.w_r, -self.w_c0, -self.w_c1, -self.w_c2])


def scalarize(rates, weights: ScalarizationWeights) -> float:
    """Linear scalarization of a [reward, c0, c1, c2] rate vector."""
    rates = np.asarray(rates, dtype=float)
    if rates.shape != (4,):
        raise ValueError("expected a 4-vector of rates")
    return float(weights.signed() @ rates)


@dataclass(frozen=True, eq=False)
class DeterministicPolicy:
    """Time-indexed deterministic policy with its value tables.

    ``action_indices[t, s]`` selects into the canonical per-state action
    list; ``utility`` is the scalarized optimal value-to-go and ``values``
    the unscalarized expected remaining [r, c0, c1, c2], both with a zero
    row at the horizon.
    """

    states: tuple[RobotState, ...]
    actions: tuple[tuple[Action, ...], ...]
    action_indices: np.ndarray  # (horizon, n_states) int
    utility: np.ndarray  # (horizon + 1, n_states)
    values: np.ndarray  # (horizon + 1, n_states, 4)
    weights: ScalarizationWeights

    @property
    def horizon(self) -> int:
        return self.action_indices.shape[0]

    def action_at(self, epoch: int, state_index: int) -> Action:
        return self.actions[state_index][self.action_indices[epoch, state_index]]


def _check_inputs(model: ObservationModel, rates: RateTable, graph: TimeExpandedGraph):
    if rates.horizon != model.horizon:
        raise ValueError(
            f"rate table horizon {rates.horizon} does not match model horizon {model.horizon}"
        )
    if rates.layout != rate_layout(graph):
        raise ValueError("rate table was built for a different state/action layout")


def solve_momdp(
    model: ObservationModel,
    rates: RateTable,
    weights: ScalarizationWeights,
    graph: TimeExpandedGraph | None = None,
) -> DeterministicPolicy:
    """Exact dynamic program backwards from the horizon.

    Argmax ties break toward the earlier action in canonical order, so the
    result is reproducible.
    """
    if graph is None:
        graph = time_expand(model)
    _check_inputs(model, rates, graph)
    horizon, n_states = model.horizon, len(graph.states)

    rate_vectors = rates.stacked
    scalar_rates = rate_vectors @ weights.signed()

    utility = np.zeros((horizon + 1, n_states))
    values = np.zeros((horizon + 1, n_states, 4))
    action_indices = np.zeros((horizon, n_states), dtype=int)

    for t in range(horizon - 1, -1, -1):
        for si in range(n_states):
            best_q = -np.inf
            best_ai = 0
            for ai in range(len(graph.actions[si])):
                q = scalar_rates[t, si, ai] * graph.expected_durations[t, si, ai]
                for e in graph.edges[t][si][ai]:
                    q += e.probability * utility[t + e.duration, e.next_index]
                if q > best_q:
                    best_q, best_ai = q, ai
            action_indices[t, si] = best_ai
            utility[t, si] = best_q
            vec = rate_vectors[t, si, best_ai] * graph.expected_durations[t, si, best_ai]
            for e in graph.edges[t][si][best_ai]:
                vec = vec + e.probability * values[t + e.duration, e.next_index]
            values[t, si] = vec

    return DeterministicPolicy(
        states=graph.states,
        actions=graph.actions,
        action_indices=action_indices,
        utility=utility,
        values=values,
        weights=weights,
    )


def policy_value(
    model: ObservationModel,
    rates: RateTable,
    policy: DeterministicPolicy,
    graph: TimeExpandedGraph | None = None,
) -> np.ndarray:
    """Expected accumulated [r, c0, c1, c2] from the start, by forward pass."""
    if graph is None:
        graph = time_expand(model)
    _check_inputs(model, rates, graph)
    if policy.horizon != model.horizon:
        raise ValueError("policy horizon does not match the model")

    rate_vectors = rates.stacked
    n_states = len(graph.states)
    mass = np.zeros((model.horizon + 1, n_states))
    mass[0, graph.state_index[model.initial]] = 1.0
    totals = np.zeros(4)
    for t in range(model.horizon):
        for si in np.flatnonzero(mass[t] > 0.0):
            m = mass[t, si]
            ai = policy.action_indices[t, si]
            totals += m * rate_vectors[t, si, ai] * graph.expected_durations[t, si, ai]
            for e in graph.edges[t][si][ai]:
                mass[t + e.duration, e.next_index] += m * e.probability
    return totals


def write_policy(path, policy: DeterministicPolicy) -> None:
    """One record per (epoch, state): chosen action and remaining 4-vector."""
    with open(path, "w") as fh:
        fh.write("# deterministic time-indexed policy\n")
        fh.write(f"# horizon {policy.horizon} states {len(policy.states)}\n")
        fh.write("# columns: epoch waypoint perched action value_r value_c0 value_c1 value_c2\n")
        for t in range(policy.horizon):
            for si, state in enumerate(policy.states):
                action = policy.action_at(t, si)
                vals = " ".join(format(v, ".10g") for v in policy.values[t, si])
                fh.write(f"{t} {state.waypoint} {int(state.perched)} {action} {vals}\n")
