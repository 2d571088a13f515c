"""Constrained planning via the occupancy-measure linear program.

Instead of weighting costs, the constrained formulation maximizes expected
total reward subject to hard budgets on each expected total cost. The
time-expanded model becomes a flow LP over state-action occupancies; the
optimal occupancies are renormalized per (epoch, state) into a stochastic
policy, which is where budget-constrained optima genuinely need
randomization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lp import Constraint, LinearProgram, STATUS_INFEASIBLE, STATUS_UNBOUNDED, solve_lp
from .smdp import Action, ObservationModel, RobotState, TimeExpandedGraph, time_expand
from .trajectory import RateTable, rate_layout

COST_NAMES = ("c0", "c1", "c2")
OCCUPANCY_EPS = 1e-12


class ConstraintsUnsatisfiableError(RuntimeError):
    """No policy can satisfy the cost budgets.

    ``binding`` names the thresholds that are individually impossible, as
    found by one-constraint-at-a-time feasibility probes; an empty tuple
    means only the combination is unsatisfiable.
    """

    def __init__(self, message: str, binding: tuple[str, ...]):
        super().__init__(message)
        self.binding = binding


@dataclass(frozen=True)
class ConstraintThresholds:
    d_c0: float
    d_c1: float
    d_c2: float

    def __post_init__(self):
        vals = (self.d_c0, self.d_c1, self.d_c2)
        if any(not np.isfinite(v) or v < 0.0 for v in vals):
            raise ValueError("cost thresholds must be finite and non-negative")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.d_c0, self.d_c1, self.d_c2)


@dataclass(frozen=True, eq=False)
class StochasticPolicy:
    """Per-(epoch, state) action distributions plus the planned value.

    ``distributions[t, s, a]`` is the probability of the state's a-th
    canonical action; rows sum to one. ``expected_value`` is the planned
    accumulated [reward, c0, c1, c2] from the initial state.
    """

    states: tuple[RobotState, ...]
    actions: tuple[tuple[Action, ...], ...]
    distributions: np.ndarray  # (horizon, n_states, max_actions)
    expected_value: np.ndarray  # (4,)
    thresholds: ConstraintThresholds

    @property
    def horizon(self) -> int:
        return self.distributions.shape[0]

    def action_probabilities(self, epoch: int, state_index: int) -> list[tuple[Action, float]]:
        row = self.distributions[epoch, state_index]
        return [(a, float(row[ai])) for ai, a in enumerate(self.actions[state_index])]


class _OccupancyIndex:
    """Variable/row bookkeeping for the time-expanded flow LP."""

    def __init__(self, graph: TimeExpandedGraph):
        self.graph = graph
        start = graph.state_index[graph.model.initial]
        reachable = graph.reachable
        self.nodes: list[tuple[int, int]] = [
            (t, si)
            for t in range(graph.horizon)
            for si in range(len(graph.states))
            if reachable[t, si]
        ]
        self.node_id = {node: i for i, node in enumerate(self.nodes)}
        self.variables: list[tuple[int, int, int]] = []
        self.var_start = {}
        for t, si in self.nodes:
            self.var_start[(t, si)] = len(self.variables)
            for ai in range(len(graph.actions[si])):
                self.variables.append((t, si, ai))
        self.n_vars = len(self.variables)
        self.start_node = (0, start)

    def coefficient_vector(self, table: np.ndarray) -> np.ndarray:
        """Per-variable accumulated rate: rate[t,s,a] * expected duration."""
        out = np.zeros(self.n_vars)
        exp_dur = self.graph.expected_durations
        for v, (t, si, ai) in enumerate(self.variables):
            out[v] = table[t, si, ai] * exp_dur[t, si, ai]
        return out


def _flow_rows(index: _OccupancyIndex) -> list[Constraint]:
    graph = index.graph
    rows: list[dict[int, float]] = [dict() for _ in index.nodes]
    for v, (t, si, ai) in enumerate(index.variables):
        rows[index.node_id[(t, si)]][v] = rows[index.node_id[(t, si)]].get(v, 0.0) + 1.0
        for e in graph.edges[t][si][ai]:
            landing = (t + e.duration, e.next_index)
            if landing[0] < graph.horizon:
                row = rows[index.node_id[landing]]
                row[v] = row.get(v, 0.0) - e.probability
    constraints = []
    for node, row in zip(index.nodes, rows):
        cols = sorted(row)
        rhs = 1.0 if node == index.start_node else 0.0
        constraints.append(
            Constraint(tuple(cols), tuple(row[c] for c in cols), "=", rhs)
        )
    return constraints


def _build(
    model: ObservationModel,
    rates: RateTable,
    thresholds: ConstraintThresholds,
    graph: TimeExpandedGraph | None = None,
    include_costs: tuple[int, ...] = (0, 1, 2),
):
    if graph is None:
        graph = time_expand(model)
    if rates.horizon != model.horizon:
        raise ValueError("rate table horizon does not match the model")
    if rates.layout != rate_layout(graph):
        raise ValueError("rate table was built for a different state/action layout")

    index = _OccupancyIndex(graph)
    objective = index.coefficient_vector(rates.reward)
    cost_vectors = [index.coefficient_vector(rates.costs[k]) for k in range(3)]

    constraints = _flow_rows(index)
    budget = thresholds.as_tuple()
    for k in include_costs:
        cols = tuple(np.flatnonzero(cost_vectors[k]))
        constraints.append(
            Constraint(cols, tuple(cost_vectors[k][c] for c in cols), "<=", budget[k])
        )
    lp = LinearProgram(index.n_vars, objective, tuple(constraints))
    return lp, index, cost_vectors


def build_cmdp_lp(
    model: ObservationModel,
    rates: RateTable,
    thresholds: ConstraintThresholds,
    graph: TimeExpandedGraph | None = None,
) -> LinearProgram:
    """The occupancy LP: flow conservation plus three cost budget rows.

    One variable per reachable (epoch, state, action); unit mass enters at
    the initial node and flows through the time-expanded graph, with
    multi-epoch actions landing at their (truncated) completion epoch.
    """
    lp, _, _ = _build(model, rates, thresholds, graph)
    return lp


def _policy_cost_totals(index: _OccupancyIndex, choice, cost_vectors) -> np.ndarray:
    """Accumulated costs of a deterministic policy by forward propagation."""
    graph = index.graph
    mass = {index.start_node: 1.0}
    totals = np.zeros(len(cost_vectors))
    for node in index.nodes:
        m = mass.get(node)
        if not m:
            continue
        t, si = node
        ai = choice(t, si)
        v = index.var_start[node] + ai
        for k, vec in enumerate(cost_vectors):
            totals[k] += m * vec[v]
        for e in graph.edges[t][si][ai]:
            landing = (t + e.duration, e.next_index)
            if landing[0] < graph.horizon:
                mass[landing] = mass.get(landing, 0.0) + m * e.probability
    return totals


def _crash_hint(index: _OccupancyIndex, thresholds, cost_vectors, n_cost_rows):
    """A feasible starting basis from a trivially safe policy, if one fits.

    Tries perch-at-start-then-hold, then hold-forever. Any deterministic
    policy yields a nonsingular (triangular) flow basis; it is usable when
    its accumulated costs respect every budget so all cost slacks start
    non-negative.
    """
    graph = index.graph
    t0, s0 = index.start_node
    perch_ai = None
    for ai, action in enumerate(graph.actions[s0]):
        if action.kind == "perch":
            perch_ai = ai
            break

    candidates = []
    if perch_ai is not None:

        def perch_then_hold(t, si):
            if si == s0 and t == t0:
                return perch_ai
            # Once perched (or anywhere else), hold.
            return 0

        candidates.append(perch_then_hold)
    candidates.append(lambda t, si: 0)

    budget = thresholds.as_tuple()
    for choice in candidates:
        totals = _policy_cost_totals(index, choice, cost_vectors)
        if all(totals[k] <= budget[k] - 1e-9 for k in range(len(totals))):
            hint = [index.var_start[(t, si)] + choice(t, si) for t, si in index.nodes]
            hint.extend([-1] * n_cost_rows)
            return hint
    return None


def solve_cmdp(
    model: ObservationModel,
    rates: RateTable,
    thresholds: ConstraintThresholds,
    graph: TimeExpandedGraph | None = None,
) -> StochasticPolicy:
    """Solve the occupancy LP and renormalize y* into action distributions.

    States with zero total occupancy fall back to hold_pos so the policy is
    total. Raises ConstraintsUnsatisfiableError with per-threshold
    diagnostics when no policy fits the budgets.
    """
    if graph is None:
        graph = time_expand(model)
    lp, index, cost_vectors = _build(model, rates, thresholds, graph)
    hint = _crash_hint(index, thresholds, cost_vectors, n_cost_rows=3)
    solution = solve_lp(lp, basis_hint=hint)

    if solution.status == STATUS_UNBOUNDED:  # pragma: no cover - occupancies are bounded
        raise RuntimeError("occupancy program reported unbounded; model is corrupt")
    if solution.status == STATUS_INFEASIBLE:
        binding = []
        for k in range(3):
            probe, _, _ = _build(model, rates, thresholds, graph, include_costs=(k,))
            if solve_lp(probe).status == STATUS_INFEASIBLE:
                binding.append(COST_NAMES[k])
        names = ", ".join(binding) if binding else "the combination of thresholds"
        raise ConstraintsUnsatisfiableError(
            f"cost constraints unsatisfiable: no policy fits {names} "
            f"(d = {thresholds.as_tuple()})",
            tuple(binding),
        )

    y = np.maximum(solution.values, 0.0)
    horizon, n_states, max_actions = (
        graph.horizon,
        len(graph.states),
        graph.max_actions,
    )
    distributions = np.zeros((horizon, n_states, max_actions))
    distributions[:, :, 0] = 1.0  # default: hold_pos off the occupancy support
    for t, si in index.nodes:
        start = index.var_start[(t, si)]
        count = len(graph.actions[si])
        mass = y[start : start + count]
        total = float(mass.sum())
        if total > OCCUPANCY_EPS:
            distributions[t, si, :count] = mass / total
            distributions[t, si, count:] = 0.0

    reward_vec = index.coefficient_vector(rates.reward)
    expected = np.array(
        [float(reward_vec @ y)] + [float(cost_vectors[k] @ y) for k in range(3)]
    )
    return StochasticPolicy(
        states=graph.states,
        actions=graph.actions,
        distributions=distributions,
        expected_value=expected,
        thresholds=thresholds,
    )


def occupancy_residuals(lp: LinearProgram, values: np.ndarray) -> float:
    """Largest flow-conservation violation of a candidate occupancy vector."""
    worst = 0.0
    for row in lp.constraints:
        if row.relation != "=":
            continue
        lhs = sum(v * values[j] for j, v in zip(row.indices, row.values))
        worst = max(worst, abs(lhs - row.rhs))
    return worst


def expected_value_under(rates: RateTable, policy: StochasticPolicy, graph) -> np.ndarray:
    """Forward-evaluate a stochastic policy against a rate table."""
    stacked = rates.stacked
    horizon, n_states = graph.horizon, len(graph.states)
    mass = np.zeros((horizon + 1, n_states))
    mass[0, graph.state_index[graph.model.initial]] = 1.0
    totals = np.zeros(4)
    for t in range(horizon):
        for si in np.flatnonzero(mass[t] > 0.0):
            m = mass[t, si]
            for ai in range(len(graph.actions[si])):
                pa = policy.distributions[t, si, ai]
                if pa == 0.0:
                    continue
                totals += m * pa * stacked[t, si, ai] * graph.expected_durations[t, si, ai]
                for e in graph.edges[t][si][ai]:
                    mass[t + e.duration, e.next_index] += m * pa * e.probability
    return totals


def write_policy(path, policy: StochasticPolicy) -> None:
    """Records of (epoch, state, action, probability) with a value header."""
    with open(path, "w") as fh:
        fh.write("# stochastic time-indexed policy\n")
        ev = " ".join(format(v, ".10g") for v in policy.expected_value)
        fh.write(f"# expected_value {ev}\n")
        fh.write(f"# horizon {policy.horizon} states {len(policy.states)}\n")
        fh.write("# columns: epoch waypoint perched action probability\n")
        for t in range(policy.horizon):
            for si, state in enumerate(policy.states):
                for action, prob in policy.action_probabilities(t, si):
                    if prob <= 0.0:
                        continue
                    fh.write(
                        f"{t} {state.waypoint} {int(state.perched)} {action} "
                        f"{format(prob, '.10g')}\n"
                    )
