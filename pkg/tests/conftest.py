import numpy as np
import pytest

from obsplan.smdp import RobotState, Waypoint, make_model, time_expand
from obsplan.trajectory import RateTable, rate_layout


def build_rates(graph, fn):
    """Rate table from a callable (t, state_idx, action_idx) -> 4 rates."""
    horizon, n_states, max_actions = graph.horizon, len(graph.states), graph.max_actions
    reward = np.zeros((horizon, n_states, max_actions))
    costs = tuple(np.zeros_like(reward) for _ in range(3))
    for t in range(horizon):
        for si in range(n_states):
            for ai in range(len(graph.actions[si])):
                r, c0, c1, c2 = fn(t, si, ai)
                reward[t, si, ai] = r
                costs[0][t, si, ai] = c0
                costs[1][t, si, ai] = c1
                costs[2][t, si, ai] = c2
    return RateTable(reward, costs, rate_layout(graph))


def random_rates(graph, rng):
    return build_rates(graph, lambda t, s, a: rng.uniform(0.0, 1.0, size=4))


def graph_edges_as_lists(graph):
    """Oracle-shaped edges: edges[t][s][a] = [(next_idx, prob, duration)]."""
    return [
        [
            [[(e.next_index, e.probability, e.duration) for e in branches]
             for branches in graph.edges[t][si]]
            for si in range(len(graph.states))
        ]
        for t in range(graph.horizon)
    ]


def scalar_rate_lists(graph, rates, weights):
    """Oracle-shaped scalarized rates: rates[t][s][a] floats."""
    signed = weights.signed()
    stacked = np.stack(
        [rates.reward, rates.costs[0], rates.costs[1], rates.costs[2]], axis=-1
    )
    scal = stacked @ signed
    return [
        [[float(scal[t, si, ai]) for ai in range(len(graph.actions[si]))]
         for si in range(len(graph.states))]
        for t in range(graph.horizon)
    ]


@pytest.fixture
def tiny_model():
    """Two waypoints, one handrail: three robot states."""
    wps = (
        Waypoint(0, (0.0, 0.0, 0.0), has_handrail=True),
        Waypoint(1, (0.5, 0.0, 0.0)),
    )
    return make_model(wps, horizon=6, initial=RobotState(0, False))


@pytest.fixture
def tiny_graph(tiny_model):
    return time_expand(tiny_model)


def random_small_instance(rng, max_policies=60_000):
    """A random model small enough for exhaustive policy enumeration.

    Returns (model, graph, rates, weights) with at most 4 robot states and
    horizon at most 6; the horizon is shrunk until the deterministic policy
    space fits under ``max_policies``.
    """
    from obsplan.momdp import ScalarizationWeights
    from obsplan.smdp import DurationDistribution
    import oracles

    n_wp = int(rng.integers(2, 4))
    handrail = int(rng.integers(0, n_wp)) if rng.random() < 0.6 else -1
    if n_wp == 3 and handrail >= 0:
        handrail = -1  # keep at most 4 states
    wps = tuple(
        Waypoint(i, tuple(rng.uniform(-2, 2, size=3)), has_handrail=(i == handrail))
        for i in range(n_wp)
    )
    move_durations = {}
    for a in range(n_wp):
        for b in range(n_wp):
            if a == b:
                continue
            base = int(rng.integers(1, 4))
            if rng.random() < 0.5:
                move_durations[(a, b)] = DurationDistribution.fixed(base)
            else:
                p = float(rng.uniform(0.2, 0.8))
                move_durations[(a, b)] = DurationDistribution.of({base: p, base + 1: 1 - p})
    horizon = int(rng.integers(3, 7))
    while horizon > 1:
        model = make_model(
            wps, horizon=horizon, initial=RobotState(0, False),
            move_durations=move_durations, perch_epochs=int(rng.integers(1, 3)),
        )
        graph = time_expand(model)
        edges = graph_edges_as_lists(graph)
        nodes = oracles._reachable_nodes(edges, horizon, graph.state_index[model.initial])
        count = 1
        for t, s in nodes:
            count *= len(edges[t][s])
            if count > max_policies:
                break
        if count <= max_policies:
            break
        horizon -= 1
    rates = random_rates(graph, rng)
    weights = ScalarizationWeights(
        w_r=float(rng.uniform(0.2, 1.0)),
        w_c0=float(rng.uniform(0.0, 0.8)),
        w_c1=float(rng.uniform(0.0, 0.8)) if rng.random() < 0.7 else 0.0,
        w_c2=float(rng.uniform(0.0, 0.8)) if rng.random() < 0.7 else 0.0,
    )
    return model, graph, rates, weights
