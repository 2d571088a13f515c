import numpy as np
import pytest

import oracles
from conftest import build_rates, graph_edges_as_lists, random_small_instance, scalar_rate_lists

from obsplan.momdp import (
    ScalarizationWeights,
    policy_value,
    scalarize,
    solve_momdp,
    write_policy,
)
from obsplan.smdp import HOLD_POS, Waypoint, make_model, move_to, time_expand


class TestScalarize:
    def test_reward_only(self):
        w = ScalarizationWeights(1.0)
        assert scalarize([0.7, 0.9, 0.9, 1.0], w) == pytest.approx(0.7)

    def test_collision_weighted(self):
        w = ScalarizationWeights(0.67, 0.33, 0.0, 0.0)
        assert scalarize([1.0, 1.0, 0.5, 0.5], w) == pytest.approx(0.34)

    def test_all_zero_rates(self):
        w = ScalarizationWeights(0.27, 0.34, 0.17, 0.22)
        assert scalarize([0.0, 0.0, 0.0, 0.0], w) == 0.0

    def test_weights_validated(self):
        with pytest.raises(ValueError):
            ScalarizationWeights(-0.1)
        with pytest.raises(ValueError):
            ScalarizationWeights(0.0, 0.0, 0.0, 0.0)


class TestOneStep:
    def test_picks_better_action(self):
        wps = (Waypoint(0, (0.0, 0.0, 0.0), has_handrail=True),)
        model = make_model(wps, horizon=1)
        graph = time_expand(model)
        # hold scores 0.3/s, perch (truncated to one epoch) scores 0.5/s.
        rates = build_rates(
            graph, lambda t, s, a: (0.3, 0.0, 0.0, 0.0) if a == 0 else (0.5, 0.0, 0.0, 0.0)
        )
        policy = solve_momdp(model, rates, ScalarizationWeights(1.0), graph)
        s0 = graph.state_index[model.initial]
        assert policy.action_at(0, s0).kind == "perch"
        assert policy.utility[0, s0] == pytest.approx(0.5)


class TestAgainstExhaustiveEnumeration:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        model, graph, rates, weights = random_small_instance(rng, max_policies=20_000)
        policy = solve_momdp(model, rates, weights, graph)

        edges = graph_edges_as_lists(graph)
        scal = scalar_rate_lists(graph, rates, weights)
        start = graph.state_index[model.initial]
        best_val, _ = oracles.exhaustive_best_policy(
            edges, scal, model.horizon, start, limit=20_000)

        assert policy.utility[0, start] == pytest.approx(best_val, abs=1e-9)
        # The solver's own policy must achieve the enumerated optimum.
        nodes = oracles._reachable_nodes(edges, model.horizon, start)
        choice = {(t, s): int(policy.action_indices[t, s]) for t, s in nodes}
        achieved = oracles.evaluate_policy_forward(
            edges, scal, model.horizon, start, choice)
        assert achieved == pytest.approx(best_val, abs=1e-9)


class TestClosedFormTwoWaypoint:
    def test_move_to_best_then_hold(self):
        # Static scalar landscape: waypoint 1 pays 1.0/s to hold, waypoint 0
        # pays 0.1/s; the move takes exactly 2 epochs and costs nothing.
        wps = (Waypoint(0, (0.0, 0.0, 0.0)), Waypoint(1, (0.5, 0.0, 0.0)))
        from obsplan.smdp import DurationDistribution
        model = make_model(
            wps, horizon=10,
            move_durations={k: DurationDistribution.fixed(2) for k in ((0, 1), (1, 0))},
        )
        graph = time_expand(model)

        def fn(t, s, a):
            action = graph.actions[s][a]
            if action == HOLD_POS:
                return (1.0 if s == 1 else 0.1, 0, 0, 0)
            return (0.0, 0, 0, 0)

        rates = build_rates(graph, fn)
        policy = solve_momdp(model, rates, ScalarizationWeights(1.0), graph)
        assert policy.action_at(0, 0) == move_to(1)
        for t in range(2, 10):
            assert policy.action_at(t, 1) == HOLD_POS
        # Hand analysis: two epochs in transit, eight epochs holding at 1.0.
        assert policy.utility[0, 0] == pytest.approx(8.0)


class TestProperties:
    def test_bellman_consistency(self):
        rng = np.random.default_rng(123)
        model, graph, rates, weights = random_small_instance(rng)
        policy = solve_momdp(model, rates, weights, graph)
        scal = scalar_rate_lists(graph, rates, weights)
        for t in range(model.horizon):
            for si in range(len(graph.states)):
                backups = []
                for ai in range(len(graph.actions[si])):
                    q = scal[t][si][ai] * graph.expected_durations[t, si, ai]
                    for e in graph.edges[t][si][ai]:
                        q += e.probability * policy.utility[t + e.duration, e.next_index]
                    backups.append(q)
                assert policy.utility[t, si] == pytest.approx(max(backups), abs=1e-9)

    def test_horizon_utility_is_zero(self):
        rng = np.random.default_rng(5)
        model, graph, rates, weights = random_small_instance(rng)
        policy = solve_momdp(model, rates, weights, graph)
        assert np.all(policy.utility[model.horizon] == 0.0)

    def test_utility_scalarizes_value_vector(self):
        rng = np.random.default_rng(17)
        model, graph, rates, weights = random_small_instance(rng)
        policy = solve_momdp(model, rates, weights, graph)
        recon = policy.values @ weights.signed()
        assert np.allclose(recon, policy.utility, atol=1e-6)

    def test_positive_scaling_leaves_argmax(self):
        rng = np.random.default_rng(29)
        model, graph, rates, weights = random_small_instance(rng)
        policy = solve_momdp(model, rates, weights, graph)
        scaled = ScalarizationWeights(
            3.7 * weights.w_r, 3.7 * weights.w_c0, 3.7 * weights.w_c1, 3.7 * weights.w_c2)
        policy2 = solve_momdp(model, rates, scaled, graph)
        assert np.array_equal(policy.action_indices, policy2.action_indices)
        assert np.allclose(policy2.utility, 3.7 * policy.utility, atol=1e-8)

    def test_increasing_reward_weight_never_lowers_reward(self):
        rng = np.random.default_rng(41)
        model, graph, rates, _ = random_small_instance(rng)
        base = ScalarizationWeights(0.3, 0.4, 0.2, 0.1)
        rewards = []
        for w_r in (0.3, 0.8, 2.0):
            w = ScalarizationWeights(w_r, base.w_c0, base.w_c1, base.w_c2)
            policy = solve_momdp(model, rates, w, graph)
            value = policy_value(model, rates, policy, graph)
            rewards.append(value[0])
        assert rewards[0] <= rewards[1] + 1e-9 <= rewards[2] + 2e-9


class TestPolicyValue:
    def test_hold_only_constant_rates(self, tiny_model, tiny_graph):
        rates = build_rates(tiny_graph, lambda t, s, a: (0.5, 0.2, 0.1, 0.25))
        # Force hold everywhere by making every other action terrible.
        def fn(t, s, a):
            if tiny_graph.actions[s][a] == HOLD_POS:
                return (0.5, 0.2, 0.1, 0.25)
            return (0.0, 1.0, 1.0, 1.0)
        rates = build_rates(tiny_graph, fn)
        policy = solve_momdp(tiny_model, rates, ScalarizationWeights(1.0, 1.0, 1.0, 1.0), tiny_graph)
        value = policy_value(tiny_model, rates, policy, tiny_graph)
        assert value == pytest.approx(tiny_model.horizon * np.array([0.5, 0.2, 0.1, 0.25]))

    def test_forward_value_matches_backward(self):
        for seed in (2, 11, 31):
            rng = np.random.default_rng(seed)
            model, graph, rates, weights = random_small_instance(rng)
            policy = solve_momdp(model, rates, weights, graph)
            value = policy_value(model, rates, policy, graph)
            s0 = graph.state_index[model.initial]
            assert np.allclose(value, policy.values[0, s0], atol=1e-9)
            assert scalarize(value, weights) == pytest.approx(
                policy.utility[0, s0], abs=1e-6)

    def test_horizon_mismatch_rejected(self, tiny_model, tiny_graph):
        rates = build_rates(tiny_graph, lambda t, s, a: (0.5, 0.2, 0.1, 0.25))
        other = make_model(tiny_model.waypoints, horizon=3)
        with pytest.raises(ValueError):
            solve_momdp(other, rates, ScalarizationWeights(1.0))


class TestSerialization:
    def test_policy_file_layout(self, tmp_path, tiny_model, tiny_graph):
        rates = build_rates(tiny_graph, lambda t, s, a: (0.5, 0.2, 0.1, 0.25))
        policy = solve_momdp(tiny_model, rates, ScalarizationWeights(1.0), tiny_graph)
        path = tmp_path / "policy.txt"
        write_policy(path, policy)
        lines = path.read_text().strip().splitlines()
        records = [ln for ln in lines if not ln.startswith("#")]
        assert len(records) == tiny_model.horizon * len(tiny_graph.states)
        first = records[0].split()
        assert len(first) == 4 + 4  # epoch waypoint perched action + 4 values
