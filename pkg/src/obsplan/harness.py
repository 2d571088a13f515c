"""Rollout evaluation: execute solved policies against realized trajectories.

A rollout walks the time-expanded model from the initial state, sampling
action outcomes and durations (and actions, for stochastic policies), and
accrues the reward/cost rates of the *evaluation* trajectory's exact rate
table, epoch by epoch, truncated at the horizon. Aggregation pools all
(trajectory, run) rollouts of a cell and reports mean and standard
deviation per component, with an optional known-trajectory baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cmdp import ConstraintThresholds, StochasticPolicy, solve_cmdp
from .momdp import DeterministicPolicy
from .smdp import Action, ObservationModel, RobotState, TimeExpandedGraph, time_expand
from .trajectory import RateTable, rate_layout

ROLLOUT_STREAM = 3  # rng namespace separating rollouts from trajectory draws


@dataclass(frozen=True, eq=False)
class RunResult:
    task: str
    scenario: str
    method: str
    eval_trajectory_index: int
    run_index: int
    totals: np.ndarray  # accumulated [r, c0, c1, c2]
    action_trace: tuple[tuple[int, RobotState, Action], ...]


@dataclass(frozen=True, eq=False)
class AggregateResult:
    task: str
    scenario: str
    method: str
    n_runs: int
    mean: np.ndarray
    stddev: np.ndarray
    baseline: np.ndarray | None = None


@dataclass(frozen=True, eq=False)
class EvalCell:
    """One (task, scenario, method) evaluation unit."""

    task: str
    scenario: str
    method: str
    model: ObservationModel
    policy: DeterministicPolicy | StochasticPolicy
    eval_rates: tuple[RateTable, ...]
    baseline: np.ndarray | None = None
    graph: TimeExpandedGraph | None = field(default=None, compare=False)


def _sample_index(probabilities, rng) -> int:
    u = rng.random()
    acc = 0.0
    last = 0
    for i, p in enumerate(probabilities):
        if p <= 0.0:
            continue
        acc += p
        last = i
        if u < acc:
            return i
    return last


def rollout(
    model: ObservationModel,
    policy: DeterministicPolicy | StochasticPolicy,
    eval_rates: RateTable,
    rng: np.random.Generator,
    graph: TimeExpandedGraph | None = None,
    task: str = "",
    scenario: str = "",
    method: str = "",
    eval_trajectory_index: int = 0,
    run_index: int = 0,
) -> RunResult:
    """Simulate one episode against a realized trajectory's rate table."""
    if graph is None:
        graph = time_expand(model)
    if eval_rates.layout != rate_layout(graph):
        raise ValueError("evaluation rate table does not match the model layout")
    if policy.horizon != model.horizon:
        raise ValueError("policy horizon does not match the model")
    stacked = eval_rates.stacked

    stochastic = isinstance(policy, StochasticPolicy)
    t = 0
    si = graph.state_index[model.initial]
    totals = np.zeros(4)
    trace: list[tuple[int, RobotState, Action]] = []
    while t < model.horizon:
        if stochastic:
            ai = _sample_index(policy.distributions[t, si], rng)
        else:
            ai = int(policy.action_indices[t, si])
        trace.append((t, graph.states[si], graph.actions[si][ai]))
        edges = graph.edges[t][si][ai]
        if len(edges) == 1:
            edge = edges[0]
        else:
            edge = edges[_sample_index([e.probability for e in edges], rng)]
        totals += stacked[t, si, ai] * edge.duration
        t += edge.duration
        si = edge.next_index
    return RunResult(
        task, scenario, method, eval_trajectory_index, run_index, totals, tuple(trace)
    )


def run_matrix(
    cells: list[EvalCell], n_runs: int, seed: int
) -> tuple[list[RunResult], list[AggregateResult]]:
    """``n_runs`` rollouts per evaluation trajectory for every cell.

    Rollout randomness is keyed by (seed, cell, trajectory, run) so results
    are reproducible and independent of execution order.
    """
    if n_runs < 1 or not cells:
        raise ValueError("need at least one cell and one run")
    runs: list[RunResult] = []
    aggregates: list[AggregateResult] = []
    for cell_index, cell in enumerate(cells):
        graph = cell.graph if cell.graph is not None else time_expand(cell.model)
        cell_runs: list[RunResult] = []
        for traj_index, rates in enumerate(cell.eval_rates):
            for run_index in range(n_runs):
                rng = np.random.default_rng(
                    [seed, ROLLOUT_STREAM, cell_index, traj_index, run_index]
                )
                cell_runs.append(
                    rollout(
                        cell.model,
                        cell.policy,
                        rates,
                        rng,
                        graph,
                        task=cell.task,
                        scenario=cell.scenario,
                        method=cell.method,
                        eval_trajectory_index=traj_index,
                        run_index=run_index,
                    )
                )
        totals = np.array([r.totals for r in cell_runs])
        stddev = totals.std(axis=0, ddof=1) if len(cell_runs) > 1 else np.zeros(4)
        aggregates.append(
            AggregateResult(
                task=cell.task,
                scenario=cell.scenario,
                method=cell.method,
                n_runs=len(cell_runs),
                mean=totals.mean(axis=0),
                stddev=stddev,
                baseline=cell.baseline,
            )
        )
        runs.extend(cell_runs)
    return runs, aggregates


def known_trajectory_baseline(
    model: ObservationModel,
    eval_rates: tuple[RateTable, ...],
    thresholds: ConstraintThresholds,
    graph: TimeExpandedGraph | None = None,
) -> np.ndarray:
    """Budget-respecting optimum given each trajectory exactly, averaged.

    Solves the constrained program over each evaluation trajectory's exact
    rates; for slack budgets this reduces to plain reward maximization.
    """
    if graph is None:
        graph = time_expand(model)
    values = [
        solve_cmdp(model, rates, thresholds, graph).expected_value
        for rates in eval_rates
    ]
    return np.mean(values, axis=0)


def _fmt(value: float) -> str:
    return format(float(value), ".10g")


RUNS_HEADER = "task,scenario,method,traj_index,run_index,r,c0,c1,c2,wall_time_ms"
AGGREGATES_HEADER = (
    "task,scenario,method,n_runs,"
    "mean_r,mean_c0,mean_c1,mean_c2,std_r,std_c0,std_c1,std_c2,"
    "baseline_r,baseline_c0,baseline_c1,baseline_c2"
)


def write_runs_csv(path, runs: list[RunResult]) -> None:
    """Per-run totals. The wall_time_ms column is fixed at 0 because output
    files are byte-reproducible under a fixed seed; solver and harness wall
    times live in the run metadata instead."""
    with open(path, "w") as fh:
        fh.write(RUNS_HEADER + "\n")
        for r in runs:
            vals = ",".join(_fmt(v) for v in r.totals)
            fh.write(
                f"{r.task},{r.scenario},{r.method},"
                f"{r.eval_trajectory_index},{r.run_index},{vals},0\n"
            )


def write_aggregates_csv(path, aggregates: list[AggregateResult]) -> None:
    with open(path, "w") as fh:
        fh.write(AGGREGATES_HEADER + "\n")
        for a in aggregates:
            mean = ",".join(_fmt(v) for v in a.mean)
            std = ",".join(_fmt(v) for v in a.stddev)
            if a.baseline is None:
                base = ",,,"
            else:
                base = ",".join(_fmt(v) for v in a.baseline)
            fh.write(
                f"{a.task},{a.scenario},{a.method},{a.n_runs},{mean},{std},{base}\n"
            )
