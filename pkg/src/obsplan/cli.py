"""Command-line front end: plan, evaluate, and export batch experiments.

Verbs:
  solve        plan policies for every (task, scenario, method) cell
  evaluate     plan, roll out against held-out trajectories, aggregate, plot
  export-lp    dump each cell's occupancy LP in text interchange format
  sample-traj  dump sampled planning/evaluation trajectories as CSV

Artifacts are written atomically: everything lands in a staging directory
that is moved into place only on success. OBSPLAN_WORKERS controls how
many solver processes run in parallel (default 1).
"""

from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .cmdp import ConstraintsUnsatisfiableError, solve_cmdp, write_policy as write_cmdp_policy
from .config import ConfigError, ScenarioConfig, dump_config, load_config
from .harness import (
    EvalCell,
    run_matrix,
    write_aggregates_csv,
    write_runs_csv,
)
from .lp import write_lp_text
from .momdp import solve_momdp, write_policy as write_momdp_policy
from .smdp import time_expand
from .trajectory import (
    evaluation_trajectories,
    exact_rates,
    expected_rates,
    reward_normalization,
    sample_trajectory,
    write_trajectory_csv,
)

WORKERS_ENV = "OBSPLAN_WORKERS"


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obsplan",
        description="Viewpoint planning for autonomous observation robots.",
    )
    parser.add_argument("--version", action="version", version=f"obsplan {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb, handler in (
        ("solve", _cmd_solve),
        ("evaluate", _cmd_evaluate),
        ("export-lp", _cmd_export_lp),
        ("sample-traj", _cmd_sample_traj),
    ):
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help="scenario YAML file")
        p.add_argument("--out", default="results", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--horizon", type=int, default=None, help="override horizon (epochs)")
        p.add_argument(
            "--method", choices=("momdp", "cmdp", "both"), default=None,
            help="override planning method",
        )
        p.set_defaults(handler=handler)
    return parser


def _load_with_overrides(args) -> ScenarioConfig:
    config = load_config(args.config)
    canonical = dict(config.canonical)
    if args.seed is not None:
        canonical["seed"] = args.seed
    if args.horizon is not None:
        canonical["horizon"] = args.horizon
    if args.method is not None:
        canonical["method"] = args.method
    from .config import normalize

    return ScenarioConfig(normalize(canonical))


# ---------------------------------------------------------------------------
# Shared pipeline pieces
# ---------------------------------------------------------------------------

def _prepare_task(config, model, graph, camera, params, task):
    dist = config.build_distribution(task)
    norm = reward_normalization(model, dist)
    planning = expected_rates(
        model, dist, config.n_planning_samples, camera, params, norm, graph)
    eval_trajs = evaluation_trajectories(dist, config.n_eval_trajectories, model.horizon)
    eval_tables = tuple(
        exact_rates(model, traj, camera, params, norm, graph) for traj in eval_trajs
    )
    return {
        "name": task["name"],
        "dist": dist,
        "planning": planning,
        "eval_tables": eval_tables,
    }


def _solve_job(payload):
    """Worker: solve one planning cell (or one baseline trajectory)."""
    key, kind, model, rates, arg = payload
    start = time.perf_counter()
    graph = time_expand(model)
    if kind == "momdp":
        result = solve_momdp(model, rates, arg, graph)
    else:
        result = solve_cmdp(model, rates, arg, graph)
    elapsed_ms = (time.perf_counter() - start) * 1000.0
    return key, result, elapsed_ms


_BLAS_ENV = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _run_jobs(jobs, workers):
    if workers <= 1 or len(jobs) <= 1:
        return [_solve_job(j) for j in jobs]
    # Concurrent solver processes each get single-threaded BLAS; letting
    # every worker spin up its own thread pool oversubscribes the cores.
    saved = {key: os.environ.get(key) for key in _BLAS_ENV}
    for key in _BLAS_ENV:
        os.environ[key] = "1"
    try:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_solve_job, jobs))
    finally:
        for key, value in saved.items():
            if value is None:
                os.environ.pop(key, None)
            else:
                os.environ[key] = value


def _solve_cells(config, model, tasks, workers):
    """Solve every (task, scenario, method) cell; returns policies and timings."""
    jobs = []
    for task in tasks:
        for scenario in config.scenarios:
            for method in config.methods:
                if method == "momdp":
                    arg = ScenarioConfig.weights_of(scenario)
                else:
                    arg = ScenarioConfig.thresholds_of(scenario)
                key = (task["name"], scenario["name"], method)
                jobs.append((key, method, model, task["planning"], arg))
    results = _run_jobs(jobs, workers)
    policies = {key: policy for key, policy, _ in results}
    timings = {"|".join(key): ms for key, _, ms in results}
    return policies, timings


def _solve_baselines(config, model, tasks, workers):
    """Known-trajectory optima: constrained solve per evaluation trajectory."""
    jobs = []
    for task in tasks:
        for scenario in config.scenarios:
            if "thresholds" not in scenario:
                continue
            thresholds = ScenarioConfig.thresholds_of(scenario)
            for i, table in enumerate(task["eval_tables"]):
                key = (task["name"], scenario["name"], i)
                jobs.append((key, "cmdp", model, table, thresholds))
    results = _run_jobs(jobs, workers)
    per_cell: dict[tuple[str, str], list] = {}
    timings = {}
    for (task_name, scenario_name, i), policy, ms in results:
        per_cell.setdefault((task_name, scenario_name), []).append(
            (i, policy.expected_value))
        timings[f"{task_name}|{scenario_name}|baseline{i}"] = ms
    baselines = {
        key: np.mean([v for _, v in sorted(vals)], axis=0)
        for key, vals in per_cell.items()
    }
    return baselines, timings


def _plot_task(path, task_name, aggregates):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [a for a in aggregates if a.task == task_name]
    scenarios = sorted({a.scenario for a in rows})
    methods = sorted({a.method for a in rows})
    components = ["reward", "collision c0", "intrusion c1", "power c2"]
    fig, axes = plt.subplots(1, 4, figsize=(16, 4), sharey=False)
    width = 0.8 / max(1, len(methods))
    for ci, ax in enumerate(axes):
        for mi, method in enumerate(methods):
            xs, means, errs = [], [], []
            for si, scenario in enumerate(scenarios):
                match = [a for a in rows if a.scenario == scenario and a.method == method]
                if not match:
                    continue
                xs.append(si + (mi - (len(methods) - 1) / 2.0) * width)
                means.append(match[0].mean[ci])
                errs.append(match[0].stddev[ci])
            ax.bar(xs, means, width=width * 0.9, yerr=errs, capsize=3, label=method)
        for si, scenario in enumerate(scenarios):
            with_base = [a for a in rows if a.scenario == scenario and a.baseline is not None]
            if with_base:
                ax.plot(
                    [si - 0.4, si + 0.4],
                    [with_base[0].baseline[ci]] * 2,
                    color="black", linewidth=2.5,
                )
        ax.set_title(components[ci])
        ax.set_xticks(range(len(scenarios)))
        ax.set_xticklabels(scenarios, rotation=30, ha="right", fontsize=8)
    axes[0].set_ylabel("accumulated total")
    axes[0].legend(fontsize=8)
    fig.suptitle(f"task: {task_name}")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# Verbs
# ---------------------------------------------------------------------------

class _Staging:
    """Collect artifacts in a scratch dir; publish only on success."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.staging = os.path.join(out_dir, ".staging")

    def __enter__(self):
        os.makedirs(self.out_dir, exist_ok=True)
        if os.path.exists(self.staging):
            shutil.rmtree(self.staging)
        os.makedirs(self.staging)
        return self

    def path(self, name: str) -> str:
        return os.path.join(self.staging, name)

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            for name in sorted(os.listdir(self.staging)):
                os.replace(os.path.join(self.staging, name), os.path.join(self.out_dir, name))
            os.rmdir(self.staging)
        else:
            shutil.rmtree(self.staging, ignore_errors=True)
        return False


def _write_metadata(staging, config, timings, extra=None):
    payload = {
        "obsplan_version": __version__,
        "config": config.canonical,
        "timings_ms": timings,
        "stddev_pooling": "pooled over evaluation trajectories x runs per cell",
    }
    if extra:
        payload.update(extra)
    with open(staging.path("metadata.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_policies(staging, policies):
    for (task, scenario, method), policy in sorted(policies.items()):
        name = f"policy_{task}_{scenario}_{method}.txt"
        if method == "momdp":
            write_momdp_policy(staging.path(name), policy)
        else:
            write_cmdp_policy(staging.path(name), policy)


def _cmd_solve(args) -> int:
    config = _load_with_overrides(args)
    workers = _workers()
    model = config.build_model()
    graph = time_expand(model)
    camera, params = config.build_camera(), config.build_cost_params()
    with _Staging(args.out) as staging:
        tasks = [
            _prepare_task(config, model, graph, camera, params, t) for t in config.tasks
        ]
        policies, timings = _solve_cells(config, model, tasks, workers)
        _write_policies(staging, policies)
        _write_metadata(staging, config, timings)
        with open(staging.path("config.yaml"), "w") as fh:
            fh.write(dump_config(config))
    print(f"solved {len(policies)} cells -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    config = _load_with_overrides(args)
    workers = _workers()
    model = config.build_model()
    graph = time_expand(model)
    camera, params = config.build_camera(), config.build_cost_params()
    with _Staging(args.out) as staging:
        tasks = [
            _prepare_task(config, model, graph, camera, params, t) for t in config.tasks
        ]
        policies, timings = _solve_cells(config, model, tasks, workers)
        baselines = {}
        if config.baseline:
            baselines, baseline_timings = _solve_baselines(config, model, tasks, workers)
            timings.update(baseline_timings)

        cells = []
        for task in tasks:
            for scenario in config.scenarios:
                for method in config.methods:
                    key = (task["name"], scenario["name"], method)
                    cells.append(
                        EvalCell(
                            task=task["name"],
                            scenario=scenario["name"],
                            method=method,
                            model=model,
                            policy=policies[key],
                            eval_rates=task["eval_tables"],
                            baseline=baselines.get((task["name"], scenario["name"])),
                            graph=graph,
                        )
                    )
        runs, aggregates = run_matrix(cells, config.n_runs, config.seed)
        write_runs_csv(staging.path("runs.csv"), runs)
        write_aggregates_csv(staging.path("aggregates.csv"), aggregates)
        _write_policies(staging, policies)
        for task in tasks:
            _plot_task(staging.path(f"fig_{task['name']}.png"), task["name"], aggregates)
        _write_metadata(staging, config, timings, {"n_rollouts": len(runs)})
        with open(staging.path("config.yaml"), "w") as fh:
            fh.write(dump_config(config))
    print(f"evaluated {len(cells)} cells ({len(runs)} rollouts) -> {args.out}")
    return 0


def _cmd_export_lp(args) -> int:
    from .cmdp import build_cmdp_lp

    config = _load_with_overrides(args)
    model = config.build_model()
    graph = time_expand(model)
    camera, params = config.build_camera(), config.build_cost_params()
    count = 0
    with _Staging(args.out) as staging:
        for task in config.tasks:
            prepared = _prepare_task(config, model, graph, camera, params, task)
            for scenario in config.scenarios:
                if "thresholds" not in scenario:
                    continue
                thresholds = ScenarioConfig.thresholds_of(scenario)
                lp = build_cmdp_lp(model, prepared["planning"], thresholds, graph)
                name = f"lp_{task['name']}_{scenario['name']}.lp"
                write_lp_text(staging.path(name), lp, name=name)
                count += 1
    print(f"exported {count} programs -> {args.out}")
    return 0


def _cmd_sample_traj(args) -> int:
    config = _load_with_overrides(args)
    with _Staging(args.out) as staging:
        for task in config.tasks:
            dist = config.build_distribution(task)
            for i in range(config.n_planning_samples):
                traj = sample_trajectory(dist, i)
                write_trajectory_csv(
                    staging.path(f"traj_{task['name']}_plan{i}.csv"), traj)
            for i, traj in enumerate(
                evaluation_trajectories(dist, config.n_eval_trajectories, config.horizon)
            ):
                write_trajectory_csv(
                    staging.path(f"traj_{task['name']}_eval{i}.csv"), traj)
    print(f"sampled trajectories for {len(config.tasks)} tasks -> {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ConstraintsUnsatisfiableError as err:
        print(f"planning failed: {err}", file=sys.stderr)
        return 3
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
