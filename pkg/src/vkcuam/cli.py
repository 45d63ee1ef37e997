"""Command-line front end: plan, simulate, verify, export and demo.

Exit codes: 0 success, 1 constraint or task-check failure, 2 usage error,
3 unexpected internal error. Set VKC_LOG_LEVEL to control verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .checks import all_passed, episode_checks
from .planner import (
    InfeasiblePlanError,
    PlanningProblem,
    _default_weights,
    apply_pre_action,
    execute_sequence,
    load_trajectory,
    save_trajectory,
    verify_trajectory,
)
from .scenario import ScenarioError, builtin_names, builtin_scenario, load_scenario
from .simulator import GraspParams, SimConfig, run_episode

EXIT_OK = 0
EXIT_CONSTRAINT = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

log = logging.getLogger("vkcuam")


def _setup_logging():
    level = os.environ.get("VKC_LOG_LEVEL", "INFO").upper()
    logging.basicConfig(format="%(levelname)s %(message)s",
                        level=getattr(logging, level, logging.INFO))


def _apply_overrides(args, scenario):
    """--set key=value overrides: scenario.<f>, config.<f>, grasp.<f>."""
    config_kwargs = dict(scenario.config_overrides)
    grasp_kwargs = {}
    for item in args.set or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        if key.startswith("config."):
            config_kwargs[key.split(".", 1)[1]] = value
        elif key.startswith("grasp."):
            grasp_kwargs[key.split(".", 1)[1]] = value
        elif key.startswith("scenario."):
            setattr(scenario, key.split(".", 1)[1], value)
        else:
            raise UsageError(f"unknown override namespace in {key!r}")
    if args.seed is not None:
        config_kwargs["seed"] = args.seed
    try:
        config = SimConfig(**config_kwargs)
        grasp = GraspParams(**grasp_kwargs) if grasp_kwargs else GraspParams()
    except (TypeError, ValueError) as e:
        raise UsageError(str(e)) from e
    return config, grasp


class UsageError(ValueError):
    pass


def _load_scenario_arg(args):
    if getattr(args, "scenario", None):
        path = Path(args.scenario)
        if not path.exists():
            raise UsageError(f"scenario file not found: {path}")
        return load_scenario(path)
    raise UsageError("--scenario is required")


def _plan_scenario(scenario):
    scene = scenario.plan_scene()
    plans = execute_sequence(scene, scenario.task_steps(),
                             problem_defaults=scenario.planner_defaults())
    return scene, plans


def _save_plans(plans, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, plan in enumerate(plans):
        stem = f"plan_{k:02d}_{plan.step.name}"
        csv = out / f"{stem}.csv"
        side = out / f"{stem}.json"
        meta = dict(plan.trajectory.metadata)
        meta["step"] = plan.step.name
        plan.trajectory.metadata = meta
        save_trajectory(plan.trajectory, csv, side)
        paths.append(csv)
    return paths


def cmd_plan(args) -> int:
    scenario = _load_scenario_arg(args)
    _apply_overrides(args, scenario)
    out = Path(args.out)
    try:
        _, plans = _plan_scenario(scenario)
    except InfeasiblePlanError as e:
        log.error("planning failed: %s", e)
        return EXIT_CONSTRAINT
    _save_plans(plans, out)
    log.info("planned %d steps into %s", len(plans), out)
    return EXIT_OK


def _verify_steps(scenario, trajectories):
    """Re-check saved trajectories against the scenario, step by step."""
    scene = scenario.plan_scene()
    steps = scenario.task_steps()
    if len(steps) != len(trajectories):
        raise UsageError(
            f"scenario has {len(steps)} steps but {len(trajectories)} trajectories given")
    rows = []
    ok_all = True
    for step, traj in zip(steps, trajectories):
        apply_pre_action(scene, step.pre_action)
        vkc, x_start, anchors = scene.current_vkc()
        goal = step.goal if step.goal is not None else step.goal_builder(
            scene, vkc, scene.robot.dof)
        W_v, W_a = _default_weights(vkc)
        problem = PlanningProblem(
            vkc=vkc, x_start=x_start, goal=goal, T=traj.T, dt=traj.dt,
            W_v=W_v, W_a=W_a, chain_anchors=anchors,
            world=scene.static_world(exclude=step.ignore_objects),
            **scenario.planner_defaults(),
        )
        report = verify_trajectory(problem, traj)
        ok = report.feasible(problem)
        ok_all &= ok
        rows.append((step.name, ok, report))
        x_final = traj.states[-1]
        scene.x_robot = x_final[:scene.robot.dof].copy()
        if scene.attached is not None:
            scene.objects[scene.attached].q = -x_final[scene.robot.dof:][::-1]
    return ok_all, rows


def cmd_verify(args) -> int:
    scenario = _load_scenario_arg(args)
    _apply_overrides(args, scenario)
    plan_dir = Path(args.plans)
    csvs = sorted(plan_dir.glob("plan_*.csv"))
    if not csvs:
        raise UsageError(f"no plan_*.csv files in {plan_dir}")
    trajectories = [load_trajectory(p) for p in csvs]
    ok_all, rows = _verify_steps(scenario, trajectories)
    print(f"{'step':24s} {'status':6s} residuals")
    for name, ok, report in rows:
        print(f"{name:24s} {'PASS' if ok else 'FAIL':6s} {report.summary()}")
    return EXIT_OK if ok_all else EXIT_CONSTRAINT


def _write_episode(result, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    result.log.save_csv(out / "simlog.csv")
    result.log.save_events(out / "events.json")
    _save_plans(result.plans, out)


def cmd_simulate(args) -> int:
    scenario = _load_scenario_arg(args)
    config, grasp = _apply_overrides(args, scenario)
    try:
        result = run_episode(scenario, config, grasp=grasp)
    except InfeasiblePlanError as e:
        log.error("planning failed: %s", e)
        return EXIT_CONSTRAINT
    _write_episode(result, Path(args.out))
    log.info("simulated %.1f s into %s", result.world.t, args.out)
    return EXIT_OK if not result.log.failed else EXIT_CONSTRAINT


def cmd_demo(args) -> int:
    try:
        scenario = builtin_scenario(args.task)
    except ScenarioError as e:
        raise UsageError(str(e)) from e
    config, grasp = _apply_overrides(args, scenario)
    try:
        result = run_episode(scenario, config, grasp=grasp)
    except InfeasiblePlanError as e:
        log.error("planning failed: %s", e)
        return EXIT_CONSTRAINT
    _write_episode(result, Path(args.out))
    outcomes = episode_checks(scenario, result)
    print(f"demo {args.task}: {'FAILED' if result.log.failed else 'completed'}; "
          f"log in {args.out}")
    for name, (ok, value, detail) in outcomes.items():
        print(f"  {name:16s} {'PASS' if ok else 'FAIL':4s}  {detail}")
    return EXIT_OK if all_passed(outcomes) else EXIT_CONSTRAINT


def cmd_export(args) -> int:
    log_path = Path(args.log)
    if not log_path.exists():
        raise UsageError(f"log file not found: {log_path}")
    with open(log_path) as f:
        header = f.readline().strip().split(",")
        rows = [[float(v) for v in line.strip().split(",")] for line in f if line.strip()]
    events = {}
    if args.events:
        with open(args.events) as f:
            events = json.load(f)
    if args.format == "json":
        with open(args.out, "w") as f:
            json.dump({"columns": header, "rows": rows, **events}, f)
    else:
        with open(args.out, "w") as f:
            f.write(",".join(header) + "\n")
            for row in rows:
                f.write(",".join(repr(v) for v in row) + "\n")
    log.info("exported %d rows to %s", len(rows), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="vkcuam",
        description="Sequential aerial-manipulation planning, control and simulation",
    )
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", help="scenario JSON file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override (config.*, grasp.*, scenario.*); repeatable")

    p = sub.add_parser("plan", help="plan a scenario, write trajectory CSVs + residual JSON")
    common(p)
    p.set_defaults(fn=cmd_plan)

    p = sub.add_parser("simulate", help="plan and simulate a scenario, write a SimLog")
    common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify", help="re-check a plan directory against its scenario")
    common(p)
    p.add_argument("--plans", required=True, help="directory holding plan_*.csv")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("demo", help="run a built-in task end to end")
    p.add_argument("task", choices=builtin_names())
    common(p, scenario=False)
    p.set_defaults(fn=cmd_demo)

    p = sub.add_parser("export", help="convert a SimLog for external tools")
    p.add_argument("--log", required=True, help="simlog.csv path")
    p.add_argument("--events", help="events.json path")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="json")
    p.set_defaults(fn=cmd_export)
    return ap


def run(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except UsageError as e:
        log.error("usage error: %s", e)
        return EXIT_USAGE
    except ScenarioError as e:
        log.error("bad scenario: %s", e)
        return EXIT_USAGE
    except Exception:  # pragma: no cover - defensive
        logging.exception("internal error")
        return EXIT_INTERNAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
