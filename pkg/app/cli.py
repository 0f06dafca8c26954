"""
Command line entry point.

    python -m app.cli collect --config scenarios/step.cfg --out-dir out/
    python -m app.cli run     --config scenarios/step.cfg --out-dir out/
    python -m app.cli verify
    python -m app.cli kc      --config scenarios/step.cfg --out-dir out/kc
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.config.logging_config import setup_logging
from app.config.scenario_file import load_scenario
from app.config.settings import settings
from app.deepc.closed_form import save_control_matrix
from app.deepc.problem import SolverPath
from app.errors import DeePCError, ScenarioAbortedError
from app.harness.metrics import scenario_metrics
from app.harness.scenario import ScenarioRunner
from app.harness.verify import format_results, run_checks
from app.models.scenario import ScenarioConfig

logger = logging.getLogger("app.cli")


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="app.cli", description="DeePC converter control toolkit.")
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level (default: %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario_args(p: argparse.ArgumentParser, config_required: bool):
        p.add_argument("--config", type=Path, required=config_required, help="Scenario file")
        p.add_argument("--seed", type=int, default=None, help="Override plant noise and excitation seeds")
        p.add_argument("--out-dir", type=Path, default=Path("."), help="Output directory (default: .)")
        p.add_argument("--solver", choices=[s.value for s in SolverPath], default=None,
                       help="Override the DeePC solver path")

    scenario_args(sub.add_parser("collect", help="Write the collected trajectory CSV"), False)
    scenario_args(sub.add_parser("run", help="Run a scenario, write record.csv and metrics.json"), True)
    sub.add_parser("verify", help="Run the self-contained property checks")
    scenario_args(sub.add_parser("kc", help="Export K_C and M_g as CSV"), False)
    return parser.parse_args(argv)


def scenario_from_args(args: argparse.Namespace, solver: Optional[str] = None) -> ScenarioConfig:
    cfg = load_scenario(args.config) if args.config is not None else ScenarioConfig()
    solver = solver or args.solver
    if solver is not None:
        cfg = cfg.model_copy(update={"controller": cfg.controller.model_copy(update={"solver": SolverPath(solver)})})
    if args.seed is not None:
        cfg = cfg.model_copy(update={
            "run": cfg.run.model_copy(update={"seed": args.seed}),
            "excitation": cfg.excitation.model_copy(update={"seed": args.seed}),
        })
    return cfg


def cmd_collect(args: argparse.Namespace) -> int:
    cfg = scenario_from_args(args)
    runner = ScenarioRunner(cfg)
    traj = runner.collect()
    path = args.out_dir / "trajectory.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    traj.to_csv(path, dt=runner.Ts)
    print(f"wrote {path} ({traj.T} samples, m={traj.m}, p={traj.p})")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    cfg = scenario_from_args(args)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    record_path = args.out_dir / "record.csv"
    metrics_path = args.out_dir / "metrics.json"
    try:
        record = ScenarioRunner(cfg).run()
        metrics = scenario_metrics(cfg, record)
        status = 0
    except ScenarioAbortedError as e:
        record = e.record
        metrics = scenario_metrics(cfg, record, error=str(e))
        status = 1
        print(f"error: {e}", file=sys.stderr)
    record.to_csv(record_path)
    metrics_path.write_text(metrics.model_dump_json(indent=2), encoding="utf-8")
    print(f"wrote {record_path} ({record.steps} steps) and {metrics_path}")
    return status


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_checks()
    print(format_results(results))
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"verify: {len(failed)} of {len(results)} checks failed: {', '.join(failed)}", file=sys.stderr)
        return 1
    print(f"verify: all {len(results)} checks passed")
    return 0


def cmd_kc(args: argparse.Namespace) -> int:
    cfg = scenario_from_args(args, solver=SolverPath.CLOSED_FORM.value)
    if not cfg.controller.kind.is_deepc:
        print(f"error: kc needs a DeePC controller kind, got {cfg.controller.kind.value}", file=sys.stderr)
        return 2
    runner = ScenarioRunner(cfg)
    runner.collect()
    cm = runner.build_controller().control_matrix
    kc_path, mg_path = save_control_matrix(cm, args.out_dir)
    print(f"wrote {kc_path} {cm.K_C.shape} and {mg_path} {cm.M_g.shape}")
    return 0


COMMANDS = {
    "collect": cmd_collect,
    "run": cmd_run,
    "verify": cmd_verify,
    "kc": cmd_kc,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = parse_args(argv)
    setup_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except (DeePCError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
