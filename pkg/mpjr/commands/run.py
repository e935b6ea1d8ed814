"""`run` command: full simulation with history, sections and field output."""

import argparse
from pathlib import Path

import structlog

from mpjr.core.exceptions import EXIT_OK, OutputError, StepFailure
from mpjr.core.run_context import run_context
from mpjr.schemas.run import RunConfig, RunHistory
from mpjr.services import output, solver
from mpjr.services.model_builder import ContactModel, build_model
from mpjr.services.run_config import parse_config, write_config

logger = structlog.get_logger()


def add_parser(subparsers):
    parser = subparsers.add_parser("run", help="Run a displacement-controlled simulation")
    parser.add_argument("--config", required=True, help="Run configuration file")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.add_argument("--snapshot-every", type=int, default=None, help="Write fields every n converged steps")
    parser.add_argument("--penalty-mode", action="store_true", help="Adhesion-free penalty interface law")
    parser.add_argument("--homogenized", action="store_true", help="Single bulk material at the mixture-rule modulus")
    parser.set_defaults(handler=handle)


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Fold CLI flags into the config so the echoed file is the one that ran."""
    if args.snapshot_every is not None:
        config = config.model_copy(update={
            "output": config.output.model_copy(update={"snapshot_every": args.snapshot_every})
        })
    if args.penalty_mode:
        config = config.model_copy(update={"law": config.law.model_copy(update={"penalty_mode": True})})
    if args.homogenized:
        config = config.model_copy(update={"material": config.material.model_copy(update={"homogenized": True})})
    return config


def write_results(model: ContactModel, history: RunHistory, out: Path, config_hash: str):
    """History CSV, sections and fields of the last converged state, plus snapshots."""
    system = model.system
    output.write_history(history, out / "history.csv", config_hash)
    for snapshot in history.snapshots:
        output.write_fields(system, snapshot.u, out / f"fields_{snapshot.step:05d}.vtk", config_hash)
    if history.final is None:
        return
    u = history.final.u
    for section in model.config.output.sections:
        name = f"section_{section.axis}_{section.position:.4f}.csv"
        output.write_section(system, u, section.axis, section.position, out / name, config_hash)
    output.write_interface_dump(system, u, out / "interface_final.csv", config_hash)
    output.write_fields(system, u, out / "fields_final.vtk", config_hash)


def handle(args: argparse.Namespace) -> int:
    config = apply_overrides(parse_config(args.config), args)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(str(out), str(e))
    config_hash = write_config(config, out / "config.resolved.txt")

    with run_context("run", run_id=config_hash[:12]):
        model = build_model(config)
        try:
            history = solver.run(
                model.system,
                model.path,
                config.solver,
                snapshot_every=config.output.snapshot_every,
                h_rms=model.h_rms
            )
        except StepFailure as e:
            if e.history is not None:
                write_results(model, e.history, out, config_hash)
            raise

        write_results(model, history, out, config_hash)
        peak = history.peak_index
        logger.info(
            "run_summary",
            steps=len(history.steps),
            pull_off_force=history.steps[peak].reaction_force if peak is not None else None,
            instability=history.has_instability
        )
    return EXIT_OK
