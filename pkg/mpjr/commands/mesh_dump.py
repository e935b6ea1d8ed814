"""`mesh-dump` command: geometry and embedded interface data, no solve."""

import argparse
from pathlib import Path

import numpy as np

from mpjr.core.exceptions import EXIT_OK, OutputError
from mpjr.core.run_context import run_context
from mpjr.services import output
from mpjr.services.model_builder import build_model
from mpjr.services.run_config import parse_config, write_config


def add_parser(subparsers):
    parser = subparsers.add_parser("mesh-dump", help="Write the mesh and interface layer without solving")
    parser.add_argument("--config", required=True, help="Run configuration file")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.add_argument("--homogenized", action="store_true", help="Single bulk material at the mixture-rule modulus")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    if args.homogenized:
        config = config.model_copy(update={"material": config.material.model_copy(update={"homogenized": True})})
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(str(out), str(e))

    digest = write_config(config, out / "config.resolved.txt")
    with run_context("mesh-dump", run_id=digest[:12]):
        model = build_model(config)
        u = np.zeros(model.system.n_dofs)
        output.write_fields(model.system, u, out / "mesh.vtk", digest)
        output.write_interface_dump(model.system, u, out / "interface.csv", digest)
    return EXIT_OK
