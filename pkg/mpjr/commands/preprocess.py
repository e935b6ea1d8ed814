"""`preprocess` command: processed scans, phase mask and surface statistics."""

import argparse
from pathlib import Path

from mpjr.config import settings
from mpjr.core.exceptions import EXIT_OK, OutputError
from mpjr.core.run_context import run_context
from mpjr.schemas.grid import GridKind
from mpjr.services import afm_ingest
from mpjr.services.model_builder import load_scans
from mpjr.services.run_config import parse_config, write_config


def add_parser(subparsers):
    parser = subparsers.add_parser("preprocess", help="Downsample, extract profiles and segment phases")
    parser.add_argument("--config", required=True, help="Run configuration file")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    config = parse_config(args.config)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(str(out), str(e))

    digest = write_config(config, out / "config.resolved.txt")
    with run_context("preprocess", run_id=digest[:12]):
        grids = load_scans(config)
        for kind, grid in grids.items():
            afm_ingest.save_scan_grid(grid, out / f"{kind.value}.txt", digest)
            afm_ingest.export_grid_csv(grid, out / f"{kind.value}.csv", digest)

        modulus = grids[GridKind.MODULUS]
        mask = afm_ingest.segment_phases(modulus, config.material.threshold)
        afm_ingest.export_phase_mask_csv(mask, modulus.dx, modulus.dy, out / "phase_mask.csv", digest)

        fmt = settings.format_float
        stats = afm_ingest.surface_statistics(grids[GridKind.HEIGHT])
        for name, value in stats.model_dump().items():
            print(f"height.{name} = {fmt(value)}")
        print(f"phase.matrix_fraction = {fmt(mask.matrix_fraction)}")
        print(f"phase.inclusion_fraction = {fmt(mask.inclusion_fraction)}")
    return EXIT_OK
