"""`check-law` command: regularized law parameters and the snap-back prediction."""

import argparse
from pathlib import Path

from mpjr.config import settings
from mpjr.core.exceptions import EXIT_OK, ConfigError
from mpjr.core.run_context import run_context
from mpjr.services import interface_law
from mpjr.services.output import write_law_curve


def add_parser(subparsers):
    parser = subparsers.add_parser("check-law", help="Print interface law diagnostics")
    parser.add_argument("--delta-gamma", type=float, required=True, help="Adhesion energy (N/mm)")
    parser.add_argument("--p-max", type=float, required=True, help="Peak adhesive traction (MPa)")
    parser.add_argument("--k-cap", type=float, default=None, help="Repulsive slope (N/mm^3)")
    parser.add_argument("--k-t", type=float, default=100.0, help="Slope factor on E/L when --k-cap is absent")
    parser.add_argument("--E", type=float, default=None, help="Bulk modulus (MPa)")
    parser.add_argument("--L", type=float, default=None, help="Sample length (mm)")
    parser.add_argument("--t", type=float, default=None, help="Layer thickness (mm)")
    parser.add_argument("--curve", default=None, help="Write the sampled law to this CSV")
    parser.set_defaults(handler=handle)


def handle(args: argparse.Namespace) -> int:
    if args.k_cap is not None:
        k_cap = args.k_cap
    elif args.E is not None and args.L is not None:
        k_cap = args.k_t * args.E / args.L
    else:
        raise ConfigError("law.k_cap", "give --k-cap, or --E and --L to derive it from k_t")

    with run_context("check-law"):
        params = interface_law.derive_params(args.delta_gamma, args.p_max, k_cap)
        slope = interface_law.max_softening_slope(params)
        fmt = settings.format_float
        for name, value in params.model_dump().items():
            print(f"{name} = {fmt(value)}")
        print(f"peak_check = {fmt(interface_law.traction(params, params.g_max) / params.p_max)}")
        print(f"work_check = {fmt(interface_law.analytic_area(params, params.g0) / params.delta_gamma)}")
        print(f"max_softening_slope = {fmt(slope)}")
        if args.E is not None and args.t is not None:
            unstable = interface_law.instability_check(slope, args.E, args.t)
            print(f"bulk_stiffness = {fmt(args.E / args.t)}")
            print(f"snap_back_expected = {'true' if unstable else 'false'}")
        if args.curve:
            write_law_curve(params, Path(args.curve))
    return EXIT_OK
