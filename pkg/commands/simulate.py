# simulate.py - `simulate`: explicit pixel-movement diffusion with frame dumps

import argparse
import logging
import os

from commands.common import add_common_flags, output_dir, record_config, resolve_config
from models.pixel_field import BOUNDARIES
from services.image_io import save_normalized
from services.pmde_sim import INITIAL_FIELDS, build_initial_field, extrema, simulate, total_heat

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="diffuse a field with the 5-point explicit scheme")
    add_common_flags(parser)
    parser.add_argument("--gamma", type=float, default=0.25, help="time step ratio, 0 < gamma <= 0.25")
    parser.add_argument("--size", type=int, default=64)
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--boundary", choices=BOUNDARIES, default="replicate")
    parser.add_argument("--init", choices=INITIAL_FIELDS, default="scene", help="initial field")
    parser.add_argument("--dump-every", type=int, default=20, help="write every k-th frame")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = resolve_config(args, "simulate")
    field = build_initial_field(args.init, args.size, args.gamma, args.boundary, seed=config.run.seed)
    out = output_dir(args, "simulate")

    result = simulate(field, args.steps, dump_every=args.dump_every, out_dir=os.path.join(out, "frames"))
    save_normalized(os.path.join(out, "final.pgm"), result.final.values)
    record_config(config, out)

    low, high = extrema(result.final)
    print(f"steps {args.steps}  gamma {args.gamma}  boundary {args.boundary}")
    print(f"total heat {total_heat(field):.10g} -> {total_heat(result.final):.10g}")
    print(f"range [{low:.6g}, {high:.6g}]  frames {len(result.frame_paths)}")
    return 0
