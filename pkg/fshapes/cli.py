"""Command-line interface for fshapes"""

import argparse
import logging
import math
import sys
import traceback
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from fshapes import synth
from fshapes.baselines import (
    colored_current,
    colored_distance,
    colored_from_current,
    colored_inner_product,
    product_space_current,
)
from fshapes.config import KernelConfig, MPConfig, RegistrationConfig, RuntimeSettings
from fshapes.discretization import discretize
from fshapes.errors import DimensionMismatchError, FShapeError
from fshapes.io import read_path, read_shape, read_shape_or_current, write_current, write_grid_csv, write_shape
from fshapes.kernels import currents_kernel, fcurrent_distance, fcurrent_norm
from fshapes.models import FCurrent
from fshapes.transport import transport_shape
from fshapes.workflow import (
    CRENEL_KERNELS,
    linear_fit,
    run_compression,
    run_crenel_experiment,
    run_disconnection_experiment,
    run_registration,
)

logger = logging.getLogger(__name__)

EPILOG = """
Examples:
  fshapes synth circle --segments 512 --crenels 16 -o circle.json
  fshapes discretize circle.json -o circle.fcur.json
  fshapes distance a.json b.json --kg gaussian:0.1 --kf gaussian:0.5
  fshapes compress bundle.json --kg gaussian:0.05 --kf gaussian:0.2 --eps 0.05 -o small.json --log steps.csv
  fshapes register src.json tgt.json --kg gaussian:0.5 --kf gaussian:0.2 --sigma-v 0.5 -o result.json
  fshapes transport grid.json result.json -o moved.json --csv moved.csv
  fshapes experiment crenel --dthetas 0.005,0.01,0.02,0.04 -o crenel.csv

CSV outputs:
  distance              distance,norm_a,norm_b
  compress --log        step,candidate,x_1..x_n,m_1..m_k,gamma_norm,residual_ratio
  register --trace      iteration,kinetic,attachment,total,step
  transport --csv       vertex,x_1..x_n,phi_1..phi_n
  experiment crenel     dtheta,wprime,l1
  experiment disconnect gap,fcurrent,product
"""


def _float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _add_kernel_flags(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--kg", required=required, metavar="KIND:WIDTH", help="Geometric kernel, e.g. gaussian:0.1")
    parser.add_argument(
        "--kf",
        required=required,
        metavar="KIND:WIDTH",
        help="Signal kernel, e.g. gaussian:0.5, or 'constant' for plain currents",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fshapes",
        description="fshapes - functional currents for signal-carrying curves and surfaces",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=EPILOG,
    )
    parser.add_argument("--threads", type=int, help="Worker threads for kernel sums (default: FSHAPES_THREADS or 1)")
    parser.add_argument(
        "--log-level",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level (default: FSHAPES_LOG_LEVEL or WARNING)",
    )
    parser.add_argument("-q", "--quiet", action="store_true", help="Only print results and errors")
    commands = parser.add_subparsers(dest="command", required=True)

    # synth
    synth_parser = commands.add_parser("synth", help="Generate a synthetic functional shape")
    generators = synth_parser.add_subparsers(dest="generator", required=True)
    circle = generators.add_parser("circle", help="Unit circle with a crenel signal")
    circle.add_argument("--segments", type=int, default=512)
    circle.add_argument("--crenels", type=int, default=16)
    circle.add_argument("--amplitude", type=float, default=1.0)
    circle.add_argument("--rotation", type=float, default=0.0, help="Signal rotation in radians")
    stain = generators.add_parser("ellipse-stain", help="Ellipse with a stained arc")
    stain.add_argument("--vertices", type=int, default=64)
    stain.add_argument("--axes", type=_float_list, default=[2.0, 1.2], help="Semi-axes a,b")
    stain.add_argument("--stain-center", type=float, default=0.0, help="Angle of the stain center (radians)")
    stain.add_argument("--stain-width", type=float, default=1.2, help="Angular width of the stain (radians)")
    bundle = generators.add_parser("fiber-bundle", help="Planar fiber bundle, one signal value per fiber")
    bundle.add_argument("--fibers", type=int, default=300)
    bundle.add_argument("--samples", type=int, default=20)
    bundle.add_argument("--seed", type=int, default=0)
    segment = generators.add_parser("segment", help="Straight segment with constant signal")
    segment.add_argument("--edges", type=int, default=200)
    sphere = generators.add_parser("sphere", help="UV sphere with two signal caps")
    sphere.add_argument("--rings", type=int, default=12)
    sphere.add_argument("--sectors", type=int, default=24)
    sphere.add_argument("--cap-angle", type=float, default=0.5)
    grid = generators.add_parser("grid", help="Planar deformation grid")
    grid.add_argument("--lines", type=int, default=11)
    grid.add_argument("--samples", type=int, default=41)
    for sub in (circle, stain, bundle, segment, sphere, grid):
        sub.add_argument("-o", "--output", required=True, metavar="FILE", help="Output shape file (JSON)")

    # discretize
    disc = commands.add_parser("discretize", help="Discretize a shape into a functional current")
    disc.add_argument("shape", help="Input shape file")
    disc.add_argument("-o", "--output", required=True, metavar="FILE", help="Output current file (JSON)")

    # distance
    dist = commands.add_parser("distance", help="Distance and norms of two shapes or currents (CSV)")
    dist.add_argument("a")
    dist.add_argument("b")
    _add_kernel_flags(dist)
    dist.add_argument("--representation", choices=["fcurrent", "colored", "product"], default="fcurrent")

    # compress
    comp = commands.add_parser("compress", help="Matching pursuit compression")
    comp.add_argument("input", help="Shape or current file")
    _add_kernel_flags(comp)
    comp.add_argument("--eps", type=float, default=0.05, help="Relative residual threshold (default: 0.05)")
    comp.add_argument("--variant", choices=["greedy", "orthogonal"], default="orthogonal")
    comp.add_argument("--max-atoms", type=int, default=1000)
    comp.add_argument("--dictionary", choices=["source_supports", "grid"], default="source_supports")
    comp.add_argument("--grid-spacing", type=float, help="Grid dictionary spacing")
    comp.add_argument("--ridge", type=float, help="Gram ridge (default: automatic rescue only)")
    comp.add_argument("-o", "--output", metavar="FILE", help="Compressed current file (JSON)")
    comp.add_argument("--log", metavar="FILE", help="Per-step CSV log")

    # register
    reg = commands.add_parser("register", help="LDDMM registration with a functional current attachment")
    reg.add_argument("source")
    reg.add_argument("target")
    _add_kernel_flags(reg)
    reg.add_argument("--sigma-v", type=float, required=True, help="Velocity kernel width")
    reg.add_argument("--lambda", dest="weight", type=float, default=1.0, help="Attachment weight (default: 1)")
    reg.add_argument("--timesteps", type=int, default=10)
    reg.add_argument("--max-iters", type=int, default=200)
    reg.add_argument("--grad-tol", type=float, default=1e-6)
    reg.add_argument("--integrator", choices=["euler", "rk4"], default="euler")
    reg.add_argument("-o", "--output", metavar="FILE", help="Registration result (JSON)")
    reg.add_argument("--deformed", metavar="FILE", help="Deformed source shape (JSON)")
    reg.add_argument("--trace", metavar="FILE", help="Energy trace CSV")

    # transport
    trans = commands.add_parser("transport", help="Carry a shape along a registered flow")
    trans.add_argument("shape")
    trans.add_argument("result", help="Registration result file")
    trans.add_argument("-o", "--output", required=True, metavar="FILE", help="Moved shape file (JSON)")
    trans.add_argument("--csv", metavar="FILE", help="Vertex table before and after the flow")

    # experiment
    exp = commands.add_parser("experiment", help="Demonstration experiments")
    experiments = exp.add_subparsers(dest="experiment", required=True)
    cren = experiments.add_parser("crenel", help="W' versus L1 distance under signal rotation")
    cren.add_argument("--dthetas", type=_float_list, default=[0.005, 0.01, 0.02, 0.04])
    cren.add_argument("--segments", type=int, default=512)
    cren.add_argument("--crenels", type=int, default=16)
    cren.add_argument("--amplitude", type=float, default=1.0)
    _add_kernel_flags(cren, required=False)
    cren.add_argument("-o", "--output", metavar="FILE", help="CSV table (default: stdout)")
    disconnect = experiments.add_parser("disconnect", help="Connectivity sensitivity of product-space currents")
    disconnect.add_argument("--gaps", type=_float_list, default=[0.1, 0.01, 0.001])
    disconnect.add_argument("--segments", type=int, default=10)
    _add_kernel_flags(disconnect)
    return parser


def _kernels(args) -> KernelConfig:
    return KernelConfig.parse(args.kg, args.kf)


def _cmd_synth(args, settings: RuntimeSettings) -> None:
    if args.generator == "circle":
        shape = synth.crenellated_circle(args.segments, args.crenels, args.amplitude, args.rotation)
    elif args.generator == "ellipse-stain":
        if len(args.axes) != 2:
            raise argparse.ArgumentTypeError("--axes takes two values")
        shape = synth.stained_ellipse(args.vertices, tuple(args.axes), args.stain_center, args.stain_width)
    elif args.generator == "fiber-bundle":
        shape = synth.fiber_bundle(args.fibers, args.samples, seed=args.seed)
    elif args.generator == "segment":
        shape = synth.straight_segment(args.edges)
    elif args.generator == "sphere":
        shape = synth.sphere_with_caps(args.rings, args.sectors, cap_angle=args.cap_angle)
    else:
        shape = synth.deformation_grid(lines=args.lines, samples=args.samples)
    write_shape(shape, args.output)
    if not args.quiet:
        print(f"✓ Wrote {shape.n_vertices} vertices and {shape.n_cells} cells to {args.output}")


def _cmd_discretize(args, settings: RuntimeSettings) -> None:
    current = discretize(read_shape(args.shape))
    write_current(current, args.output)
    if not args.quiet:
        print(f"✓ Wrote {len(current)} atoms to {args.output}")


def _as_current(item) -> FCurrent:
    return item if isinstance(item, FCurrent) else discretize(item)


def _cmd_distance(args, settings: RuntimeSettings) -> None:
    kernels = _kernels(args)
    a, b = read_shape_or_current(args.a), read_shape_or_current(args.b)
    threads, chunk = settings.threads, settings.chunk_size
    if args.representation == "fcurrent":
        ca, cb = _as_current(a), _as_current(b)
        values = (
            fcurrent_distance(kernels, ca, cb, threads, chunk),
            fcurrent_norm(kernels, ca, threads, chunk),
            fcurrent_norm(kernels, cb, threads, chunk),
        )
    elif args.representation == "colored":
        ca, cb = [colored_from_current(x) if isinstance(x, FCurrent) else colored_current(x) for x in (a, b)]
        values = (
            colored_distance(kernels, ca, cb, threads, chunk),
            math.sqrt(max(colored_inner_product(kernels, ca, ca, threads, chunk), 0.0)),
            math.sqrt(max(colored_inner_product(kernels, cb, cb, threads, chunk), 0.0)),
        )
    else:
        if isinstance(a, FCurrent) or isinstance(b, FCurrent):
            raise DimensionMismatchError("the product-space representation needs shape files, not currents")
        plain = currents_kernel(kernels)
        ca, cb = product_space_current(a), product_space_current(b)
        values = (
            fcurrent_distance(plain, ca, cb, threads, chunk),
            fcurrent_norm(plain, ca, threads, chunk),
            fcurrent_norm(plain, cb, threads, chunk),
        )
    print("distance,norm_a,norm_b")
    print(",".join(repr(float(v)) for v in values))


def _cmd_compress(args, settings: RuntimeSettings) -> None:
    config = MPConfig(
        epsilon=args.eps,
        max_atoms=args.max_atoms,
        variant=args.variant,
        dictionary=args.dictionary,
        grid_spacing=args.grid_spacing,
        ridge=args.ridge,
    )
    source = read_shape_or_current(args.input)
    run_compression(
        source,
        _kernels(args),
        config,
        threads=settings.threads,
        output_file=args.output,
        steps_file=args.log,
        verbose=not args.quiet,
    )


def _cmd_register(args, settings: RuntimeSettings) -> None:
    config = RegistrationConfig(
        kernels=_kernels(args),
        sigma_v=args.sigma_v,
        timesteps=args.timesteps,
        weight=args.weight,
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        integrator=args.integrator,
    )
    run_registration(
        read_shape(args.source),
        read_shape(args.target),
        config,
        output_file=args.output,
        deformed_file=args.deformed,
        trace_file=args.trace,
        verbose=not args.quiet,
    )


def _cmd_transport(args, settings: RuntimeSettings) -> None:
    shape = read_shape(args.shape)
    path = read_path(args.result)
    moved = transport_shape(shape, path)
    write_shape(moved, args.output)
    if args.csv:
        write_grid_csv(shape, moved, args.csv)
    if not args.quiet:
        print(f"✓ Moved {shape.n_vertices} vertices along a {path.timesteps}-step path")


def _cmd_experiment(args, settings: RuntimeSettings) -> None:
    if args.experiment == "crenel":
        if (args.kg is None) != (args.kf is None):
            raise argparse.ArgumentTypeError("--kg and --kf go together")
        kernels = CRENEL_KERNELS if args.kg is None else _kernels(args)
        verbose = not args.quiet and args.output is not None
        rows = run_crenel_experiment(
            args.dthetas,
            args.segments,
            args.crenels,
            args.amplitude,
            kernels,
            settings.threads,
            output_file=args.output,
            verbose=verbose,
        )
        if args.output is None:
            print("dtheta,wprime,l1")
            for row in rows:
                print(",".join(repr(float(v)) for v in row))
        elif verbose and len(rows) >= 2:
            slope, _, r2 = linear_fit(rows)
            print(f"✓ W' slope {slope:.4e}, R^2 {r2:.4f}")
        return

    rows = run_disconnection_experiment(args.gaps, _kernels(args), args.segments, verbose=False)
    print("gap,fcurrent,product")
    for row in rows:
        print(f"{row['gap']!r},{row['fcurrent']!r},{row['product']!r}")


COMMANDS = {
    "synth": _cmd_synth,
    "discretize": _cmd_discretize,
    "distance": _cmd_distance,
    "compress": _cmd_compress,
    "register": _cmd_register,
    "transport": _cmd_transport,
    "experiment": _cmd_experiment,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Run one subcommand and return the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)

    load_dotenv()
    overrides = {"threads": args.threads, "log_level": args.log_level}
    try:
        settings = RuntimeSettings(
            **{**RuntimeSettings.from_env().model_dump(), **{k: v for k, v in overrides.items() if v is not None}}
        )
    except (ValidationError, ValueError) as e:
        parser.error(f"invalid runtime settings: {' '.join(str(e).split())}")
    logging.basicConfig(level=settings.log_level, format="%(levelname)s %(name)s: %(message)s")
    logger.debug("runtime settings: %s", settings)

    try:
        COMMANDS[args.command](args, settings)
    except FShapeError as e:
        print(e.one_line(), file=sys.stderr)
        return e.exit_code
    except argparse.ArgumentTypeError as e:
        print(f"error: usage: {e}", file=sys.stderr)
        return 2
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first.get("loc", ()))
        print(f"error: invalid_config: {where}: {first.get('msg', 'invalid value')}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        print("\n❌ Cancelled by user", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"\n❌ Unexpected error: {e}", file=sys.stderr)
        traceback.print_exc()
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
