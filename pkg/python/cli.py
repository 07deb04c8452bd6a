# Command line interface of the Spike Deblur Toolkit. Every pipeline is one subcommand;
# defaults come from config.toml and can be overridden by flags. Results go to stdout or
# to the requested files, diagnostics go through logging. For usage, refer to the
# repository README.md

import argparse
import logging
import pathlib
import sys

import numpy as np
import pandas as pd

import python.color as color
import python.event_model as event_model
import python.formats as formats
import python.metrics as metrics
import python.reconstruction as reconstruction
import python.spike_model as spike_model
import python.toy_deblur as toy_deblur
import python.utils as utils
from python.tfs_loss import TfsConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO_ERROR = 1
EXIT_USAGE_ERROR = 2


def main(argv: list[str] | None = None) -> int:
    """Parse the arguments, run one subcommand and return its exit code

    Usage and parameter errors exit with 2, I/O and format errors with 1. A one-line
    diagnostic is printed to stderr in both cases.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return int(exit_request.code or 0)

    try:
        args.handler(args)
    except (formats.SpikeContainerError, formats.PixmapError) as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_IO_ERROR
    except OSError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_IO_ERROR
    except toy_deblur.DeblurDivergenceError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_IO_ERROR
    except ValueError as error:
        print(f"error: {error}", file=sys.stderr)
        return EXIT_USAGE_ERROR
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spike-deblur",
        description="Spike camera simulation, texture reconstruction and deblurring",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    simulate = subparsers.add_parser(
        "simulate", help="Simulate a spike stream from luminance frames"
    )
    simulate.add_argument("frames", nargs="*", help="PGM luminance frames, in order")
    simulate.add_argument(
        "--constant",
        type=float,
        help="Simulate a constant intensity instead of reading frames",
    )
    simulate.add_argument("--width", type=int, default=8)
    simulate.add_argument("--height", type=int, default=8)
    simulate.add_argument("--count", type=int, default=40, help="Constant frames")
    simulate.add_argument(
        "--repeat", type=int, default=1, help="Samples each input frame is held for"
    )
    simulate.add_argument("--omega", type=float, default=utils.SPIKE["omega"])
    simulate.add_argument(
        "--rate", type=float, default=utils.SPIKE["sample_rate_hz"]
    )
    simulate.add_argument(
        "--init", choices=["zero", "random"], default=utils.SPIKE["init"]
    )
    simulate.add_argument("--seed", type=int, default=utils.RANDOM_SEED)
    simulate.add_argument("-o", "--output", required=True, help="Output .spks file")
    simulate.set_defaults(handler=run_simulate)

    reconstruct = subparsers.add_parser(
        "reconstruct", help="Reconstruct TFI/TFP textures from a spike stream"
    )
    reconstruct.add_argument("stream", help="Input .spks file")
    reconstruct.add_argument(
        "--method", choices=["tfi", "tfp", "both"], default="both"
    )
    reconstruct.add_argument("--t", type=int, help="Sample index, defaults to the last")
    reconstruct.add_argument(
        "--window", type=int, default=utils.RECONSTRUCTION["tfp_window"]
    )
    reconstruct.add_argument("--c", type=float, help="TFP scale, defaults to omega")
    reconstruct.add_argument(
        "--all",
        action="store_true",
        help="Write one texture per valid sample index",
    )
    reconstruct.add_argument(
        "--scale", type=float, default=1.0, help="Intensity written as white"
    )
    reconstruct.add_argument("--bit-depth", type=int, choices=[8, 16], default=8)
    reconstruct.add_argument("-o", "--output", required=True, help="Output PGM path")
    reconstruct.set_defaults(handler=run_reconstruct)

    events = subparsers.add_parser(
        "events", help="Simulate event camera output for luminance frames"
    )
    events.add_argument("frames", nargs="+", help="PGM luminance frames, in order")
    events.add_argument("--theta", type=float, default=utils.EVENTS["theta"])
    events.add_argument("--stride", type=int, default=1)
    events.add_argument(
        "--log-intensity",
        action="store_true",
        default=utils.EVENTS["log_intensity"],
    )
    events.add_argument("-o", "--output", help="Output CSV, defaults to stdout")
    events.set_defaults(handler=run_events)

    blur = subparsers.add_parser("blur", help="Average a burst of sharp frames")
    blur.add_argument("burst", nargs="+", help="PPM frames of the burst")
    blur.add_argument("--bit-depth", type=int, choices=[8, 16], default=8)
    blur.add_argument("-o", "--output", required=True, help="Output PPM path")
    blur.set_defaults(handler=run_blur)

    deblur = subparsers.add_parser(
        "deblur", help="Deblur a shaken scene with optional spike supervision"
    )
    source = deblur.add_mutually_exclusive_group(required=True)
    source.add_argument("--sharp", help="Square PPM scene to shake and deblur")
    source.add_argument(
        "--synthetic", action="store_true", help="Use a seeded synthetic scene"
    )
    deblur.add_argument("--size", type=int, default=utils.DEBLUR["image_size"])
    deblur.add_argument("--tfs", choices=["on", "off"], default="on")
    deblur.add_argument("--w", type=float, default=utils.TFS["weight_w"])
    deblur.add_argument(
        "--n",
        type=int,
        default=utils.TFS["recon_per_view_n"],
        help="Sub-exposures supervised by spike textures",
    )
    deblur.add_argument(
        "--target-mode",
        choices=["both", "tfi", "tfp", "spikes"],
        default=utils.TFS["target_mode"],
    )
    deblur.add_argument("--iters", type=int, default=utils.DEBLUR["iterations"])
    deblur.add_argument("--step", type=float, default=utils.DEBLUR["step"])
    deblur.add_argument("--seed", type=int, default=utils.RANDOM_SEED)
    deblur.add_argument("-o", "--output", required=True, help="Output estimate PPM")
    deblur.add_argument("--loss", help="Output loss trace CSV")
    deblur.set_defaults(handler=run_deblur)

    cost = subparsers.add_parser("cost", help="Per-ray supervision inference cost")
    cost.add_argument("--widths", required=True, help="Layer widths, e.g. 60,256,256,3")
    cost.add_argument("--n", type=int, default=5, help="Sampled timestamps")
    cost.add_argument("--mode", choices=["event", "spike", "ratio"], default="ratio")
    cost.set_defaults(handler=run_cost)

    quality = subparsers.add_parser("metrics", help="PSNR and SSIM of two images")
    quality.add_argument("a", help="First PGM/PPM image")
    quality.add_argument("b", help="Second PGM/PPM image")
    quality.add_argument("--format", choices=["csv", "json"], default="csv")
    quality.set_defaults(handler=run_metrics)

    return parser


###############
# SUBCOMMANDS #
###############


def run_simulate(args: argparse.Namespace) -> None:
    if args.constant is not None:
        if args.frames:
            raise ValueError("Pass either input frames or --constant, not both")
        shape = (args.count, args.height, args.width)
        frames = np.full(shape, args.constant, dtype=np.float64)
    elif args.frames:
        frames = np.stack([_read_gray(path) for path in args.frames])
    else:
        raise ValueError("No input frames; pass PGM frames or --constant")
    if args.repeat < 1:
        raise ValueError(f"--repeat must be at least 1, not {args.repeat}")
    frames = np.repeat(frames, args.repeat, axis=0)

    init = None
    if args.init == "random":
        init = spike_model.random_state(frames.shape[1:], args.omega, args.seed)
    stream = spike_model.simulate_stream(
        frames, omega=args.omega, init=init, sample_rate_hz=args.rate
    )
    size = formats.save_stream(stream, args.output)
    logger.info(f"Wrote {args.output}")
    print(
        f"{len(stream)} planes of {stream.width}x{stream.height}, "
        f"{int(stream.spike_counts().sum())} spikes, {size} bytes"
    )


def run_reconstruct(args: argparse.Namespace) -> None:
    stream = formats.load_stream(args.stream)
    methods = ["tfi", "tfp"] if args.method == "both" else [args.method]
    output = pathlib.Path(args.output)

    for method in methods:
        if args.all:
            if method == "tfi":
                textures = reconstruction.tfi_sequence(stream)
                first = 0
            else:
                textures = reconstruction.tfp_sequence(stream, args.window, args.c)
                first = args.window - 1
            for offset, texture in enumerate(textures):
                path = _texture_path(output, method, len(methods), first + offset)
                _write_texture(path, texture, args.scale, args.bit_depth)
            logger.info(f"Wrote {len(textures)} {method.upper()} textures")
            continue

        t = len(stream) - 1 if args.t is None else args.t
        if method == "tfi":
            texture = reconstruction.tfi(stream, t)
        else:
            texture = reconstruction.tfp(stream, t, args.window, args.c)
        path = _texture_path(output, method, len(methods))
        _write_texture(path, texture.values, args.scale, args.bit_depth)
        logger.info(f"Wrote {method.upper()} texture at t={t} to {path}")


def run_events(args: argparse.Namespace) -> None:
    frames = np.stack([_read_gray(path) for path in args.frames])
    if args.stride < 1:
        raise ValueError(f"--stride must be at least 1, not {args.stride}")
    log_eps = utils.EVENTS["log_eps"]
    events = event_model.sampled_events(
        frames,
        args.theta,
        args.stride,
        log_intensity=args.log_intensity,
        log_eps=log_eps,
    )
    if args.stride > 1:
        missed = event_model.missed_event_count(
            frames,
            args.theta,
            args.stride,
            log_intensity=args.log_intensity,
            log_eps=log_eps,
        )
        logger.info(f"Stride {args.stride} sampling misses {missed} events")

    table = event_model.events_to_frame(events)
    if args.output is None:
        sys.stdout.write(formats.format_table(table))
    else:
        formats.write_table(table, args.output)


def run_blur(args: argparse.Namespace) -> None:
    burst = [formats.read_pixmap(path) for path in args.burst]
    blurry = color.synthesize_blur(burst)
    formats.write_pixmap(args.output, blurry, args.bit_depth)
    logger.info(f"Averaged {len(burst)} frames into {args.output}")


def run_deblur(args: argparse.Namespace) -> None:
    if args.synthetic:
        sharp = toy_deblur.synthetic_scene(args.size, args.seed)
    else:
        sharp = formats.read_pixmap(args.sharp)
        if sharp.ndim != 3:
            raise ValueError(f"{args.sharp} is not an RGB image")

    settings = utils.DEBLUR
    trajectory = toy_deblur.ShakeTrajectory.random_walk(
        settings["trajectory_length"], settings["margin"], args.seed
    )
    omega = utils.SPIKE["omega"]
    cfg = TfsConfig.from_settings(
        {
            **utils.TFS,
            "weight_w": args.w,
            "recon_per_view_n": args.n,
            "target_mode": args.target_mode,
        },
        omega=omega,
        tfp_window=utils.RECONSTRUCTION["tfp_window"],
    )
    problem, reference = toy_deblur.forge_problem(
        sharp,
        trajectory,
        omega=omega,
        seed=args.seed,
        samples_per_shift=settings["samples_per_shift"],
        cfg=cfg,
        sample_rate_hz=utils.SPIKE["sample_rate_hz"],
    )
    result = toy_deblur.solve(
        problem, use_tfs=args.tfs == "on", iterations=args.iters, step=args.step
    )

    estimate = problem.visible(result.estimate)
    formats.write_pixmap(args.output, np.clip(estimate, 0.0, 1.0))
    if args.loss is not None:
        formats.write_table(formats.loss_trace_frame(result.loss_trace), args.loss)

    report = toy_deblur.evaluate(estimate, problem.visible(reference))
    table = pd.DataFrame(
        [
            {
                **report.as_dict(),
                "w_r": result.converter.w_r,
                "w_g": result.converter.w_g,
                "w_b": result.converter.w_b,
            }
        ]
    )
    sys.stdout.write(formats.format_table(table))


def run_cost(args: argparse.Namespace) -> None:
    model = event_model.CostModel.parse(args.widths)
    if args.mode == "ratio":
        print(f"{event_model.cost_ratio(model, args.n):.6f}")
    else:
        print(event_model.supervision_cost(model, args.n, args.mode))


def run_metrics(args: argparse.Namespace) -> None:
    report = metrics.evaluate(
        formats.read_pixmap(args.a),
        formats.read_pixmap(args.b),
        max_value=utils.METRICS["max_value"],
        window=utils.METRICS["ssim_window"],
        k1=utils.METRICS["k1"],
        k2=utils.METRICS["k2"],
    )
    table = pd.DataFrame([report.as_dict()])
    sys.stdout.write(formats.format_table(table, args.format))


def _read_gray(path: str) -> np.ndarray:
    image = formats.read_pixmap(path)
    if image.ndim == 3:
        image = color.rgb_to_gray_fixed(image)
    return image


def _texture_path(
    output: pathlib.Path, method: str, methods: int, t: int | None = None
) -> pathlib.Path:
    """Output path of one texture; suffixes are added when several are written"""
    stem = output.stem
    if methods > 1:
        stem += f"_{method}"
    if t is not None:
        stem += f"_{t:05d}"
    return output.with_name(stem + (output.suffix or ".pgm"))


def _write_texture(
    path: pathlib.Path, values: np.ndarray, scale: float, bit_depth: int
) -> None:
    if not np.isfinite(scale) or scale <= 0:
        raise ValueError(f"--scale must be positive, not {scale}")
    scaled = values / scale
    clipped = int(np.count_nonzero(scaled > 1.0))
    if clipped:
        logger.warning(f"{clipped} pixels of {path} exceed --scale and are clipped")
    formats.write_pixmap(path, np.clip(scaled, 0.0, 1.0), bit_depth)
