"""Command-line interface.

Exit codes: 0 ok, 2 bad input, 3 under-determined problem,
4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import io, metrics, pipeline
from .core import DomainError, ImageBuffer
from .constraints import ConfigurationError
from .elements import extract_text_lines
from .solver import NonConvergenceError, UnderDeterminedError
from .synth import FoldedWarpError, WarpSpec, make_bundle

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_UNDERDETERMINED = 3
EXIT_NONCONVERGENCE = 4


def _load_config(args) -> dict:
    overrides = {}
    for key in io.DEFAULT_CONFIG:
        flag = key.replace("_", "-")
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    return io.read_config(getattr(args, "config", None), overrides)


def _add_config_flags(parser):
    parser.add_argument("--config", help="JSON config file")
    for key, default in io.DEFAULT_CONFIG.items():
        kind = int if isinstance(default, int) else float
        parser.add_argument(f"--{key.replace('_', '-')}", type=kind,
                            dest=key, default=None,
                            help=f"override {key} (default {default})")


def _draw_polyline(draw, line, color, width=2):
    pts = [(p.x, p.y) for p in line.points]
    draw.line(pts, fill=color, width=width)


def _write_overlay(path, image: ImageBuffer, elems):
    from PIL import Image, ImageDraw

    base = Image.fromarray(image.data).convert("RGB")
    draw = ImageDraw.Draw(base)
    for side in (elems.boundary_top, elems.boundary_bottom,
                 elems.boundary_left, elems.boundary_right):
        _draw_polyline(draw, side, (255, 0, 0))
    for line in elems.text_lines:
        _draw_polyline(draw, line, (0, 200, 0))
    for line in elems.vertical_lines:
        _draw_polyline(draw, line, (240, 220, 0))
    base.save(path)


def _write_grid_vis(path, field, size=512, step=8):
    from PIL import Image, ImageDraw

    img = Image.new("RGB", (size, size), (255, 255, 255))
    draw = ImageDraw.Draw(img)
    uv = field.values * (size - 1)
    for j in range(0, field.n, step):
        draw.line([tuple(uv[j, i]) for i in range(field.n)],
                  fill=(60, 60, 200))
    for i in range(0, field.n, step):
        draw.line([tuple(uv[j, i]) for j in range(field.n)],
                  fill=(60, 60, 200))
    img.save(path)


def cmd_dewarp(args) -> int:
    cfg = _load_config(args)
    image = io.read_image(args.image)
    elems = io.read_elements(args.elements)
    if args.mask:
        mask = io.read_image(args.mask)
        lines = extract_text_lines(mask)
        elems = type(elems)(
            boundary_top=elems.boundary_top,
            boundary_bottom=elems.boundary_bottom,
            boundary_left=elems.boundary_left,
            boundary_right=elems.boundary_right,
            text_lines=tuple(lines),
            vertical_lines=elems.vertical_lines,
            image_size=elems.image_size)
    rectified, field, diag = pipeline.dewarp(
        image, elems, cfg, detect_verticals=args.detect_verticals)
    io.write_image(args.output, rectified)
    diag["config"] = cfg
    if args.diagnostics:
        with open(args.diagnostics, "w") as fh:
            json.dump(diag, fh, indent=2)
    if args.overlay:
        _write_overlay(args.overlay, image, elems)
    if args.grid_vis:
        _write_grid_vis(args.grid_vis, field)
    return EXIT_OK


def cmd_baseline(args, method: str) -> int:
    image = io.read_image(args.image)
    elems = io.read_elements(args.elements)
    n = args.n if args.n is not None else int(io.DEFAULT_CONFIG["n"])
    rectified, _ = pipeline.baseline_dewarp(image, elems, method, n=n)
    io.write_image(args.output, rectified)
    return EXIT_OK


def cmd_synth(args) -> int:
    import os

    spec = WarpSpec(kind=args.kind, amplitude=args.amplitude,
                    seed=args.seed, count=args.count)
    bundle = make_bundle(spec, size=args.size, line_count=args.lines)
    os.makedirs(args.out, exist_ok=True)
    io.write_image(os.path.join(args.out, "flat.png"), bundle.flat_image)
    io.write_image(os.path.join(args.out, "warped.png"), bundle.warped_image)
    io.write_image(os.path.join(args.out, "reference.png"),
                   bundle.rectified_reference)
    io.write_elements(os.path.join(args.out, "elements.json"),
                      bundle.warped_elements)
    io.write_elements(os.path.join(args.out, "flat_elements.json"),
                      bundle.flat_elements)
    io.write_flow(os.path.join(args.out, "gt_backward.flow"),
                  bundle.gt_backward.values)
    io.write_flow(os.path.join(args.out, "gt_forward.flow"),
                  bundle.gt_forward.values)
    with open(os.path.join(args.out, "spec.json"), "w") as fh:
        json.dump({"kind": spec.kind, "amplitude": spec.amplitude,
                   "seed": spec.seed, "count": spec.count,
                   "size": args.size, "lines": args.lines}, fh, indent=2)
    return EXIT_OK


def cmd_eval(args) -> int:
    report = {}
    if args.image_a and args.image_b:
        a = io.read_image(args.image_a)
        b = io.read_image(args.image_b)
        report["ms_ssim"] = metrics.ms_ssim(a, b)
    if args.flow_est and args.flow_ref:
        est = io.read_flow(args.flow_est)
        ref = io.read_flow(args.flow_ref)
        report["local_distortion"] = metrics.local_distortion(est, ref)
    if not report:
        raise io.BadInputError("nothing to evaluate; pass images or flows")
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _load_config(args)
    elems = io.read_elements(args.elements)
    if len(elems.text_lines) < 2:
        raise io.BadInputError("need at least 2 text lines to detect verticals")
    elems = pipeline.with_detected_verticals(
        elems, pipeline.detect_params_from_config(cfg))
    io.write_elements(args.out, elems)
    print(f"detected {len(elems.vertical_lines)} vertical lines")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridwarp",
        description="Document dewarping by grid-regularized energy "
                    "minimization over boundary and line constraints.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dewarp", help="run the full optimizer pipeline")
    p.add_argument("image")
    p.add_argument("elements", help="elements JSON (schema 1)")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--mask", help="binary text-line mask image")
    p.add_argument("--detect-verticals", action="store_true")
    p.add_argument("--diagnostics", help="write diagnostics JSON here")
    p.add_argument("--overlay", help="write element overlay image here")
    p.add_argument("--grid-vis", help="write deformed-grid image here")
    _add_config_flags(p)
    p.set_defaults(func=cmd_dewarp)

    for method in ("tfi", "tps"):
        p = sub.add_parser(f"baseline-{method}",
                           help=f"boundary-only {method.upper()} dewarp")
        p.add_argument("image")
        p.add_argument("elements")
        p.add_argument("-o", "--output", required=True)
        p.add_argument("--n", type=int, default=None)
        p.set_defaults(func=lambda a, m=method: cmd_baseline(a, m))

    p = sub.add_parser("synth", help="generate a synthetic warp bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--kind", default="cylinder",
                   choices=("cylinder", "fold", "gaussian_bumps", "polynomial"))
    p.add_argument("--amplitude", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=3)
    p.add_argument("--size", type=int, default=512)
    p.add_argument("--lines", type=int, default=12)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("eval", help="MS-SSIM / local distortion report")
    p.add_argument("--image-a")
    p.add_argument("--image-b")
    p.add_argument("--flow-est")
    p.add_argument("--flow-ref")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("detect", help="estimate vertical margin lines "
                                      "from text-line endpoints")
    p.add_argument("elements")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_detect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UnderDeterminedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNDERDETERMINED
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (io.BadInputError, ConfigurationError, DomainError,
            FoldedWarpError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
