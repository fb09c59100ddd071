"""Command-line entry point: extract, synth, score, detect, render.

Failures print ``{"error": {"kind": ..., "message": ...}}`` on stderr and
exit with 2 for input errors or 3 for runtime capacity or stall errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .config import SCHEMA, load_config
from .errors import ConfigError, FormatError, InputIOError, SemloftError, exit_code_for
from .gridmap import NoiseModel, load_pgm, synth_map, write_pgm
from .pipeline import Frame, extract, make_context, metrics_of, prepare_map
from .render import overlay, write_image
from .scoring import compute_theta
from .world import check_bounds, relations_of, world_from_dict, world_to_dict


SCHEMAS = ("world", "metrics", "detections", "error", "trace")

# ------------------------------------------------------------------ I/O

def load_schema(name):
    """A shipped JSON Schema: world, metrics, detections, error or trace."""
    if name not in SCHEMAS:
        raise KeyError(name)
    return json.loads(resources.files("semloft").joinpath("schemas", f"{name}.schema.json").read_text())


def dump_json(obj):
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise InputIOError(f"cannot write {path}: {exc.strerror or exc}") from None


def read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputIOError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path} is not valid JSON: {exc}") from None


def read_world(path):
    data = read_json(path)
    if not isinstance(data, dict):
        raise FormatError(f"{path}: world JSON must be an object")
    return world_from_dict(data), data


def _overrides(pairs):
    out = {}
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        try:
            out[key] = SCHEMA[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}") from None
    return out


def config_from_args(args, extra=None):
    overrides = _overrides(getattr(args, "set", None))
    overrides.update(extra or {})
    if getattr(args, "invert", False):
        overrides["map.invert"] = True
    return load_config(args.config, overrides)


def load_map(path, config):
    return load_pgm(path, invert=config["map.invert"], resolution=config["map.resolution"])


def frame_of(data, config):
    """The frame stored with a world, else the unrotated config frame."""
    if "frame" in data:
        try:
            return Frame.from_dict(data["frame"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed frame in world JSON: {exc}") from None
    return Frame(0.0, config.classify.h_o, config.classify.h_u)


def world_document(world, map_c, config, frame=None, extra=None):
    rel = relations_of(world, config.scoring.relation)
    theta = compute_theta(world, config.scoring)
    ex = {"frame": frame.to_dict()} if frame is not None else {}
    ex.update(extra or {})
    return world_to_dict(world, rel, theta, dims=map_c.dims, extra=ex)


# ------------------------------------------------------------- commands

def cmd_extract(args):
    extra = {}
    if args.iters is not None:
        extra["chain.iterations"] = args.iters
    if args.init is not None:
        extra["chain.init"] = args.init
    config = config_from_args(args, extra)
    grid = load_map(args.map, config)
    res = extract(grid, config, seed=args.seed, chains=args.chains, workers=args.workers)
    if args.trace:
        trace_lines = []
        for i, tr in enumerate(res.traces):
            for s in tr.samples:
                trace_lines.append(
                    {
                        "record": "sample",
                        "chain": i,
                        "seed": tr.seed,
                        "iteration": s.iteration,
                        "log_posterior": s.log_posterior,
                        "best_score": s.best_score,
                        "unit_count": len(s.world.units),
                    }
                )
            trace_lines.append(
                {
                    "record": "summary",
                    "chain": i,
                    "seed": tr.seed,
                    "best_score": tr.best_score,
                    "acceptance_counts": tr.acceptance_counts,
                    "selected": i == res.best_chain,
                }
            )
        write_text(args.trace, "".join(json.dumps(r, allow_nan=False) + "\n" for r in trace_lines))
    doc = world_document(res.world, res.map_c, config, res.frame, {"seed": args.seed})
    write_text(args.out, dump_json(doc))
    if args.metrics:
        write_text(args.metrics, dump_json(res.metrics))
    if args.png:
        write_image(overlay(res.map_c, res.world, config.scoring.wall_thickness), args.png)
    return 0


def cmd_synth(args):
    config = config_from_args(args)
    world, data = read_world(args.world)
    dims = tuple(args.dims) if args.dims else tuple(data.get("dims", ()))
    if len(dims) != 2 or min(dims) <= 0:
        raise FormatError("map dimensions unknown: give --dims W H or a world with 'dims'")
    check_bounds(world, dims)
    noise = NoiseModel.symmetric(args.noise, seed=args.seed, clutter_density=args.clutter)
    grid = synth_map(world, dims, noise, config.scoring.wall_thickness, config["map.resolution"])
    if config["map.invert"]:
        grid = type(grid)(1.0 - grid.cells, grid.resolution)
    write_pgm(grid, args.out, binary=not args.ascii)
    if args.truth:
        write_text(args.truth, dump_json(world_to_dict(world, dims=dims)))
    return 0


def cmd_score(args):
    config = config_from_args(args)
    world, data = read_world(args.world)
    grid = load_map(args.map, config)
    map_c, _ = prepare_map(grid, config, frame_of(data, config))
    write_text(args.out, dump_json(metrics_of(map_c, world, config.scoring)))
    return 0


def _detections_document(det, map_c):
    return {
        "dims": list(map_c.dims),
        "walls": [
            {"axis": w.axis, "line": w.line_coord, "thickness": w.thickness, "span": list(w.span), "support": w.support}
            for w in det.walls
        ],
        "doors": [
            {"axis": d.axis, "band": list(d.band), "segment": [list(p) for p in d.segment], "gap_support": d.gap_support}
            for d in det.doors
        ],
        "units": [{"rectangle": [list(v) for v in c.rectangle], "score": c.score} for c in det.units],
    }


def cmd_detect(args):
    config = config_from_args(args)
    grid = load_map(args.map, config)
    map_c, _ = prepare_map(grid, config)
    det = make_context(map_c, config).detections
    write_text(args.out, dump_json(_detections_document(det, map_c)))
    return 0


def cmd_render(args):
    config = config_from_args(args)
    grid = load_map(args.map, config)
    world, data = (None, {}) if args.world is None else read_world(args.world)
    map_c, _ = prepare_map(grid, config, frame_of(data, config) if world is not None else None)
    write_image(overlay(map_c, world, config.scoring.wall_thickness), args.out, args.format)
    return 0


# --------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--config", help="key = value config file (default: $SEMLOFT_CONFIG)")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    p.add_argument("--invert", action="store_true", help="treat dark map pixels as free")


def build_parser():
    parser = argparse.ArgumentParser(prog="semloft", description="Semantic world extraction from occupancy grid maps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="infer a semantic world from a PGM map")
    _common(p)
    p.add_argument("--map", required=True)
    p.add_argument("--out", default="-", help="world JSON (default: stdout)")
    p.add_argument("--metrics", help="metrics JSON")
    p.add_argument("--trace", help="per-sample JSONL trace")
    p.add_argument("--png", help="overlay image")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int)
    p.add_argument("--init", choices=("detected", "random"))
    p.add_argument("--chains", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("synth", help="render a world JSON into a noisy PGM map")
    _common(p)
    p.add_argument("--world", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", help="copy of the ground-truth world JSON")
    p.add_argument("--dims", type=int, nargs=2, metavar=("W", "H"))
    p.add_argument("--noise", type=float, default=0.0, help="class-flip rate")
    p.add_argument("--clutter", type=float, default=0.0, help="fraction of free cells turned occupied")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ascii", action="store_true", help="write P2 instead of P5")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="score a world against a map")
    _common(p)
    p.add_argument("--map", required=True)
    p.add_argument("--world", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("detect", help="bottom-up wall, door and rectangle candidates")
    _common(p)
    p.add_argument("--map", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("render", help="overlay a world on its classified map")
    _common(p)
    p.add_argument("--map", required=True)
    p.add_argument("--world")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("png", "pgm"))
    p.set_defaults(func=cmd_render)
    return parser


def error_json(kind, message):
    return json.dumps({"error": {"kind": kind, "message": message}})


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "chains", 1) < 1:
            raise ConfigError("--chains must be >= 1")
        return args.func(args)
    except SemloftError as exc:
        print(error_json(exc.kind, str(exc)), file=sys.stderr)
        return exit_code_for(exc.kind)
    except ValueError as exc:
        # parameter validation inside the module dataclasses
        print(error_json("config", str(exc)), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
