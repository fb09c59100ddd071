"""Flat ``key = value`` configuration covering every module's parameters.

Keys are dotted (``chain.iterations``); ``#`` starts a comment. Unknown keys
and invalid values are rejected at load time.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mln
from .detectors import DetectorParams
from .errors import ConfigError, FormatError, InputIOError
from .gridmap import ClassifyThresholds
from .mcmc import Annealing, ChainConfig, KernelParams
from .scoring import LookupTable, ScoringParams
from .world import RelationParams

ENV_VAR = "SEMLOFT_CONFIG"


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


# key -> (parser, default); the defaults mirror the module dataclasses
SCHEMA = {
    "map.invert": (_bool, False),
    "map.resolution": (float, 0.05),
    "classify.h_o": (float, 0.25),
    "classify.h_u": (float, 0.75),
    "align.enabled": (_bool, True),
    "align.step": (float, 0.5),
    "align.min_gain": (float, 0.02),
    "scoring.psi": (float, 0.5),
    "scoring.lookup": (_floats, tuple(np.asarray(LookupTable().matrix).ravel().tolist())),
    "scoring.sigma": (float, 5.0),
    "scoring.squared_distance": (_bool, False),
    "scoring.theta_threshold": (float, 0.5),
    "scoring.wall_thickness": (int, 2),
    "relation.dilation_radius": (int, 3),
    "relation.overlap_min": (int, 4),
    "kb.room_room": (float, 2.0),
    "kb.room_hall": (float, 2.0),
    "kb.room_corridor": (float, 2.0),
    "kb.irrelevant": (float, 2.0),
    "kb.file": (str, ""),
    "types.area_factor": (float, 2.5),
    "types.area_big": (float, 0.0),  # > 0 fixes the threshold instead
    "types.ratio_big": (float, 3.0),
    "detector.min_span": (int, 8),
    "detector.min_support": (float, 0.6),
    "detector.merge_gap": (int, 6),
    "detector.gap_support_min": (float, 0.6),
    "detector.extent_overlap_min": (float, 0.7),
    "detector.top_k": (int, 500),
    "detector.band_overlap": (float, 0.8),
    "detector.door_wall_min": (int, 20),
    "detector.door_flank_min": (int, 3),
    "door.width_min": (int, 2),
    "door.width_max": (int, 8),
    "kernel.min_side": (int, 5),
    "kernel.max_step": (int, 32),
    "kernel.p_geo": (float, 0.5),
    "kernel.add_uniform": (float, 0.1),
    "kernel.add_overlap_max": (float, 0.3),
    "kernel.door_attach": (float, 0.5),
    "chain.weights": (_floats, (0.15, 0.15, 0.1, 0.1, 0.15, 0.15, 0.075, 0.075, 0.05)),
    "chain.iterations": (int, 20000),
    "chain.burn_in": (int, 0),
    "chain.record_every": (int, 100),
    "chain.init": (str, "detected"),
    "chain.annealing": (_bool, False),
    "chain.t0": (float, 5.0),
    "chain.decay": (float, 0.999),
    "chain.floor": (float, 1.0),
}


@dataclass(frozen=True)
class Config:
    """Validated parameter groups built from the flat key table."""

    values: dict = field(default_factory=dict)
    classify: ClassifyThresholds = None
    scoring: ScoringParams = None
    detector: DetectorParams = None
    kernel: KernelParams = None
    chain: ChainConfig = None

    def __getitem__(self, key):
        return self.values[key]


def _build(values, base_dir=None):
    v = values
    try:
        classify = ClassifyThresholds(v["classify.h_o"], v["classify.h_u"])
        lookup = LookupTable(np.array(v["scoring.lookup"]).reshape(3, 3))
        kb_formulas = None
        if v["kb.file"]:
            path = Path(v["kb.file"])
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            try:
                kb_formulas = tuple(mln.parse_kb(path.read_text()))
            except OSError as exc:
                raise ConfigError(f"cannot read knowledge base {path}: {exc.strerror or exc}") from None
        t = v["scoring.wall_thickness"]
        if t < 1:
            raise ValueError("scoring.wall_thickness must be >= 1")
        scoring = ScoringParams(
            psi=v["scoring.psi"],
            lookup=lookup,
            gaussian_sigma=v["scoring.sigma"],
            theta_threshold=v["scoring.theta_threshold"],
            classify=classify,
            wall_thickness=t,
            relation=RelationParams(v["relation.dilation_radius"], v["relation.overlap_min"], t),
            kb_weights=(v["kb.room_room"], v["kb.room_hall"], v["kb.room_corridor"], v["kb.irrelevant"]),
            kb_formulas=kb_formulas,
            squared_distance=v["scoring.squared_distance"],
        )
        door_bounds = (v["door.width_min"], v["door.width_max"])
        detector = DetectorParams(
            min_span=v["detector.min_span"],
            min_support=v["detector.min_support"],
            merge_gap=v["detector.merge_gap"],
            gap_support_min=v["detector.gap_support_min"],
            extent_overlap_min=v["detector.extent_overlap_min"],
            top_k=v["detector.top_k"],
            door_bounds=door_bounds,
            band_overlap=v["detector.band_overlap"],
            door_wall_min=v["detector.door_wall_min"],
            door_flank_min=v["detector.door_flank_min"],
        )
        kernel = KernelParams(
            min_side=v["kernel.min_side"],
            door_bounds=door_bounds,
            max_step=v["kernel.max_step"],
            p_geo=v["kernel.p_geo"],
            add_uniform=v["kernel.add_uniform"],
            add_overlap_max=v["kernel.add_overlap_max"],
            door_attach=v["kernel.door_attach"],
        )
        annealing = None
        if v["chain.annealing"]:
            annealing = Annealing(v["chain.t0"], v["chain.decay"], v["chain.floor"])
        chain = ChainConfig(
            kernel_weights=v["chain.weights"],
            max_iterations=v["chain.iterations"],
            burn_in=v["chain.burn_in"],
            init_mode=v["chain.init"],
            annealing=annealing,
            record_every=v["chain.record_every"],
        )
        if v["align.min_gain"] < 0:
            raise ValueError("align.min_gain must be >= 0")
        for key in ("map.resolution", "align.step", "types.area_factor", "types.ratio_big"):
            if not v[key] > 0:
                raise ValueError(f"{key} must be positive")
        if v["types.area_big"] < 0:
            raise ValueError("types.area_big must be >= 0")
    except ConfigError:
        raise
    except (ValueError, TypeError, FormatError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    return Config(dict(v), classify, scoring, detector, kernel, chain)


def defaults():
    return {k: d for k, (_, d) in SCHEMA.items()}


def parse_config(text, overrides=None, base_dir=None):
    values = defaults()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = SCHEMA[key][0](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    for key, value in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = value
    return _build(values, base_dir)


def load_config(path=None, overrides=None):
    """Load ``path``, else the file named by ``SEMLOFT_CONFIG``, else defaults."""
    if path is None:
        path = os.environ.get(ENV_VAR) or None
    if path is None:
        return parse_config("", overrides)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputIOError(f"cannot read config {path}: {exc.strerror or exc}") from None
    return parse_config(text, overrides, Path(path).parent)


def format_config(values):
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, tuple):
            return ", ".join(repr(x) for x in v)
        return str(v)

    return "".join(f"{k} = {fmt(values[k])}\n" for k in SCHEMA)
