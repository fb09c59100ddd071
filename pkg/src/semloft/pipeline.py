"""End-to-end extraction: classify, align, detect, sample, report."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import Config, parse_config
from .detectors import detect_all
from .errors import DegenerateInputError
from .gridmap import ClassifyThresholds, classify, dominant_orientation, orientation_profile, rotate_grid
from .mcmc import ChainContext, run_chains
from .scoring import score_report
from .world import UnitClassThresholds


@dataclass
class Frame:
    """How the classified map was derived from the input grid."""

    rotation_deg: float = 0.0
    h_o: float = 0.25
    h_u: float = 0.75

    def to_dict(self):
        return {"rotation_deg": self.rotation_deg, "h_o": self.h_o, "h_u": self.h_u}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["rotation_deg"]), float(d["h_o"]), float(d["h_u"]))


@dataclass
class ExtractResult:
    world: object
    metrics: dict
    traces: list
    best_chain: int
    frame: Frame
    map_c: object
    context: ChainContext


def estimate_rotation(map_c, step=0.5, min_gain=0.02):
    """Dominant orientation, kept at zero unless it sharpens the occupancy
    projections by more than ``min_gain`` relative to no rotation. Small
    spurious angles on an already aligned map would otherwise resample
    every wall."""
    angle = dominant_orientation(map_c, step)
    if angle == 0.0:
        return 0.0
    angles, sharp = orientation_profile(map_c, step)
    at_zero = sharp[np.argmin(np.abs(angles))]
    best = sharp[np.argmin(np.abs(angles - angle))]
    return angle if best > at_zero * (1.0 + min_gain) else 0.0


def prepare_map(grid, config, frame=None):
    """Classified, axis-aligned map. A given ``frame`` is reproduced
    exactly; otherwise the rotation is estimated when alignment is on."""
    if frame is None:
        angle = 0.0
        if config["align.enabled"]:
            try:
                angle = estimate_rotation(classify(grid, config.classify), config["align.step"], config["align.min_gain"])
            except DegenerateInputError:
                angle = 0.0  # nothing occupied to align
        frame = Frame(angle, config.classify.h_o, config.classify.h_u)
    # rotating by -angle undoes a content rotation of +angle
    aligned = rotate_grid(grid, -frame.rotation_deg) if frame.rotation_deg else grid
    return classify(aligned, ClassifyThresholds(frame.h_o, frame.h_u)), frame


def unit_thresholds(config, detections):
    if config["types.area_big"] > 0:
        return UnitClassThresholds(config["types.area_big"], config["types.ratio_big"])
    areas = [c.unit.area_cells for c in detections.units]
    return UnitClassThresholds.adaptive(areas, factor=config["types.area_factor"], ratio_big=config["types.ratio_big"])


def make_context(map_c, config):
    det = detect_all(map_c, config.detector, config.scoring.wall_thickness, config.kernel.min_side)
    return ChainContext(map_c, config.scoring, det, unit_thresholds(config, det), config.kernel)


def metrics_of(map_c, world, params):
    rep = score_report(map_c, world, params)
    for k in ("log_likelihood", "log_prior", "log_posterior", "K"):
        if not math.isfinite(rep[k]):
            rep[k] = None
    return rep


def extract(grid, config=None, seed=0, chains=1, workers=None, init_mode=None, iterations=None):
    config = config or parse_config("")
    chain_cfg = replace(config.chain, seed=seed)
    if init_mode is not None:
        chain_cfg = replace(chain_cfg, init_mode=init_mode)
    if iterations is not None:
        chain_cfg = replace(chain_cfg, max_iterations=iterations, burn_in=min(chain_cfg.burn_in, max(iterations - 1, 0)))
    map_c, frame = prepare_map(grid, config)
    ctx = make_context(map_c, config)
    traces, best = run_chains(ctx, chain_cfg, chains, workers)
    world = traces[best].best_world
    return ExtractResult(world, metrics_of(map_c, world, config.scoring), traces, best, frame, map_c, ctx)


__all__ = ["Config", "ExtractResult", "Frame", "estimate_rotation", "extract", "make_context", "metrics_of", "prepare_map", "unit_thresholds"]
