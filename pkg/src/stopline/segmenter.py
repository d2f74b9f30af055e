"""Segmentation sources for the extraction pipeline.

``segment`` is a hand-written marking heuristic so the pipeline runs with no
learned model. It is a baseline, not a stand-in for a trained network, and
its scores say nothing about one. ``load_mask`` reads masks produced elsewhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from stopline.grid_map import ChannelId, GridMap
from stopline.sparse_lines import connected_components, principal_axis
from stopline.target_maps import SegMask, load_mask, save_mask

__all__ = ["SegmenterConfig", "segment", "load_mask", "save_mask", "bar_candidates"]


@dataclass(frozen=True)
class SegmenterConfig:
    marking_threshold: float = 0.5
    max_angle_from_perpendicular: float = 20.0  # degrees
    min_bar_length: float = 1.5  # meters
    bar_depth_range: tuple[float, float] = (0.2, 0.9)  # meters
    traffic_threshold: float = 0.5

    def __post_init__(self):
        lo, hi = self.bar_depth_range
        if not 0.0 <= self.marking_threshold <= 1.0:
            raise ValueError("marking_threshold must lie in [0, 1]")
        if not self.min_bar_length > 0:
            raise ValueError("min_bar_length must be positive")
        if not 0 < lo <= hi:
            raise ValueError("bar_depth_range must be positive and ordered")
        if not 0 < self.max_angle_from_perpendicular < 90:
            raise ValueError("max_angle_from_perpendicular must lie in (0, 90)")


@dataclass(frozen=True)
class BarCandidate:
    cells: np.ndarray
    length: float
    depth: float
    angle_from_lateral: float  # degrees in [0, 90]
    crossed_by_traffic: bool | None  # None without a traffic-history channel
    accepted: bool


def _fused(g: GridMap) -> np.ndarray:
    missing = [c.name for c in (ChannelId.GroundMarkings, ChannelId.LidarIntensity) if c not in g]
    if missing:
        raise ValueError(f"segmenter needs channels {missing}")
    return np.maximum(g.channel(ChannelId.GroundMarkings), g.channel(ChannelId.LidarIntensity))


def bar_candidates(g: GridMap, cfg: SegmenterConfig | None = None) -> list[BarCandidate]:
    """Every thresholded marking component with its shape measurements and verdict.

    Bars across the ego lane (within the angle tolerance of the lateral axis)
    are accepted by shape alone. With a traffic-history channel, bars along
    the ego heading are accepted too when traffic drives across them (stop
    lines of cross traffic), and every bar must be driven over; lane
    dividers, which traffic runs beside, are rejected either way.
    """
    cfg = cfg or SegmenterConfig()
    hot = _fused(g) >= cfg.marking_threshold
    traffic = g.channel(ChannelId.TrafficHistory) if ChannelId.TrafficHistory in g else None
    res = g.resolution
    out = []
    for cl in connected_components(SegMask(hot.astype(np.uint8), g.geometry)):
        axis = principal_axis(cl.points) if len(cl) > 1 else None
        if axis is None:
            out.append(BarCandidate(cl.cells, res, res, 0.0, None, False))
            continue
        c, u, _ = axis
        rel = cl.points - c
        along = rel @ u
        across = rel @ np.array([-u[1], u[0]])
        length = float(along.max() - along.min()) + res
        depth = float(across.max() - across.min()) + res
        ang = math.degrees(math.atan2(abs(u[1]), abs(u[0])))
        transverse = ang <= cfg.max_angle_from_perpendicular
        longitudinal = 90.0 - ang <= cfg.max_angle_from_perpendicular
        shape_ok = length >= cfg.min_bar_length and cfg.bar_depth_range[0] <= depth <= cfg.bar_depth_range[1]
        if traffic is None:
            crossed = None
            ok = shape_ok and transverse
        else:
            crossed = bool((traffic[cl.cells[:, 0], cl.cells[:, 1]] >= cfg.traffic_threshold).any())
            ok = shape_ok and crossed and (transverse or longitudinal)
        out.append(BarCandidate(cl.cells, length, depth, ang, crossed, ok))
    return out


def segment(g: GridMap, cfg: SegmenterConfig | None = None) -> SegMask:
    """Binary mask of marking components that look like stop bars."""
    mask = np.zeros(g.geometry.shape, dtype=np.uint8)
    for cand in bar_candidates(g, cfg):
        if cand.accepted:
            mask[cand.cells[:, 0], cand.cells[:, 1]] = 1
    return SegMask(mask, g.geometry)
