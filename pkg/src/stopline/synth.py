"""Deterministic synthetic four-way intersections.

Scenes are laid out in the ego frame (x right, y forward). The ego vehicle
drives north in the lane next to the road centerline, and the crossing road
is centered ``intersection_offset`` meters ahead. Traffic keeps right.

Randomness comes from Philox generators keyed by ``SeedSequence([seed,
stream])``, one stream per degradation, so each effect is reproducible on
its own.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from stopline.grid_map import ChannelId, GridGeometry, GridMap, new_grid
from stopline.sparse_lines import StopLine
from stopline.target_maps import SegMask

BAR_DEPTH = 0.5  # painted stop-bar depth, meters
DIVIDER_DASH = 3.0
CROSSWALK_BAND = (0.5, 3.0)  # distance range from the crossing edge, meters
CROSSWALK_STRIPE = 0.5
STREAK_HALF_WIDTH = 0.5
SIDEWALK = 3.0
CAR_FOOTPRINT = (2.0, 4.5)

MARK_LI = 0.9
ROAD_LI = 0.15
OFFROAD_LI = 0.05
ROAD_SEM = 1.0
GRASS_SEM = 0.3

_STREAM_ERASE = 1
_STREAM_NOISE = 2
_STREAM_OCCLUSION = 3


@dataclass(frozen=True)
class SceneSpec:
    seed: int = 0
    intersection_offset: float = 20.0
    lane_width: float = 3.5
    lanes_per_direction: int = 1
    stop_line_setback: float = 2.0
    include_crosswalks: bool = False
    occlusion_blobs: int = 0
    marking_erase_fraction: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if not self.lane_width > 0:
            raise ValueError("lane_width must be positive")
        if self.intersection_offset < 0:
            raise ValueError("intersection_offset must be >= 0")
        if self.lanes_per_direction < 1:
            raise ValueError("lanes_per_direction must be >= 1")
        if self.stop_line_setback <= BAR_DEPTH / 2:
            raise ValueError("stop_line_setback must exceed half the bar depth")
        if self.include_crosswalks and self.stop_line_setback < CROSSWALK_BAND[1] + 1.0:
            raise ValueError(f"crosswalks need stop_line_setback >= {CROSSWALK_BAND[1] + 1.0} m")
        if self.occlusion_blobs < 0:
            raise ValueError("occlusion_blobs must be >= 0")
        if not 0.0 <= self.marking_erase_fraction <= 1.0:
            raise ValueError("marking_erase_fraction must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)


def rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def default_geometry() -> GridGeometry:
    return GridGeometry(192, 192)


# --- rasterization -----------------------------------------------------------


def _segment_cells(xs, ys, a, b, thickness_cells: float, res: float) -> np.ndarray:
    """Cells whose centers lie within the segment's footprint.

    Along the segment a cell is kept when its center projects within half a
    cell of the span; across it the window is ``(-t/2, t/2]`` cells, so an
    axis-aligned segment always covers exactly ``t`` rows or columns.
    """
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    length = math.hypot(dx, dy)
    ux, uy = dx / length, dy / length
    rx, ry = xs - ax, ys - ay
    t = (rx * ux + ry * uy) / res
    n = (ux * ry - uy * rx) / res
    eps = 1e-7
    half = thickness_cells / 2.0
    return (t >= -0.5 - eps) & (t < length / res + 0.5 - eps) & (n > -half + eps) & (n <= half + eps)


def rasterize_lines(lines, geometry: GridGeometry, thickness: float) -> np.ndarray:
    xs, ys = geometry.metric_grids()
    out = np.zeros(geometry.shape, dtype=bool)
    for l in lines:
        a = (l.p_start.x, l.p_start.y) if isinstance(l, StopLine) else l[0]
        b = (l.p_end.x, l.p_end.y) if isinstance(l, StopLine) else l[1]
        out |= _segment_cells(xs, ys, a, b, thickness, geometry.resolution)
    return out


def rasterize_gt(lines, geometry: GridGeometry, thickness: int = 2) -> SegMask:
    """Binary mask of the cells covered by each line drawn ``thickness`` cells wide."""
    if thickness < 1:
        raise ValueError("thickness must be >= 1")
    return SegMask(rasterize_lines(lines, geometry, thickness).astype(np.uint8), geometry)


# --- scene layout --------------------------------------------------------------


@dataclass(frozen=True)
class _Layout:
    xc: float  # road centerline x
    d: float  # crossing road centerline y
    half: float  # half road width
    spec: SceneSpec

    @classmethod
    def of(cls, spec: SceneSpec) -> "_Layout":
        return cls(-spec.lane_width / 2.0, spec.intersection_offset, spec.lanes_per_direction * spec.lane_width, spec)

    def stop_lines(self) -> list[tuple[tuple[float, float], tuple[float, float]]]:
        xc, d, h, s = self.xc, self.d, self.half, self.spec.stop_line_setback
        return [
            ((xc, d - h - s), (xc + h, d - h - s)),  # ego approach, northbound
            ((xc - h, d + h + s), (xc, d + h + s)),  # oncoming, southbound
            ((xc - h - s, d - h), (xc - h - s, d)),  # eastbound, from the left
            ((xc + h + s, d), (xc + h + s, d + h)),  # westbound, from the right
        ]

    def crosswalk_lines(self):
        xc, d, h = self.xc, self.d, self.half
        e = sum(CROSSWALK_BAND) / 2.0
        return [
            ((xc - h, d - h - e), (xc + h, d - h - e)),
            ((xc - h, d + h + e), (xc + h, d + h + e)),
            ((xc - h - e, d - h), (xc - h - e, d + h)),
            ((xc + h + e, d - h), (xc + h + e, d + h)),
        ]

    def crosswalk_stripes(self):
        """Short segments parallel to traffic, spaced across each crosswalk band."""
        xc, d, h = self.xc, self.d, self.half
        b0, b1 = CROSSWALK_BAND
        pitch = 2 * CROSSWALK_STRIPE
        offsets = np.arange(-h + CROSSWALK_STRIPE / 2, h, pitch)
        segs = []
        for o in offsets:
            segs.append(((xc + o, d - h - b1), (xc + o, d - h - b0)))
            segs.append(((xc + o, d + h + b0), (xc + o, d + h + b1)))
            segs.append(((xc - h - b1, d + o), (xc - h - b0, d + o)))
            segs.append(((xc + h + b0, d + o), (xc + h + b1, d + o)))
        return segs

    def divider_dashes(self, extent: float):
        """Dashed lane boundaries, stopping 1 m short of the stop bars."""
        xc, d, h, s, w = self.xc, self.d, self.half, self.spec.stop_line_setback, self.spec.lane_width
        n = self.spec.lanes_per_direction
        gap = h + s + 1.0
        offsets = [k * w for k in range(-(n - 1), n)]  # 0 is the centerline
        segs = []
        for lo, hi in ((-extent, -gap), (gap, extent)):
            starts = np.arange(lo, hi, 2 * DIVIDER_DASH) if lo < hi else []
            for t0 in starts:
                t1 = min(t0 + DIVIDER_DASH, hi)
                if t1 - t0 < 0.5:
                    continue
                for o in offsets:
                    segs.append(((xc + o, d + t0), (xc + o, d + t1)))
                    segs.append(((xc + t0, d + o), (xc + t1, d + o)))
        return segs


def scene_ground_truth(spec: SceneSpec) -> list[StopLine]:
    lay = _Layout.of(spec)
    segs = lay.stop_lines() + (lay.crosswalk_lines() if spec.include_crosswalks else [])
    return sorted((StopLine.from_points(a, b) for a, b in segs), key=StopLine.sort_key)


def _check_fits(lines, geometry: GridGeometry) -> None:
    for l in lines:
        for p in (l.p_start, l.p_end):
            if not geometry.in_bounds(geometry.metric_to_cell(p)):
                raise ValueError(f"scene geometry does not fit the grid: point {tuple(p)} outside")


def generate_scene(spec: SceneSpec, geometry: GridGeometry | None = None) -> tuple[GridMap, list[StopLine]]:
    """Render one intersection; returns the grid map and its ground-truth lines."""
    geometry = geometry or default_geometry()
    gt = scene_ground_truth(spec)
    _check_fits(gt, geometry)
    lay = _Layout.of(spec)
    res = geometry.resolution
    xs, ys = geometry.metric_grids()

    on_ns = np.abs(xs - lay.xc) <= lay.half
    on_ew = np.abs(ys - lay.d) <= lay.half
    road = on_ns | on_ew

    bar_cells = max(1, round(BAR_DEPTH / res))
    bars = rasterize_lines(lay.stop_lines(), geometry, bar_cells)
    extent = (geometry.height + geometry.width) * res
    marks = bars | rasterize_lines(lay.divider_dashes(extent), geometry, 1)
    if spec.include_crosswalks:
        marks |= rasterize_lines(lay.crosswalk_stripes(), geometry, max(1, round(CROSSWALK_STRIPE / res)))

    traffic = np.zeros(geometry.shape, dtype=bool)
    w, n = spec.lane_width, spec.lanes_per_direction
    for k in range(n):
        o = (k + 0.5) * w
        for cx in (lay.xc + o, lay.xc - o):
            traffic |= on_ns & (np.abs(xs - cx) <= STREAK_HALF_WIDTH)
        for cy in (lay.d + o, lay.d - o):
            traffic |= on_ew & (np.abs(ys - cy) <= STREAK_HALF_WIDTH)

    buildings = (np.abs(xs - lay.xc) > lay.half + SIDEWALK) & (np.abs(ys - lay.d) > lay.half + SIDEWALK)

    if spec.marking_erase_fraction > 0:
        rng = rng_for(spec.seed, _STREAM_ERASE)
        idx = np.flatnonzero(bars)
        k = int(round(spec.marking_erase_fraction * idx.size))
        erased = np.zeros(geometry.shape, dtype=bool)
        erased.flat[rng.permutation(idx)[:k]] = True
        marks &= ~erased

    gm = marks.astype(np.float64)
    li = np.where(marks, MARK_LI, np.where(road, ROAD_LI, OFFROAD_LI))
    if spec.noise_sigma > 0:
        rng = rng_for(spec.seed, _STREAM_NOISE)
        gm = np.clip(gm + rng.normal(0.0, spec.noise_sigma, gm.shape), 0.0, 1.0)
        li = np.clip(li + rng.normal(0.0, spec.noise_sigma, li.shape), 0.0, 1.0)

    g = new_grid(ChannelId, geometry.height, geometry.width, geometry.resolution, geometry.ego_cell, geometry.ego_heading)
    g.set_channel(ChannelId.GroundMarkings, gm)
    g.set_channel(ChannelId.LidarIntensity, li)
    g.set_channel(ChannelId.SemanticsGround, np.where(road, ROAD_SEM, GRASS_SEM))
    g.set_channel(ChannelId.Occupancy, buildings.astype(np.float64))
    g.set_channel(ChannelId.TrafficHistory, traffic.astype(np.float64))
    if spec.occlusion_blobs:
        g = apply_occlusion(g, spec)
    return g, gt


def occlusion_boxes(g: GridMap, spec: SceneSpec) -> list[tuple[float, float, float, float]]:
    """Seeded vehicle footprints ``(x0, y0, x1, y1)`` in the ego frame."""
    rng = rng_for(spec.seed, _STREAM_OCCLUSION)
    geom = g.geometry
    corners = geom.cells_to_metric([0, 0, geom.height - 1, geom.height - 1], [0, geom.width - 1, 0, geom.width - 1])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    boxes = []
    for _ in range(spec.occlusion_blobs):
        cx, cy = rng.uniform(lo, hi)
        wdt, lng = CAR_FOOTPRINT if rng.random() < 0.5 else CAR_FOOTPRINT[::-1]
        boxes.append((cx - wdt / 2, cy - lng / 2, cx + wdt / 2, cy + lng / 2))
    return boxes


def apply_occlusion(g: GridMap, spec: SceneSpec, boxes=None) -> GridMap:
    """Blank markings and lidar returns under parked-vehicle footprints and mark them occupied.

    ``boxes`` overrides the seeded placement; returns a new grid map.
    """
    out = g.copy()
    boxes = occlusion_boxes(g, spec) if boxes is None else boxes
    if not boxes:
        return out
    xs, ys = g.geometry.metric_grids()
    hit = np.zeros(g.geometry.shape, dtype=bool)
    for x0, y0, x1, y1 in boxes:
        hit |= (xs >= x0) & (xs <= x1) & (ys >= y0) & (ys <= y1)
    for cid in (ChannelId.GroundMarkings, ChannelId.LidarIntensity):
        if cid in out:
            out.channels[cid][hit] = 0.0
    if ChannelId.Occupancy in out:
        out.channels[ChannelId.Occupancy][hit] = 1.0
    else:
        occ = np.zeros(g.geometry.shape, dtype=np.float32)
        occ[hit] = 1.0
        out.channels[ChannelId.Occupancy] = occ
    return out


def stop_bar_mask(spec: SceneSpec, geometry: GridGeometry) -> np.ndarray:
    """Cells painted by the scene's stop bars (before erasure or occlusion)."""
    lay = _Layout.of(spec)
    return rasterize_lines(lay.stop_lines(), geometry, max(1, round(BAR_DEPTH / geometry.resolution)))


def offset_range(spec: SceneSpec, geometry: GridGeometry, margin: float = 1.0) -> tuple[float, float]:
    """Feasible intersection offsets for ``spec`` on ``geometry`` (level heading)."""
    reach = spec.lanes_per_direction * spec.lane_width + spec.stop_line_setback
    if spec.include_crosswalks:
        reach = max(reach, spec.lanes_per_direction * spec.lane_width + CROSSWALK_BAND[1])
    forward = geometry.ego_cell[0] * geometry.resolution
    return reach + 2.0, forward - reach - margin


def make_corpus(n: int, seed: int, geometry: GridGeometry | None = None, **overrides) -> list[SceneSpec]:
    """``n`` seeded scene specs spread over the grid's forward range."""
    if n < 1:
        raise ValueError("corpus size must be >= 1")
    geometry = geometry or default_geometry()
    rng = rng_for(seed, 0)
    specs = []
    for i in range(n):
        lanes = int(rng.integers(1, 3))
        lane_width = float(np.round(rng.uniform(3.0, 3.75), 3))
        crosswalks = bool(overrides.get("include_crosswalks", False))
        setback = float(np.round(rng.uniform(4.0, 5.0) if crosswalks else rng.uniform(1.5, 3.0), 3))
        scene_seed = int(rng.integers(0, 2**31 - 1))
        base = SceneSpec(
            seed=scene_seed,
            lane_width=lane_width,
            lanes_per_direction=lanes,
            stop_line_setback=setback,
            include_crosswalks=crosswalks,
        )
        lo, hi = offset_range(base, geometry)
        if hi <= lo:
            raise ValueError("grid too small for the sampled intersection")
        # stratify offsets across the forward range so every band is populated
        u = (i + rng.random()) / n
        offset = float(np.round(lo + u * (hi - lo), 3))
        fields = {k: v for k, v in overrides.items() if k != "include_crosswalks"}
        specs.append(replace(base, intersection_offset=offset, **fields))
    return specs
