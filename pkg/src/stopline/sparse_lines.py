"""Segmentation mask -> sparse stop-line geometry.

Pipeline: 8-connected components, a principal-axis fit per component, then
pairwise merging of near-collinear fragments until nothing else merges.
Line coordinates are meters in the ego frame of the mask's grid.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from stopline import kernels
from stopline.grid_map import MetricPoint
from stopline.target_maps import SegMask

_ORDER_EPS = 1e-9


@dataclass(frozen=True)
class StopLine:
    p_start: MetricPoint
    p_end: MetricPoint
    length: float
    slope: float  # radians in [0, pi) from the lateral (x) axis

    @classmethod
    def from_points(cls, a, b) -> "StopLine":
        """Build a line from two endpoints, ordering them and deriving length and slope."""
        a = MetricPoint(float(a[0]), float(a[1]))
        b = MetricPoint(float(b[0]), float(b[1]))
        if b.x < a.x - _ORDER_EPS or (abs(b.x - a.x) <= _ORDER_EPS and b.y < a.y):
            a, b = b, a
        dx, dy = b.x - a.x, b.y - a.y
        length = math.hypot(dx, dy)
        if not length > 0:
            raise ValueError("stop line endpoints coincide")
        slope = math.atan2(dy, dx) % math.pi
        if slope >= math.pi:
            slope = 0.0
        return cls(a, b, length, slope)

    @property
    def direction(self) -> np.ndarray:
        return np.array([self.p_end.x - self.p_start.x, self.p_end.y - self.p_start.y]) / self.length

    @property
    def midpoint(self) -> MetricPoint:
        return MetricPoint((self.p_start.x + self.p_end.x) / 2, (self.p_start.y + self.p_end.y) / 2)

    def sort_key(self) -> tuple:
        return (self.p_start.x, self.p_start.y, self.p_end.x, self.p_end.y)


@dataclass
class Cluster:
    cells: np.ndarray  # (N, 2) int (row, col), raster order
    points: np.ndarray  # (N, 2) metric cell centers
    centroid: MetricPoint

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class RefineConfig:
    d_thresh_merge: float = 0.3  # meters
    a_thresh: float = 8.0  # degrees
    n_interp: int = 10
    min_cluster_cells: int = 3

    def __post_init__(self):
        if not (self.d_thresh_merge > 0 and self.a_thresh > 0 and self.n_interp > 0 and self.min_cluster_cells > 0):
            raise ValueError(f"refine parameters must be positive: {self}")


def connected_components(mask: SegMask) -> list[Cluster]:
    """Maximal 8-connected foreground groups, ordered by their first raster cell."""
    labels, n = kernels.label8(mask.data)
    if n == 0:
        return []
    rows, cols = np.nonzero(labels)  # raster order
    lab = labels[rows, cols]
    order = np.argsort(lab, kind="stable")
    bounds = np.searchsorted(lab[order], np.arange(1, n + 2))
    xy = mask.geometry.cells_to_metric(rows, cols)
    out = []
    for i in range(n):
        idx = order[bounds[i] : bounds[i + 1]]
        pts = xy[idx]
        c = pts.mean(axis=0)
        out.append(Cluster(np.stack([rows[idx], cols[idx]], axis=1), pts, MetricPoint(float(c[0]), float(c[1]))))
    return out


def principal_axis(points: np.ndarray, weights=None):
    """Centroid, unit principal direction and descending eigenvalues of a 2-D point set.

    Returns ``None`` when the covariance is isotropic (no dominant axis). The
    direction is oriented to point toward +x (or +y when vertical).
    """
    pts = np.asarray(points, dtype=np.float64)
    if weights is None:
        c = pts.mean(axis=0)
        d = pts - c
        cov = d.T @ d / len(pts)
    else:
        w = np.asarray(weights, dtype=np.float64)
        c = (pts * w[:, None]).sum(axis=0) / w.sum()
        d = pts - c
        cov = (d * w[:, None]).T @ d / w.sum()
    evals, evecs = np.linalg.eigh(cov)
    lo, hi = evals
    if abs(hi - lo) <= 1e-9 * max(hi, 1e-12):
        return None
    u = evecs[:, 1]
    if u[0] < -_ORDER_EPS or (abs(u[0]) <= _ORDER_EPS and u[1] < 0):
        u = -u
    return c, u, (hi, lo)


def _line_through(points: np.ndarray, weights=None) -> StopLine | None:
    axis = principal_axis(points, weights)
    if axis is None:
        return None
    c, u, _ = axis
    t = (np.asarray(points) - c) @ u
    lo, hi = float(t.min()), float(t.max())
    if not hi - lo > 0:
        return None
    return StopLine.from_points(c + lo * u, c + hi * u)


def fit_line(cluster: Cluster, min_cluster_cells: int = 3) -> StopLine | None:
    """Principal-axis line of a cluster, spanning its extreme projected cell centers.

    ``None`` for clusters below ``min_cluster_cells`` or without a dominant axis.
    """
    if len(cluster) < min_cluster_cells:
        return None
    return _line_through(cluster.points)


def perp_distance(p, line: StopLine) -> float:
    u = line.direction
    dx, dy = p[0] - line.p_start.x, p[1] - line.p_start.y
    return abs(u[0] * dy - u[1] * dx)


def interpolation_points(line: StopLine, n_interp: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n_interp)[:, None]
    a = np.array(line.p_start)
    b = np.array(line.p_end)
    return a + t * (b - a)


def line_pair_distance(l_i: StopLine, l_j: StopLine, n_interp: int = 10) -> float:
    """Mean perpendicular distance of ``n_interp`` evenly spaced points of ``l_i`` to the line of ``l_j``."""
    if n_interp < 2:
        raise ValueError("n_interp must be >= 2")
    pts = interpolation_points(l_i, n_interp)
    u = l_j.direction
    rel = pts - np.array(l_j.p_start)
    return float(np.mean(np.abs(u[0] * rel[:, 1] - u[1] * rel[:, 0])))


def line_pair_angle(l_i: StopLine, l_j: StopLine) -> float:
    """Acute angle between the two line directions, in degrees within [0, 90]."""
    a, b = l_i.direction, l_j.direction
    cross = abs(a[0] * b[1] - a[1] * b[0])
    dot = abs(a[0] * b[0] + a[1] * b[1])
    return math.degrees(math.atan2(cross, dot))


def should_merge(a: StopLine, b: StopLine, cfg: RefineConfig) -> bool:
    short, long_ = (a, b) if a.length <= b.length else (b, a)
    return (
        line_pair_angle(a, b) < cfg.a_thresh
        and line_pair_distance(short, long_, cfg.n_interp) < cfg.d_thresh_merge
    )


def merge_lines(a: StopLine, b: StopLine) -> StopLine:
    """Re-fit one line through both lines' endpoints and span all four projections."""
    pts = np.array([a.p_start, a.p_end, b.p_start, b.p_end], dtype=np.float64)
    merged = _line_through(pts)
    if merged is None:  # four coincident-ish points; keep the longer input
        return a if a.length >= b.length else b
    return merged


def refine_lines(lines, cfg: RefineConfig | None = None) -> list[StopLine]:
    """Merge pairs closer than ``d_thresh_merge`` and within ``a_thresh`` until a fixed point."""
    cfg = cfg or RefineConfig()
    cur = sorted(lines, key=StopLine.sort_key)
    while True:
        hit = None
        for i in range(len(cur)):
            for j in range(i + 1, len(cur)):
                if should_merge(cur[i], cur[j], cfg):
                    hit = (i, j)
                    break
            if hit:
                break
        if hit is None:
            return cur
        i, j = hit
        merged = merge_lines(cur[i], cur[j])
        cur = sorted([l for k, l in enumerate(cur) if k not in hit] + [merged], key=StopLine.sort_key)


def extract_stop_lines(mask: SegMask, cfg: RefineConfig | None = None) -> list[StopLine]:
    cfg = cfg or RefineConfig()
    fitted = (fit_line(c, cfg.min_cluster_cells) for c in connected_components(mask))
    return refine_lines([l for l in fitted if l is not None], cfg)


# --- JSON line lists -------------------------------------------------------


def _r(v: float) -> float:
    return round(float(v), 6) + 0.0


def line_to_json(line: StopLine) -> dict:
    return {
        "p_start": [_r(line.p_start.x), _r(line.p_start.y)],
        "p_end": [_r(line.p_end.x), _r(line.p_end.y)],
        "length_m": _r(line.length),
        "slope_deg": _r(math.degrees(line.slope)),
    }


def lines_to_json(lines) -> str:
    return json.dumps([line_to_json(l) for l in lines], indent=1) + "\n"


def lines_from_json(text: str) -> list[StopLine]:
    data = json.loads(text)
    if not isinstance(data, list):
        raise ValueError("line file must hold a JSON array")
    out = []
    for i, rec in enumerate(data):
        try:
            out.append(StopLine.from_points(rec["p_start"], rec["p_end"]))
        except (KeyError, TypeError, IndexError) as exc:
            raise ValueError(f"line record {i} malformed: {exc}") from None
    return out


def write_lines(path, lines) -> None:
    Path(path).write_text(lines_to_json(lines))


def read_lines(path) -> list[StopLine]:
    try:
        return lines_from_json(Path(path).read_text())
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
