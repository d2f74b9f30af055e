"""Auxiliary training targets derived from a binary stop-line mask.

* nearest-foreground feature map (exact Euclidean, linear time),
* normalized signed distance map,
* direction map of offsets to the nearest foreground cell,
* the joint segmentation/regression loss used to score predictions.

All distances are in cells; ``d_thresh`` is a positive integer number of cells.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from stopline import kernels
from stopline.grid_map import (
    DIRECTION_DX_ID,
    DIRECTION_DY_ID,
    DISTANCE_ID,
    MASK_ID,
    GmapFormatError,
    GridGeometry,
    read_layers,
    write_layers,
)

DEFAULT_D_THRESH = 12
LAMBDA_DIST = 0.5
LAMBDA_DIR = 0.5
PROB_EPS = 1e-7


@dataclass
class SegMask:
    """Binary stop-line mask (1 = foreground) with the georeference of its grid."""

    data: np.ndarray
    geometry: GridGeometry

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2-D raster, got shape {data.shape}")
        if data.shape != self.geometry.shape:
            raise ValueError(f"mask shape {data.shape} != geometry {self.geometry.shape}")
        if data.dtype != np.uint8:
            if not np.isin(data, (0, 1)).all():
                raise ValueError("mask values must be exactly 0 or 1")
            data = data.astype(np.uint8)
        self.data = data

    @classmethod
    def from_array(cls, data, resolution: float = 0.26, ego_cell=None) -> "SegMask":
        """Wrap a bare array; the ego cell defaults to the bottom-center cell."""
        data = np.asarray(data)
        if data.ndim != 2 or 0 in data.shape:
            raise ValueError(f"mask must be a non-empty 2-D raster, got shape {data.shape}")
        h, w = data.shape
        if ego_cell is None:
            ego_cell = (h - 1, w // 2)
        return cls(data, GridGeometry(h, w, resolution, ego_cell))

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def resolution(self) -> float:
        return self.geometry.resolution


@dataclass
class FeatureMap:
    """Nearest foreground cell per cell; ``valid`` is False when there is no foreground."""

    rows: np.ndarray
    cols: np.ndarray
    dist2: np.ndarray
    valid: np.ndarray

    @property
    def distance(self) -> np.ndarray:
        out = np.full(self.dist2.shape, np.inf)
        out[self.valid] = np.sqrt(self.dist2[self.valid])
        return out


@dataclass
class DistanceMap:
    values: np.ndarray
    d_thresh: int


@dataclass
class DirectionMap:
    dx: np.ndarray
    dy: np.ndarray
    d_thresh: int


@dataclass(frozen=True)
class LossBreakdown:
    ce_seg: float
    l2_dist: float
    l2_dir: float
    total: float
    lambda1: float = LAMBDA_DIST
    lambda2: float = LAMBDA_DIR


def _mask_array(mask) -> np.ndarray:
    arr = mask.data if isinstance(mask, SegMask) else np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"mask must be a non-empty 2-D raster, got shape {arr.shape}")
    return (arr != 0).astype(np.uint8)


def _check_thresh(d_thresh) -> int:
    if int(d_thresh) != d_thresh or d_thresh < 1:
        raise ValueError(f"d_thresh must be a positive integer, got {d_thresh}")
    return int(d_thresh)


def nearest_foreground_map(mask) -> FeatureMap:
    """Exact Euclidean nearest foreground cell for every cell.

    Equidistant foreground cells resolve to the smallest row, then the
    smallest column.
    """
    m = _mask_array(mask)
    d2, rows, cols = kernels.nearest_site(m)
    return FeatureMap(rows=rows, cols=cols, dist2=d2, valid=d2 >= 0)


def signed_distance_map(mask, d_thresh: int = DEFAULT_D_THRESH) -> DistanceMap:
    """Normalized clipped distance target: 1 on the foreground, 0 at ``d_thresh`` and beyond."""
    d_thresh = _check_thresh(d_thresh)
    return DistanceMap(kernels.clipped_distance(_mask_array(mask), d_thresh), d_thresh)


def direction_map(mask, d_thresh: int = DEFAULT_D_THRESH, feature_map: FeatureMap | None = None) -> DirectionMap:
    """Offsets ``(F_col - col, F_row - row) / d_thresh`` toward the nearest foreground cell.

    Foreground cells, cells with no foreground and cells at distance
    ``>= d_thresh`` hold ``(0, 0)``, mirroring the distance-map clipping.
    """
    d_thresh = _check_thresh(d_thresh)
    fm = feature_map if feature_map is not None else nearest_foreground_map(mask)
    h, w = fm.dist2.shape
    rr, cc = np.mgrid[0:h, 0:w]
    keep = fm.valid & (fm.dist2 < d_thresh * d_thresh)
    dx = np.where(keep, fm.cols - cc, 0).astype(np.float64) / d_thresh
    dy = np.where(keep, fm.rows - rr, 0).astype(np.float64) / d_thresh
    return DirectionMap(dx, dy, d_thresh)


def _values(x, name: str) -> np.ndarray:
    if isinstance(x, DistanceMap):
        return np.asarray(x.values, dtype=np.float64)
    if isinstance(x, SegMask):
        return x.data.astype(np.float64)
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name}: expected a 2-D grid, got shape {arr.shape}")
    return arr


def _dir_values(x, name: str) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, DirectionMap):
        return np.asarray(x.dx, dtype=np.float64), np.asarray(x.dy, dtype=np.float64)
    dx, dy = x
    return _values(dx, name + ".dx"), _values(dy, name + ".dy")


def joint_loss(pred_seg, pred_dist, pred_dir, gt_seg, gt_dist, gt_dir, class_weights=None) -> LossBreakdown:
    """Cross-entropy on the mask plus half-weighted mean squared errors on both regression targets.

    ``class_weights`` is an optional ``(w_bg, w_fg)`` pair applied per cell to
    the cross-entropy terms. Log arguments are floored at 1e-7, so exact
    predictions contribute exactly zero and saturated wrong ones stay finite.
    """
    p = _values(pred_seg, "pred_seg")
    y = _values(gt_seg, "gt_seg")
    d_p = _values(pred_dist, "pred_dist")
    d_g = _values(gt_dist, "gt_dist")
    ex_p, ey_p = _dir_values(pred_dir, "pred_dir")
    ex_g, ey_g = _dir_values(gt_dir, "gt_dir")
    shapes = {a.shape for a in (p, y, d_p, d_g, ex_p, ey_p, ex_g, ey_g)}
    if len(shapes) != 1:
        raise ValueError(f"shape mismatch between loss inputs: {sorted(shapes)}")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("gt_seg must be binary")

    w_bg, w_fg = (1.0, 1.0) if class_weights is None else (float(class_weights[0]), float(class_weights[1]))
    p = np.clip(p, 0.0, 1.0)
    pos = -np.log(np.maximum(p, PROB_EPS))
    neg = -np.log(np.maximum(1.0 - p, PROB_EPS))
    ce = float(np.mean(np.where(y > 0, w_fg * pos, w_bg * neg))) + 0.0  # normalize -0.0
    l2_dist = float(np.mean((d_p - d_g) ** 2))
    l2_dir = float((np.mean((ex_p - ex_g) ** 2) + np.mean((ey_p - ey_g) ** 2)) / 2.0)
    total = ce + LAMBDA_DIST * l2_dist + LAMBDA_DIR * l2_dir
    return LossBreakdown(ce, l2_dist, l2_dir, total)


# --- GMAP payloads ----------------------------------------------------------


def save_mask(path, mask: SegMask) -> None:
    write_layers(path, mask.geometry, {MASK_ID: mask.data.astype(np.float32)})


def load_mask(path) -> SegMask:
    """Read a mask file; values are binarized with ``> 0.5``."""
    geom, layers = read_layers(path)
    if list(layers) != [MASK_ID]:
        raise GmapFormatError(f"expected a single mask channel {MASK_ID}, found {list(layers)}", 32, str(path))
    return SegMask((layers[MASK_ID] > 0.5).astype(np.uint8), geom)


def save_distance(path, dm: DistanceMap, geometry: GridGeometry) -> None:
    write_layers(path, geometry, {DISTANCE_ID: dm.values})


def save_direction(path, em: DirectionMap, geometry: GridGeometry) -> None:
    write_layers(path, geometry, {DIRECTION_DX_ID: em.dx, DIRECTION_DY_ID: em.dy})


def load_distance(path, d_thresh: int = DEFAULT_D_THRESH) -> DistanceMap:
    _, layers = read_layers(path)
    if list(layers) != [DISTANCE_ID]:
        raise GmapFormatError(f"expected distance channel {DISTANCE_ID}, found {list(layers)}", 32, str(path))
    return DistanceMap(layers[DISTANCE_ID].astype(np.float64), d_thresh)


def load_direction(path, d_thresh: int = DEFAULT_D_THRESH) -> DirectionMap:
    _, layers = read_layers(path)
    if sorted(layers) != [DIRECTION_DX_ID, DIRECTION_DY_ID]:
        raise GmapFormatError(
            f"expected direction channels {DIRECTION_DX_ID}/{DIRECTION_DY_ID}, found {list(layers)}", 32, str(path)
        )
    return DirectionMap(
        layers[DIRECTION_DX_ID].astype(np.float64), layers[DIRECTION_DY_ID].astype(np.float64), d_thresh
    )


def load_probability(path) -> np.ndarray:
    """Read a predicted probability raster stored under the mask channel id."""
    _, layers = read_layers(path)
    if list(layers) != [MASK_ID]:
        raise GmapFormatError(f"expected a single channel {MASK_ID}, found {list(layers)}", 32, str(path))
    return layers[MASK_ID].astype(np.float64)


__all__ = [
    "SegMask",
    "FeatureMap",
    "DistanceMap",
    "DirectionMap",
    "LossBreakdown",
    "nearest_foreground_map",
    "signed_distance_map",
    "direction_map",
    "joint_loss",
    "save_mask",
    "load_mask",
]
