"""Multi-channel bird's-eye-view grid maps and the GMAP binary format.

Grid convention: row index decreases in the direction of travel (forward is
up when ``ego_heading == 0``), columns increase to the right. Metric points
live in the ego frame: ``x`` lateral (right positive), ``y`` longitudinal
(forward positive). ``ego_heading`` is the direction of travel measured
counter-clockwise from grid-up.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

DEFAULT_RESOLUTION = 0.26
DEFAULT_SHAPE = (192, 192)
DEFAULT_EGO_CELL = (160, 96)

GMAP_MAGIC = b"GMAP"
GMAP_VERSION = 1
_HEADER = struct.Struct("<4sHHIIIIIi")
_CHANNEL_TAG = struct.Struct("<H")


class ChannelId(enum.IntEnum):
    GroundMarkings = 0
    LidarIntensity = 1
    SemanticsGround = 2
    Occupancy = 3
    TrafficHistory = 4
    Elevation = 5


# payload ids for derived rasters stored in the same container
MASK_ID = 100
DISTANCE_ID = 101
DIRECTION_DX_ID = 102
DIRECTION_DY_ID = 103


class GmapFormatError(ValueError):
    """Malformed GMAP file; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int, path=None):
        where = f"{path}: " if path is not None else ""
        super().__init__(f"{where}{message} (at byte {offset})")
        self.offset = offset
        self.path = path


class MetricPoint(NamedTuple):
    x: float
    y: float


def _quantize(value: float, scale: float) -> float:
    # the file stores resolution in micrometers and heading in microradians
    return round(value * scale) / scale


@dataclass(frozen=True)
class GridGeometry:
    """Raster extent plus the affine cell <-> ego-frame transform."""

    height: int
    width: int
    resolution: float = DEFAULT_RESOLUTION
    ego_cell: tuple[int, int] = DEFAULT_EGO_CELL
    ego_heading: float = 0.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self.height}x{self.width}")
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        er, ec = (int(v) for v in self.ego_cell)
        if not (0 <= er < self.height and 0 <= ec < self.width):
            raise ValueError(f"ego_cell {self.ego_cell} outside {self.height}x{self.width} grid")
        if not math.isfinite(self.ego_heading):
            raise ValueError("ego_heading must be finite")
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "ego_cell", (er, ec))
        object.__setattr__(self, "resolution", _quantize(float(self.resolution), 1e6))
        object.__setattr__(self, "ego_heading", _quantize(float(self.ego_heading), 1e6))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def _grid_to_ego(self, gx, gy):
        c, s = math.cos(self.ego_heading), math.sin(self.ego_heading)
        return gx * c + gy * s, -gx * s + gy * c

    def _ego_to_grid(self, x, y):
        c, s = math.cos(self.ego_heading), math.sin(self.ego_heading)
        return x * c - y * s, x * s + y * c

    def cell_to_metric(self, cell) -> MetricPoint:
        row, col = cell
        er, ec = self.ego_cell
        gx = (col - ec) * self.resolution
        gy = (er - row) * self.resolution
        x, y = self._grid_to_ego(gx, gy)
        return MetricPoint(float(x), float(y))

    def metric_to_cell(self, p) -> tuple[int, int]:
        x, y = p
        gx, gy = self._ego_to_grid(x, y)
        er, ec = self.ego_cell
        col = ec + math.floor(gx / self.resolution + 0.5)
        row = er - math.floor(gy / self.resolution + 0.5)
        return (int(row), int(col))

    def cells_to_metric(self, rows, cols) -> np.ndarray:
        """Vectorized ``cell_to_metric``; returns an ``(N, 2)`` float array."""
        er, ec = self.ego_cell
        gx = (np.asarray(cols, dtype=np.float64) - ec) * self.resolution
        gy = (er - np.asarray(rows, dtype=np.float64)) * self.resolution
        x, y = self._grid_to_ego(gx, gy)
        return np.stack([np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)], axis=-1)

    def metric_grids(self) -> tuple[np.ndarray, np.ndarray]:
        """Ego-frame ``(x, y)`` of every cell center, each shaped ``(H, W)``."""
        rows, cols = np.mgrid[0 : self.height, 0 : self.width]
        xy = self.cells_to_metric(rows, cols)
        return xy[..., 0], xy[..., 1]

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width


@dataclass
class GridMap:
    """Vehicle-centered multi-channel raster.

    Channels are float32 ``(H, W)`` arrays. Intensity channels hold values in
    [0, 1]; ``Elevation`` holds meters.
    """

    geometry: GridGeometry
    channels: dict[ChannelId, np.ndarray] = field(default_factory=dict)

    @property
    def height(self) -> int:
        return self.geometry.height

    @property
    def width(self) -> int:
        return self.geometry.width

    @property
    def resolution(self) -> float:
        return self.geometry.resolution

    @property
    def ego_cell(self) -> tuple[int, int]:
        return self.geometry.ego_cell

    @property
    def ego_heading(self) -> float:
        return self.geometry.ego_heading

    def __contains__(self, cid) -> bool:
        return ChannelId(cid) in self.channels

    def channel(self, cid) -> np.ndarray:
        try:
            return self.channels[ChannelId(cid)]
        except KeyError:
            raise KeyError(f"grid map has no {ChannelId(cid).name} channel") from None

    def set_channel(self, cid, values) -> None:
        cid = ChannelId(cid)
        arr = np.array(values, dtype=np.float32, copy=True)
        if arr.shape != self.geometry.shape:
            raise ValueError(f"{cid.name}: shape {arr.shape} != grid {self.geometry.shape}")
        if not np.isfinite(arr).all():
            raise ValueError(f"{cid.name}: non-finite values")
        if cid is not ChannelId.Elevation and (arr.min(initial=0.0) < 0 or arr.max(initial=0.0) > 1):
            raise ValueError(f"{cid.name}: intensity values must lie in [0, 1]")
        self.channels[cid] = arr

    def cell_to_metric(self, cell) -> MetricPoint:
        return self.geometry.cell_to_metric(cell)

    def metric_to_cell(self, p) -> tuple[int, int]:
        return self.geometry.metric_to_cell(p)

    def copy(self) -> "GridMap":
        return GridMap(self.geometry, {k: v.copy() for k, v in self.channels.items()})


def new_grid(
    channel_ids,
    height: int = DEFAULT_SHAPE[0],
    width: int = DEFAULT_SHAPE[1],
    resolution: float = DEFAULT_RESOLUTION,
    ego_cell=DEFAULT_EGO_CELL,
    ego_heading: float = 0.0,
) -> GridMap:
    geom = GridGeometry(height, width, resolution, tuple(ego_cell), ego_heading)
    g = GridMap(geom)
    for cid in sorted({ChannelId(c) for c in channel_ids}):
        g.channels[cid] = np.zeros(geom.shape, dtype=np.float32)
    return g


def cell_to_metric(g, cell) -> MetricPoint:
    return g.geometry.cell_to_metric(cell) if isinstance(g, GridMap) else g.cell_to_metric(cell)


def metric_to_cell(g, p) -> tuple[int, int]:
    return g.geometry.metric_to_cell(p) if isinstance(g, GridMap) else g.metric_to_cell(p)


# --- GMAP container -------------------------------------------------------


def encode_gmap(geometry: GridGeometry, layers: dict[int, np.ndarray]) -> bytes:
    ids = [int(i) for i in layers]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate channel ids")
    er, ec = geometry.ego_cell
    parts = [
        _HEADER.pack(
            GMAP_MAGIC,
            GMAP_VERSION,
            len(ids),
            geometry.height,
            geometry.width,
            int(round(geometry.resolution * 1e6)),
            er,
            ec,
            int(round(geometry.ego_heading * 1e6)),
        )
    ]
    for cid, arr in layers.items():
        arr = np.asarray(arr)
        if arr.shape != geometry.shape:
            raise ValueError(f"layer {cid}: shape {arr.shape} != {geometry.shape}")
        parts.append(_CHANNEL_TAG.pack(int(cid)))
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_gmap(buf: bytes, path=None) -> tuple[GridGeometry, dict[int, np.ndarray]]:
    if len(buf) < _HEADER.size:
        raise GmapFormatError("truncated header", len(buf), path)
    magic, version, n, h, w, res_um, er, ec, head_urad = _HEADER.unpack_from(buf, 0)
    if magic != GMAP_MAGIC:
        raise GmapFormatError(f"bad magic {magic!r}", 0, path)
    if version != GMAP_VERSION:
        raise GmapFormatError(f"unsupported version {version}", 4, path)
    try:
        geom = GridGeometry(h, w, res_um / 1e6, (er, ec), head_urad / 1e6)
    except ValueError as exc:
        raise GmapFormatError(f"invalid geometry: {exc}", 8, path) from None
    nbytes = h * w * 4
    off = _HEADER.size
    layers: dict[int, np.ndarray] = {}
    for _ in range(n):
        if off + _CHANNEL_TAG.size > len(buf):
            raise GmapFormatError("truncated channel tag", off, path)
        (cid,) = _CHANNEL_TAG.unpack_from(buf, off)
        if cid in layers:
            raise GmapFormatError(f"duplicate channel id {cid}", off, path)
        off += _CHANNEL_TAG.size
        if off + nbytes > len(buf):
            raise GmapFormatError(f"truncated payload for channel {cid}", off, path)
        layers[cid] = np.frombuffer(buf, dtype="<f4", count=h * w, offset=off).reshape(h, w).astype(np.float32)
        off += nbytes
    if off != len(buf):
        raise GmapFormatError(f"{len(buf) - off} trailing bytes", off, path)
    return geom, layers


def write_layers(path, geometry: GridGeometry, layers: dict[int, np.ndarray]) -> None:
    Path(path).write_bytes(encode_gmap(geometry, layers))


def read_layers(path) -> tuple[GridGeometry, dict[int, np.ndarray]]:
    return decode_gmap(Path(path).read_bytes(), path=str(path))


def write_gmap(path, g: GridMap) -> None:
    write_layers(path, g.geometry, {int(k): v for k, v in g.channels.items()})


def read_gmap(path) -> GridMap:
    geom, layers = read_layers(path)
    g = GridMap(geom)
    for i, (cid, arr) in enumerate(layers.items()):
        try:
            g.channels[ChannelId(cid)] = arr
        except ValueError:
            off = _HEADER.size + i * (_CHANNEL_TAG.size + arr.size * 4)
            raise GmapFormatError(f"channel id {cid} is not a grid-map channel", off, str(path)) from None
    return g
