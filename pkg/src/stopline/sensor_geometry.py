"""Camera range analysis for painted stop lines.

Flat ground, level pinhole camera: a ground band of depth ``s`` starting at
distance ``d`` from a camera mounted at height ``h`` spans

    f * h * s / (d * (d + s))

vertical pixels. The stopping distance needed at speed ``v`` with
deceleration ``a`` and reaction latency ``t`` is ``v**2 / (2a) + v*t``.
"""
from __future__ import annotations

from dataclasses import dataclass

DEFAULT_LINE_DEPTH = 0.3


@dataclass(frozen=True)
class CameraModel:
    focal_length_px: float
    mount_height: float
    pitch: float = 0.0
    vertical_resolution: int = 1080

    def __post_init__(self):
        if not self.focal_length_px > 0:
            raise ValueError("focal_length_px must be positive")
        if not self.mount_height > 0:
            raise ValueError("mount_height must be positive")
        if self.pitch != 0:
            raise ValueError("only a level camera (pitch == 0) is supported")
        if self.vertical_resolution < 1:
            raise ValueError("vertical_resolution must be >= 1")


@dataclass(frozen=True)
class KinematicsSpec:
    speed: float  # m/s
    decel: float  # m/s^2
    latency: float  # s

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if not self.decel > 0:
            raise ValueError("decel must be positive")
        if self.latency < 0:
            raise ValueError("latency must be >= 0")


def stopline_pixel_height(cam: CameraModel, line_depth: float, distance: float) -> float:
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    if not line_depth > 0:
        raise ValueError(f"line_depth must be positive, got {line_depth}")
    return cam.focal_length_px * cam.mount_height * line_depth / (distance * (distance + line_depth))


def required_detection_distance(k: KinematicsSpec) -> float:
    return k.speed**2 / (2.0 * k.decel) + k.speed * k.latency


def range_table(cam: CameraModel, line_depth: float, distances) -> list[tuple[float, float]]:
    return [(float(d), stopline_pixel_height(cam, line_depth, d)) for d in distances]
