"""Downward-facing pinhole camera: intrinsics and ground-plane back-projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics for the nadir camera. Focal lengths and the optical
    center are in pixels; image axes follow (u=col right, v=row down)."""

    fx: float
    fy: float
    ox: float
    oy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.ox <= self.width and 0 <= self.oy <= self.height):
            raise ValueError("optical center must lie inside the image")

    def ground_resolution(self, altitude: float) -> float:
        """Meters per pixel on the ground plane at the given flying height."""
        if altitude <= 0:
            raise ValueError("altitude must be positive")
        return altitude / self.fx


def default_camera(size: int = 96) -> CameraModel:
    """Square camera whose ground footprint is 2*altitude meters wide."""
    return CameraModel(fx=size / 2.0, fy=size / 2.0, ox=size / 2.0,
                       oy=size / 2.0, width=size, height=size)


def backproject(pixel, cam: CameraModel, altitude: float):
    """Map image pixel(s) (u, v) to camera-frame ground coordinates (U, V, W)
    at the given flying height: U right, V down, W = height. Accepts scalars
    or arrays and returns matching shapes."""
    if altitude <= 0:
        raise ValueError("altitude must be positive")
    u = np.asarray(pixel[0], dtype=float)
    v = np.asarray(pixel[1], dtype=float)
    gx = altitude * (u - cam.ox) / cam.fx
    gy = altitude * (v - cam.oy) / cam.fy
    if gx.ndim == 0:
        return float(gx), float(gy), float(altitude)
    return gx, gy, float(altitude)


def project(ground, cam: CameraModel):
    """Inverse of backproject: camera-frame ground point -> image pixel."""
    gx, gy, h = ground
    if h <= 0:
        raise ValueError("height must be positive")
    u = cam.ox + np.asarray(gx, dtype=float) * cam.fx / h
    v = cam.oy + np.asarray(gy, dtype=float) * cam.fy / h
    if np.ndim(u) == 0:
        return float(u), float(v)
    return u, v
