"""Planar geometry: convex polygons with batched containment, segment clipping,
angle normalization. The world frame is x-right / y-down (aligned with image
columns/rows), all units meters unless noted."""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi] by subtracting an exact multiple of 2*pi."""
    k = math.ceil((theta - math.pi) / TWO_PI)
    return theta - TWO_PI * k


def normalize_angles(theta: np.ndarray) -> np.ndarray:
    """Vectorized normalize_angle."""
    k = np.ceil((theta - math.pi) / TWO_PI)
    return theta - TWO_PI * k


class ConvexPolygon:
    """Convex polygon stored as CCW vertices (in the y-down frame) plus
    precomputed outward edge normals for O(edges) containment tests."""

    __slots__ = ("vertices", "_normals", "_offsets", "_centroid", "_area")

    def __init__(self, vertices) -> None:
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
            raise ValueError("polygon needs >= 3 (x, y) vertices")
        # Signed area (shoelace); flip winding if needed so edges are consistent.
        x, y = pts[:, 0], pts[:, 1]
        area2 = float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))
        if area2 < 0:
            pts = pts[::-1].copy()
            area2 = -area2
        if area2 == 0:
            raise ValueError("degenerate polygon")
        self.vertices = pts
        self._area = 0.5 * area2
        cx = float(np.mean(pts[:, 0]))
        cy = float(np.mean(pts[:, 1]))
        self._centroid = (cx, cy)
        edges = np.roll(pts, -1, axis=0) - pts
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        lengths = np.linalg.norm(normals, axis=1)
        if np.any(lengths < 1e-12):
            raise ValueError("degenerate polygon edge")
        normals /= lengths[:, None]
        # Orient unit normals outward: centroid must be on the negative side,
        # so offset - n.p is the signed interior slack in meters.
        side = np.einsum("ij,ij->i", normals, np.array([[cx, cy]]) - pts)
        normals[side > 0] *= -1.0
        self._normals = normals
        self._offsets = np.einsum("ij,ij->i", normals, pts)

    @property
    def area(self) -> float:
        return self._area

    @property
    def centroid(self) -> tuple[float, float]:
        return self._centroid

    def bounds(self) -> tuple[float, float, float, float]:
        v = self.vertices
        return (float(v[:, 0].min()), float(v[:, 1].min()),
                float(v[:, 0].max()), float(v[:, 1].max()))

    def contains(self, xs, ys, eps: float = 1e-9) -> np.ndarray:
        """Batched point-in-polygon (boundary counts as inside)."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        proj = (np.multiply.outer(self._normals[:, 0], xs)
                + np.multiply.outer(self._normals[:, 1], ys))
        return np.all(proj <= self._offsets.reshape((-1,) + (1,) * xs.ndim) + eps, axis=0)

    def contains_point(self, x: float, y: float, eps: float = 1e-9) -> bool:
        return bool(self.contains(np.array([x]), np.array([y]), eps)[0])

    def clip_segment(self, p, q) -> tuple[float, float] | None:
        """Intersect segment p->q with the polygon; returns the (t_in, t_out)
        parameter interval or None when the segment misses entirely."""
        p = np.asarray(p, dtype=float)
        d = np.asarray(q, dtype=float) - p
        num = self._offsets - self._normals @ p
        den = self._normals @ d
        t_in, t_out = 0.0, 1.0
        for i in range(len(num)):
            if abs(den[i]) < 1e-15:
                if num[i] < 0:
                    return None
                continue
            t = num[i] / den[i]
            if den[i] > 0:
                t_out = min(t_out, t)
            else:
                t_in = max(t_in, t)
            if t_in > t_out:
                return None
        return (t_in, t_out)

    def occludes_segment(self, p, q, eps: float = 1e-6) -> bool:
        """True when the open segment p->q passes through the interior."""
        hit = self.clip_segment(p, q)
        if hit is None:
            return False
        t_in, t_out = hit
        return (t_out - t_in) > eps and t_out > eps and t_in < 1.0 - eps

    def distance(self, xs, ys) -> np.ndarray:
        """Batched distance to the polygon (0 inside)."""
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        a = self.vertices
        b = np.roll(a, -1, axis=0)
        ab = b - a
        ab_len2 = np.einsum("ij,ij->i", ab, ab)
        px = xs[..., None] - a[:, 0]
        py = ys[..., None] - a[:, 1]
        t = np.clip((px * ab[:, 0] + py * ab[:, 1]) / ab_len2, 0.0, 1.0)
        dx = px - t * ab[:, 0]
        dy = py - t * ab[:, 1]
        d = np.sqrt(np.min(dx * dx + dy * dy, axis=-1))
        inside = self.contains(xs, ys)
        return np.where(inside, 0.0, d)

    def translated(self, dx: float, dy: float) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices + np.array([dx, dy]))

    def rotated90(self, quarter_turns: int, cx: float, cy: float) -> "ConvexPolygon":
        return ConvexPolygon(rotate90_points(self.vertices, quarter_turns, cx, cy))


def rotate90_points(pts, quarter_turns: int, cx: float, cy: float) -> np.ndarray:
    """Rotate points by quarter_turns * 90 deg about (cx, cy); exact in floats."""
    pts = np.asarray(pts, dtype=float)
    x = pts[..., 0] - cx
    y = pts[..., 1] - cy
    k = quarter_turns % 4
    if k == 0:
        rx, ry = x, y
    elif k == 1:
        rx, ry = -y, x
    elif k == 2:
        rx, ry = -x, -y
    else:
        rx, ry = y, -x
    return np.stack([rx + cx, ry + cy], axis=-1)


def rect(cx: float, cy: float, width: float, height: float) -> ConvexPolygon:
    hw, hh = width / 2.0, height / 2.0
    return ConvexPolygon([(cx - hw, cy - hh), (cx + hw, cy - hh),
                          (cx + hw, cy + hh), (cx - hw, cy + hh)])


def circle(cx: float, cy: float, radius: float, sides: int = 12) -> ConvexPolygon:
    ang = np.arange(sides) * (TWO_PI / sides)
    return ConvexPolygon(np.stack([cx + radius * np.cos(ang),
                                   cy + radius * np.sin(ang)], axis=1))


class PolygonStack:
    """A paint-ordered list of labeled convex polygons with a single-matmul
    batched classifier: later polygons overwrite earlier ones."""

    def __init__(self, polygons: list[ConvexPolygon], labels: list[int]) -> None:
        if len(polygons) != len(labels):
            raise ValueError("one label per polygon")
        self.polygons = list(polygons)
        self.labels = np.asarray(labels, dtype=np.uint8)
        self._mat = np.ascontiguousarray(
            np.concatenate([p._normals for p in polygons], axis=0)
        )
        self._off = np.concatenate([p._offsets for p in polygons])[:, None]
        counts = np.array([len(p.vertices) for p in polygons])
        self._starts = np.concatenate([[0], np.cumsum(counts)[:-1]])

    def classify(self, xs: np.ndarray, ys: np.ndarray, default: int) -> np.ndarray:
        """Label of the topmost polygon containing each point (default outside)."""
        pts = np.stack(
            [np.asarray(xs, dtype=float).ravel(), np.asarray(ys, dtype=float).ravel()]
        )
        slack = self._off - self._mat @ pts
        inside = np.minimum.reduceat(slack, self._starts, axis=0) >= -1e-9
        out = np.full(pts.shape[1], default, dtype=np.uint8)
        for i in range(len(self.polygons)):
            out[inside[i]] = self.labels[i]
        return out
