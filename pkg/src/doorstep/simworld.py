"""Procedural ground-truth worlds and every simulated sensor/actuator: aerial
semantic camera, range finder, geometric door detector, local obstacle scan,
and first-order drone kinematics.

World frame: meters, x right / y down (aligned with image columns/rows); the
downward camera is yaw-stabilized so image axes stay world-aligned. Worlds are
flat ground with single-story structures, so the range finder and the pinhole
ground-plane mapping are exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .camera import CameraModel, backproject
from .geometry import (
    ConvexPolygon,
    PolygonStack,
    circle,
    normalize_angle,
    rect,
    rotate90_points,
)
from .semantics import OBSTACLE_LABELS, ClassLabel, SemanticGrid

WORLD_SCHEMA = "doorstep-world/1"

# Nominal structure heights (m) for collision and line-of-sight checks at the
# 2 m search hover.
CLASS_HEIGHTS = {
    ClassLabel.ROOF: 5.5,
    ClassLabel.TREE: 7.0,
    ClassLabel.CAR: 2.2,
    ClassLabel.VEGETATION: 2.5,
    ClassLabel.FENCE: 2.1,
}


class GenerationError(RuntimeError):
    """Raised when no valid world can be produced for the given parameters."""


class DoorVisibility(str, Enum):
    OPEN = "open"
    RECESSED = "recessed"
    ENCLOSED = "enclosed"


@dataclass(frozen=True)
class DronePose:
    x: float
    y: float
    altitude: float
    yaw: float

    def __post_init__(self) -> None:
        if self.altitude < 0:
            raise ValueError("altitude must be >= 0")
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Door:
    center: tuple[float, float]
    width: float
    normal: tuple[float, float]  # outward unit vector
    visibility: DoorVisibility


@dataclass(frozen=True)
class DoorDetection:
    """Geometric stand-in for a learned door detector."""

    door_point: tuple[float, float]
    wall_normal: tuple[float, float]
    source_pose: DronePose


@dataclass
class Layer:
    """One paint layer of the world: later layers overwrite earlier ones."""

    label: ClassLabel
    polygon: ConvexPolygon


@dataclass
class GeneratorParams:
    seed: int
    house_width_range: tuple[float, float] = (8.0, 14.0)
    house_depth_range: tuple[float, float] = (7.0, 12.0)
    obstacle_density: float = 0.3
    door_visibility: DoorVisibility = DoorVisibility.OPEN
    neighbor_count: int = 1
    gps_offset_sigma: float = 1.0
    bounds: tuple[float, float] = (60.0, 60.0)

    def __post_init__(self) -> None:
        if self.house_width_range[0] >= self.house_width_range[1]:
            raise ValueError("degenerate house width range")
        if self.house_depth_range[0] >= self.house_depth_range[1]:
            raise ValueError("degenerate house depth range")
        if not 0.0 <= self.obstacle_density <= 1.0:
            raise ValueError("obstacle density must be in [0, 1]")
        if self.neighbor_count < 0:
            raise ValueError("neighbor count must be >= 0")


class WorldModel:
    """Immutable ground-truth scene: paint-ordered labeled polygons plus house
    metadata (recipient footprint, true front direction, door segments)."""

    def __init__(
        self,
        bounds: tuple[float, float],
        layers: list[Layer],
        recipient_index: int,
        road_index: int,
        house_center: tuple[float, float],
        front_dir: tuple[float, float],
        doors: list[Door],
        start_xy: tuple[float, float],
        gen: dict | None = None,
    ) -> None:
        self.bounds = (float(bounds[0]), float(bounds[1]))
        self.layers = layers
        self.recipient_index = recipient_index
        self.road_index = road_index
        self.house_center = (float(house_center[0]), float(house_center[1]))
        n = math.hypot(front_dir[0], front_dir[1])
        self.front_dir = (front_dir[0] / n, front_dir[1] / n)
        self.doors = doors
        self.start_xy = (float(start_xy[0]), float(start_xy[1]))
        self.gen = gen or {}
        self._stack = PolygonStack(
            [ly.polygon for ly in layers], [int(ly.label) for ly in layers]
        )
        self._solids = [
            (ly.polygon, CLASS_HEIGHTS[ly.label])
            for ly in layers
            if ly.label in CLASS_HEIGHTS
        ]

    @property
    def door(self) -> Door:
        return self.doors[0]

    @property
    def recipient_polygon(self) -> ConvexPolygon:
        return self.layers[self.recipient_index].polygon

    def roof_polygons(self) -> list[ConvexPolygon]:
        return [ly.polygon for ly in self.layers if ly.label == ClassLabel.ROOF]

    def hazard_polygons(self) -> list[ConvexPolygon]:
        """Structures the descent must stay clear of: roofs and obstacles."""
        keep = {ClassLabel.ROOF} | OBSTACLE_LABELS
        return [ly.polygon for ly in self.layers if ly.label in keep]

    def class_at(self, xs, ys) -> np.ndarray:
        """Ground-truth class of each point; UNKNOWN outside the world bounds."""
        xs = np.asarray(xs, dtype=float)
        shape = xs.shape
        labels = self._stack.classify(xs, ys, default=int(ClassLabel.UNKNOWN))
        return labels.reshape(shape)

    def front_truth(self, xs, ys) -> np.ndarray:
        """True front-side attribution: the half plane of the front direction
        through the house center."""
        dx = np.asarray(xs, dtype=float) - self.house_center[0]
        dy = np.asarray(ys, dtype=float) - self.house_center[1]
        return dx * self.front_dir[0] + dy * self.front_dir[1] >= 0.0

    def solid_at(self, x: float, y: float, altitude: float) -> bool:
        """True when (x, y, altitude) is inside a structure (collision)."""
        for poly, height in self._solids:
            if altitude < height and poly.contains_point(x, y):
                return True
        return False

    def clearance_2d(self, xs, ys) -> np.ndarray:
        """Planar distance to the nearest hazard polygon (0 inside one)."""
        polys = self.hazard_polygons()
        xs = np.asarray(xs, dtype=float)
        out = np.full(xs.shape, np.inf)
        for p in polys:
            np.minimum(out, p.distance(xs, ys), out=out)
        return out

    def los_clear(self, p, q) -> bool:
        """True when the open segment p->q crosses no structure interior."""
        for poly, _ in self._solids:
            if poly.occludes_segment(p, q):
                return False
        return True

    def los_clear_batch(self, target, xs, ys) -> np.ndarray:
        """Vectorized los_clear from many points to one target."""
        origin = np.array([float(target[0]), float(target[1])])
        dxs = np.asarray(xs, dtype=float) - origin[0]
        dys = np.asarray(ys, dtype=float) - origin[1]
        eps = 1e-6
        blocked = np.zeros(dxs.shape, dtype=bool)
        for poly, _ in self._solids:
            valid, t_in, t_out = _clip_segments(poly, origin, dxs, dys)
            blocked |= valid & (t_out - t_in > eps) & (t_in < 1.0 - eps) & (t_out > eps)
        return ~blocked

    def paint_grid(self, gxs: np.ndarray, gys: np.ndarray) -> np.ndarray:
        """Classify a separable grid of ground points (ascending gxs columns,
        gys rows) by painting each layer into its bounding box only; much
        faster than a full per-point classify for camera-sized grids."""
        h, w = len(gys), len(gxs)
        labels = np.full((h, w), int(ClassLabel.UNKNOWN), dtype=np.uint8)
        for ly in self.layers:
            x0, y0, x1, y1 = ly.polygon.bounds()
            c0 = int(np.searchsorted(gxs, x0 - 1e-9, side="left"))
            c1 = int(np.searchsorted(gxs, x1 + 1e-9, side="right"))
            r0 = int(np.searchsorted(gys, y0 - 1e-9, side="left"))
            r1 = int(np.searchsorted(gys, y1 + 1e-9, side="right"))
            if c0 >= c1 or r0 >= r1:
                continue
            sub_x = np.tile(gxs[c0:c1], r1 - r0)
            sub_y = np.repeat(gys[r0:r1], c1 - c0)
            inside = ly.polygon.contains(sub_x, sub_y).reshape(r1 - r0, c1 - c0)
            block = labels[r0:r1, c0:c1]
            block[inside] = int(ly.label)
        return labels

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema": WORLD_SCHEMA,
            "bounds": list(self.bounds),
            "layers": [
                {
                    "label": ClassLabel(ly.label).name.lower(),
                    "vertices": ly.polygon.vertices.tolist(),
                }
                for ly in self.layers
            ],
            "recipient_index": self.recipient_index,
            "road_index": self.road_index,
            "house_center": list(self.house_center),
            "front_dir": list(self.front_dir),
            "doors": [
                {
                    "center": list(d.center),
                    "width": d.width,
                    "normal": list(d.normal),
                    "visibility": d.visibility.value,
                }
                for d in self.doors
            ],
            "start_xy": list(self.start_xy),
            "gen": self.gen,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "WorldModel":
        if doc.get("schema") != WORLD_SCHEMA:
            raise ValueError(f"unsupported world schema: {doc.get('schema')!r}")
        layers = [
            Layer(ClassLabel[d["label"].upper()], ConvexPolygon(d["vertices"]))
            for d in doc["layers"]
        ]
        doors = [
            Door(
                tuple(d["center"]),
                float(d["width"]),
                tuple(d["normal"]),
                DoorVisibility(d["visibility"]),
            )
            for d in doc["doors"]
        ]
        return cls(
            tuple(doc["bounds"]),
            layers,
            int(doc["recipient_index"]),
            int(doc["road_index"]),
            tuple(doc["house_center"]),
            tuple(doc["front_dir"]),
            doors,
            tuple(doc["start_xy"]),
            doc.get("gen", {}),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "WorldModel":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Procedural generation
# ---------------------------------------------------------------------------


def generate_world(params: GeneratorParams, max_attempts: int = 50) -> WorldModel:
    """Seeded world satisfying the scene invariants: one recipient house whose
    driveway reaches the map edge, non-overlapping effective regions, a door
    placed per the visibility mode, and feasible descent areas. Retries with
    derived substreams until validation passes."""
    for attempt in range(max_attempts):
        rng = np.random.default_rng([params.seed, attempt, 0x0D00])
        world = _build_candidate(params, rng)
        if _validate(world, params):
            return world
    raise GenerationError(
        f"no valid world for seed {params.seed} after {max_attempts} attempts"
    )


def _build_candidate(params: GeneratorParams, rng: np.random.Generator) -> WorldModel:
    bw, bh = params.bounds
    layers: list[Layer] = [Layer(ClassLabel.GRASS, rect(bw / 2, bh / 2, bw, bh))]

    # Canonical frame: front of the house faces +y (the road edge).
    road_w = rng.uniform(5.0, 6.0)
    road_y0 = bh - road_w
    road = rect(bw / 2, bh - road_w / 2, bw, road_w)
    layers.append(Layer(ClassLabel.PAVED_AREA, road))
    road_index = len(layers) - 1

    w = rng.uniform(*params.house_width_range)
    d = rng.uniform(*params.house_depth_range)
    front_depth = rng.uniform(14.0, 20.0)
    cx = bw / 2 + rng.uniform(-2.0, 2.0)
    facade_y = road_y0 - front_depth
    cy = facade_y - d / 2

    drive_w = rng.uniform(3.0, 3.8)
    drive_side = 1.0 if rng.random() < 0.5 else -1.0
    drive_x = cx + drive_side * (w / 2 - drive_w / 2 - rng.uniform(0.0, 0.8))
    driveway = ConvexPolygon(
        [
            (drive_x - drive_w / 2, facade_y),
            (drive_x + drive_w / 2, facade_y),
            (drive_x + drive_w / 2, bh),
            (drive_x - drive_w / 2, bh),
        ]
    )
    layers.append(Layer(ClassLabel.PAVED_AREA, driveway))

    # Back-yard fence on some lots, attached to the rear house corners. Fence
    # strips are kept thicker than the coarsest aerial pixel (0.625 m at 30 m)
    # so they cannot fall between pixel centers and leave gaps in the
    # occupancy raster.
    ft = 0.7
    has_fence = rng.random() < 0.5
    if has_fence:
        fence_depth = rng.uniform(8.0, 13.0)
        back_y = cy - d / 2
        for fx0, fx1 in ((cx - w / 2 - ft, cx - w / 2), (cx + w / 2, cx + w / 2 + ft)):
            layers.append(
                Layer(
                    ClassLabel.FENCE,
                    ConvexPolygon(
                        [(fx0, back_y - fence_depth), (fx1, back_y - fence_depth),
                         (fx1, back_y), (fx0, back_y)]
                    ),
                )
            )
        layers.append(
            Layer(
                ClassLabel.FENCE,
                rect(cx, back_y - fence_depth - ft / 2, w + 2 * ft, ft),
            )
        )

    door_x = cx + rng.uniform(-(w / 2 - 1.5), w / 2 - 1.5)
    door = Door((door_x, facade_y), 1.0, (0.0, 1.0), params.door_visibility)
    # Keep the frontal approach to the door free of clutter.
    door_corridor = rect(door_x, facade_y + 5.0, 5.0, 10.0)

    house = rect(cx, cy, w, d)
    layers.append(Layer(ClassLabel.ROOF, house))
    recipient_index = len(layers) - 1

    if params.door_visibility is DoorVisibility.RECESSED:
        # Porch wing walls: the door is visible only from a frontal cone.
        wing_depth = rng.uniform(1.0, 1.4)
        for side in (-1.0, 1.0):
            wx = door_x + side * (door.width / 2 + 0.35 + ft / 2)
            layers.append(
                Layer(ClassLabel.ROOF, rect(wx, facade_y + wing_depth / 2, ft, wing_depth))
            )
    elif params.door_visibility is DoorVisibility.ENCLOSED:
        # Closed porch screen: no line of sight to the door from anywhere.
        depth = 1.5
        for side in (-1.0, 1.0):
            sx = door_x + side * (door.width / 2 + 0.3 + ft / 2)
            layers.append(
                Layer(ClassLabel.FENCE, rect(sx, facade_y + depth / 2, ft, depth))
            )
        layers.append(
            Layer(
                ClassLabel.FENCE,
                rect(door_x, facade_y + depth + ft / 2, door.width + 0.6 + 2 * ft, ft),
            )
        )

    for i in range(params.neighbor_count):
        side = -1.0 if i % 2 == 0 else 1.0
        ncx = cx + side * (18.0 + rng.uniform(0.0, 4.0))
        ncy = cy + rng.uniform(-2.0, 2.0)
        nw = rng.uniform(*params.house_width_range) * 0.9
        nd = rng.uniform(*params.house_depth_range) * 0.9
        layers.append(Layer(ClassLabel.ROOF, rect(ncx, ncy, nw, nd)))

    # Obstacles: trees, hedges, cars. All stay >= 3 m from the recipient house
    # (keeps the footprint ring corridor usable) and out of the door corridor.
    def clear_of_structures(x, y, margin):
        if house.distance(np.array([x]), np.array([y]))[0] < 3.0 + margin:
            return False
        if door_corridor.contains_point(x, y):
            return False
        if door_corridor.distance(np.array([x]), np.array([y]))[0] < margin:
            return False
        for ly in layers[1:]:
            if ly.polygon.distance(np.array([x]), np.array([y]))[0] < margin + 0.4:
                return False
        return True

    n_trees = int(round(params.obstacle_density * 8))
    for _ in range(n_trees):
        for _try in range(20):
            r = rng.uniform(1.0, 2.2)
            x = rng.uniform(3.0, bw - 3.0)
            y = rng.uniform(3.0, road_y0 - 1.0)
            if clear_of_structures(x, y, r):
                layers.append(Layer(ClassLabel.TREE, circle(x, y, r)))
                break

    n_hedges = int(round(params.obstacle_density * 4))
    for _ in range(n_hedges):
        for _try in range(20):
            hl = rng.uniform(2.0, 4.0)
            x = rng.uniform(4.0, bw - 4.0)
            y = rng.uniform(4.0, road_y0 - 2.0)
            if clear_of_structures(x, y, hl / 2):
                horizontal = rng.random() < 0.5
                wx, wy = (hl, 1.0) if horizontal else (1.0, hl)
                layers.append(Layer(ClassLabel.VEGETATION, rect(x, y, wx, wy)))
                break

    n_cars = min(2, int(round(params.obstacle_density * 3)))
    for i in range(n_cars):
        if i == 0:
            # Parked on the outer third of the driveway, leaving paved room
            # near the facade for a clearance-safe descent.
            cy_car = rng.uniform(facade_y + 9.0, road_y0 - 3.0)
            layers.append(Layer(ClassLabel.CAR, rect(drive_x, cy_car, 2.0, 4.6)))
        else:
            x = rng.uniform(5.0, bw - 5.0)
            layers.append(
                Layer(ClassLabel.CAR, rect(x, bh - road_w / 2, 4.6, 2.0))
            )

    start = np.array([cx, cy]) + rng.normal(0.0, params.gps_offset_sigma, 2)

    # Rotate the whole scene by a random multiple of 90 degrees so the front
    # of the house can face any cardinal direction.
    quarter = int(rng.integers(4))
    wcx, wcy = bw / 2, bh / 2
    rot_layers = [
        Layer(ly.label, ly.polygon.rotated90(quarter, wcx, wcy)) for ly in layers
    ]
    d_center = rotate90_points(np.array(door.center), quarter, wcx, wcy)
    d_normal = rotate90_points(np.array(door.normal), quarter, 0.0, 0.0)
    rot_door = Door(
        (float(d_center[0]), float(d_center[1])),
        door.width,
        (float(d_normal[0]), float(d_normal[1])),
        door.visibility,
    )
    h_center = rotate90_points(np.array([cx, cy]), quarter, wcx, wcy)
    f_dir = rotate90_points(np.array([0.0, 1.0]), quarter, 0.0, 0.0)
    start = rotate90_points(start, quarter, wcx, wcy)

    return WorldModel(
        bounds=params.bounds,
        layers=rot_layers,
        recipient_index=recipient_index,
        road_index=road_index,
        house_center=(float(h_center[0]), float(h_center[1])),
        front_dir=(float(f_dir[0]), float(f_dir[1])),
        doors=[rot_door],
        start_xy=(float(start[0]), float(start[1])),
        gen={
            "seed": params.seed,
            "door_visibility": params.door_visibility.value,
            "neighbor_count": params.neighbor_count,
            "obstacle_density": params.obstacle_density,
            "gps_offset_sigma": params.gps_offset_sigma,
        },
    )


def front_yard_points(world: WorldModel, xs, ys) -> np.ndarray:
    """Grass points properly in front of the facade (not the side strips the
    house itself would always screen from the door)."""
    labels = world.class_at(xs, ys)
    door = world.door
    ahead = (
        (np.asarray(xs, dtype=float) - door.center[0]) * door.normal[0]
        + (np.asarray(ys, dtype=float) - door.center[1]) * door.normal[1]
    ) >= 0.5
    return (labels == int(ClassLabel.GRASS)) & world.front_truth(xs, ys) & ahead


def _validate(world: WorldModel, params: GeneratorParams) -> bool:
    bw, bh = world.bounds
    xs, ys = np.meshgrid(np.arange(0.5, bw, 0.5), np.arange(0.5, bh, 0.5))
    xs, ys = xs.ravel(), ys.ravel()
    labels = world.class_at(xs, ys)
    clearance = world.clearance_2d(xs, ys)
    front = world.front_truth(xs, ys)
    near_house = world.recipient_polygon.distance(xs, ys) < 16.0

    ok = clearance >= 2.6
    paved_ok = (labels == int(ClassLabel.PAVED_AREA)) & ok & front & near_house
    front_ok = (labels == int(ClassLabel.GRASS)) & ok & front & near_house
    back_ok = (labels == int(ClassLabel.GRASS)) & ok & ~front & near_house
    if paved_ok.sum() < 4 or front_ok.sum() < 4 or back_ok.sum() < 4:
        return False

    if params.door_visibility is DoorVisibility.OPEN:
        # The door must have line of sight from nearly all of the front yard.
        door = world.door
        target = (
            door.center[0] + door.normal[0] * 0.05,
            door.center[1] + door.normal[1] * 0.05,
        )
        pts = np.flatnonzero(front_yard_points(world, xs, ys) & near_house)
        if len(pts) == 0:
            return False
        seen = world.los_clear_batch(target, xs[pts], ys[pts])
        if seen.mean() < 0.9:
            return False
    return True


# ---------------------------------------------------------------------------
# Sensors
# ---------------------------------------------------------------------------


def render_aerial(world: WorldModel, pose: DronePose, cam: CameraModel) -> SemanticGrid:
    """Ground-truth semantic image from the nadir camera: each pixel gets the
    class at its ground-plane intersection; off-world pixels are UNKNOWN. The
    center pixel (W/2, H/2) corresponds to the drone's (x, y)."""
    if pose.altitude <= 0:
        raise ValueError("altitude must be positive for an aerial capture")
    u = np.arange(cam.width, dtype=float)
    v = np.arange(cam.height, dtype=float)
    gx = pose.x + pose.altitude * (u - cam.ox) / cam.fx
    gy = pose.y + pose.altitude * (v - cam.oy) / cam.fy
    labels = world.paint_grid(gx, gy)
    # Mask pixels whose ground point falls outside the world bounds.
    off_x = (gx < 0.0) | (gx > world.bounds[0])
    off_y = (gy < 0.0) | (gy > world.bounds[1])
    if off_x.any():
        labels[:, off_x] = int(ClassLabel.UNKNOWN)
    if off_y.any():
        labels[off_y, :] = int(ClassLabel.UNKNOWN)
    return SemanticGrid(labels, cam.ground_resolution(pose.altitude))


def range_find(world: WorldModel, pose: DronePose) -> float:
    """Flying height over the (flat) ground plane; exact in this world."""
    return pose.altitude


def detect_door(
    world: WorldModel,
    pose: DronePose,
    fov: float,
    max_range: float,
    miss_probability: float = 0.0,
    rng: np.random.Generator | None = None,
) -> DoorDetection | None:
    """Geometric door detector: fires on the recipient's door iff it is within
    range, inside the horizontal field of view, seen from in front at an
    incidence angle below 75 degrees, and unoccluded."""
    door = world.door
    dx = door.center[0] - pose.x
    dy = door.center[1] - pose.y
    dist = math.hypot(dx, dy)
    if dist > max_range or dist < 1e-9:
        return None
    to_drone = (-dx / dist, -dy / dist)
    facing = to_drone[0] * door.normal[0] + to_drone[1] * door.normal[1]
    if facing <= 0:
        return None  # behind the wall
    if math.acos(min(1.0, facing)) >= math.radians(75.0):
        return None
    bearing = normalize_angle(math.atan2(dy, dx) - pose.yaw)
    if abs(bearing) > fov / 2:
        return None
    target = (
        door.center[0] + door.normal[0] * 0.05,
        door.center[1] + door.normal[1] * 0.05,
    )
    if not world.los_clear((pose.x, pose.y), target):
        return None
    if miss_probability > 0.0 and rng is not None and rng.random() < miss_probability:
        return None
    return DoorDetection(door.center, door.normal, pose)


def _clip_segments(poly: ConvexPolygon, origin: np.ndarray, dxs, dys):
    """Vectorized convex clip of segments origin -> origin + (dxs, dys).
    Returns (valid, t_in, t_out) arrays over the segment parameter [0, 1]."""
    normals = poly._normals
    num = poly._offsets - normals @ origin
    den = np.outer(normals[:, 0], dxs) + np.outer(normals[:, 1], dys)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num[:, None] / den
    t_enter = np.where(den < 0, t, -np.inf).max(axis=0)
    t_exit = np.where(den > 0, t, np.inf).min(axis=0)
    miss = ((np.abs(den) < 1e-15) & (num[:, None] < 0)).any(axis=0)
    t_enter = np.maximum(t_enter, 0.0)
    t_exit = np.minimum(t_exit, 1.0)
    valid = ~miss & (t_enter <= t_exit)
    return valid, t_enter, t_exit


def sense_points(world: WorldModel, pose: DronePose, xs, ys):
    """Line-of-sight classification of sample points from the drone at hover:
    returns (visible_free, visible_occupied) boolean arrays. A point inside a
    structure is visible when that structure is the first one the ray hits;
    a free point is visible when no structure interior blocks the ray."""
    origin = np.array([pose.x, pose.y])
    dxs = np.asarray(xs, dtype=float) - origin[0]
    dys = np.asarray(ys, dtype=float) - origin[1]
    n = len(dxs)
    eps = 1e-6
    first_entry = np.full(n, np.inf)
    entry_inside = np.full(n, np.inf)
    inside_any = np.zeros(n, dtype=bool)
    blocked = np.zeros(n, dtype=bool)
    for poly, _height in world._solids:
        valid, t_in, t_out = _clip_segments(poly, origin, dxs, dys)
        crosses = valid & (t_out > eps) & (t_out - t_in > eps)
        inside = poly.contains(xs, ys)
        inside_any |= inside
        entry = np.where(crosses, t_in, np.inf)
        first_entry = np.minimum(first_entry, entry)
        entry_inside = np.where(inside, np.minimum(entry_inside, entry), entry_inside)
        blocked |= crosses & (t_in < 1.0 - eps) & ~inside
    visible_occ = inside_any & (entry_inside <= first_entry + 1e-9)
    visible_free = ~inside_any & ~blocked
    return visible_free, visible_occ


def local_obstacle_scan(world: WorldModel, pose: DronePose, radius: float, occ) -> set:
    """Occupied cells of `occ` (an occupancy.OccupancyGrid) whose centers hold
    ground-truth structure within `radius` and in line of sight at hover."""
    res = occ.resolution
    ox, oy = occ.origin
    c0 = max(0, int(math.floor((pose.x - radius - ox) / res)))
    c1 = min(occ.width - 1, int(math.ceil((pose.x + radius - ox) / res)))
    r0 = max(0, int(math.floor((pose.y - radius - oy) / res)))
    r1 = min(occ.height - 1, int(math.ceil((pose.y + radius - oy) / res)))
    if c1 < c0 or r1 < r0:
        return set()
    cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
    cols, rows = cols.ravel(), rows.ravel()
    xs = ox + cols * res
    ys = oy + rows * res
    within = (xs - pose.x) ** 2 + (ys - pose.y) ** 2 <= radius * radius
    cols, rows, xs, ys = cols[within], rows[within], xs[within], ys[within]
    if len(cols) == 0:
        return set()
    _, occupied = sense_points(world, pose, xs, ys)
    return {(int(r), int(c)) for r, c in zip(rows[occupied], cols[occupied])}


# ---------------------------------------------------------------------------
# Kinematics
# ---------------------------------------------------------------------------

MAX_SPEED = 0.5  # m/s, experiment-wide speed cap


def step_drone(
    pose: DronePose,
    velocity,
    yaw_rate: float,
    dt: float,
    max_speed: float = MAX_SPEED,
) -> DronePose:
    """First-order kinematic step: commanded velocity clamped to max_speed,
    yaw wrapped to (-pi, pi], altitude clamped at ground level."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    vx, vy, vz = (float(velocity[0]), float(velocity[1]), float(velocity[2]))
    speed = math.sqrt(vx * vx + vy * vy + vz * vz)
    if speed > max_speed:
        scale = max_speed / speed
        vx, vy, vz = vx * scale, vy * scale, vz * scale
    return DronePose(
        x=pose.x + vx * dt,
        y=pose.y + vy * dt,
        altitude=max(0.0, pose.altitude + vz * dt),
        yaw=normalize_angle(pose.yaw + yaw_rate * dt),
    )


class Drone:
    """Mutable per-trial drone state: pose, integer-millisecond simulated
    clock, and the timestamped trajectory."""

    def __init__(
        self,
        pose: DronePose,
        dt: float = 0.1,
        max_speed: float = MAX_SPEED,
        max_yaw_rate: float = math.pi / 2,
    ) -> None:
        self.pose = pose
        self.dt = dt
        self.dt_ms = int(round(dt * 1000))
        if self.dt_ms <= 0:
            raise ValueError("dt must be at least 1 ms")
        self.max_speed = max_speed
        self.max_yaw_rate = max_yaw_rate
        self.ticks = 0
        self.trajectory: list[tuple[float, float, float, float, float]] = []
        self._record()

    def _record(self) -> None:
        self.trajectory.append(
            (self.time, self.pose.x, self.pose.y, self.pose.altitude, self.pose.yaw)
        )

    @property
    def time(self) -> float:
        return self.ticks * self.dt_ms / 1000.0

    @property
    def xy(self) -> np.ndarray:
        return self.pose.xy

    def step(self, velocity=(0.0, 0.0, 0.0), yaw_rate: float = 0.0) -> None:
        self.pose = step_drone(self.pose, velocity, yaw_rate, self.dt, self.max_speed)
        self.ticks += 1
        self._record()

    def step_toward(self, target_xy, speed: float | None = None) -> bool:
        """One control step toward a ground target at fixed altitude; lands
        exactly on the target when within one step. Returns True on arrival."""
        speed = self.max_speed if speed is None else speed
        dx = float(target_xy[0]) - self.pose.x
        dy = float(target_xy[1]) - self.pose.y
        dist = math.hypot(dx, dy)
        if dist < 1e-12:
            return True
        step_len = min(dist, speed * self.dt)
        v = (dx / dist * step_len / self.dt, dy / dist * step_len / self.dt, 0.0)
        self.step(v)
        return dist <= speed * self.dt + 1e-12

    def step_vertical(self, target_alt: float, speed: float | None = None) -> bool:
        """One control step of climb/descent toward target altitude."""
        speed = self.max_speed if speed is None else speed
        dz = target_alt - self.pose.altitude
        if abs(dz) < 1e-12:
            return True
        step_len = min(abs(dz), speed * self.dt)
        self.step((0.0, 0.0, math.copysign(step_len / self.dt, dz)))
        return abs(dz) <= speed * self.dt + 1e-12

    def step_yaw_toward(self, target_yaw: float) -> bool:
        """One rate-limited yaw step toward the target heading."""
        err = normalize_angle(target_yaw - self.pose.yaw)
        if abs(err) < 1e-12:
            return True
        rate = math.copysign(min(abs(err) / self.dt, self.max_yaw_rate), err)
        self.step(yaw_rate=rate)
        return abs(err) <= self.max_yaw_rate * self.dt + 1e-12

    def turn_to(self, target_yaw: float, max_steps: int = 200) -> None:
        for _ in range(max_steps):
            if self.step_yaw_toward(target_yaw):
                return
