"""Frontier-exploration comparator: descend at a random open spot in front of
the house, then repeatedly scan, pick the nearest frontier, and traverse until
the door detector fires or the caps are hit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy import ndimage

from . import simworld
from .config import SimConfig
from .descent import SimulationTimeout
from .geometry import normalize_angle
from .navigation import DeliveryOutcome, DeliveryStatus, _DetectorRig, approach_and_land
from .occupancy import OccupancyGrid, PlanningError, Unreachable, plan_path
from .simworld import Drone, WorldModel


class CellState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


@dataclass
class ExplorationMap:
    """Ternary raster built only from observations: cells outside every sensor
    sweep stay UNKNOWN. origin is the world position of cell (0, 0)'s center."""

    states: np.ndarray
    resolution: float
    origin: tuple[float, float]

    def __post_init__(self) -> None:
        self.states = np.asarray(self.states, dtype=np.uint8)

    @property
    def width(self) -> int:
        return self.states.shape[1]

    @property
    def height(self) -> int:
        return self.states.shape[0]

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        return (
            self.origin[0] + col * self.resolution,
            self.origin[1] + row * self.resolution,
        )

    def world_to_cell(self, x: float, y: float) -> tuple[int, int]:
        return (
            int(round((y - self.origin[1]) / self.resolution)),
            int(round((x - self.origin[0]) / self.resolution)),
        )

    def as_occupancy(self) -> OccupancyGrid:
        """Planning view: anything not observed free is untraversable."""
        return OccupancyGrid(
            self.states != int(CellState.FREE), self.resolution, self.origin
        )

    @classmethod
    def for_world(cls, world: WorldModel, resolution: float) -> "ExplorationMap":
        w = int(math.ceil(world.bounds[0] / resolution))
        h = int(math.ceil(world.bounds[1] / resolution))
        states = np.zeros((h, w), dtype=np.uint8)
        return cls(states, resolution, (resolution / 2.0, resolution / 2.0))


@dataclass
class FrontierCluster:
    rows: np.ndarray
    cols: np.ndarray
    centroid: tuple[float, float]  # world coordinates


_EIGHT = np.ones((3, 3), dtype=bool)


def frontier_cell_mask(emap: ExplorationMap) -> np.ndarray:
    """Free cells 8-adjacent to at least one unknown cell."""
    unknown = emap.states == int(CellState.UNKNOWN)
    free = emap.states == int(CellState.FREE)
    near_unknown = ndimage.binary_dilation(unknown, structure=_EIGHT)
    return free & near_unknown


def detect_frontiers(emap: ExplorationMap, drone_xy) -> list[FrontierCluster]:
    """Frontier cells clustered by 8-connectivity, ordered by the distance of
    each cluster centroid from the drone (ties by scan order)."""
    mask = frontier_cell_mask(emap)
    if not mask.any():
        return []
    labeled, count = ndimage.label(mask, structure=_EIGHT)
    clusters = []
    px, py = float(drone_xy[0]), float(drone_xy[1])
    for comp in range(1, count + 1):
        rows, cols = np.nonzero(labeled == comp)
        cx = emap.origin[0] + cols.mean() * emap.resolution
        cy = emap.origin[1] + rows.mean() * emap.resolution
        d = math.hypot(cx - px, cy - py)
        clusters.append((d, rows[0], cols[0], FrontierCluster(rows, cols, (cx, cy))))
    clusters.sort(key=lambda t: (t[0], t[1], t[2]))
    return [c[-1] for c in clusters]


def update_map(emap: ExplorationMap, world: WorldModel, drone: Drone, radius: float) -> None:
    """Fold one omnidirectional range scan into the map: cells within radius
    get FREE/OCCUPIED according to line-of-sight ground truth."""
    res = emap.resolution
    c0 = max(0, int(math.floor((drone.pose.x - radius - emap.origin[0]) / res)))
    c1 = min(emap.width - 1, int(math.ceil((drone.pose.x + radius - emap.origin[0]) / res)))
    r0 = max(0, int(math.floor((drone.pose.y - radius - emap.origin[1]) / res)))
    r1 = min(emap.height - 1, int(math.ceil((drone.pose.y + radius - emap.origin[1]) / res)))
    if c1 < c0 or r1 < r0:
        return
    cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
    cols, rows = cols.ravel(), rows.ravel()
    xs = emap.origin[0] + cols * res
    ys = emap.origin[1] + rows * res
    within = (xs - drone.pose.x) ** 2 + (ys - drone.pose.y) ** 2 <= radius * radius
    cols, rows, xs, ys = cols[within], rows[within], xs[within], ys[within]
    if len(cols) == 0:
        return
    free, occ = simworld.sense_points(world, drone.pose, xs, ys)
    emap.states[rows[free], cols[free]] = int(CellState.FREE)
    emap.states[rows[occ], cols[occ]] = int(CellState.OCCUPIED)


def pick_random_open_spot(
    world: WorldModel, rng: np.random.Generator, clearance: float = 2.5,
    max_dist: float = 12.0,
) -> tuple[float, float]:
    """Seeded uniform choice over open ground (grass or paved) in front of the
    house, near the facade and clear of structures: the baseline's descent
    spot."""
    from .semantics import ClassLabel

    step = 0.5
    xs, ys = np.meshgrid(
        np.arange(step / 2, world.bounds[0], step),
        np.arange(step / 2, world.bounds[1], step),
    )
    xs, ys = xs.ravel(), ys.ravel()
    labels = world.class_at(xs, ys)
    open_ground = (labels == int(ClassLabel.GRASS)) | (
        labels == int(ClassLabel.PAVED_AREA)
    )
    near = world.recipient_polygon.distance(xs, ys) <= max_dist
    ok = (
        open_ground
        & near
        & world.front_truth(xs, ys)
        & (world.clearance_2d(xs, ys) >= clearance)
    )
    idx = np.flatnonzero(ok)
    if len(idx) == 0:
        raise ValueError("no open spot in front of the house")
    pick = idx[int(rng.integers(len(idx)))]
    return (float(xs[pick]), float(ys[pick]))


def frontier_explore_to_door(
    drone: Drone,
    world: WorldModel,
    radius_cap: float = 25.0,
    time_cap: float = 180.0,
    cfg: SimConfig | None = None,
    rng: np.random.Generator | None = None,
    descent_xy=None,
) -> DeliveryOutcome:
    """Frontier loop from the post-descent hover: scan and update the local
    map, head for the nearest frontier whose cells lie within radius_cap of
    the descent point, and stop on detection (Delivered), at the simulated
    time cap (Timeout, elapsed exactly time_cap), or when no admissible
    frontiers remain (DoorNotFound)."""
    cfg = cfg or SimConfig()
    detector = _DetectorRig(world, cfg, rng)
    descent_xy = tuple(drone.xy) if descent_xy is None else tuple(descent_xy)
    emap = ExplorationMap.for_world(world, cfg.exploration_cell_m)
    visited: set[tuple[int, int]] = set()  # blacklisted frontier cells
    sensed: set = set()
    cap_ticks = int(round(time_cap * 1000)) // drone.dt_ms

    def outcome(status: DeliveryStatus, adjusted: bool = False) -> DeliveryOutcome:
        elapsed = time_cap if status is DeliveryStatus.TIMEOUT else drone.time
        return DeliveryOutcome(
            status=status,
            elapsed=elapsed,
            trajectory=list(drone.trajectory),
            detections=list(detector.hits),
            approach_adjusted=adjusted,
        )

    def out_of_time() -> bool:
        return drone.ticks >= cap_ticks

    def admissible_target(cluster: FrontierCluster):
        """Nearest unvisited cluster cell within radius_cap of the descent
        point; None when the whole cluster is inadmissible."""
        best = None
        for r, c in zip(cluster.rows.tolist(), cluster.cols.tolist()):
            if (r, c) in visited:
                continue
            x, y = emap.cell_center(r, c)
            if math.hypot(x - descent_xy[0], y - descent_xy[1]) > radius_cap:
                continue
            d = math.hypot(x - drone.pose.x, y - drone.pose.y)
            if best is None or d < best[0]:
                best = (d, r, c)
        return best

    def look_around() -> simworld.DoorDetection | None:
        """Full in-place spin with the detector running: how the explorer
        integrates panoramic sensing at each stop."""
        turned = 0.0
        while turned < 2.0 * math.pi:
            if out_of_time():
                raise SimulationTimeout("exploration time cap")
            drone.step(yaw_rate=cfg.max_yaw_rate_rps)
            turned += cfg.max_yaw_rate_rps * drone.dt
            det = detector.query(drone)
            if det is not None:
                return det
        return None

    try:
        update_map(emap, world, drone, cfg.scan_radius_m)
        det = detector.query(drone) or look_around()
        while True:
            if det is not None:
                approach_ok = _approach(drone, world, emap, det, cfg, detector,
                                        time_cap, sensed)
                return outcome(
                    DeliveryStatus.DELIVERED if approach_ok else DeliveryStatus.STUCK
                )
            if out_of_time():
                return outcome(DeliveryStatus.TIMEOUT)
            update_map(emap, world, drone, cfg.scan_radius_m)

            target = None
            target_cluster = None
            for cluster in detect_frontiers(emap, drone.xy):
                cand = admissible_target(cluster)
                if cand is not None:
                    target = cand
                    target_cluster = cluster
                    break
            if target is None:
                return outcome(DeliveryStatus.DOOR_NOT_FOUND)

            goal = emap.cell_center(target[1], target[2])
            try:
                path = plan_path(emap.as_occupancy(), drone.xy, goal,
                                 inflation=cfg.exploration_cell_m * 0.8)
            except PlanningError:
                visited.update(
                    zip(target_cluster.rows.tolist(), target_cluster.cols.tolist())
                )
                continue

            det = _traverse(drone, world, emap, path, cfg, detector, cap_ticks)
            # Reached (or abandoned) the frontier: retire its cells so an
            # unobservable pocket cannot pin the search forever, then take a
            # panoramic look before committing to the next frontier.
            visited.update(
                zip(target_cluster.rows.tolist(), target_cluster.cols.tolist())
            )
            if det is None:
                det = look_around()
    except SimulationTimeout:
        return outcome(DeliveryStatus.TIMEOUT)


def _traverse(drone, world, emap, path, cfg, detector, cap_ticks):
    """Walk a planned path, facing travel, detector on every step; rescan
    periodically and abandon the leg when a new reading blocks it."""
    next_scan = drone.time
    for target in path.waypoints:
        while True:
            if drone.ticks >= cap_ticks:
                raise SimulationTimeout("exploration time cap")
            if drone.time >= next_scan:
                next_scan = drone.time + cfg.scan_period_s
                update_map(emap, world, drone, cfg.scan_radius_m)
                r, c = emap.world_to_cell(*target)
                if emap.states[r, c] == int(CellState.OCCUPIED):
                    return None  # leg invalidated; pick a new frontier
            dx = target[0] - drone.pose.x
            dy = target[1] - drone.pose.y
            dist = math.hypot(dx, dy)
            if dist < 1e-9:
                break
            desired = math.atan2(dy, dx)
            err = normalize_angle(desired - drone.pose.yaw)
            rate = max(-cfg.max_yaw_rate_rps, min(cfg.max_yaw_rate_rps, err / drone.dt))
            step_len = min(dist, cfg.max_speed_mps * drone.dt)
            drone.step(
                (dx / dist * step_len / drone.dt, dy / dist * step_len / drone.dt, 0.0),
                yaw_rate=rate,
            )
            det = detector.query(drone)
            if det is not None:
                return det
            if dist <= cfg.max_speed_mps * drone.dt + 1e-12:
                break
    return None


def _approach(drone, world, emap, det, cfg, detector, time_cap, sensed) -> bool:
    """Door found: reuse the navigation-module approach over the explored map.
    When the approach cells have not been observed yet, edge toward the door,
    rescan and retry before giving up."""
    deadline = time_cap
    for _attempt in range(5):
        update_map(emap, world, drone, cfg.scan_radius_m)
        try:
            approach_and_land(
                drone, world, emap.as_occupancy(), det, cfg, detector, deadline, sensed
            )
            return True
        except PlanningError:
            dx = det.door_point[0] - drone.pose.x
            dy = det.door_point[1] - drone.pose.y
            dist = math.hypot(dx, dy)
            if dist < 1.5:
                return False
            goal = (
                drone.pose.x + dx / dist * 1.5,
                drone.pose.y + dy / dist * 1.5,
            )
            for _ in range(64):
                if drone.ticks * drone.dt_ms >= time_cap * 1000:
                    raise SimulationTimeout("exploration time cap")
                if drone.step_toward(goal, cfg.max_speed_mps):
                    break
    return False
