"""Post-descent door search and approach: yaw sweep, footprint-following
search with dynamic re-planning against locally sensed obstacles, and the
1 m normal-offset delivery point."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import simworld
from .config import SimConfig
from .descent import SimulationTimeout
from .geometry import normalize_angle
from .occupancy import (
    OccupancyGrid,
    Path,
    PlanningError,
    Unreachable,
    path_from_waypoints,
    plan_path,
)
from .simworld import DoorDetection, Drone, WorldModel


class DeliveryStatus(str, Enum):
    DELIVERED = "delivered"
    DOOR_NOT_FOUND = "door_not_found"
    TIMEOUT = "timeout"
    STUCK = "stuck"


@dataclass
class DeliveryOutcome:
    status: DeliveryStatus
    elapsed: float
    trajectory: list = field(default_factory=list)
    detections: list[DoorDetection] = field(default_factory=list)
    approach_adjusted: bool = False


class ApproachPoint(NamedTuple):
    point: tuple[float, float]
    adjusted: bool


class _DetectorRig:
    """Shared door-detector invocation so every stage queries one way."""

    def __init__(self, world: WorldModel, cfg: SimConfig, rng=None) -> None:
        self.world = world
        self.cfg = cfg
        self.rng = rng
        self.hits: list[DoorDetection] = []

    def query(self, drone: Drone) -> DoorDetection | None:
        det = simworld.detect_door(
            self.world,
            drone.pose,
            fov=self.cfg.detector_fov_rad,
            max_range=self.cfg.detector_range_m,
            miss_probability=self.cfg.detector_miss_prob,
            rng=self.rng,
        )
        if det is not None:
            self.hits.append(det)
        return det


def _face_wall_yaw(world: WorldModel, drone: Drone) -> float:
    """Heading toward the nearest point of the recipient footprint, so the
    camera looks square at the facade being walked."""
    poly = world.recipient_polygon
    a = poly.vertices
    b = np.roll(a, -1, axis=0)
    ab = b - a
    ab2 = np.einsum("ij,ij->i", ab, ab)
    p = drone.xy
    t = np.clip(((p - a) * ab).sum(axis=1) / ab2, 0.0, 1.0)
    nearest = a + t[:, None] * ab
    d2 = ((nearest - p) ** 2).sum(axis=1)
    k = int(np.argmin(d2))
    return math.atan2(nearest[k, 1] - p[1], nearest[k, 0] - p[0])


def yaw_sweep_search(
    drone: Drone,
    world: WorldModel,
    cfg: SimConfig | None = None,
    detector: _DetectorRig | None = None,
) -> DoorDetection | None:
    """Sweep headings across [-half_range, +half_range] around the current
    yaw in fixed increments, center-out, querying the detector once per
    heading; first hit wins. The zero-offset query doubles as the initial
    stationary detector check."""
    cfg = cfg or SimConfig()
    detector = detector or _DetectorRig(world, cfg)
    base = drone.pose.yaw
    steps = int(round(cfg.yaw_sweep_half_range_rad / cfg.yaw_sweep_increment_rad))
    offsets = [0.0]
    for k in range(1, steps + 1):
        offsets.append(k * cfg.yaw_sweep_increment_rad)
        offsets.append(-k * cfg.yaw_sweep_increment_rad)
    for off in offsets:
        drone.turn_to(normalize_angle(base + off))
        det = detector.query(drone)
        if det is not None:
            return det
    return None


def dynamic_replan(current: Path, local_obstacles, occ: OccupancyGrid, inflation: float = 0.5) -> Path:
    """Overlay locally sensed occupied cells and re-plan from the path's head
    to its goal. Returns the path unchanged when no sensed cell intrudes on
    the inflated corridor; raises Unreachable when the overlay seals the
    goal off."""
    if len(current) == 0:
        return current
    cells = [rc for rc in local_obstacles if occ.in_grid(*rc)]
    if not cells:
        return current
    centers = np.array([occ.cell_center(r, c) for r, c in cells])
    wp = current.waypoints
    intrudes = False
    for cx, cy in centers:
        d2 = (wp[:, 0] - cx) ** 2 + (wp[:, 1] - cy) ** 2
        if np.min(d2) < inflation * inflation:
            intrudes = True
            break
    if not intrudes:
        return current
    overlaid = occ.with_cells(cells)
    return plan_path(overlaid, current.waypoints[0], current.goal, inflation)


def door_approach_point(
    det: DoorDetection,
    offset: float = 1.0,
    occ: OccupancyGrid | None = None,
    inflation: float = 0.5,
) -> ApproachPoint:
    """Delivery point offset outward along the door's wall normal. When an
    occupancy grid is supplied and the nominal point is blocked, the nearest
    free cell farther along the normal is used and flagged."""
    nx, ny = det.wall_normal
    px = det.door_point[0] + offset * nx
    py = det.door_point[1] + offset * ny
    if occ is None:
        return ApproachPoint((px, py), False)
    blocked = occ.blocked_mask(inflation)
    r, c = occ.world_to_cell(px, py)
    if occ.in_grid(r, c) and not blocked[r, c]:
        return ApproachPoint((px, py), False)
    step = occ.resolution / 2.0
    t = offset + step
    while t <= offset + 8.0:
        qx = det.door_point[0] + t * nx
        qy = det.door_point[1] + t * ny
        r, c = occ.world_to_cell(qx, qy)
        if occ.in_grid(r, c) and not blocked[r, c]:
            return ApproachPoint(occ.cell_center(r, c), True)
        t += step
    return ApproachPoint((px, py), False)


class _Traverser:
    """Drives the drone along a waypoint path, facing the house, querying the
    detector every control step and folding in local obstacle scans."""

    def __init__(
        self,
        drone: Drone,
        world: WorldModel,
        occ: OccupancyGrid,
        cfg: SimConfig,
        detector: _DetectorRig,
        deadline: float,
        sensed: set,
    ) -> None:
        self.drone = drone
        self.world = world
        self.occ = occ
        self.cfg = cfg
        self.detector = detector
        self.deadline = deadline
        self.sensed = sensed
        self._next_scan = drone.time

    def scan(self) -> set:
        new = simworld.local_obstacle_scan(
            self.world, self.drone.pose, self.cfg.scan_radius_m, self.occ
        ) - self.sensed
        self.sensed |= new
        return new

    def _detour(self, wp: list, i: int) -> tuple[list, int]:
        """Sensed cells intrude on the remaining waypoints: find the first
        clear waypoint past the blockage and re-route to it, keeping the rest
        of the sequence so ring coverage is preserved."""
        inflation = self.cfg.inflation_m
        centers = np.array([self.occ.cell_center(r, c) for r, c in self.sensed])

        def clear(p) -> bool:
            d2 = (centers[:, 0] - p[0]) ** 2 + (centers[:, 1] - p[1]) ** 2
            return bool(np.min(d2) >= inflation * inflation)

        blocked_idx = [j for j in range(i, len(wp)) if not clear(wp[j])]
        if not blocked_idx:
            return wp, i
        first_blocked = blocked_idx[0]
        attempts = 0
        for j in range(first_blocked + 1, len(wp)):
            if not clear(wp[j]):
                continue
            sub = path_from_waypoints(
                np.vstack([self.drone.xy[None, :], np.array(wp[i : j + 1])])
            )
            try:
                replanned = dynamic_replan(sub, self.sensed, self.occ, inflation)
            except Unreachable:
                attempts += 1
                if attempts >= 4:
                    raise
                continue
            return list(replanned.waypoints) + wp[j + 1 :], 0
        raise Unreachable("no clear waypoint past the sensed blockage")

    def follow(self, path: Path, face_house: bool = True) -> DoorDetection | None:
        """Walk the path; returns a detection as soon as the detector fires,
        None at the end. Re-routes around newly sensed obstacles; raises
        Unreachable when blocked for good, SimulationTimeout past deadline."""
        wp = [tuple(p) for p in path.waypoints]
        i = 0
        while i < len(wp):
            if self.drone.time >= self.deadline:
                raise SimulationTimeout("traversal exceeded the trial time cap")
            if self.drone.time >= self._next_scan:
                self._next_scan = self.drone.time + self.cfg.scan_period_s
                if self.scan():
                    wp, i = self._detour(wp, i)
            target = wp[i]
            if face_house:
                desired = _face_wall_yaw(self.world, self.drone)
            else:
                dx, dy = target[0] - self.drone.pose.x, target[1] - self.drone.pose.y
                desired = (
                    math.atan2(dy, dx) if math.hypot(dx, dy) > 1e-9 else self.drone.pose.yaw
                )
            err = normalize_angle(desired - self.drone.pose.yaw)
            rate = max(-self.cfg.max_yaw_rate_rps, min(self.cfg.max_yaw_rate_rps, err / self.drone.dt))
            dx = target[0] - self.drone.pose.x
            dy = target[1] - self.drone.pose.y
            dist = math.hypot(dx, dy)
            if dist < 1e-9:
                i += 1
                continue
            step_len = min(dist, self.cfg.max_speed_mps * self.drone.dt)
            self.drone.step(
                (dx / dist * step_len / self.drone.dt, dy / dist * step_len / self.drone.dt, 0.0),
                yaw_rate=rate,
            )
            if dist <= self.cfg.max_speed_mps * self.drone.dt + 1e-12:
                i += 1
            det = self.detector.query(self.drone)
            if det is not None:
                return det
        return None


def follow_footprint_search(
    drone: Drone,
    world: WorldModel,
    ring: Path,
    occ: OccupancyGrid,
    cfg: SimConfig | None = None,
    detector: _DetectorRig | None = None,
    deadline: float = math.inf,
    sensed: set | None = None,
) -> DoorDetection | None:
    """Drive the drone around the footprint ring (approaching it first),
    facing the house, until the detector fires; one full loop bounds the
    search. Open arcs are covered end-to-end in both directions."""
    if len(ring) == 0:
        raise ValueError("empty footprint ring")
    cfg = cfg or SimConfig()
    detector = detector or _DetectorRig(world, cfg)
    sensed = set() if sensed is None else sensed
    tr = _Traverser(drone, world, occ, cfg, detector, deadline, sensed)
    wp = ring.waypoints
    d2 = np.sum((wp - drone.xy) ** 2, axis=1)
    k = int(np.argmin(d2))

    if ring.closed:
        loop = np.vstack([np.roll(wp, -k, axis=0), wp[k][None, :]])
    else:
        # Maximal open arc: out to the near end, then back across to the far end.
        out = wp[k:]
        back = wp[: k + 1][::-1]
        parts = [out]
        if len(out) > 1:
            parts.append(out[::-1][1:])
        if len(back) > 1:
            parts.append(back[1:])
        loop = np.vstack(parts)
    approach = plan_path(occ.with_cells(sensed), drone.xy, wp[k], cfg.inflation_m)
    det = tr.follow(approach, face_house=True)
    if det is not None:
        return det
    return tr.follow(path_from_waypoints(loop), face_house=True)


def _land(drone: Drone, cfg: SimConfig, deadline: float) -> None:
    while not drone.step_vertical(0.0, cfg.max_speed_mps):
        if drone.time >= deadline:
            raise SimulationTimeout("landing exceeded the trial time cap")


def approach_and_land(
    drone: Drone,
    world: WorldModel,
    occ: OccupancyGrid,
    det: DoorDetection,
    cfg: SimConfig,
    detector: _DetectorRig,
    deadline: float,
    sensed: set,
) -> tuple[bool, bool]:
    """Plan to the door approach point, traverse, and land. Returns
    (arrived, approach_adjusted)."""
    overlaid = occ.with_cells(sensed)
    ap = door_approach_point(det, 1.0, overlaid, cfg.inflation_m)
    tr = _Traverser(drone, world, occ, cfg, detector, deadline, sensed)
    plan = plan_path(overlaid, drone.xy, ap.point, cfg.inflation_m)
    tr.follow(plan, face_house=False)
    # Close the final sub-cell gap to the approach point itself.
    while not drone.step_toward(ap.point, cfg.max_speed_mps):
        if drone.time >= deadline:
            raise SimulationTimeout("final approach exceeded the trial time cap")
    drone.turn_to(
        math.atan2(
            det.door_point[1] - drone.pose.y, det.door_point[0] - drone.pose.x
        )
    )
    _land(drone, cfg, deadline)
    return True, ap.adjusted


def deliver_to_front_door(
    drone: Drone,
    world: WorldModel,
    occ: OccupancyGrid,
    ring: Path,
    cfg: SimConfig | None = None,
    rng=None,
) -> DeliveryOutcome:
    """Door search and delivery from the 2 m hover: stationary detector check
    and yaw sweep first, then the footprint-following search; on detection,
    fly to the 1 m offset point and land. Elapsed time rides the drone's
    simulated clock, which started at the top-of-house descent."""
    cfg = cfg or SimConfig()
    detector = _DetectorRig(world, cfg, rng)
    deadline = cfg.proposed_time_cap_s
    sensed: set = set()

    def outcome(status: DeliveryStatus, adjusted: bool = False) -> DeliveryOutcome:
        return DeliveryOutcome(
            status=status,
            elapsed=drone.time,
            trajectory=list(drone.trajectory),
            detections=list(detector.hits),
            approach_adjusted=adjusted,
        )

    try:
        drone.turn_to(_face_wall_yaw(world, drone))
        det = yaw_sweep_search(drone, world, cfg, detector)
        if det is None:
            det = follow_footprint_search(
                drone, world, ring, occ, cfg, detector, deadline, sensed
            )
        if det is None:
            return outcome(DeliveryStatus.DOOR_NOT_FOUND)
        _, adjusted = approach_and_land(
            drone, world, occ, det, cfg, detector, deadline, sensed
        )
        return outcome(DeliveryStatus.DELIVERED, adjusted)
    except SimulationTimeout:
        return outcome(DeliveryStatus.TIMEOUT)
    except PlanningError:
        return outcome(DeliveryStatus.STUCK)
