"""Aerial occupancy mapping and grid planning: the binary traversability map
built from the pre-descent semantic frame, the footprint ring used for the
door search, and an inflated-grid A* planner."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree
from skimage import measure

from .camera import CameraModel
from .semantics import OBSTACLE_LABELS, ClassLabel, Segment, SemanticGrid


class PlanningError(Exception):
    pass


class Unreachable(PlanningError):
    pass


class StartOccupied(PlanningError):
    pass


class GoalOccupied(PlanningError):
    pass


class NoRingExists(PlanningError):
    pass


@dataclass
class OccupancyGrid:
    """Binary traversability raster. origin is the world position of the
    center of cell (0, 0); cell (r, c) is centered at origin + (c, r) * res."""

    occupied: np.ndarray
    resolution: float
    origin: tuple[float, float]

    def __post_init__(self) -> None:
        self.occupied = np.asarray(self.occupied, dtype=bool)
        if self.occupied.ndim != 2 or self.occupied.size == 0:
            raise ValueError("occupancy raster must be non-empty 2D")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if not np.all(np.isfinite(self.origin)):
            raise ValueError("origin must be finite")
        self._clearance: np.ndarray | None = None

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

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

    def in_grid(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def clearance(self) -> np.ndarray:
        """Metric distance from each cell center to the nearest occupied cell
        center (0 on occupied cells)."""
        if self._clearance is None:
            if self.occupied.any():
                self._clearance = ndimage.distance_transform_edt(
                    ~self.occupied, sampling=self.resolution
                )
            else:
                self._clearance = np.full(self.occupied.shape, np.inf)
        return self._clearance

    def blocked_mask(self, inflation: float) -> np.ndarray:
        if inflation <= 0:
            return self.occupied
        return self.clearance() < inflation

    def with_cells(self, cells) -> "OccupancyGrid":
        """Copy with extra occupied cells overlaid (out-of-grid cells ignored)."""
        occ = self.occupied.copy()
        for r, c in cells:
            if self.in_grid(r, c):
                occ[r, c] = True
        return OccupancyGrid(occ, self.resolution, self.origin)

    def to_text(self) -> str:
        lines = [
            f"{self.width} {self.height} {self.resolution!r} "
            f"{self.origin[0]!r} {self.origin[1]!r}"
        ]
        for row in self.occupied:
            lines.append("".join("#" if v else "." for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "OccupancyGrid":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        parts = lines[0].split()
        if len(parts) != 5:
            raise ValueError("header must be 'W H resolution ox oy'")
        w, h = int(parts[0]), int(parts[1])
        res, ox, oy = float(parts[2]), float(parts[3]), float(parts[4])
        if len(lines) != h + 1:
            raise ValueError(f"expected {h} raster rows, found {len(lines) - 1}")
        occupied = np.zeros((h, w), dtype=bool)
        for r, line in enumerate(lines[1:]):
            if len(line) != w:
                raise ValueError(f"row {r} has {len(line)} cells, expected {w}")
            occupied[r] = [ch == "#" for ch in line]
        return cls(occupied, res, (ox, oy))


@dataclass
class Path:
    """Ordered world-frame waypoints; consecutive points stay within one cell
    diagonal. total_length covers the closing edge for closed rings."""

    waypoints: np.ndarray
    total_length: float
    closed: bool = False

    def __post_init__(self) -> None:
        self.waypoints = np.asarray(self.waypoints, dtype=float).reshape(-1, 2)

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def goal(self) -> np.ndarray:
        return self.waypoints[-1]


def path_from_waypoints(waypoints, closed: bool = False) -> Path:
    wp = np.asarray(waypoints, dtype=float).reshape(-1, 2)
    if len(wp) == 0:
        return Path(wp, 0.0, closed)
    seg = np.diff(wp, axis=0)
    length = float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))
    if closed and len(wp) > 1:
        length += float(np.hypot(*(wp[0] - wp[-1])))
    return Path(wp, length, closed)


_OCCUPIED_CLASSES = {ClassLabel.ROOF, ClassLabel.UNKNOWN} | OBSTACLE_LABELS


def build_occupancy(
    grid: SemanticGrid,
    cam: CameraModel,
    h_capture: float,
    capture_xy=(0.0, 0.0),
) -> OccupancyGrid:
    """Occupancy map from an aerial semantic frame: roof and obstacle classes
    (and unobserved pixels) are occupied, paved area and grass free. Cell size
    is the ground resolution at the capture height; the origin registers the
    raster to world coordinates through the capture pose's ground point."""
    if h_capture <= 0:
        raise ValueError("capture height must be positive")
    res = h_capture / cam.fx
    occupied = np.isin(grid.labels, [int(c) for c in sorted(_OCCUPIED_CLASSES)])
    origin = (capture_xy[0] - cam.ox * res, capture_xy[1] - cam.oy * res)
    return OccupancyGrid(occupied, res, origin)


# ---------------------------------------------------------------------------
# Footprint ring
# ---------------------------------------------------------------------------


def extract_footprint_ring(
    occ: OccupancyGrid,
    roof: Segment,
    standoff: float,
    start_xy=None,
    inflation: float = 0.0,
) -> Path:
    """Ordered loop of free cells in the band [standoff, standoff + one cell
    diagonal] around the roof: the innermost ring of cells outside the
    standoff. Ordered by walking the roof boundary; when parts of the band are
    blocked, the maximal open arc (containing the cell nearest start_xy, if
    given) is returned. Raises NoRingExists when no free band exists."""
    if standoff <= 0:
        raise ValueError("standoff must be positive")
    if roof.area == 0:
        raise NoRingExists("empty roof segment")
    roof_mask = np.zeros(occ.occupied.shape, dtype=bool)
    roof_mask[roof.rows, roof.cols] = True
    dist = ndimage.distance_transform_edt(~roof_mask, sampling=occ.resolution)
    keep_out = dist < standoff
    grown = ndimage.binary_dilation(keep_out, structure=np.ones((3, 3), dtype=bool))
    band = grown & ~keep_out
    rows, cols = np.nonzero(band)
    if len(rows) == 0:
        raise NoRingExists("standoff band lies outside the map")

    contours = measure.find_contours(dist, level=standoff)
    if not contours:
        raise NoRingExists("no standoff contour around the roof")
    contour = max(contours, key=len)
    contour_closed = bool(np.allclose(contour[0], contour[-1]))
    # Walking order: project each band cell onto the contour.
    order_key = cKDTree(contour).query(np.stack([rows, cols], axis=1))[1]
    order = np.lexsort((cols, rows, order_key))
    rows, cols = rows[order], cols[order]

    blocked = occ.blocked_mask(inflation)[rows, cols]
    cells = list(zip(rows.tolist(), cols.tolist()))
    n = len(cells)
    if not np.any(~blocked):
        raise NoRingExists("entire standoff band is blocked")

    if contour_closed and not blocked.any():
        ordered = cells
        closed = True
    else:
        # Split the (conceptually circular) sequence into free arcs.
        closed = False
        if blocked.any():
            first_blocked = int(np.argmax(blocked))
            idx = [(first_blocked + i) % n for i in range(n)]
        else:
            idx = list(range(n))
        arcs: list[list[tuple[int, int]]] = []
        current: list[tuple[int, int]] = []
        for i in idx:
            if blocked[i]:
                if current:
                    arcs.append(current)
                    current = []
            else:
                current.append(cells[i])
        if current:
            arcs.append(current)
        if not arcs:
            raise NoRingExists("entire standoff band is blocked")
        if start_xy is None:
            ordered = max(arcs, key=len)
        else:
            def arc_best(arc):
                return min(
                    (occ.cell_center(r, c)[0] - start_xy[0]) ** 2
                    + (occ.cell_center(r, c)[1] - start_xy[1]) ** 2
                    for r, c in arc
                )
            ordered = min(arcs, key=arc_best)

    waypoints = np.array([occ.cell_center(r, c) for r, c in ordered])
    if closed and start_xy is not None and len(waypoints) > 2:
        d2 = np.sum((waypoints - np.asarray(start_xy, dtype=float)) ** 2, axis=1)
        k = int(np.argmin(d2))
        waypoints = np.roll(waypoints, -k, axis=0)
        # Direction minimizing the initial turn out of the approach leg.
        approach = waypoints[0] - np.asarray(start_xy, dtype=float)
        if np.hypot(*approach) > 1e-9:
            fwd = waypoints[1] - waypoints[0]
            rev = waypoints[-1] - waypoints[0]
            a = math.atan2(*approach[::-1])
            turn_fwd = abs(_wrap(math.atan2(fwd[1], fwd[0]) - a))
            turn_rev = abs(_wrap(math.atan2(rev[1], rev[0]) - a))
            if turn_rev < turn_fwd:
                waypoints = np.roll(waypoints[::-1], 1, axis=0)
    return path_from_waypoints(waypoints, closed=closed)


def _wrap(theta: float) -> float:
    return math.atan2(math.sin(theta), math.cos(theta))


# ---------------------------------------------------------------------------
# A* planning
# ---------------------------------------------------------------------------

_NEIGHBORS = (
    (-1, -1, math.sqrt(2.0)),
    (-1, 0, 1.0),
    (-1, 1, math.sqrt(2.0)),
    (0, -1, 1.0),
    (0, 1, 1.0),
    (1, -1, math.sqrt(2.0)),
    (1, 0, 1.0),
    (1, 1, math.sqrt(2.0)),
)

_SQRT2_MINUS_1 = math.sqrt(2.0) - 1.0


def plan_path(
    occ: OccupancyGrid, start, goal, inflation: float = 0.0
) -> Path:
    """Shortest 8-connected grid path (diagonal cost sqrt(2) cells) with
    obstacles inflated by `inflation` meters. start/goal are world points
    inside the grid; raises StartOccupied/GoalOccupied/Unreachable."""
    sr, sc = occ.world_to_cell(float(start[0]), float(start[1]))
    gr, gc = occ.world_to_cell(float(goal[0]), float(goal[1]))
    if not occ.in_grid(sr, sc) or not occ.in_grid(gr, gc):
        raise ValueError("start and goal must lie inside the grid")
    blocked = occ.blocked_mask(inflation)
    if blocked[sr, sc]:
        raise StartOccupied(f"start cell ({sr}, {sc}) is blocked")
    if blocked[gr, gc]:
        raise GoalOccupied(f"goal cell ({gr}, {gc}) is blocked")
    res = occ.resolution

    def heuristic(r: int, c: int) -> float:
        dr, dc = abs(r - gr), abs(c - gc)
        return res * (max(dr, dc) + _SQRT2_MINUS_1 * min(dr, dc))

    g_score = {(sr, sc): 0.0}
    came: dict[tuple[int, int], tuple[int, int]] = {}
    counter = 0
    heap = [(heuristic(sr, sc), 0, sr, sc)]
    closed: set[tuple[int, int]] = set()
    while heap:
        _, _, r, c = heapq.heappop(heap)
        if (r, c) in closed:
            continue
        if (r, c) == (gr, gc):
            cells = [(r, c)]
            while cells[-1] in came:
                cells.append(came[cells[-1]])
            cells.reverse()
            waypoints = np.array([occ.cell_center(cr, cc) for cr, cc in cells])
            return Path(waypoints, g_score[(gr, gc)], closed=False)
        closed.add((r, c))
        base = g_score[(r, c)]
        for dr, dc, step in _NEIGHBORS:
            nr, nc = r + dr, c + dc
            if not occ.in_grid(nr, nc) or blocked[nr, nc]:
                continue
            tentative = base + step * res
            if tentative < g_score.get((nr, nc), math.inf):
                g_score[(nr, nc)] = tentative
                came[(nr, nc)] = (r, c)
                counter += 1
                heapq.heappush(
                    heap, (tentative + heuristic(nr, nc), counter, nr, nc)
                )
    raise Unreachable(f"no path from cell ({sr}, {sc}) to ({gr}, {gc})")
