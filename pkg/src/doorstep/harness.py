"""Batch experiment harness: seeded trials for the proposed pipeline and the
frontier baseline, corpus-level statistics, JSON-lines/CSV/JSON reports, and
SVG trajectory renderings."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path as FsPath

import numpy as np

from . import baseline as baseline_mod
from . import navigation
from .camera import default_camera
from .config import SimConfig
from .descent import (
    DeliveryTarget,
    DescentStatus,
    SimulationTimeout,
    run_descent,
)
from .navigation import DeliveryStatus
from .occupancy import NoRingExists, build_occupancy, extract_footprint_ring
from .semantics import LabelNoiseModel, shadow_noise_model
from .simworld import (
    DoorVisibility,
    Drone,
    DronePose,
    GeneratorParams,
    WorldModel,
    generate_world,
)

TRIAL_SCHEMA = "doorstep-trial/1"
REPORT_SCHEMA = "doorstep-report/1"

RATIO_NOTE = (
    "speedup_ratio is frontier mean elapsed divided by proposed mean elapsed; "
    "a ratio of 1.61 can equivalently be phrased as '61% faster' or, loosely, "
    "as a '161%' comparison of the two times."
)


class Method(str, Enum):
    PROPOSED = "proposed"
    FRONTIER = "frontier"


class TrialStatus(str, Enum):
    DELIVERED = "delivered"
    NO_SAFE_SPOT = "no_safe_spot"
    WRONG_ROOF = "wrong_roof"
    NO_ROOF_VISIBLE = "no_roof_visible"
    NO_FRONT_PAVED_AREA = "no_front_paved_area"
    DOOR_NOT_FOUND = "door_not_found"
    TIMEOUT = "timeout"
    STUCK = "stuck"


_DESCENT_TO_TRIAL = {
    DescentStatus.NO_SAFE_SPOT: TrialStatus.NO_SAFE_SPOT,
    DescentStatus.WRONG_ROOF: TrialStatus.WRONG_ROOF,
    DescentStatus.NO_ROOF_VISIBLE: TrialStatus.NO_ROOF_VISIBLE,
    DescentStatus.NO_FRONT_PAVED_AREA: TrialStatus.NO_FRONT_PAVED_AREA,
}

_DELIVERY_TO_TRIAL = {
    DeliveryStatus.DELIVERED: TrialStatus.DELIVERED,
    DeliveryStatus.DOOR_NOT_FOUND: TrialStatus.DOOR_NOT_FOUND,
    DeliveryStatus.TIMEOUT: TrialStatus.TIMEOUT,
    DeliveryStatus.STUCK: TrialStatus.STUCK,
}


@dataclass
class TrialResult:
    seed: int
    method: Method
    target: DeliveryTarget
    visibility: str
    status: TrialStatus
    elapsed: float
    path_length: float
    descent_point: tuple[float, float] | None
    trajectory: list = field(default_factory=list)

    def to_record(self, with_trajectory: bool = True) -> dict:
        rec = {
            "schema": TRIAL_SCHEMA,
            "seed": self.seed,
            "method": self.method.value,
            "target": self.target.value,
            "visibility": self.visibility,
            "status": self.status.value,
            "elapsed_s": self.elapsed,
            "path_length_m": self.path_length,
            "descent_point": list(self.descent_point) if self.descent_point else None,
        }
        if with_trajectory:
            rec["trajectory"] = [list(p) for p in self.trajectory]
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "TrialResult":
        return cls(
            seed=int(rec["seed"]),
            method=Method(rec["method"]),
            target=DeliveryTarget(rec["target"]),
            visibility=rec.get("visibility", "open"),
            status=TrialStatus(rec["status"]),
            elapsed=float(rec["elapsed_s"]),
            path_length=float(rec["path_length_m"]),
            descent_point=(
                tuple(rec["descent_point"]) if rec.get("descent_point") else None
            ),
            trajectory=[tuple(p) for p in rec.get("trajectory", [])],
        )


def visibility_for_seed(cfg: SimConfig, seed: int) -> str:
    return cfg.visibility_for((seed - cfg.master_seed) % cfg.corpus_size)


def generator_params(cfg: SimConfig, seed: int, visibility: str | None = None) -> GeneratorParams:
    vis = visibility or visibility_for_seed(cfg, seed)
    return GeneratorParams(
        seed=seed,
        house_width_range=(cfg.house_width_min_m, cfg.house_width_max_m),
        house_depth_range=(cfg.house_depth_min_m, cfg.house_depth_max_m),
        obstacle_density=cfg.obstacle_density,
        door_visibility=DoorVisibility(vis),
        neighbor_count=cfg.neighbor_count,
        gps_offset_sigma=cfg.gps_offset_sigma_m,
    )


def trajectory_length(trajectory) -> float:
    if len(trajectory) < 2:
        return 0.0
    pts = np.asarray([(p[1], p[2], p[3]) for p in trajectory])
    seg = np.diff(pts, axis=0)
    return float(np.sum(np.sqrt((seg**2).sum(axis=1))))


def _noise_model(cfg: SimConfig, seed: int) -> LabelNoiseModel | None:
    if not cfg.noise_enabled:
        return None
    return shadow_noise_model(
        cfg.noise_strength, seed=(seed * 1000003 + 7) % (2**63), blob_size=cfg.noise_blob_px
    )


def run_trial(
    seed: int,
    method: Method | str,
    target: DeliveryTarget | str,
    cfg: SimConfig | None = None,
    world: WorldModel | None = None,
    visibility: str | None = None,
) -> TrialResult:
    """One end-to-end seeded delivery attempt. Deterministic for a given
    (seed, method, target, config); pipeline failures come back as statuses,
    never exceptions."""
    cfg = cfg or SimConfig()
    method = Method(method)
    target = DeliveryTarget(target)
    if method is Method.FRONTIER and target is not DeliveryTarget.FRONT_DOOR:
        raise ValueError("the frontier baseline only runs front-door trials")
    vis = visibility or visibility_for_seed(cfg, seed)
    if world is None:
        world = generate_world(generator_params(cfg, seed, vis))
    cam = default_camera(cfg.camera_px)
    capture_alt = float(
        np.random.default_rng([seed, 11]).uniform(
            cfg.capture_alt_min_m, cfg.capture_alt_max_m
        )
    )
    drone = Drone(
        DronePose(world.start_xy[0], world.start_xy[1], capture_alt, 0.0),
        dt=cfg.control_dt_s,
        max_speed=cfg.max_speed_mps,
        max_yaw_rate=cfg.max_yaw_rate_rps,
    )

    def result(status: TrialStatus, descent_point=None) -> TrialResult:
        return TrialResult(
            seed=seed,
            method=method,
            target=target,
            visibility=vis,
            status=status,
            elapsed=drone.time,
            path_length=trajectory_length(drone.trajectory),
            descent_point=descent_point,
            trajectory=list(drone.trajectory),
        )

    if method is Method.PROPOSED:
        noise = _noise_model(cfg, seed)
        try:
            outcome = run_descent(drone, world, target, cam, cfg, noise)
        except SimulationTimeout:
            return result(TrialStatus.TIMEOUT)
        if outcome.status is not DescentStatus.SUCCESS:
            return result(_DESCENT_TO_TRIAL[outcome.status])
        if target is not DeliveryTarget.FRONT_DOOR:
            return result(TrialStatus.DELIVERED, outcome.descent_point)
        occ = build_occupancy(
            outcome.capture_grid,
            cam,
            outcome.capture_pose.altitude,
            capture_xy=(outcome.capture_pose.x, outcome.capture_pose.y),
        )
        try:
            ring = extract_footprint_ring(
                occ,
                outcome.roof_segment,
                cfg.ring_standoff_m,
                start_xy=outcome.descent_point,
                inflation=cfg.inflation_m,
            )
        except NoRingExists:
            return result(TrialStatus.STUCK, outcome.descent_point)
        rng = np.random.default_rng([seed, 31])
        delivery = navigation.deliver_to_front_door(drone, world, occ, ring, cfg, rng)
        tr = result(_DELIVERY_TO_TRIAL[delivery.status], outcome.descent_point)
        tr.elapsed = delivery.elapsed
        return tr

    # Frontier baseline: descend at a seeded random open spot in front of the
    # house, then explore. The simulated clock (and the 180 s cap) covers the
    # whole attempt from the top of the house.
    rng = np.random.default_rng([seed, 23])
    try:
        spot = baseline_mod.pick_random_open_spot(world, rng, cfg.clearance_m)
    except ValueError:
        return result(TrialStatus.NO_SAFE_SPOT)
    cap_ticks = int(round(cfg.frontier_time_cap_s * 1000)) // drone.dt_ms

    def timed_out() -> bool:
        return drone.ticks >= cap_ticks

    while not drone.step_toward(spot, cfg.max_speed_mps):
        if timed_out():
            return TrialResult(
                seed, method, target, vis, TrialStatus.TIMEOUT,
                cfg.frontier_time_cap_s, trajectory_length(drone.trajectory),
                None, list(drone.trajectory),
            )
    while not drone.step_vertical(cfg.hover_height_m, cfg.max_speed_mps):
        if timed_out():
            return TrialResult(
                seed, method, target, vis, TrialStatus.TIMEOUT,
                cfg.frontier_time_cap_s, trajectory_length(drone.trajectory),
                None, list(drone.trajectory),
            )
    outcome = baseline_mod.frontier_explore_to_door(
        drone,
        world,
        radius_cap=cfg.frontier_radius_cap_m,
        time_cap=cfg.frontier_time_cap_s,
        cfg=cfg,
        rng=np.random.default_rng([seed, 29]),
        descent_xy=spot,
    )
    tr = result(_DELIVERY_TO_TRIAL[outcome.status], tuple(spot))
    tr.elapsed = outcome.elapsed
    return tr


# ---------------------------------------------------------------------------
# Corpus runs and reports
# ---------------------------------------------------------------------------

YARD_TARGETS = (
    DeliveryTarget.FRONT_PAVED_AREA,
    DeliveryTarget.FRONT_YARD,
    DeliveryTarget.BACK_YARD,
)


def corpus_trial_plan(cfg: SimConfig) -> list[tuple[int, Method, DeliveryTarget]]:
    """Front-door trials for both methods on every seed, plus proposed-only
    yard trials when enabled."""
    plan = []
    for i in range(cfg.corpus_size):
        seed = cfg.master_seed + i
        plan.append((seed, Method.PROPOSED, DeliveryTarget.FRONT_DOOR))
        plan.append((seed, Method.FRONTIER, DeliveryTarget.FRONT_DOOR))
        if cfg.yard_targets:
            for target in YARD_TARGETS:
                plan.append((seed, Method.PROPOSED, target))
    return plan


def run_corpus(cfg: SimConfig | None = None, out_dir: str | None = None):
    """Run the whole trial plan and aggregate the report; optionally write
    trials.jsonl, report.json and report.csv under out_dir. Returns
    (report_dict, trials)."""
    cfg = cfg or SimConfig()
    worlds: dict[int, WorldModel] = {}
    trials: list[TrialResult] = []
    for seed, method, target in corpus_trial_plan(cfg):
        if seed not in worlds:
            worlds[seed] = generate_world(generator_params(cfg, seed))
        trials.append(run_trial(seed, method, target, cfg, world=worlds[seed]))
    report = build_report(trials, cfg)
    if out_dir is not None:
        write_outputs(report, trials, out_dir)
    return report, trials


def _method_stats(rows: list[TrialResult]) -> dict:
    elapsed = np.array([t.elapsed for t in rows], dtype=float)
    delivered = sum(1 for t in rows if t.status is TrialStatus.DELIVERED)
    return {
        "count": len(rows),
        "delivered": delivered,
        "success_rate": delivered / len(rows) if rows else 0.0,
        "mean_elapsed_s": float(elapsed.mean()) if len(elapsed) else 0.0,
        "std_elapsed_s": float(elapsed.std()) if len(elapsed) else 0.0,
    }


def build_report(trials: list[TrialResult], cfg: SimConfig | None = None) -> dict:
    """Aggregate statistics; the method comparison covers front-door trials
    only (yard deliveries have no meaningful method difference). Failed trials
    contribute their elapsed time, with timeouts capped at the time cap."""
    front = [t for t in trials if t.target is DeliveryTarget.FRONT_DOOR]
    methods = {}
    for method in (Method.PROPOSED, Method.FRONTIER):
        rows = [t for t in front if t.method is method]
        if rows:
            methods[method.value] = _method_stats(rows)
    ratio = None
    if "proposed" in methods and "frontier" in methods:
        p = methods["proposed"]["mean_elapsed_s"]
        f = methods["frontier"]["mean_elapsed_s"]
        if p > 0:
            ratio = f / p
    return {
        "schema": REPORT_SCHEMA,
        "config": cfg.to_dict() if cfg else None,
        "methods": methods,
        "speedup_ratio": ratio,
        "rows": [t.to_record(with_trajectory=False) for t in trials],
        "notes": RATIO_NOTE,
    }


CSV_FIELDS = [
    "seed",
    "method",
    "target",
    "visibility",
    "status",
    "elapsed_s",
    "path_length_m",
    "descent_x",
    "descent_y",
]


def report_csv_text(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for row in report["rows"]:
        dp = row.get("descent_point")
        writer.writerow(
            [
                row["seed"],
                row["method"],
                row["target"],
                row["visibility"],
                row["status"],
                repr(row["elapsed_s"]),
                repr(row["path_length_m"]),
                repr(dp[0]) if dp else "",
                repr(dp[1]) if dp else "",
            ]
        )
    return buf.getvalue()


def write_outputs(report: dict, trials: list[TrialResult], out_dir: str) -> dict:
    """Write trials.jsonl, report.json, report.csv; returns the paths."""
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trials": out / "trials.jsonl",
        "report_json": out / "report.json",
        "report_csv": out / "report.csv",
    }
    with open(paths["trials"], "w") as fh:
        for t in trials:
            fh.write(json.dumps(t.to_record()) + "\n")
    with open(paths["report_json"], "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    with open(paths["report_csv"], "w") as fh:
        fh.write(report_csv_text(report))
    return {k: str(v) for k, v in paths.items()}


def load_trials(path: str) -> list[TrialResult]:
    trials = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                trials.append(TrialResult.from_record(json.loads(line)))
    return trials


# ---------------------------------------------------------------------------
# SVG rendering
# ---------------------------------------------------------------------------

_SVG_COLORS = {
    "roof": "#8b3a3a",
    "paved_area": "#b9b9b9",
    "grass": "#8fd16f",
    "vegetation": "#4a7d3a",
    "fence": "#8a6d4a",
    "car": "#4a6fd1",
    "tree": "#2e6b3e",
    "unknown": "#f2f2f2",
}


def _star_points(cx: float, cy: float, r: float) -> str:
    pts = []
    for i in range(10):
        rad = r if i % 2 == 0 else r * 0.4
        ang = -math.pi / 2 + i * math.pi / 5
        pts.append(f"{cx + rad * math.cos(ang):.2f},{cy + rad * math.sin(ang):.2f}")
    return " ".join(pts)


def svg_trajectory(trial: TrialResult | dict, world: WorldModel) -> str:
    """Scalable rendering of one trial: color-coded world regions, the
    trajectory polyline with time-sampled dots (dots pile up where the drone
    moves vertically), the descent-point marker, and a star on the target."""
    rec = trial.to_record() if isinstance(trial, TrialResult) else trial
    traj = rec.get("trajectory") or []
    if not traj:
        raise ValueError("trial has no trajectory to render")
    bw, bh = world.bounds
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {bw} {bh}" '
        f'width="720" height="720">',
        f'<rect x="0" y="0" width="{bw}" height="{bh}" fill="#ffffff"/>',
    ]
    for layer in world.layers:
        name = layer.label.name.lower()
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in layer.polygon.vertices)
        parts.append(
            f'<polygon points="{pts}" fill="{_SVG_COLORS[name]}" stroke="none"/>'
        )
    pts = " ".join(f"{p[1]:.3f},{p[2]:.3f}" for p in traj)
    parts.append(
        f'<polyline points="{pts}" fill="none" stroke="#800080" '
        f'stroke-width="0.25" stroke-opacity="0.9"/>'
    )
    stride = max(1, len(traj) // 160)
    for p in traj[::stride]:
        parts.append(
            f'<circle cx="{p[1]:.3f}" cy="{p[2]:.3f}" r="0.22" '
            f'fill="#800080" fill-opacity="0.55"/>'
        )
    dp = rec.get("descent_point")
    if dp:
        parts.append(
            f'<circle cx="{dp[0]:.3f}" cy="{dp[1]:.3f}" r="0.6" fill="#ff8c00" '
            f'stroke="#7a4400" stroke-width="0.1"/>'
        )
    if rec["target"] == DeliveryTarget.FRONT_DOOR.value:
        tx, ty = world.door.center
    elif dp:
        tx, ty = dp
    else:
        tx, ty = traj[-1][1], traj[-1][2]
    parts.append(
        f'<polygon points="{_star_points(tx, ty, 1.1)}" fill="#ffd400" '
        f'stroke="#8a6d00" stroke-width="0.12"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_trajectory_svg(trial: TrialResult | dict, world: WorldModel, path: str) -> str:
    """Render the trial to an SVG file; errors out (writing nothing) when the
    trial has no trajectory."""
    text = svg_trajectory(trial, world)
    with open(path, "w") as fh:
        fh.write(text)
    return path
