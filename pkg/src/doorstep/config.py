"""Harness configuration: defaults, the key-value config file format, and
CLI-style overrides.

Config files are plain text, one `key = value` per line, `#` comments allowed.
Keys match the SimConfig field names; booleans accept true/false/yes/no/1/0.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

# 14 open / 4 recessed / 2 enclosed across the default 20-house corpus.
DEFAULT_VISIBILITY_PATTERN = (
    "open,open,open,recessed,open,open,enclosed,open,open,recessed,"
    "open,open,open,recessed,open,open,enclosed,open,recessed,open"
)


@dataclass
class SimConfig:
    # Corpus
    master_seed: int = 20260809
    corpus_size: int = 20
    yard_targets: bool = True
    visibility_pattern: str = DEFAULT_VISIBILITY_PATTERN
    # Descent
    clearance_m: float = 2.5
    hover_height_m: float = 2.0
    capture_alt_min_m: float = 20.0
    capture_alt_max_m: float = 30.0
    # Motion
    control_dt_s: float = 0.1
    max_speed_mps: float = 0.5
    max_yaw_rate_rps: float = math.pi / 2
    # Sensors
    camera_px: int = 96
    detector_fov_rad: float = math.pi / 8
    detector_range_m: float = 10.0
    detector_miss_prob: float = 0.0
    scan_radius_m: float = 8.0
    scan_period_s: float = 0.5
    # Navigation
    inflation_m: float = 0.5
    ring_standoff_m: float = 1.5
    yaw_sweep_half_range_rad: float = math.pi / 4
    yaw_sweep_increment_rad: float = math.pi / 16
    # Baseline
    frontier_radius_cap_m: float = 25.0
    frontier_time_cap_s: float = 180.0
    exploration_cell_m: float = 0.5
    # Caps
    proposed_time_cap_s: float = 300.0
    # Segmentation noise (off by default so acceptance runs are reproducible)
    noise_enabled: bool = False
    noise_strength: float = 1.0
    noise_blob_px: int = 8
    # World generation
    neighbor_count: int = 1
    obstacle_density: float = 0.3
    gps_offset_sigma_m: float = 1.0
    house_width_min_m: float = 8.0
    house_width_max_m: float = 14.0
    house_depth_min_m: float = 7.0
    house_depth_max_m: float = 12.0

    def to_dict(self) -> dict:
        return asdict(self)

    def visibility_for(self, index: int) -> str:
        pattern = [p.strip() for p in self.visibility_pattern.split(",") if p.strip()]
        if not pattern:
            raise ValueError("visibility pattern is empty")
        return pattern[index % len(pattern)]


_BOOL_WORDS = {"true": True, "yes": True, "1": True, "on": True,
               "false": False, "no": False, "0": False, "off": False}


def _coerce(name: str, kind: type, raw) -> object:
    if kind is bool:
        if isinstance(raw, bool):
            return raw
        word = str(raw).strip().lower()
        if word not in _BOOL_WORDS:
            raise ValueError(f"config key {name!r}: not a boolean: {raw!r}")
        return _BOOL_WORDS[word]
    if kind is int:
        return int(str(raw).strip(), 0)
    if kind is float:
        return float(raw)
    return str(raw).strip()


def apply_overrides(config: SimConfig, overrides: dict) -> SimConfig:
    """New config with the given key/value overrides applied (values may be
    strings, as read from a file or CLI)."""
    known = {f.name: f.type for f in fields(SimConfig)}
    kinds = {"int": int, "float": float, "bool": bool, "str": str}
    values = config.to_dict()
    for key, raw in overrides.items():
        if key not in known:
            raise KeyError(f"unknown config key: {key!r}")
        values[key] = _coerce(key, kinds[known[key]], raw)
    return SimConfig(**values)


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> SimConfig:
    """Defaults, then file values, then explicit overrides."""
    cfg = SimConfig()
    file_values: dict = {}
    if path is not None:
        text = Path(path).read_text()
        for lineno, line in enumerate(text.splitlines(), 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = body.split("=", 1)
            file_values[key.strip()] = value.strip()
        cfg = apply_overrides(cfg, file_values)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg
