"""Semantic aerial rasters: class taxonomy, connected components, front/back
grass categorization, blob-structured label noise, and the ASCII grid format."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .geometry import normalize_angles


class ClassLabel(IntEnum):
    ROOF = 0
    PAVED_AREA = 1
    GRASS = 2
    VEGETATION = 3
    FENCE = 4
    CAR = 5
    TREE = 6
    UNKNOWN = 7


# Classes the descent pipeline must stay clear of (the house itself is handled
# separately as ROOF).
OBSTACLE_LABELS = frozenset(
    {ClassLabel.VEGETATION, ClassLabel.FENCE, ClassLabel.CAR, ClassLabel.TREE}
)

LABEL_CODES = {
    ClassLabel.ROOF: "R",
    ClassLabel.PAVED_AREA: "P",
    ClassLabel.GRASS: "G",
    ClassLabel.VEGETATION: "V",
    ClassLabel.FENCE: "F",
    ClassLabel.CAR: "C",
    ClassLabel.TREE: "T",
    ClassLabel.UNKNOWN: "U",
}
CODE_LABELS = {v: k for k, v in LABEL_CODES.items()}


@dataclass
class SemanticGrid:
    """Per-pixel class raster from the downward camera. labels is row-major
    (height, width) uint8; resolution is meters per pixel. The drone sits at
    image coordinates (width/2, height/2) by construction."""

    labels: np.ndarray
    resolution: float

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.ndim != 2 or self.labels.size == 0:
            raise ValueError("labels must be a non-empty 2D raster")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def center_pixel(self) -> tuple[int, int]:
        return (self.width // 2, self.height // 2)


class FrontBack(IntEnum):
    NOT_GRASS = 0
    FRONT = 1
    BACK = 2


@dataclass
class FrontBackMask:
    """Ternary raster: every grass pixel of the source grid is FRONT or BACK,
    everything else NOT_GRASS."""

    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.uint8)


@dataclass
class Segment:
    """One 4-connected component of a single class."""

    label: ClassLabel
    cols: np.ndarray
    rows: np.ndarray
    centroid: tuple[float, float]  # (col, row), mean of member pixels
    touches_image_boundary: bool

    @property
    def area(self) -> int:
        return len(self.cols)

    def pixel_set(self) -> set[tuple[int, int]]:
        return set(zip(self.cols.tolist(), self.rows.tolist()))


_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def connected_components(grid: SemanticGrid, label: ClassLabel) -> list[Segment]:
    """Maximal 4-connected segments of one class, ordered by their first pixel
    in row-major scan order (top-left-most first). Empty list when absent."""
    mask = grid.labels == int(label)
    if not mask.any():
        return []
    labeled, count = ndimage.label(mask, structure=_FOUR_CONNECTED)
    flat = labeled.ravel()
    first_index = np.full(count + 1, flat.size, dtype=np.int64)
    hits = np.flatnonzero(flat)
    # First occurrence per component id in scan order.
    np.minimum.at(first_index, flat[hits], hits)
    order = np.argsort(first_index[1:], kind="stable")
    h, w = grid.labels.shape
    segments = []
    for comp in order + 1:
        rows, cols = np.nonzero(labeled == comp)
        touches = bool(
            rows.min() == 0 or cols.min() == 0 or rows.max() == h - 1 or cols.max() == w - 1
        )
        centroid = (float(cols.mean()), float(rows.mean()))
        segments.append(Segment(label, cols, rows, centroid, touches))
    return segments


def classify_grass_front_back(
    grid: SemanticGrid, roof_centroid, front_dir
) -> FrontBackMask:
    """Label every grass pixel front/back from the angle its offset from the
    roof centroid makes with the house front direction: front iff the wrapped
    angle lies in [-pi/2, pi/2]."""
    fx, fy = float(front_dir[0]), float(front_dir[1])
    if fx == 0.0 and fy == 0.0:
        raise ValueError("front direction must be non-zero")
    values = np.zeros(grid.labels.shape, dtype=np.uint8)
    rows, cols = np.nonzero(grid.labels == int(ClassLabel.GRASS))
    if len(rows) == 0:
        return FrontBackMask(values)
    dx = cols.astype(float) - float(roof_centroid[0])
    dy = rows.astype(float) - float(roof_centroid[1])
    theta = normalize_angles(np.arctan2(dy, dx) - math.atan2(fy, fx))
    front = (theta >= -math.pi / 2) & (theta <= math.pi / 2)
    values[rows, cols] = np.where(front, FrontBack.FRONT, FrontBack.BACK)
    return FrontBackMask(values)


@dataclass
class LabelNoiseModel:
    """Blob-structured misclassification model standing in for an imperfect
    segmentation network. flip_probability maps (true, observed) class pairs
    to the expected fraction of true-class pixels to corrupt; corruption grows
    contiguous blobs of roughly blob_size pixels (shadow-like patches)."""

    flip_probability: dict[tuple[ClassLabel, ClassLabel], float] = field(default_factory=dict)
    blob_size: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if self.blob_size < 1:
            raise ValueError("blob size must be >= 1")
        totals: dict[ClassLabel, float] = {}
        for (src, dst), p in self.flip_probability.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability out of range for {src}->{dst}")
            totals[src] = totals.get(src, 0.0) + p
        for src, total in totals.items():
            if total > 1.0 + 1e-12:
                raise ValueError(f"flip probabilities for {src} exceed 1")


def shadow_noise_model(strength: float, seed: int, blob_size: int = 8) -> LabelNoiseModel:
    """Canonical confusion pattern: shadowed roof read as paved area, trees
    and grass confused with each other, grass smudged into vegetation."""
    s = float(strength)
    return LabelNoiseModel(
        flip_probability={
            (ClassLabel.ROOF, ClassLabel.PAVED_AREA): 0.08 * s,
            (ClassLabel.TREE, ClassLabel.GRASS): 0.15 * s,
            (ClassLabel.GRASS, ClassLabel.TREE): 0.03 * s,
            (ClassLabel.GRASS, ClassLabel.VEGETATION): 0.04 * s,
        },
        blob_size=blob_size,
        seed=seed,
    )


_BLOB_STEPS = np.array([(-1, 0), (1, 0), (0, -1), (0, 1)])


def apply_label_noise(grid: SemanticGrid, model: LabelNoiseModel) -> SemanticGrid:
    """Seeded, reproducible corruption of a semantic grid. The same model and
    input always produce the identical output grid."""
    out = grid.labels.copy()
    rng = np.random.default_rng(model.seed)
    h, w = out.shape
    for (src, dst), prob in sorted(model.flip_probability.items()):
        if prob <= 0.0:
            continue
        src_rows, src_cols = np.nonzero(grid.labels == int(src))
        n_src = len(src_rows)
        if n_src == 0:
            continue
        target = int(rng.binomial(n_src, prob))
        flipped = 0
        budget = 4 * target  # guard against pathological fragmentation
        while flipped < target and budget > 0:
            start = int(rng.integers(n_src))
            r, c = int(src_rows[start]), int(src_cols[start])
            blob_goal = min(model.blob_size, target - flipped)
            frontier = [(r, c)]
            grown = 0
            while frontier and grown < blob_goal:
                idx = int(rng.integers(len(frontier)))
                r, c = frontier.pop(idx)
                if out[r, c] != int(src):
                    continue
                out[r, c] = int(dst)
                grown += 1
                for dr, dc in _BLOB_STEPS:
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < h and 0 <= nc < w and out[nr, nc] == int(src):
                        frontier.append((nr, nc))
            flipped += grown
            budget -= max(grown, 1)
    return SemanticGrid(out, grid.resolution)


def grid_to_text(grid: SemanticGrid) -> str:
    """Portable ASCII raster: header 'W H resolution', then one code row per
    line using R,P,G,V,F,C,T,U."""
    lines = [f"{grid.width} {grid.height} {grid.resolution!r}"]
    codes = np.array([LABEL_CODES[ClassLabel(i)] for i in range(8)])
    for row in codes[grid.labels]:
        lines.append("".join(row))
    return "\n".join(lines) + "\n"


def grid_from_text(text: str) -> SemanticGrid:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty grid text")
    parts = lines[0].split()
    if len(parts) != 3:
        raise ValueError("header must be 'W H resolution'")
    w, h, res = int(parts[0]), int(parts[1]), float(parts[2])
    if len(lines) != h + 1:
        raise ValueError(f"expected {h} raster rows, found {len(lines) - 1}")
    labels = np.empty((h, w), dtype=np.uint8)
    for r, line in enumerate(lines[1:]):
        if len(line) != w:
            raise ValueError(f"row {r} has {len(line)} codes, expected {w}")
        try:
            labels[r] = [int(CODE_LABELS[ch]) for ch in line]
        except KeyError as exc:
            raise ValueError(f"unknown class code {exc.args[0]!r} in row {r}") from None
    return SemanticGrid(labels, res)
