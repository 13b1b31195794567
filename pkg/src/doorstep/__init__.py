"""doorstep: a deterministic simulator for marker-free last-mile drone
delivery — semantic-grid descent-spot estimation, footprint-guided door
search, and a frontier-exploration baseline."""

__version__ = "0.1.0"

from .camera import CameraModel, backproject, default_camera, project
from .config import SimConfig, load_config
from .descent import (
    DeliveryTarget,
    DescentOutcome,
    DescentRegion,
    DescentStatus,
    run_descent,
)
from .harness import (
    Method,
    TrialResult,
    TrialStatus,
    build_report,
    emit_trajectory_svg,
    run_corpus,
    run_trial,
)
from .navigation import DeliveryOutcome, DeliveryStatus, deliver_to_front_door
from .occupancy import OccupancyGrid, Path, build_occupancy, extract_footprint_ring, plan_path
from .semantics import (
    ClassLabel,
    FrontBack,
    FrontBackMask,
    LabelNoiseModel,
    Segment,
    SemanticGrid,
    apply_label_noise,
    classify_grass_front_back,
    connected_components,
)
from .simworld import (
    Drone,
    DronePose,
    DoorVisibility,
    GeneratorParams,
    WorldModel,
    generate_world,
    render_aerial,
)

__all__ = [
    "CameraModel",
    "ClassLabel",
    "DeliveryOutcome",
    "DeliveryStatus",
    "DeliveryTarget",
    "DescentOutcome",
    "DescentRegion",
    "DescentStatus",
    "DoorVisibility",
    "Drone",
    "DronePose",
    "FrontBack",
    "FrontBackMask",
    "GeneratorParams",
    "LabelNoiseModel",
    "Method",
    "OccupancyGrid",
    "Path",
    "Segment",
    "SemanticGrid",
    "SimConfig",
    "TrialResult",
    "TrialStatus",
    "WorldModel",
    "apply_label_noise",
    "backproject",
    "build_occupancy",
    "build_report",
    "classify_grass_front_back",
    "connected_components",
    "default_camera",
    "deliver_to_front_door",
    "emit_trajectory_svg",
    "extract_footprint_ring",
    "generate_world",
    "load_config",
    "plan_path",
    "project",
    "render_aerial",
    "run_corpus",
    "run_descent",
    "run_trial",
]
