import math
from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Tuple

from headcast.src.constants import (
    DEFAULT_ALPHA,
    DEFAULT_FPS,
    DEFAULT_HEAD_LEAD_S,
    DEFAULT_MAX_DEPTH_M,
    DEFAULT_MIN_DEPTH_M,
    DEFAULT_N_STEPS,
    ROUTE_IDS,
)
from headcast.src.utils.exception import configuration_error

OBJECTIVES = ("frame_sum", "track_mean_sum")
COMMANDS = ("simulate", "predict", "tune", "evaluate", "loso")


def _require(condition: bool, message: str, **context: Any) -> None:
    if not condition:
        raise configuration_error(message, **context)


def _finite(*values: float) -> bool:
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class KalmanConfig:
    dt: float = 1.0 / DEFAULT_FPS
    q_accel: float = 2.0
    r_pos: float = 0.02
    v_init: float = 2.0
    q_angle: float = 2.0
    r_angle: float = 0.05
    angle_rate_init: float = 2.0
    gap_reset_s: float = 1.0

    def __post_init__(self):
        _require(_finite(self.dt, self.q_accel, self.r_pos), "Kalman parameters must be finite.")
        _require(self.dt > 0, "dt must be > 0.", dt=self.dt)
        _require(self.q_accel > 0, "q_accel must be > 0.", q_accel=self.q_accel)
        _require(self.r_pos > 0, "r_pos must be > 0.", r_pos=self.r_pos)
        _require(self.v_init > 0, "v_init must be > 0.", v_init=self.v_init)
        _require(self.q_angle > 0 and self.r_angle > 0, "angle filter noise must be > 0.")
        _require(self.angle_rate_init > 0, "angle_rate_init must be > 0.")
        _require(self.gap_reset_s > 0, "gap_reset_s must be > 0.", gap_reset_s=self.gap_reset_s)


@dataclass(frozen=True)
class PredictorConfig:
    w: float = 1.0
    n_steps: int = DEFAULT_N_STEPS
    w_max: float = 1.0

    def __post_init__(self):
        _require(_finite(self.w, self.w_max), "w and w_max must be finite.")
        _require(self.w_max >= 0, "w_max must be >= 0.", w_max=self.w_max)
        _require(0 <= self.w <= self.w_max, "w must lie in [0, w_max].", w=self.w, w_max=self.w_max)
        _require(isinstance(self.n_steps, int) and self.n_steps >= 1, "n_steps must be an integer >= 1.",
                 n_steps=self.n_steps)


@dataclass(frozen=True)
class OperatingRange:
    min_depth: float = DEFAULT_MIN_DEPTH_M
    max_depth: float = DEFAULT_MAX_DEPTH_M

    def __post_init__(self):
        _require(_finite(self.min_depth, self.max_depth), "Depth bounds must be finite.")
        _require(0 < self.min_depth < self.max_depth, "Operating range needs 0 < min_depth < max_depth.",
                 min_depth=self.min_depth, max_depth=self.max_depth)


@dataclass(frozen=True)
class SimConfig:
    speed: float = 1.2
    head_lead_s: float = DEFAULT_HEAD_LEAD_S
    head_overshoot: float = 0.0
    noise_pos: float = 0.02
    noise_yaw: float = 0.05
    fps: float = DEFAULT_FPS
    duration_s: float = 5.0
    seed: int = 7
    speed_range: Tuple[float, float] = (1.0, 1.4)

    def __post_init__(self):
        _require(_finite(self.speed, self.head_lead_s, self.noise_pos, self.noise_yaw, self.fps, self.duration_s),
                 "Simulation parameters must be finite.")
        _require(self.speed > 0, "speed must be > 0.", speed=self.speed)
        _require(self.fps > 0, "fps must be > 0.", fps=self.fps)
        _require(self.duration_s > 0, "duration_s must be > 0.", duration_s=self.duration_s)
        _require(self.noise_pos >= 0 and self.noise_yaw >= 0, "noise stds must be >= 0.")
        _require(self.head_lead_s >= 0, "head_lead_s must be >= 0.", head_lead_s=self.head_lead_s)
        _require(isinstance(self.seed, int) and self.seed >= 0, "seed must be a non-negative integer.", seed=self.seed)
        low, high = self.speed_range
        _require(0 < low <= high, "speed_range must satisfy 0 < low <= high.", speed_range=self.speed_range)


@dataclass(frozen=True)
class RouteSpec:
    route_id: str
    kind: str
    path_length: float
    start: Tuple[float, float] = (0.0, 2.0)
    heading: float = 0.0
    turn_angle: float = 0.0
    turn_start_s: float = 0.0
    turn_duration_s: float = 0.0

    def __post_init__(self):
        _require(self.route_id in ROUTE_IDS, f"route_id must be one of {ROUTE_IDS}.", route_id=self.route_id)
        _require(self.kind in ("straight", "turn"), "kind must be 'straight' or 'turn'.", kind=self.kind)
        _require(self.path_length > 0, "path_length must be > 0.", path_length=self.path_length)
        if self.kind == "turn":
            _require(self.turn_duration_s > 0, "turn_duration_s must be > 0 for turns.",
                     route_id=self.route_id)
            _require(self.turn_start_s >= 0, "turn_start_s must be >= 0.", route_id=self.route_id)


@dataclass(frozen=True)
class EvalConfig:
    w_step: float = 0.05
    alpha: float = DEFAULT_ALPHA
    objective: str = "frame_sum"

    def __post_init__(self):
        _require(self.w_step > 0, "w_step must be > 0.", w_step=self.w_step)
        _require(0 < self.alpha < 1, "alpha must lie in (0, 1).", alpha=self.alpha)
        _require(self.objective in OBJECTIVES, f"objective must be one of {OBJECTIVES}.", objective=self.objective)

    def w_grid(self, w_max: float) -> List[float]:
        """Grid 0, step, 2*step, ... up to and including w_max."""
        count = int(math.floor(w_max / self.w_step + 1e-9))
        grid = [round(i * self.w_step, 12) for i in range(count + 1)]
        if grid[-1] < w_max - 1e-12:
            grid.append(w_max)
        return grid


@dataclass(frozen=True)
class OutputConfig:
    dataset_dir: str = "dataset"
    reports_dir: str = "reports"
    report_name: str = "report.json"
    frame_errors_name: str = "frame_errors.csv"

    def __post_init__(self):
        _require(all([self.dataset_dir, self.reports_dir, self.report_name, self.frame_errors_name]),
                 "Output names must be non-empty.")


@dataclass
class RunConfig:
    command: str
    kalman: KalmanConfig
    predictor: PredictorConfig
    operating_range: OperatingRange
    simulation: SimConfig
    evaluation: EvalConfig
    fps: float = DEFAULT_FPS
    n_subjects: int = 14
    routes: List[str] = field(default_factory=list)
    input_path: Optional[str] = None
    data_dir: Optional[str] = None
    out: Optional[str] = None
    stream: bool = False
    output: OutputConfig = field(default_factory=OutputConfig)

    def __post_init__(self):
        _require(self.command in COMMANDS, f"command must be one of {COMMANDS}.", command=self.command)
        _require(self.fps > 0, "fps must be > 0.", fps=self.fps)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def echo(self) -> Dict[str, Any]:
        """Effective configuration echoed into reports; paths are left out so reruns compare equal."""
        echoed = self.to_dict()
        for key in ("input_path", "data_dir", "out"):
            echoed.pop(key)
        return echoed
