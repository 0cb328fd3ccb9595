"""
Head-pose-conditioned N-step head position prediction.

The one-step Kalman displacement is rotated by the filtered head-pose angle,
blended with the unrotated displacement by the weight w, and extrapolated
N steps in a straight line from the filtered position.
"""
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from headcast.src.components.dataset import Frame
from headcast.src.components.geometry import Vec3, YawAngle, relative_head_yaw, rotate_yaw_xyz
from headcast.src.components.kalman import (
    CvModel,
    StateEstimate,
    baseline_predict_n,
    init_angle_state,
    init_state,
    predict_angle_step,
    predict_step,
    update_angle_step,
    update_step,
)
from headcast.src.config_params.config_params import KalmanConfig, PredictorConfig
from headcast.src.utils.exception import HeadcastException, invalid_argument


@dataclass(frozen=True)
class PredictionTriple:
    """(a) filtered position at t, (b) baseline and (c) proposed predictions for t+N."""
    estimated: Vec3
    baseline: Vec3
    proposed: Vec3


@dataclass(frozen=True)
class FilterModels:
    """Models and settings shared by every frame of a stream."""
    position: CvModel
    angle: CvModel
    kalman: KalmanConfig

    @classmethod
    def from_config(cls, cfg: KalmanConfig) -> "FilterModels":
        return cls(position=CvModel.from_config(cfg), angle=CvModel.angle_from_config(cfg), kalman=cfg)


@dataclass(frozen=True)
class TrackerState:
    """Per-person filter state carried from one frame to the next."""
    position: Optional[StateEstimate] = None
    angle: Optional[StateEstimate] = None
    last_t: Optional[float] = None
    last_update_t: Optional[float] = None

    @property
    def initialised(self) -> bool:
        return self.position is not None


def steps_for_delay(delay_s: float, fps: float) -> int:
    """Horizon in frames covering a mechanical delay, at least one step."""
    if not (math.isfinite(delay_s) and delay_s > 0 and fps > 0):
        raise invalid_argument("delay_s and fps must be positive.", delay_s=delay_s, fps=fps)
    return max(1, int(round(delay_s * fps)))


def displacement_kalman(s: StateEstimate, model: CvModel) -> np.ndarray:
    """d_kalman = F x_hat - x_hat, evaluated as (F - I) x_hat."""
    return (model.F - np.eye(model.F.shape[0])) @ s.x_hat


def displacement_head(d_kalman: np.ndarray, theta: YawAngle) -> np.ndarray:
    """d_head = R d_kalman with the yaw rotation applied to both 3-D blocks."""
    return rotate_yaw_xyz(np.asarray(d_kalman, dtype=float).reshape(2, 3), theta).reshape(6)


def blend(d_kalman: np.ndarray, d_head: np.ndarray, w: float) -> np.ndarray:
    """d_p = (1 - w) d_kalman + w d_head."""
    return d_kalman + w * (d_head - d_kalman)


def _extrapolate(positions: np.ndarray, d_positions: np.ndarray, thetas, w: float, n_steps: int) -> np.ndarray:
    rotated = rotate_yaw_xyz(d_positions, thetas)
    return positions + n_steps * blend(d_positions, rotated, w)


def predict_n_steps(s: StateEstimate, theta: YawAngle, cfg: PredictorConfig, model: CvModel) -> Vec3:
    """Position block of x_hat + N d_p."""
    d_kalman = displacement_kalman(s, model)
    return Vec3.from_array(_extrapolate(s.position, d_kalman[:3], theta, cfg.w, cfg.n_steps))


def predict_n_steps_batch(x_hats: np.ndarray, thetas: np.ndarray, w: float, n_steps: int,
                          model: CvModel) -> np.ndarray:
    """
    Vectorised predict_n_steps over filtered states of shape (T, 6) and angles (T,).
    Agrees with the per-state result to rounding.
    """
    x_hats = np.asarray(x_hats, dtype=float).reshape(-1, 6)
    d_positions = model.dt * x_hats[:, 3:]
    return _extrapolate(x_hats[:, :3], d_positions, np.asarray(thetas, dtype=float), w, n_steps)


def baseline_predict_n_batch(x_hats: np.ndarray, n_steps: int, model: CvModel) -> np.ndarray:
    x_hats = np.asarray(x_hats, dtype=float).reshape(-1, 6)
    return x_hats[:, :3] + n_steps * (model.dt * x_hats[:, 3:])


def _observed_head_pose(frame: Frame) -> Optional[float]:
    if not frame.valid:
        return None
    try:
        return relative_head_yaw(frame.nose_q, frame.waist_q)
    except HeadcastException:
        return None


def _coast(tracker: TrackerState, ticks: int, models: FilterModels) -> Tuple[StateEstimate, StateEstimate]:
    position, angle = tracker.position, tracker.angle
    for _ in range(ticks):
        position = predict_step(position, models.position)
        angle = predict_angle_step(angle, models.angle)
    return position, angle


def _ticks_between(t0: float, t1: float, dt: float) -> int:
    return max(1, int(round((t1 - t0) / dt)))


def step_frame(tracker: TrackerState, frame: Frame, cfg: PredictorConfig,
               models: FilterModels) -> Tuple[Optional[PredictionTriple], TrackerState]:
    """
    Advances the head and head-pose filters by one observation.

    Invalid frames (or frames whose orientation is degenerate) are coasted with
    prediction-only steps and yield no triple; once more than gap_reset_s has
    passed since the last update they leave the filters untouched. A gap longer
    than gap_reset_s since the last update re-initialises both filters.

    Returns:
        Tuple[Optional[PredictionTriple], TrackerState]: The triple (a), (b), (c) and the new state.
    """
    theta_obs = _observed_head_pose(frame)
    if theta_obs is None:
        if not tracker.initialised:
            return None, tracker
        if frame.t - tracker.last_update_t > models.kalman.gap_reset_s:
            # the next valid frame re-initialises; coasting further would be discarded
            return None, replace(tracker, last_t=frame.t)
        ticks = _ticks_between(tracker.last_t, frame.t, models.position.dt)
        position, angle = _coast(tracker, ticks, models)
        return None, replace(tracker, position=position, angle=angle, last_t=frame.t)

    gap = None if tracker.last_update_t is None else frame.t - tracker.last_update_t
    if not tracker.initialised or gap > models.kalman.gap_reset_s:
        position = init_state(frame.nose_pos, models.kalman)
        angle = init_angle_state(theta_obs, models.kalman)
    else:
        ticks = _ticks_between(tracker.last_t, frame.t, models.position.dt)
        position, angle = _coast(tracker, ticks, models)
        position = update_step(position, frame.nose_pos, models.position)
        angle = update_angle_step(angle, theta_obs, models.angle)

    theta = float(angle.x_hat[0])
    triple = PredictionTriple(
        estimated=Vec3.from_array(position.position),
        baseline=baseline_predict_n(position, cfg.n_steps, models.position),
        proposed=predict_n_steps(position, theta, cfg, models.position),
    )
    return triple, TrackerState(position=position, angle=angle, last_t=frame.t, last_update_t=frame.t)
