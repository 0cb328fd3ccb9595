"""
Discrete constant-velocity Kalman filtering.

The head filter tracks a 6-D state (3-D position, 3-D velocity) from position
measurements. The head-pose angle runs through a 1-D instance of the same
model with wrapped innovations.
"""
from dataclasses import dataclass

import numpy as np

from headcast.src.components.geometry import Vec3, wrap_angle
from headcast.src.config_params.config_params import KalmanConfig
from headcast.src.utils.exception import HeadcastException

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class StateEstimate:
    """Mean x_hat = [position, velocity] and covariance P."""
    x_hat: np.ndarray
    P: np.ndarray

    @property
    def dim(self) -> int:
        return self.x_hat.shape[0] // 2

    @property
    def position(self) -> np.ndarray:
        return self.x_hat[:self.dim]

    @property
    def velocity(self) -> np.ndarray:
        return self.x_hat[self.dim:]


@dataclass(frozen=True)
class CvModel:
    """F, H, Q and Rm of a constant-velocity model in `dim` spatial dimensions."""
    dt: float
    F: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    Rm: np.ndarray

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @classmethod
    def build(cls, dt: float, q: float, r: float, dim: int) -> "CvModel":
        eye = np.eye(dim)
        zeros = np.zeros((dim, dim))
        F = np.block([[eye, dt * eye], [zeros, eye]])
        H = np.hstack([eye, zeros])
        # discretised white-noise acceleration
        Q = q * np.block([
            [dt ** 4 / 4.0 * eye, dt ** 3 / 2.0 * eye],
            [dt ** 3 / 2.0 * eye, dt ** 2 * eye],
        ])
        Rm = r ** 2 * eye
        return cls(dt=dt, F=F, H=H, Q=Q, Rm=Rm)

    @classmethod
    def from_config(cls, cfg: KalmanConfig) -> "CvModel":
        return cls.build(cfg.dt, cfg.q_accel, cfg.r_pos, dim=3)

    @classmethod
    def angle_from_config(cls, cfg: KalmanConfig) -> "CvModel":
        return cls.build(cfg.dt, cfg.q_angle, cfg.r_angle, dim=1)


def init_state(first_obs: Vec3, cfg: KalmanConfig) -> StateEstimate:
    """Position at the first observation, zero velocity, diagonal covariance."""
    x_hat = np.concatenate([first_obs.to_array(), np.zeros(3)])
    P = np.diag([cfg.r_pos ** 2] * 3 + [cfg.v_init ** 2] * 3)
    return StateEstimate(x_hat=x_hat, P=P)


def init_angle_state(theta: float, cfg: KalmanConfig) -> StateEstimate:
    x_hat = np.array([wrap_angle(theta), 0.0])
    P = np.diag([cfg.r_angle ** 2, cfg.angle_rate_init ** 2])
    return StateEstimate(x_hat=x_hat, P=P)


def predict_step(s: StateEstimate, model: CvModel) -> StateEstimate:
    """x' = F x, P' = F P F^T + Q."""
    x_hat = model.F @ s.x_hat
    P = model.F @ s.P @ model.F.T + model.Q
    return StateEstimate(x_hat=x_hat, P=0.5 * (P + P.T))


def _correct(s: StateEstimate, innovation: np.ndarray, model: CvModel) -> StateEstimate:
    H = model.H
    S = H @ s.P @ H.T + model.Rm
    S = 0.5 * (S + S.T)
    eigenvalues = np.linalg.eigvalsh(S)
    if eigenvalues[0] <= 0 or eigenvalues[-1] / eigenvalues[0] > CONDITION_LIMIT:
        raise HeadcastException(
            error=np.linalg.LinAlgError("Innovation covariance is numerically singular."),
            error_type="NumericDegeneracy",
            context={"eigenvalues": eigenvalues.tolist()},
        )
    # K = P H^T S^-1, with S symmetric
    K = np.linalg.solve(S, H @ s.P).T
    x_hat = s.x_hat + K @ innovation
    P = (np.eye(s.x_hat.shape[0]) - K @ H) @ s.P
    return StateEstimate(x_hat=x_hat, P=0.5 * (P + P.T))


def update_step(s: StateEstimate, z: Vec3, model: CvModel) -> StateEstimate:
    """
    Standard Kalman measurement update with a position observation.

    Raises:
        HeadcastException: NumericDegeneracy when H P H^T + Rm is ill-conditioned (> 1e12).
    """
    return _correct(s, z.to_array() - model.H @ s.x_hat, model)


def update_angle_step(s: StateEstimate, theta: float, model: CvModel) -> StateEstimate:
    """Angle update: the innovation and the filtered angle are wrapped to (-pi, pi]."""
    innovation = np.array([wrap_angle(theta - s.x_hat[0])])
    corrected = _correct(s, innovation, model)
    x_hat = corrected.x_hat.copy()
    x_hat[0] = wrap_angle(x_hat[0])
    return StateEstimate(x_hat=x_hat, P=corrected.P)


def predict_angle_step(s: StateEstimate, model: CvModel) -> StateEstimate:
    predicted = predict_step(s, model)
    x_hat = predicted.x_hat.copy()
    x_hat[0] = wrap_angle(x_hat[0])
    return StateEstimate(x_hat=x_hat, P=predicted.P)


def baseline_predict_n(s: StateEstimate, N: int, model: CvModel) -> Vec3:
    """
    Position block of F^N x_hat. For the constant-velocity model this is p + N*(dt*v).
    """
    if N < 1:
        raise HeadcastException(
            error=ValueError("N must be >= 1."),
            error_type="InvalidArgument",
            context={"N": N},
        )
    return Vec3.from_array(s.position + N * (model.dt * s.velocity))
