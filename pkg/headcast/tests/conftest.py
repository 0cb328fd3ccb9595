import os
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, settings

from headcast.src.components.dataset import Frame, Track
from headcast.src.components.geometry import UnitQuaternion, Vec3
from headcast.src.components.headpose_predictor import FilterModels
from headcast.src.config_manager.config_manager import ConfigManager
from headcast.src.config_params.config_params import KalmanConfig, PredictorConfig, SimConfig

settings.register_profile("ci", max_examples=50, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.register_profile("dev", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "ci"))


@pytest.fixture(scope="session")
def config_manager():
    return ConfigManager()


@pytest.fixture(scope="session")
def routes(config_manager):
    """Packaged route table keyed by route id."""
    return {route.route_id: route for route in config_manager.get_routes()}


@pytest.fixture
def kalman_cfg():
    return KalmanConfig()


@pytest.fixture
def predictor_cfg():
    return PredictorConfig()


@pytest.fixture
def models(kalman_cfg):
    return FilterModels.from_config(kalman_cfg)


@pytest.fixture
def noiseless_sim():
    return SimConfig(noise_pos=0.0, noise_yaw=0.0)


@pytest.fixture
def quiet_yaw_sim():
    """Position noise only; the observed head pose is exactly zero on straight routes."""
    return replace(SimConfig(), noise_yaw=0.0)


def make_frame(t, nose=(0.0, -0.6, 3.0), head_yaw=0.0, body_yaw=0.0, valid=True):
    return Frame(
        t=t,
        nose_pos=Vec3(*nose),
        nose_q=UnitQuaternion.from_yaw(head_yaw),
        waist_pos=Vec3(nose[0], 0.0, nose[2]),
        waist_q=UnitQuaternion.from_yaw(body_yaw),
        valid=valid,
    )


def constant_velocity_track(velocity=(0.3, 0.0, 0.9), start=(0.0, -0.6, 1.0), count=150, fps=30.0,
                            subject_id="01", route_id="R1"):
    frames = []
    for k in range(count):
        t = k / fps
        nose = tuple(p + v * t for p, v in zip(start, velocity))
        frames.append(make_frame(t, nose=nose))
    return Track(subject_id=subject_id, route_id=route_id, frames=tuple(frames), fps=fps)
