import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from headcast.src.components.geometry import Vec3
from headcast.src.components.headpose_predictor import (
    FilterModels,
    TrackerState,
    baseline_predict_n_batch,
    blend,
    displacement_head,
    displacement_kalman,
    predict_n_steps,
    predict_n_steps_batch,
    step_frame,
    steps_for_delay,
)
from headcast.src.components.kalman import CvModel, StateEstimate, baseline_predict_n
from headcast.src.config_params.config_params import KalmanConfig, PredictorConfig
from headcast.src.utils.exception import HeadcastException
from headcast.tests.conftest import constant_velocity_track, make_frame

STATE = np.array([0.0, 0.0, 2.0, 0.3, 0.0, 0.9])


def _state(x_hat):
    return StateEstimate(x_hat=np.asarray(x_hat, dtype=float), P=np.eye(6))


def test_displacement_kalman_is_one_step_of_velocity(kalman_cfg):
    model = CvModel.from_config(kalman_cfg)
    d = displacement_kalman(_state(STATE), model)
    assert np.allclose(d[:3], [0.01, 0.0, 0.03], atol=1e-15)
    assert np.array_equal(d[3:], np.zeros(3)), "velocity block of F x - x is exactly zero"


def test_displacement_head_examples():
    d = np.array([0.0, 0.0, 0.03, 0.0, 0.0, 0.0])
    rotated = displacement_head(d, math.pi / 2)
    assert np.allclose(rotated, [0.03, 0.0, 0.0, 0.0, 0.0, 0.0], atol=1e-12)
    assert np.array_equal(displacement_head(d, 0.0), d)


def test_blend_examples():
    a = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    b = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    assert np.allclose(blend(a, b, 0.5), [0.5, 0.0, 0.5, 0.0, 0.0, 0.0])
    assert np.array_equal(blend(a, b, 0.0), a)
    assert np.array_equal(blend(a, b, 1.0), b)


def test_predict_n_steps_examples(kalman_cfg):
    model = CvModel.from_config(kalman_cfg)
    s = _state([0.0, 0.0, 2.0, 0.0, 0.0, 0.9])
    straight = predict_n_steps(s, math.pi / 2, PredictorConfig(w=1.0, n_steps=15), model)
    assert straight.x == pytest.approx(0.45, abs=1e-12)
    assert straight.y == 0.0
    assert straight.z == pytest.approx(2.0, abs=1e-12)
    half = predict_n_steps(s, math.pi / 2, PredictorConfig(w=0.5, n_steps=15), model)
    assert half.x == pytest.approx(0.225, abs=1e-12)
    assert half.z == pytest.approx(2.225, abs=1e-12)


def _random_states(rng, count):
    positions = rng.uniform([-3.0, -1.0, 0.5], [3.0, 0.0, 5.5], size=(count, 3))
    velocities = rng.normal(0.0, 1.0, size=(count, 3))
    return np.hstack([positions, velocities])


def test_zero_weight_reduces_to_the_baseline(kalman_cfg):
    model = CvModel.from_config(kalman_cfg)
    rng = np.random.default_rng(1)
    states = _random_states(rng, 1000)
    thetas = rng.uniform(-math.pi, math.pi, size=1000)
    n_steps = rng.integers(1, 61, size=1000)
    for x_hat, theta, n in zip(states, thetas, n_steps):
        s = _state(x_hat)
        proposed = predict_n_steps(s, float(theta), PredictorConfig(w=0.0, n_steps=int(n)), model)
        baseline = baseline_predict_n(s, int(n), model)
        assert proposed == baseline, "w=0 must reproduce the baseline exactly"


def test_zero_head_pose_reduces_to_the_baseline(kalman_cfg):
    model = CvModel.from_config(kalman_cfg)
    rng = np.random.default_rng(2)
    states = _random_states(rng, 1000)
    for x_hat, w in zip(states, rng.uniform(0.0, 1.0, size=1000)):
        s = _state(x_hat)
        proposed = predict_n_steps(s, 0.0, PredictorConfig(w=float(w), n_steps=15), model)
        assert proposed == baseline_predict_n(s, 15, model)


finite = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)
headings = st.floats(min_value=-math.pi, max_value=math.pi, allow_nan=False)


@given(finite, finite, finite, headings, st.floats(min_value=0.0, max_value=1.0))
def test_horizontal_step_never_grows(vx, vy, vz, theta, w):
    model = CvModel.from_config(KalmanConfig())
    s = _state([0.0, -0.6, 3.0, vx, vy, vz])
    proposed = predict_n_steps(s, theta, PredictorConfig(w=w, n_steps=15), model)
    baseline = baseline_predict_n(s, 15, model)
    step = math.hypot(proposed.x, proposed.z - 3.0)
    reference = math.hypot(baseline.x, baseline.z - 3.0)
    assert step <= reference + 1e-12
    assert proposed.y == pytest.approx(baseline.y, abs=1e-15), "vertical motion ignores the head pose"


@given(finite, finite, finite, headings)
def test_full_weight_preserves_horizontal_length(vx, vy, vz, theta):
    model = CvModel.from_config(KalmanConfig())
    s = _state([0.0, -0.6, 3.0, vx, vy, vz])
    proposed = predict_n_steps(s, theta, PredictorConfig(w=1.0, n_steps=15), model)
    assert math.hypot(proposed.x, proposed.z - 3.0) == pytest.approx(15 * model.dt * math.hypot(vx, vz), abs=1e-12)


@given(finite, finite, finite, headings, st.integers(min_value=1, max_value=30))
def test_prediction_is_linear_in_the_horizon(vx, vy, vz, theta, k):
    model = CvModel.from_config(KalmanConfig())
    s = _state([0.2, -0.6, 3.0, vx, vy, vz])
    single = predict_n_steps(s, theta, PredictorConfig(w=0.7, n_steps=k), model).to_array() - s.position
    double = predict_n_steps(s, theta, PredictorConfig(w=0.7, n_steps=2 * k), model).to_array() - s.position
    assert np.allclose(double, 2.0 * single, atol=1e-12)


def test_batch_matches_the_per_state_prediction(kalman_cfg):
    model = CvModel.from_config(kalman_cfg)
    rng = np.random.default_rng(3)
    states = _random_states(rng, 200)
    thetas = rng.uniform(-math.pi, math.pi, size=200)
    batch = predict_n_steps_batch(states, thetas, 0.6, 15, model)
    baseline = baseline_predict_n_batch(states, 15, model)
    for row, x_hat, theta, base in zip(batch, states, thetas, baseline):
        single = predict_n_steps(_state(x_hat), float(theta), PredictorConfig(w=0.6, n_steps=15), model)
        assert np.allclose(row, single.to_array(), atol=1e-12)
        assert np.allclose(base, baseline_predict_n(_state(x_hat), 15, model).to_array(), atol=1e-12)


def test_steps_for_delay():
    assert steps_for_delay(0.5, 30.0) == 15
    assert steps_for_delay(0.01, 30.0) == 1
    with pytest.raises(HeadcastException):
        steps_for_delay(0.0, 30.0)


def test_first_frame_initialises_with_all_three_positions_equal(predictor_cfg, models):
    triple, tracker = step_frame(TrackerState(), make_frame(0.0, nose=(0.2, -0.6, 3.0), head_yaw=0.4),
                                 predictor_cfg, models)
    assert triple.estimated == Vec3(0.2, -0.6, 3.0)
    assert triple.baseline == triple.estimated
    assert triple.proposed == triple.estimated
    assert tracker.initialised


def test_invalid_frames_coast_without_output(predictor_cfg, models):
    _, tracker = step_frame(TrackerState(), make_frame(0.0), predictor_cfg, models)
    triple, coasted = step_frame(tracker, make_frame(1 / 30, valid=False), predictor_cfg, models)
    assert triple is None
    assert coasted.last_t == pytest.approx(1 / 30)
    assert coasted.last_update_t == 0.0
    assert step_frame(TrackerState(), make_frame(0.0, valid=False), predictor_cfg, models)[0] is None


def test_invalid_frame_after_a_long_jump_leaves_the_filters_alone(predictor_cfg, models):
    _, tracker = step_frame(TrackerState(), make_frame(0.0), predictor_cfg, models)
    triple, jumped = step_frame(tracker, make_frame(3000.0, valid=False), predictor_cfg, models)
    assert triple is None
    assert jumped.last_t == 3000.0
    assert jumped.last_update_t == 0.0
    assert np.array_equal(jumped.position.x_hat, tracker.position.x_hat), "no coasting past the reset gap"
    assert np.array_equal(jumped.position.P, tracker.position.P)
    triple, _ = step_frame(jumped, make_frame(3000.1, nose=(0.5, -0.6, 2.0)), predictor_cfg, models)
    assert triple.estimated == Vec3(0.5, -0.6, 2.0)


def test_long_gap_reinitialises_the_filter(predictor_cfg, models):
    tracker = TrackerState()
    for k in range(10):
        _, tracker = step_frame(tracker, make_frame(k / 30, nose=(0.04 * k, -0.6, 3.0)), predictor_cfg, models)
    triple, tracker = step_frame(tracker, make_frame(2.0, nose=(1.0, -0.6, 4.0)), predictor_cfg, models)
    assert triple.estimated == Vec3(1.0, -0.6, 4.0)
    assert np.array_equal(tracker.position.velocity, np.zeros(3))


def test_noiseless_walk_with_zero_head_pose_matches_baseline(predictor_cfg, models):
    track = constant_velocity_track()
    tracker = TrackerState()
    for frame in track.frames:
        triple, tracker = step_frame(tracker, frame, predictor_cfg, models)
        assert np.allclose(triple.proposed.to_array(), triple.baseline.to_array(), atol=1e-9)


def test_converged_baseline_reaches_the_true_future_position():
    kcfg = KalmanConfig(r_pos=0.002)
    models = FilterModels.from_config(kcfg)
    cfg = PredictorConfig(w=1.0, n_steps=15)
    velocity = np.array([0.3, 0.0, 0.9])
    start = np.array([0.0, -0.6, 1.0])
    track = constant_velocity_track(velocity=tuple(velocity), start=tuple(start), count=121)
    tracker = TrackerState()
    for frame in track.frames:
        triple, tracker = step_frame(tracker, frame, cfg, models)
    truth = start + velocity * (track.frames[-1].t + 0.5)
    assert np.linalg.norm(triple.baseline.to_array() - truth) < 1e-6


if __name__ == "__main__":
    pytest.main(["-v", __file__])
