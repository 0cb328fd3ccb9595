import json
from dataclasses import replace

import numpy as np
import pytest
from scipy.integrate import quad

from headcast.src.components.dataset import head_pose_series, parse_track, serialize_track
from headcast.src.components.walker_sim import (
    NOSE_HEIGHT_M,
    NOSE_OFFSET_M,
    body_heading,
    build_manifest,
    generate_dataset,
    head_yaw,
    simulate_route,
    subject_speeds,
    write_dataset,
)
from headcast.src.config_params.config_params import RouteSpec, SimConfig
from headcast.src.utils.exception import HeadcastException

ONSET_THRESHOLD_RAD = 0.01


def _onset(values, reference):
    return int(np.flatnonzero(np.abs(np.asarray(values) - reference) > ONSET_THRESHOLD_RAD)[0])


def test_straight_noiseless_track_is_collinear_with_zero_head_pose(routes, noiseless_sim):
    simulated = simulate_route(routes["R1"], noiseless_sim)
    nose = np.array([frame.nose_pos.to_array() for frame in simulated.track.frames])
    direction = nose[-1] - nose[0]
    offsets = nose - nose[0]
    cross = np.cross(offsets, direction)
    assert np.max(np.linalg.norm(cross, axis=1)) < 1e-9, "straight walk must be collinear"
    assert all(abs(value) <= 1e-12 for value in head_pose_series(simulated.track))


def test_straight_walk_has_constant_speed(routes, noiseless_sim):
    simulated = simulate_route(routes["R2"], noiseless_sim)
    steps = np.diff(simulated.true_nose[:, [0, 2]], axis=0)
    speeds = np.linalg.norm(steps, axis=1) * noiseless_sim.fps
    assert np.allclose(speeds, noiseless_sim.speed, atol=1e-9)


def test_turn_heading_changes_by_the_turn_angle(routes, noiseless_sim):
    route = routes["R3"]
    simulated = simulate_route(route, noiseless_sim)
    assert simulated.body_yaw[-1] - simulated.body_yaw[0] == pytest.approx(route.turn_angle, abs=1e-9)
    steps = np.linalg.norm(np.diff(simulated.true_nose[:, [0, 2]], axis=0), axis=1)
    assert steps.max() < 2.0 * noiseless_sim.speed / noiseless_sim.fps


def test_head_turn_precedes_body_turn(routes, noiseless_sim):
    simulated = simulate_route(routes["R3"], noiseless_sim)
    series = np.array(head_pose_series(simulated.track))
    head_onset = _onset(series, 0.0)
    body_onset = _onset(simulated.body_yaw, simulated.body_yaw[0])
    lead_s = (body_onset - head_onset) / noiseless_sim.fps
    assert lead_s >= 0.19, f"head pose should lead the body by ~0.2 s, got {lead_s:.3f} s"


def test_head_yaw_lags_body_heading_by_the_lead(routes, noiseless_sim):
    simulated = simulate_route(routes["R4"], noiseless_sim)
    head, body = simulated.head_yaw, simulated.body_yaw
    costs = [np.mean((head[:len(head) - k] - body[k:]) ** 2) for k in range(0, 16)]
    best_lag = int(np.argmin(costs))
    assert abs(best_lag - round(noiseless_sim.head_lead_s * noiseless_sim.fps)) <= 1


def test_overshoot_adds_a_bump_during_the_turn(routes):
    route = routes["R3"]
    plain = SimConfig(noise_pos=0.0, noise_yaw=0.0)
    bumped = replace(plain, head_overshoot=0.2)
    t = np.array([0.0, 2.3, 4.9])
    difference = head_yaw(route, t, bumped) - head_yaw(route, t, plain)
    assert difference[0] == 0.0 and difference[2] == 0.0
    assert difference[1] > 0.0
    assert np.array_equal(head_yaw(route, t, plain), body_heading(route, t + plain.head_lead_s))


def _integrated_nose(route, cfg, t):
    """Nose position from direct quadrature of the heading, independent of the simulator grid."""
    start_x, start_z = route.start
    x = start_x + quad(lambda s: cfg.speed * np.sin(float(body_heading(route, s))), 0.0, t, limit=200)[0]
    z = start_z + quad(lambda s: cfg.speed * np.cos(float(body_heading(route, s))), 0.0, t, limit=200)[0]
    yaw = float(head_yaw(route, t, cfg))
    return np.array([x + NOSE_OFFSET_M * np.sin(yaw), NOSE_HEIGHT_M, z + NOSE_OFFSET_M * np.cos(yaw)])


def test_ground_truth_matches_noiseless_frames(routes, noiseless_sim):
    simulated = simulate_route(routes["R3"], noiseless_sim)
    for k in (0, 37, len(simulated.times) - 1):
        frame = simulated.track.frames[k]
        np.testing.assert_allclose(simulated.position_at(frame.t), frame.nose_pos.to_array(), atol=1e-12)


def test_ground_truth_follows_the_route_between_frames(routes, noiseless_sim):
    straight = routes["R1"]
    simulated = simulate_route(straight, noiseless_sim)
    t = 1.0 + 0.4 / noiseless_sim.fps
    np.testing.assert_allclose(simulated.position_at(t), _integrated_nose(straight, noiseless_sim, t), atol=1e-9)

    turn = routes["R3"]
    simulated = simulate_route(turn, noiseless_sim)
    mid_turn = turn.turn_start_s + 0.5 * turn.turn_duration_s + 0.5 / noiseless_sim.fps
    expected = _integrated_nose(turn, noiseless_sim, mid_turn)
    assert np.linalg.norm(simulated.position_at(mid_turn) - expected) < 2e-3, "mid-turn ground truth"


def test_ground_truth_is_clamped_to_the_walk(routes):
    simulated = simulate_route(routes["R5"], SimConfig())
    np.testing.assert_array_equal(simulated.position_at(simulated.times[-1] + 1.0), simulated.true_nose[-1])
    np.testing.assert_array_equal(simulated.position_at(-0.5), simulated.true_nose[0])


def test_same_seed_gives_identical_tracks(routes):
    cfg = SimConfig(seed=11)
    first = serialize_track(simulate_route(routes["R5"], cfg).track)
    second = serialize_track(simulate_route(routes["R5"], cfg).track)
    other = serialize_track(simulate_route(routes["R5"], replace(cfg, seed=12)).track)
    assert first == second
    assert first != other


def test_generated_tracks_parse_back(routes):
    simulated = simulate_route(routes["R6"], SimConfig())
    parsed = parse_track(serialize_track(simulated.track))
    assert parsed.route_id == "R6"
    assert len(parsed) == len(simulated.track)


def test_route_leaving_the_room_is_rejected():
    route = RouteSpec(route_id="R1", kind="straight", path_length=6.0, start=(3.0, 3.5), heading=1.5707963267948966)
    with pytest.raises(HeadcastException) as exc_info:
        simulate_route(route, SimConfig(noise_pos=0.0, noise_yaw=0.0))
    assert exc_info.value.error_type == "ConfigurationError"


def test_dataset_cardinality(routes):
    dataset = generate_dataset(14, list(routes.values()), SimConfig())
    assert len(dataset) == 84
    assert {item.track.subject_id for item in dataset} == {f"{i:02d}" for i in range(1, 15)}
    small = generate_dataset(2, [routes["R1"]], SimConfig())
    assert [item.track.name for item in small] == ["s01_R1", "s02_R1"]


def test_single_subject_is_rejected(routes):
    with pytest.raises(HeadcastException) as exc_info:
        generate_dataset(1, [routes["R1"]], SimConfig())
    assert exc_info.value.error_type == "ConfigurationError"


def test_subject_speeds_are_seeded_and_bounded():
    cfg = SimConfig(seed=3)
    speeds = subject_speeds(14, cfg)
    assert np.array_equal(speeds, subject_speeds(14, cfg))
    assert np.all((speeds >= 1.0) & (speeds <= 1.4))


def test_written_dataset_is_reproducible(tmp_path, routes):
    selected = [routes["R1"], routes["R3"]]
    cfg = SimConfig(seed=5)
    outputs = []
    for name in ("first", "second"):
        dataset = generate_dataset(2, selected, cfg)
        manifest = build_manifest(dataset, selected, cfg)
        paths = write_dataset(dataset, tmp_path / name, manifest)
        assert sorted(path.name for path in paths) == ["s01_R1.csv", "s01_R3.csv", "s02_R1.csv", "s02_R3.csv"]
        outputs.append({path.name: path.read_bytes() for path in sorted((tmp_path / name).iterdir())})
    assert outputs[0] == outputs[1]
    manifest = json.loads(outputs[0]["manifest.json"])
    assert manifest["seed"] == 5
    assert len(manifest["tracks"]) == 4


if __name__ == "__main__":
    pytest.main(["-v", __file__])
