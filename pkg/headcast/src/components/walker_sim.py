"""
Synthetic walking tracks with anticipatory head yaw.

Subjects walk at constant speed along a route whose body heading is constant
(straight) or follows a smoothstep ramp (turn). The head yaw at time t equals
the body heading at t + head_lead_s, plus an optional overshoot bump, so the
head pose leads every turn.
"""
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from headcast.src.components.dataset import Frame, Track, write_track
from headcast.src.components.geometry import UnitQuaternion, Vec3
from headcast.src.config_params.config_params import RouteSpec, SimConfig
from headcast.src.constants import MANIFEST_FILENAME, ROOM_X_RANGE_M, ROOM_Z_RANGE_M, ROUTE_IDS
from headcast.src.utils.common import create_directories, write_json
from headcast.src.utils.exception import configuration_error
from headcast.src.utils.logger import logger

NOSE_HEIGHT_M = -0.6
WAIST_HEIGHT_M = 0.0
NOSE_OFFSET_M = 0.1
# integration points per frame interval
SUBSTEPS = 20

SPEED_STREAM = (0,)
TRACK_STREAM = 1


@dataclass(frozen=True)
class SimulatedTrack:
    """A generated Track together with its noiseless ground truth."""
    track: Track
    times: np.ndarray
    true_nose: np.ndarray
    body_yaw: np.ndarray
    head_yaw: np.ndarray
    speed: float
    spawn_key: Tuple[int, ...]

    def position_at(self, t: float) -> np.ndarray:
        """Ground-truth nose position at time t (linear interpolation between frames)."""
        return np.array([np.interp(t, self.times, self.true_nose[:, axis]) for axis in range(3)])


def _smoothstep(s: np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def body_heading(route: RouteSpec, t: np.ndarray) -> np.ndarray:
    """Ground-truth body heading (unwrapped yaw) along the route."""
    t = np.asarray(t, dtype=float)
    if route.kind == "straight":
        return np.full(t.shape, route.heading)
    progress = (t - route.turn_start_s) / route.turn_duration_s
    return route.heading + route.turn_angle * _smoothstep(progress)


def head_yaw(route: RouteSpec, t: np.ndarray, cfg: SimConfig) -> np.ndarray:
    """Body heading shifted earlier by head_lead_s, plus the overshoot bump."""
    t = np.asarray(t, dtype=float)
    yaw = body_heading(route, t + cfg.head_lead_s)
    if route.kind == "turn" and cfg.head_overshoot != 0.0:
        s = np.clip((t + cfg.head_lead_s - route.turn_start_s) / route.turn_duration_s, 0.0, 1.0)
        yaw = yaw + np.sign(route.turn_angle) * cfg.head_overshoot * 4.0 * s * (1.0 - s)
    return yaw


def _frame_times(route: RouteSpec, cfg: SimConfig) -> np.ndarray:
    walk_s = min(cfg.duration_s, route.path_length / cfg.speed)
    count = int(np.floor(walk_s * cfg.fps + 1e-9)) + 1
    return np.arange(count) / cfg.fps


def _body_positions(route: RouteSpec, cfg: SimConfig, times: np.ndarray) -> np.ndarray:
    """Integrates the heading at constant speed; returns (T, 2) horizontal (x, z) positions."""
    start_x, start_z = route.start
    if route.kind == "straight":
        return np.column_stack([
            start_x + cfg.speed * times * np.sin(route.heading),
            start_z + cfg.speed * times * np.cos(route.heading),
        ])
    fine = np.linspace(0.0, times[-1], (len(times) - 1) * SUBSTEPS + 1)
    heading = body_heading(route, fine)
    x = start_x + cumulative_trapezoid(cfg.speed * np.sin(heading), fine, initial=0.0)
    z = start_z + cumulative_trapezoid(cfg.speed * np.cos(heading), fine, initial=0.0)
    return np.column_stack([x[::SUBSTEPS], z[::SUBSTEPS]])


def _check_room(route: RouteSpec, horizontal: np.ndarray) -> None:
    x, z = horizontal[:, 0], horizontal[:, 1]
    inside = (
        np.all(x >= ROOM_X_RANGE_M[0]) and np.all(x <= ROOM_X_RANGE_M[1])
        and np.all(z >= ROOM_Z_RANGE_M[0]) and np.all(z <= ROOM_Z_RANGE_M[1])
    )
    if not inside:
        raise configuration_error(
            f"Route {route.route_id} leaves the room bounds.",
            route_id=route.route_id,
            x_range=(float(x.min()), float(x.max())),
            z_range=(float(z.min()), float(z.max())),
        )


def _rng(seed: int, spawn_key: Tuple[int, ...]) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=spawn_key)))


def simulate_route(route: RouteSpec, cfg: SimConfig, subject_id: str = "01",
                   spawn_key: Optional[Tuple[int, ...]] = None) -> SimulatedTrack:
    """
    Generates one noisy track of a subject walking the route.

    Args:
        route (RouteSpec): Route geometry and turn profile.
        cfg (SimConfig): Speed, head lead, noise levels, frame rate and seed.
        subject_id (str): Identifier stamped on the track.
        spawn_key (Optional[Tuple[int, ...]]): Stream key under cfg.seed; defaults to
            (1, 0, route index).

    Returns:
        SimulatedTrack: The observed track plus ground truth.

    Raises:
        HeadcastException: ConfigurationError if the route leaves the room.
    """
    spawn_key = spawn_key if spawn_key is not None else (TRACK_STREAM, 0, ROUTE_IDS.index(route.route_id))
    times = _frame_times(route, cfg)
    horizontal = _body_positions(route, cfg, times)
    _check_room(route, horizontal)

    body = body_heading(route, times)
    head = head_yaw(route, times, cfg)
    count = len(times)
    waist = np.column_stack([horizontal[:, 0], np.full(count, WAIST_HEIGHT_M), horizontal[:, 1]])
    nose = np.column_stack([
        horizontal[:, 0] + NOSE_OFFSET_M * np.sin(head),
        np.full(count, NOSE_HEIGHT_M),
        horizontal[:, 1] + NOSE_OFFSET_M * np.cos(head),
    ])

    rng = _rng(cfg.seed, spawn_key)
    nose_obs = nose + rng.normal(0.0, cfg.noise_pos, size=nose.shape)
    waist_obs = waist + rng.normal(0.0, cfg.noise_pos, size=waist.shape)
    head_obs = head + rng.normal(0.0, cfg.noise_yaw, size=count)
    body_obs = body + rng.normal(0.0, cfg.noise_yaw, size=count)

    frames = [
        Frame(
            t=float(times[k]),
            nose_pos=Vec3.from_array(nose_obs[k]),
            nose_q=UnitQuaternion.from_yaw(float(head_obs[k])),
            waist_pos=Vec3.from_array(waist_obs[k]),
            waist_q=UnitQuaternion.from_yaw(float(body_obs[k])),
            valid=True,
        )
        for k in range(count)
    ]
    track = Track(subject_id=subject_id, route_id=route.route_id, frames=tuple(frames), fps=cfg.fps)
    return SimulatedTrack(track=track, times=times, true_nose=nose, body_yaw=body, head_yaw=head,
                          speed=cfg.speed, spawn_key=tuple(spawn_key))


def subject_speeds(n_subjects: int, cfg: SimConfig) -> np.ndarray:
    """Per-subject walking speeds drawn uniformly from cfg.speed_range."""
    low, high = cfg.speed_range
    return _rng(cfg.seed, SPEED_STREAM).uniform(low, high, size=n_subjects)


def generate_dataset(n_subjects: int, routes: Sequence[RouteSpec], cfg: SimConfig) -> List[SimulatedTrack]:
    """
    One track per (subject, route), subjects numbered "01", "02", ...

    Raises:
        HeadcastException: ConfigurationError for fewer than 2 subjects or no routes.
    """
    if n_subjects < 2:
        raise configuration_error("At least 2 subjects are needed.", n_subjects=n_subjects)
    if not routes:
        raise configuration_error("At least one route is needed.")
    speeds = subject_speeds(n_subjects, cfg)
    dataset = []
    for subject_index, speed in enumerate(speeds):
        subject_cfg = replace(cfg, speed=float(speed))
        for route in routes:
            spawn_key = (TRACK_STREAM, subject_index, ROUTE_IDS.index(route.route_id))
            dataset.append(simulate_route(route, subject_cfg, f"{subject_index + 1:02d}", spawn_key))
    logger.info(f"Simulated {len(dataset)} tracks for {n_subjects} subjects over "
                f"{len(routes)} routes (seed {cfg.seed})")
    return dataset


def build_manifest(dataset: Sequence[SimulatedTrack], routes: Sequence[RouteSpec], cfg: SimConfig,
                   effective_config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Everything needed to regenerate the dataset exactly."""
    return {
        "generator": "numpy.random.PCG64",
        "seed": cfg.seed,
        "simulation": asdict(cfg),
        "routes": [asdict(route) for route in routes],
        "tracks": [
            {
                "file": f"{item.track.name}.csv",
                "subject_id": item.track.subject_id,
                "route_id": item.track.route_id,
                "speed": item.speed,
                "spawn_key": list(item.spawn_key),
                "n_frames": len(item.track),
            }
            for item in dataset
        ],
        "config": effective_config or {},
    }


def write_dataset(dataset: Sequence[SimulatedTrack], out_dir: Path, manifest: Dict[str, Any]) -> List[Path]:
    """Writes s{subject}_{route}.csv per track plus the manifest."""
    out_dir = Path(out_dir)
    create_directories([out_dir], verbose=False)
    paths = [write_track(item.track, out_dir / f"{item.track.name}.csv") for item in dataset]
    write_json(manifest, out_dir / MANIFEST_FILENAME)
    logger.info(f"Wrote {len(paths)} track files to {out_dir}")
    return paths
