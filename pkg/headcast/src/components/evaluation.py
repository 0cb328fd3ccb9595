"""
Validation harness: per-frame errors, route-group comparison, grid tuning of
the blend weight and leave-one-subject-out cross-validation.

Errors are Euclidean distances between a prediction made at frame t for t+N
and the filtered position (a) at frame t+N. Groups pool frames across tracks
and compare the two methods with a one-tailed signed-rank test on
err_baseline - err_proposed.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from headcast.src.components.dataset import Track, route_group, tracks_in_group
from headcast.src.components.headpose_predictor import (
    FilterModels,
    TrackerState,
    baseline_predict_n_batch,
    predict_n_steps_batch,
    step_frame,
)
from headcast.src.components.kalman import CvModel
from headcast.src.components.stats import WilcoxonResult, degenerate_result, wilcoxon_one_tailed
from headcast.src.config_params.config_params import OBJECTIVES, KalmanConfig, PredictorConfig
from headcast.src.constants import DEFAULT_ALPHA, FRAME_ERROR_COLUMNS, ROUTE_GROUPS
from headcast.src.utils.common import write_text
from headcast.src.utils.exception import (
    EXIT_DEGENERATE_STATISTICS,
    HeadcastException,
    configuration_error,
    invalid_argument,
)
from headcast.src.utils.logger import logger

REPORT_NOTES = [
    "pairing unit: frame, pooled across the tracks of a route group",
    "statistic: W+ (sum of positive ranks) of err_baseline - err_proposed, alternative 'greater'",
    "error target: filtered position (a) at frame t+N",
]


@dataclass(frozen=True)
class FrameError:
    track: str
    t: float
    err_baseline: float
    err_proposed: float


@dataclass(frozen=True)
class FilteredTrack:
    """Per-frame filter output of one track, reusable for any w and N."""
    name: str
    subject_id: str
    route_id: Optional[str]
    times: np.ndarray
    x_hats: np.ndarray
    thetas: np.ndarray
    usable: np.ndarray
    model: CvModel

    @property
    def group(self) -> Optional[str]:
        return route_group(self.route_id) if self.route_id else None

    def pair_indices(self, n_steps: int) -> np.ndarray:
        """Frames t with a prediction at t and a filtered position at t+N."""
        if self.usable.size <= n_steps:
            return np.zeros(0, dtype=np.int64)
        return np.flatnonzero(self.usable[:-n_steps] & self.usable[n_steps:])

    def errors_for_weight(self, w: float, n_steps: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (t, err_baseline, err_proposed) for every scorable frame."""
        idx = self.pair_indices(n_steps)
        sources = self.x_hats[idx]
        targets = self.x_hats[idx + n_steps, :3]
        baseline = baseline_predict_n_batch(sources, n_steps, self.model)
        proposed = predict_n_steps_batch(sources, self.thetas[idx], w, n_steps, self.model)
        return (
            self.times[idx],
            np.linalg.norm(baseline - targets, axis=1),
            np.linalg.norm(proposed - targets, axis=1),
        )


def filter_track(track: Track, cfg: PredictorConfig, kcfg: KalmanConfig) -> FilteredTrack:
    """Runs step_frame over the track once and keeps the filtered states and angles."""
    models = FilterModels.from_config(kcfg)
    count = len(track.frames)
    x_hats = np.full((count, 6), np.nan)
    thetas = np.full(count, np.nan)
    usable = np.zeros(count, dtype=bool)
    tracker = TrackerState()
    for index, frame in enumerate(track.frames):
        triple, tracker = step_frame(tracker, frame, cfg, models)
        if triple is not None:
            x_hats[index] = tracker.position.x_hat
            thetas[index] = tracker.angle.x_hat[0]
            usable[index] = True
    return FilteredTrack(
        name=track.name,
        subject_id=track.subject_id,
        route_id=track.route_id,
        times=np.array([frame.t for frame in track.frames]),
        x_hats=x_hats,
        thetas=thetas,
        usable=usable,
        model=models.position,
    )


def filter_tracks(tracks: Sequence[Track], cfg: PredictorConfig, kcfg: KalmanConfig) -> List[FilteredTrack]:
    """Filters tracks sorted by (subject_id, route_id)."""
    ordered = sorted(tracks, key=lambda track: (track.subject_id, track.route_id or ""))
    return [filter_track(track, cfg, kcfg) for track in ordered]


def frame_errors(track: Track, cfg: PredictorConfig, kcfg: KalmanConfig) -> List[FrameError]:
    """
    Per-frame Euclidean errors of (b) and (c) against (a) at t+N.

    A track with fewer than N+1 usable frames yields an empty list.
    """
    filtered = filter_track(track, cfg, kcfg)
    times, err_baseline, err_proposed = filtered.errors_for_weight(cfg.w, cfg.n_steps)
    return [
        FrameError(track=filtered.name, t=float(t), err_baseline=float(eb), err_proposed=float(ec))
        for t, eb, ec in zip(times, err_baseline, err_proposed)
    ]


class TrackSummary(BaseModel):
    track: str
    n_frames: int
    mean_err_baseline_m: Optional[float] = None
    mean_err_proposed_m: Optional[float] = None


class GroupReport(BaseModel):
    group: str
    n_frames: int
    mean_err_baseline_m: float
    mean_err_proposed_m: float
    wilcoxon: WilcoxonResult
    alpha: float = DEFAULT_ALPHA
    significant: bool = False
    w: Optional[float] = None
    n_tracks: int = 0
    per_track: List[TrackSummary] = Field(default_factory=list)


class GridPoint(BaseModel):
    w: float
    objective_value: float


class TuneReport(BaseModel):
    w: float
    objective_value: float
    objective: str
    n_steps: int
    n_tracks: int
    n_frames: int
    grid: List[GridPoint]


class FoldReport(BaseModel):
    held_out_subject: str
    w: float
    objective_value: float
    groups: List[GroupReport]


class CvReport(BaseModel):
    folds: List[FoldReport]
    w_mean: float
    w_std: float
    pooled: List[GroupReport]
    objective: str
    n_steps: int
    warnings: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=lambda: list(REPORT_NOTES))
    config: Dict[str, Any] = Field(default_factory=dict)


class EvaluationReport(BaseModel):
    w: float
    n_steps: int
    groups: List[GroupReport]
    warnings: List[str] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=lambda: list(REPORT_NOTES))
    config: Dict[str, Any] = Field(default_factory=dict)


# (track name, t, err_baseline, err_proposed) arrays of one track
TrackErrors = Tuple[str, np.ndarray, np.ndarray, np.ndarray]


def group_report_from_errors(group: str, track_errors: Sequence[TrackErrors], w: Optional[float] = None,
                             alpha: float = DEFAULT_ALPHA) -> GroupReport:
    """
    Pools per-track errors into one GroupReport.

    Raises:
        HeadcastException: DegenerateSample when the pool is empty.
    """
    ordered = sorted(track_errors, key=lambda item: item[0])
    err_baseline = np.concatenate([item[2] for item in ordered]) if ordered else np.zeros(0)
    err_proposed = np.concatenate([item[3] for item in ordered]) if ordered else np.zeros(0)
    if err_baseline.size == 0:
        raise HeadcastException(
            error=ValueError(f"No scorable frames in group {group}."),
            error_type="DegenerateSample",
            context={"group": group, "n_tracks": len(ordered)},
            exit_code=EXIT_DEGENERATE_STATISTICS,
        )
    try:
        wilcoxon = wilcoxon_one_tailed(err_baseline - err_proposed, alternative="greater")
    except HeadcastException as e:
        if e.error_type != "DegenerateSample":
            raise
        wilcoxon = degenerate_result()
    per_track = [
        TrackSummary(
            track=name,
            n_frames=int(eb.size),
            mean_err_baseline_m=float(np.mean(eb)) if eb.size else None,
            mean_err_proposed_m=float(np.mean(ec)) if ec.size else None,
        )
        for name, _, eb, ec in ordered
    ]
    return GroupReport(
        group=group,
        n_frames=int(err_baseline.size),
        mean_err_baseline_m=float(np.mean(err_baseline)),
        mean_err_proposed_m=float(np.mean(err_proposed)),
        wilcoxon=wilcoxon,
        alpha=alpha,
        significant=wilcoxon.method != "degenerate" and wilcoxon.p_one_tailed < alpha,
        w=w,
        n_tracks=len(ordered),
        per_track=per_track,
    )


def _check_group(group: str) -> None:
    if group not in ROUTE_GROUPS:
        raise invalid_argument(f"Unknown route group '{group}'.", group=group)


def evaluate_filtered_group(filtered: Sequence[FilteredTrack], group: str, w: float, n_steps: int,
                            alpha: float = DEFAULT_ALPHA) -> GroupReport:
    _check_group(group)
    strangers = [item.name for item in filtered if item.group != group]
    if strangers:
        raise invalid_argument(f"Tracks outside group {group}.", tracks=strangers)
    track_errors = [(item.name, *item.errors_for_weight(w, n_steps)) for item in filtered]
    return group_report_from_errors(group, track_errors, w=w, alpha=alpha)


def evaluate_group(tracks: Sequence[Track], group: str, w: float, cfg: PredictorConfig, kcfg: KalmanConfig,
                   alpha: float = DEFAULT_ALPHA) -> GroupReport:
    """
    Compares baseline and proposed errors over all frames of the group's tracks.

    Args:
        tracks (Sequence[Track]): Range-filtered tracks whose routes belong to the group.
        group (str): R12, R34 or R56.
        w (float): Blend weight used for the proposed predictions.
        cfg (PredictorConfig): Horizon N (cfg.w is ignored in favour of w).
        kcfg (KalmanConfig): Filter settings.
        alpha (float): Significance level.

    Returns:
        GroupReport: Pooled means, signed-rank test and per-track summaries.
    """
    return evaluate_filtered_group(filter_tracks(tracks, cfg, kcfg), group, w, cfg.n_steps, alpha)


def objective_for_weight(filtered: Sequence[FilteredTrack], w: float, n_steps: int,
                         objective: str = "frame_sum") -> Tuple[float, int]:
    """
    Tuning objective for one weight and the number of frames it covers.

    frame_sum adds the (c)-vs-(a) error of every frame of every track;
    track_mean_sum adds the per-track mean errors.
    """
    if objective not in OBJECTIVES:
        raise configuration_error(f"objective must be one of {OBJECTIVES}.", objective=objective)
    per_track = [item.errors_for_weight(w, n_steps)[2] for item in filtered]
    n_frames = int(sum(errors.size for errors in per_track))
    if objective == "frame_sum":
        pooled = np.concatenate(per_track) if per_track else np.zeros(0)
        return float(np.sum(pooled)), n_frames
    means = np.array([np.mean(errors) for errors in per_track if errors.size])
    return float(np.sum(means)), n_frames


def _check_grid(w_grid: Sequence[float], w_max: float) -> List[float]:
    grid = sorted(float(w) for w in w_grid)
    if not grid:
        raise configuration_error("The weight grid is empty.")
    if grid[0] < 0 or grid[-1] > w_max:
        raise configuration_error("Grid weights must lie in [0, w_max].", w_min=grid[0], w_max=w_max)
    return grid


def tune_filtered(filtered: Sequence[FilteredTrack], w_grid: Sequence[float], n_steps: int, w_max: float,
                  objective: str = "frame_sum") -> TuneReport:
    if not filtered:
        raise configuration_error("The training set is empty.")
    grid = _check_grid(w_grid, w_max)
    table = []
    best_w, best_value, n_frames = grid[0], float("inf"), 0
    for w in grid:
        value, n_frames = objective_for_weight(filtered, w, n_steps, objective)
        table.append(GridPoint(w=w, objective_value=value))
        # strict comparison keeps the smaller weight on ties
        if value < best_value:
            best_w, best_value = w, value
    return TuneReport(w=best_w, objective_value=best_value, objective=objective, n_steps=n_steps,
                      n_tracks=len(filtered), n_frames=n_frames, grid=table)


def tune_w(training: Sequence[Track], w_grid: Sequence[float], cfg: PredictorConfig, kcfg: KalmanConfig,
           objective: str = "frame_sum") -> TuneReport:
    """
    Grid search for the blend weight minimising the tuning objective on the training tracks.

    Raises:
        HeadcastException: ConfigurationError for an empty training set or grid.
    """
    if not training:
        raise configuration_error("The training set is empty.")
    return tune_filtered(filter_tracks(training, cfg, kcfg), w_grid, cfg.n_steps, cfg.w_max, objective)


def groups_present(filtered: Sequence[FilteredTrack]) -> List[str]:
    """Route groups with at least one track, in R12, R34, R56 order."""
    present = {item.group for item in filtered}
    return [group for group in ROUTE_GROUPS if group in present]


def evaluate_filtered(filtered: Sequence[FilteredTrack], w: float, n_steps: int,
                      alpha: float = DEFAULT_ALPHA) -> Tuple[List[GroupReport], List[str]]:
    """Reports for every route group with tracks; empty groups become warnings."""
    reports, warnings = [], []
    for group in groups_present(filtered):
        members = tracks_in_group(filtered, group)
        try:
            reports.append(evaluate_filtered_group(members, group, w, n_steps, alpha))
        except HeadcastException as e:
            if e.error_type != "DegenerateSample":
                raise
            warnings.append(f"group {group}: no scorable frames")
    return reports, warnings


def loso_filtered(filtered: Sequence[FilteredTrack], w_grid: Sequence[float], n_steps: int, w_max: float,
                  alpha: float = DEFAULT_ALPHA, objective: str = "frame_sum") -> CvReport:
    subjects = sorted({item.subject_id for item in filtered})
    if len(subjects) < 2:
        raise configuration_error("Leave-one-subject-out needs at least 2 subjects.", subjects=subjects)

    folds: List[FoldReport] = []
    warnings: List[str] = []
    pooled_errors: Dict[str, List[TrackErrors]] = {group: [] for group in ROUTE_GROUPS}
    for subject in subjects:
        held_out = [item for item in filtered if item.subject_id == subject]
        training = [item for item in filtered if item.subject_id != subject]
        if sum(item.pair_indices(n_steps).size for item in held_out) == 0:
            warnings.append(f"subject {subject}: no valid frames, fold skipped")
            logger.warning(f"LOSO fold for subject {subject} skipped: no valid frames")
            continue
        tuned = tune_filtered(training, w_grid, n_steps, w_max, objective)
        groups, group_warnings = evaluate_filtered(held_out, tuned.w, n_steps, alpha)
        warnings.extend(f"subject {subject}: {message}" for message in group_warnings)
        for item in held_out:
            if item.group is not None:
                pooled_errors[item.group].append((item.name, *item.errors_for_weight(tuned.w, n_steps)))
        folds.append(FoldReport(held_out_subject=subject, w=tuned.w, objective_value=tuned.objective_value,
                                groups=groups))
        logger.info(f"LOSO fold {subject}: tuned w={tuned.w:g} on {tuned.n_tracks} tracks")

    if not folds:
        raise configuration_error("No subject had valid frames; cross-validation is empty.")
    weights = np.array([fold.w for fold in folds])
    pooled = []
    for group, track_errors in pooled_errors.items():
        if sum(item[2].size for item in track_errors):
            pooled.append(group_report_from_errors(group, track_errors, w=None, alpha=alpha))
    return CvReport(
        folds=folds,
        w_mean=float(np.mean(weights)),
        w_std=float(np.std(weights)),
        pooled=pooled,
        objective=objective,
        n_steps=n_steps,
        warnings=warnings,
    )


def loso_cv(tracks: Sequence[Track], w_grid: Sequence[float], cfg: PredictorConfig, kcfg: KalmanConfig,
            alpha: float = DEFAULT_ALPHA, objective: str = "frame_sum") -> CvReport:
    """
    Leave-one-subject-out: tune w on the other subjects, evaluate on the held-out one.

    Every track is filtered once; folds then only re-score the cached states.
    The pooled reports combine each fold's held-out frames scored with that
    fold's weight.
    """
    return loso_filtered(filter_tracks(tracks, cfg, kcfg), w_grid, cfg.n_steps, cfg.w_max, alpha, objective)


def is_degenerate(reports: Sequence[GroupReport], expected_groups: Sequence[str] = ()) -> bool:
    """
    True when no group was reported, when an expected group has no report
    (its pool was empty) or when a reported test is degenerate.
    """
    reported = {report.group for report in reports}
    if not reports or any(group not in reported for group in expected_groups):
        return True
    return any(report.wilcoxon.method == "degenerate" for report in reports)


def log_group_summary(report: GroupReport, prefix: str = "") -> None:
    logger.info(
        f"{prefix}{report.group}: n={report.n_frames} baseline={report.mean_err_baseline_m * 1000:.1f} mm "
        f"proposed={report.mean_err_proposed_m * 1000:.1f} mm p={report.wilcoxon.p_one_tailed:.3g} "
        f"significant={report.significant}"
    )


def frame_error_rows(filtered: Sequence[FilteredTrack], weights: Dict[str, float], n_steps: int) -> List[FrameError]:
    """Per-frame errors of each track scored with the weight mapped to its name."""
    rows = []
    for item in filtered:
        if item.name not in weights:
            continue
        times, err_baseline, err_proposed = item.errors_for_weight(weights[item.name], n_steps)
        rows.extend(
            FrameError(track=item.name, t=float(t), err_baseline=float(eb), err_proposed=float(ec))
            for t, eb, ec in zip(times, err_baseline, err_proposed)
        )
    return rows


def write_frame_errors(rows: Sequence[FrameError], path: Path) -> Path:
    """CSV `track,t,err_baseline_m,err_proposed_m`."""
    table = pd.DataFrame(
        [(row.track, row.t, row.err_baseline, row.err_proposed) for row in rows],
        columns=list(FRAME_ERROR_COLUMNS),
    )
    return write_text(table.to_csv(index=False, float_format="%.9g", lineterminator="\n"), Path(path))
