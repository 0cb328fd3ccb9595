import math
from pathlib import Path
from typing import Any, Dict, List, Optional

from headcast.src.components.dataset import Track, filter_operating_range, read_track
from headcast.src.components.evaluation import (
    EvaluationReport,
    FilteredTrack,
    evaluate_filtered,
    filter_tracks,
    frame_error_rows,
    groups_present,
    is_degenerate,
    log_group_summary,
    loso_filtered,
    tune_filtered,
    write_frame_errors,
)
from headcast.src.components.walker_sim import build_manifest, generate_dataset, write_dataset
from headcast.src.config_manager.config_manager import ConfigManager
from headcast.src.config_params.config_params import RunConfig
from headcast.src.utils.common import write_json
from headcast.src.utils.exception import configuration_error
from headcast.src.utils.logger import logger


class ValidationPipeline:
    """
    Runs the simulate, tune, evaluate and loso commands and writes their
    reports. Each run method returns True when a written report contains
    degenerate group statistics.
    """

    def __init__(self, run_config: RunConfig, config_manager: Optional[ConfigManager] = None):
        self.run_config = run_config
        self.config_manager = config_manager or ConfigManager()
        self.output = run_config.output

    def _out_dir(self, default: str) -> Path:
        return Path(self.run_config.out or default)

    def _w_grid(self) -> List[float]:
        return self.run_config.evaluation.w_grid(self.run_config.predictor.w_max)

    def simulate(self) -> List[Path]:
        """Generates the dataset and writes one CSV per track plus the manifest."""
        cfg = self.run_config
        routes = [route for route in self.config_manager.get_routes() if route.route_id in cfg.routes]
        if not routes:
            raise configuration_error("No configured route matches the selection.", routes=cfg.routes)
        dataset = generate_dataset(cfg.n_subjects, routes, cfg.simulation)
        manifest = build_manifest(dataset, routes, cfg.simulation, effective_config=cfg.echo())
        return write_dataset(dataset, self._out_dir(self.output.dataset_dir), manifest)

    def load_tracks(self) -> List[Track]:
        """Reads every track CSV of the data directory and applies the operating range."""
        data_dir = Path(self.run_config.data_dir or self.output.dataset_dir)
        paths = sorted(data_dir.glob("*.csv"))
        if not paths:
            raise configuration_error(f"No track files found in {data_dir}.", data_dir=str(data_dir))
        tracks = [filter_operating_range(read_track(path), self.run_config.operating_range) for path in paths]
        mismatched = [track.name for track in tracks if not math.isclose(track.fps, self.run_config.fps)]
        if mismatched:
            logger.warning(f"{len(mismatched)} tracks declare a frame rate other than {self.run_config.fps:g} fps")
        ungrouped = [track.name for track in tracks if track.group is None]
        if ungrouped:
            logger.warning(f"{len(ungrouped)} tracks have no route_id and belong to no route group: "
                           f"{', '.join(ungrouped)}")
        logger.info(f"Loaded {len(tracks)} tracks from {data_dir}")
        return tracks

    def _filtered(self) -> List[FilteredTrack]:
        return filter_tracks(self.load_tracks(), self.run_config.predictor, self.run_config.kalman)

    def _write_report(self, report: Dict[str, Any]) -> Path:
        return write_json(report, self._out_dir(self.output.reports_dir) / self.output.report_name)

    def _write_frame_errors(self, filtered: List[FilteredTrack], weights: Dict[str, float]) -> Path:
        rows = frame_error_rows(filtered, weights, self.run_config.predictor.n_steps)
        return write_frame_errors(rows, self._out_dir(self.output.reports_dir) / self.output.frame_errors_name)

    def tune(self) -> bool:
        cfg = self.run_config
        report = tune_filtered(self._filtered(), self._w_grid(), cfg.predictor.n_steps, cfg.predictor.w_max,
                               cfg.evaluation.objective)
        logger.info(f"Tuned w={report.w:g} ({report.objective}={report.objective_value:.6g}, "
                    f"{report.n_frames} frames)")
        payload = report.model_dump(mode="json")
        payload["config"] = cfg.echo()
        self._write_report(payload)
        return False

    def evaluate(self) -> bool:
        cfg = self.run_config
        filtered = self._filtered()
        groups, warnings = evaluate_filtered(filtered, cfg.predictor.w, cfg.predictor.n_steps,
                                             cfg.evaluation.alpha)
        report = EvaluationReport(w=cfg.predictor.w, n_steps=cfg.predictor.n_steps, groups=groups,
                                  warnings=warnings, config=cfg.echo())
        for group in groups:
            log_group_summary(group)
        self._write_report(report.model_dump(mode="json"))
        self._write_frame_errors(filtered, {item.name: cfg.predictor.w for item in filtered})
        return is_degenerate(groups, groups_present(filtered))

    def loso(self) -> bool:
        cfg = self.run_config
        filtered = self._filtered()
        report = loso_filtered(filtered, self._w_grid(), cfg.predictor.n_steps, cfg.predictor.w_max,
                               cfg.evaluation.alpha, cfg.evaluation.objective)
        report.config = cfg.echo()
        logger.info(f"LOSO over {len(report.folds)} folds: w_mean={report.w_mean:.4g} w_std={report.w_std:.4g}")
        for group in report.pooled:
            log_group_summary(group, prefix="pooled ")
        self._write_report(report.model_dump(mode="json"))
        weights = {
            item.name: fold.w
            for fold in report.folds
            for item in filtered
            if item.subject_id == fold.held_out_subject
        }
        self._write_frame_errors(filtered, weights)
        return is_degenerate(report.pooled, groups_present(filtered))
