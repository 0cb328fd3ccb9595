from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from box import ConfigBox

from headcast.src.components.headpose_predictor import steps_for_delay
from headcast.src.constants import CONFIG_FILEPATH, DEFAULT_FPS, ROUTE_IDS
from headcast.src.config_params.config_params import (
    EvalConfig,
    KalmanConfig,
    OperatingRange,
    OutputConfig,
    PredictorConfig,
    RouteSpec,
    RunConfig,
    SimConfig,
)
from headcast.src.utils.common import get_project_root, read_yaml
from headcast.src.utils.exception import HeadcastException, configuration_error
from headcast.src.utils.logger import configure_logging, logger


class ConfigManager:
    """
    A configuration manager that reads the config file and provides validated
    configurations for the filters, the predictor, the simulator and the evaluation.
    """

    REQUIRED_SECTIONS = {"kalman", "predictor", "operating_range", "simulation", "evaluation"}

    def __init__(self, config_filepath: Path = CONFIG_FILEPATH):
        """
        Initializes the ConfigManager by loading the configuration file.

        Args:
            config_filepath (Path): Path to the configuration YAML file.

        Raises:
            HeadcastException: If the configuration file is empty, invalid, or missing required sections.
        """
        self.config_filepath = Path(config_filepath)
        self.config = self._load_config()
        self._apply_logging()

    def _load_config(self) -> ConfigBox:
        """
        Loads and validates the configuration from the YAML file. A user file is
        layered section by section over the packaged config.yaml.

        Returns:
            ConfigBox: Loaded configuration object.
        """
        config = read_yaml(Path(CONFIG_FILEPATH))
        if self.config_filepath.resolve() != Path(CONFIG_FILEPATH).resolve():
            user_config = read_yaml(self.config_filepath)
            for name, section in user_config.items():
                if isinstance(section, dict) and isinstance(config.get(name), dict):
                    merged = dict(config[name])
                    merged.update(section)
                    config[name] = merged
                else:
                    config[name] = section
        missing_sections = self.REQUIRED_SECTIONS - set(config.keys())
        if missing_sections:
            raise configuration_error(
                f"Missing required config sections: {sorted(missing_sections)}",
                path=str(self.config_filepath),
            )
        return config

    def _apply_logging(self) -> None:
        section = self._section("logging")
        log_dir = section.get("log_dir")
        if log_dir and not Path(log_dir).is_absolute():
            section["log_dir"] = str(get_project_root() / log_dir)
        try:
            configure_logging(section)
        except (TypeError, ValueError) as e:
            raise configuration_error(f"Invalid 'logging' configuration: {e}")

    def _section(self, name: str) -> Dict[str, Any]:
        section = self.config.get(name) or {}
        return dict(section)

    @staticmethod
    def _pick(section: Dict[str, Any], keys: List[str]) -> Dict[str, Any]:
        return {key: section[key] for key in keys if key in section}

    def get_fps(self) -> float:
        return float(self._section("predictor").get("fps", DEFAULT_FPS))

    def get_kalman_config(self, fps: Optional[float] = None) -> KalmanConfig:
        """
        Extracts the Kalman configuration; dt is derived from the frame rate.

        Returns:
            KalmanConfig: Validated filter configuration.
        """
        try:
            section = self._pick(self._section("kalman"), [
                "q_accel", "r_pos", "v_init", "q_angle", "r_angle", "angle_rate_init", "gap_reset_s",
            ])
            fps = fps if fps is not None else self.get_fps()
            return KalmanConfig(dt=1.0 / fps, **{k: float(v) for k, v in section.items()})
        except (TypeError, ValueError, ZeroDivisionError) as e:
            raise configuration_error(f"Invalid 'kalman' configuration: {e}")

    def get_predictor_config(self) -> PredictorConfig:
        """
        Extracts the predictor configuration (w, n_steps, w_max).

        Returns:
            PredictorConfig: Validated predictor configuration.
        """
        try:
            section = self._section("predictor")
            return PredictorConfig(
                w=float(section.get("w", 1.0)),
                n_steps=int(section.get("n_steps", 15)),
                w_max=float(section.get("w_max", 1.0)),
            )
        except (TypeError, ValueError) as e:
            raise configuration_error(f"Invalid 'predictor' configuration: {e}")

    def get_operating_range(self) -> OperatingRange:
        try:
            section = self._pick(self._section("operating_range"), ["min_depth", "max_depth"])
            return OperatingRange(**{k: float(v) for k, v in section.items()})
        except (TypeError, ValueError) as e:
            raise configuration_error(f"Invalid 'operating_range' configuration: {e}")

    def get_sim_config(self) -> SimConfig:
        """
        Extracts the simulator configuration.

        Returns:
            SimConfig: Validated simulator configuration.
        """
        try:
            section = self._section("simulation")
            values = self._pick(section, [
                "head_lead_s", "head_overshoot", "noise_pos", "noise_yaw", "fps", "duration_s",
            ])
            kwargs: Dict[str, Any] = {k: float(v) for k, v in values.items()}
            if "seed" in section:
                kwargs["seed"] = int(section["seed"])
            if "speed_range" in section:
                low, high = section["speed_range"]
                kwargs["speed_range"] = (float(low), float(high))
            return SimConfig(**kwargs)
        except (TypeError, ValueError) as e:
            raise configuration_error(f"Invalid 'simulation' configuration: {e}")

    def get_n_subjects(self) -> int:
        return int(self._section("simulation").get("n_subjects", 14))

    def get_routes(self) -> List[RouteSpec]:
        """
        Extracts the route table (R1-R6 analogues) from the 'simulation' section.

        Returns:
            List[RouteSpec]: Validated routes, in file order.
        """
        try:
            routes = []
            for entry in self._section("simulation").get("routes", []):
                start_x, start_z = entry["start"]
                routes.append(RouteSpec(
                    route_id=str(entry["route_id"]),
                    kind=str(entry["kind"]),
                    path_length=float(entry["path_length"]),
                    start=(float(start_x), float(start_z)),
                    heading=float(entry.get("heading", 0.0)),
                    turn_angle=float(entry.get("turn_angle", 0.0)),
                    turn_start_s=float(entry.get("turn_start_s", 0.0)),
                    turn_duration_s=float(entry.get("turn_duration_s", 0.0)),
                ))
            if not routes:
                raise ValueError("no routes defined")
            return routes
        except (KeyError, TypeError, ValueError) as e:
            raise configuration_error(f"Invalid 'simulation.routes' configuration: {e}")

    def get_eval_config(self) -> EvalConfig:
        try:
            section = self._section("evaluation")
            return EvalConfig(
                w_step=float(section.get("w_step", 0.05)),
                alpha=float(section.get("alpha", 0.05)),
                objective=str(section.get("objective", "frame_sum")),
            )
        except (TypeError, ValueError) as e:
            raise configuration_error(f"Invalid 'evaluation' configuration: {e}")

    def get_output_config(self) -> OutputConfig:
        try:
            section = self._pick(self._section("output"), [
                "dataset_dir", "reports_dir", "report_name", "frame_errors_name",
            ])
            return OutputConfig(**{k: str(v) for k, v in section.items()})
        except (TypeError, ValueError) as e:
            raise configuration_error(f"Invalid 'output' configuration: {e}")

    @staticmethod
    def resolve_routes(selection: Union[str, Sequence[str], None]) -> List[str]:
        """
        Expands a --routes value: comma-separated ids, 'straight' (R1), 'turn' (R3) or 'all'.
        """
        if isinstance(selection, (list, tuple)):
            selection = ",".join(selection)
        if selection is None or selection.strip() == "" or selection.strip() == "all":
            return list(ROUTE_IDS)
        aliases = {"straight": ["R1"], "turn": ["R3"]}
        resolved: List[str] = []
        for name in (part.strip() for part in selection.split(",")):
            ids = aliases.get(name, [name.upper()])
            for route_id in ids:
                if route_id not in ROUTE_IDS:
                    raise configuration_error(f"Unknown route '{name}'.", routes=selection)
                if route_id not in resolved:
                    resolved.append(route_id)
        return resolved

    def get_run_config(self, command: str, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        """
        Builds the effective run configuration: flags > config file > built-in defaults.

        Args:
            command (str): One of simulate, predict, tune, evaluate, loso.
            overrides (Optional[Dict]): Flag values; None entries are ignored.

        Returns:
            RunConfig: The validated effective configuration.
        """
        flags = {k: v for k, v in (overrides or {}).items() if v is not None}
        try:
            fps = float(flags.get("fps", self.get_fps()))
            kalman = self.get_kalman_config(fps=fps)

            predictor = self.get_predictor_config()
            predictor_changes: Dict[str, Any] = {}
            if "w" in flags:
                predictor_changes["w"] = float(flags["w"])
            if "w_max" in flags:
                predictor_changes["w_max"] = float(flags["w_max"])
            if "n_steps" in flags:
                predictor_changes["n_steps"] = int(flags["n_steps"])
            elif "delay_s" in flags:
                predictor_changes["n_steps"] = steps_for_delay(float(flags["delay_s"]), fps)
            if predictor_changes:
                merged = {"w": predictor.w, "n_steps": predictor.n_steps, "w_max": predictor.w_max}
                merged.update(predictor_changes)
                if "w" not in predictor_changes and merged["w"] > merged["w_max"]:
                    merged["w"] = merged["w_max"]
                predictor = PredictorConfig(**merged)

            simulation = self.get_sim_config()
            sim_changes: Dict[str, Any] = {"fps": fps}
            if "seed" in flags:
                sim_changes["seed"] = int(flags["seed"])
            simulation = replace(simulation, **sim_changes)

            evaluation = self.get_eval_config()
            eval_changes = {k: flags[k] for k in ("w_step", "objective", "alpha") if k in flags}
            if eval_changes:
                evaluation = replace(evaluation, **eval_changes)

            run_config = RunConfig(
                command=command,
                kalman=kalman,
                predictor=predictor,
                operating_range=self.get_operating_range(),
                simulation=simulation,
                evaluation=evaluation,
                fps=fps,
                n_subjects=int(flags.get("subjects", self.get_n_subjects())),
                routes=self.resolve_routes(flags.get("routes")),
                input_path=flags.get("input"),
                data_dir=flags.get("data"),
                out=flags.get("out"),
                stream=bool(flags.get("stream", False)),
                output=self.get_output_config(),
            )
        except HeadcastException:
            raise
        except (TypeError, ValueError) as e:
            raise configuration_error(f"Invalid run configuration: {e}", command=command)
        logger.info(f"Run configuration for '{command}' resolved from {self.config_filepath}")
        return run_config
