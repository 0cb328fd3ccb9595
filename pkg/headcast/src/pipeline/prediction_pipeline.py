import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, TextIO, Tuple

import numpy as np
import pandas as pd

from headcast.src.components.dataset import (
    Track,
    check_header,
    mark_out_of_range,
    parse_frame_line,
    parse_meta_line,
    parse_track,
    read_track,
)
from headcast.src.components.headpose_predictor import FilterModels, PredictionTriple, TrackerState, step_frame
from headcast.src.config_params.config_params import RunConfig
from headcast.src.constants import META_PREFIX, PREDICTION_COLUMNS
from headcast.src.utils.common import write_text
from headcast.src.utils.exception import HeadcastException
from headcast.src.utils.logger import logger

STDIN_MARKER = "-"


@dataclass
class StreamStats:
    frames: int = 0
    predictions: int = 0
    latencies_ns: List[int] = field(default_factory=list)

    def percentile_ms(self, q: float) -> float:
        if not self.latencies_ns:
            return 0.0
        return float(np.percentile(np.asarray(self.latencies_ns, dtype=float), q)) / 1e6


def prediction_values(t: float, triple: Optional[PredictionTriple]) -> List[float]:
    """One output row; frames without a prediction get NaN positions."""
    if triple is None:
        return [t] + [math.nan] * (len(PREDICTION_COLUMNS) - 1)
    return [
        t,
        triple.estimated.x, triple.estimated.y, triple.estimated.z,
        triple.baseline.x, triple.baseline.y, triple.baseline.z,
        triple.proposed.x, triple.proposed.y, triple.proposed.z,
    ]


def format_row(values: List[float]) -> str:
    return ",".join(format(value, ".9g") for value in values)


class PredictionPipeline:
    """
    Emits positions (a), (b) and (c) for every frame of a track, either for a
    whole file or line by line from a stream. Both modes share step_frame.
    """

    def __init__(self, run_config: RunConfig):
        self.run_config = run_config
        self.predictor = run_config.predictor
        self.operating_range = run_config.operating_range
        self.models = FilterModels.from_config(run_config.kalman)
        logger.info(f"Prediction pipeline ready: w={self.predictor.w:g}, N={self.predictor.n_steps}, "
                    f"fps={run_config.fps:g}")

    def predict_track(self, track: Track) -> List[Tuple[float, Optional[PredictionTriple]]]:
        if not math.isclose(track.fps, self.run_config.fps):
            logger.warning(f"Track {track.name} declares {track.fps:g} fps; filtering at {self.run_config.fps:g} fps")
        tracker = TrackerState()
        rows = []
        for frame in track.frames:
            triple, tracker = step_frame(tracker, mark_out_of_range(frame, self.operating_range),
                                         self.predictor, self.models)
            rows.append((frame.t, triple))
        return rows

    def predictions_table(self, track: Track) -> pd.DataFrame:
        return pd.DataFrame(
            [prediction_values(t, triple) for t, triple in self.predict_track(track)],
            columns=list(PREDICTION_COLUMNS),
        )

    def run_batch(self, source: str, out: Optional[Path] = None, stdin: Optional[TextIO] = None,
                  stdout: Optional[TextIO] = None) -> int:
        """
        Predicts a whole track file (or standard input for '-').

        Returns:
            int: Number of output rows.
        """
        if source == STDIN_MARKER:
            track = parse_track((stdin or sys.stdin).read())
        else:
            track = read_track(Path(source))
        table = self.predictions_table(track)
        text = table.to_csv(index=False, float_format="%.9g", na_rep="nan", lineterminator="\n")
        if out is not None:
            write_text(text, Path(out))
            logger.info(f"Wrote {len(table)} prediction rows to {out}")
        else:
            stream = stdout or sys.stdout
            stream.write(text)
            stream.flush()
        return len(table)

    def run_stream(self, lines: Iterable[str], out: TextIO) -> StreamStats:
        """
        Reads `#meta` lines, the header, then one frame per line; writes and
        flushes one prediction row per frame.
        """
        stats = StreamStats()
        header_seen = False
        last_t: Optional[float] = None
        tracker = TrackerState()
        out.write(",".join(PREDICTION_COLUMNS) + "\n")
        out.flush()
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            if not header_seen:
                if line.startswith(META_PREFIX):
                    parse_meta_line(line.rstrip("\n"), line_no)
                    continue
                check_header(line, line_no)
                header_seen = True
                continue

            started = time.perf_counter_ns()
            frame = parse_frame_line(line, line_no)
            if last_t is not None and frame.t <= last_t:
                raise HeadcastException(
                    error=ValueError(f"line {line_no}: non-monotone timestamp"),
                    error_type="TrackParseError",
                    context={"line": line_no},
                )
            last_t = frame.t
            triple, tracker = step_frame(tracker, mark_out_of_range(frame, self.operating_range),
                                         self.predictor, self.models)
            row = format_row(prediction_values(frame.t, triple))
            stats.latencies_ns.append(time.perf_counter_ns() - started)

            out.write(row + "\n")
            out.flush()
            stats.frames += 1
            stats.predictions += triple is not None

        logger.info(f"Stream finished: {stats.frames} frames, {stats.predictions} predictions, "
                    f"latency p50={stats.percentile_ms(50):.3f} ms p99={stats.percentile_ms(99):.3f} ms")
        return stats
