"""
Track CSV format, parsing, operating-range filtering and head-pose series.

A track file is UTF-8 text: optional `#meta key=value ...` lines, then the
header row, then one row per frame. Units are seconds and meters,
quaternions are scalar-first and `valid` is 0 or 1.
"""
import io
import math
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Optional, Protocol, Sequence, Tuple, TypeVar, Union

import numpy as np
import pandas as pd

from headcast.src.components.geometry import UnitQuaternion, Vec3, wrap_angles, yaws_from_quaternions
from headcast.src.config_params.config_params import OperatingRange
from headcast.src.constants import DEFAULT_FPS, META_PREFIX, ROUTE_GROUPS, ROUTE_IDS, TRACK_COLUMNS
from headcast.src.utils.common import write_text
from headcast.src.utils.exception import HeadcastException

QUATERNION_PARSE_TOLERANCE = 1e-3
# slack for decimal rounding of a norm written as exactly 1 +- tolerance
QUATERNION_ROUNDING_SLACK = 1e-12
FLOAT_FORMAT = "%.9g"


@dataclass(frozen=True)
class Frame:
    """
    One skeleton observation. Pose fields are None only for invalid frames
    whose values were not finite.
    """
    t: float
    nose_pos: Optional[Vec3]
    nose_q: Optional[UnitQuaternion]
    waist_pos: Optional[Vec3]
    waist_q: Optional[UnitQuaternion]
    valid: bool

    def __post_init__(self):
        if self.valid and None in (self.nose_pos, self.nose_q, self.waist_pos, self.waist_q):
            raise HeadcastException(
                error=ValueError("A valid frame needs every pose field."),
                error_type="InvalidArgument",
                context={"t": self.t},
            )


@dataclass(frozen=True)
class Track:
    """Frames of one (subject, route) recording."""
    subject_id: str
    route_id: Optional[str]
    frames: Tuple[Frame, ...]
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if not (math.isfinite(self.fps) and self.fps > 0):
            raise HeadcastException(error=ValueError("fps must be > 0."), error_type="InvalidArgument",
                                    context={"fps": self.fps})
        if self.route_id is not None and self.route_id not in ROUTE_IDS:
            raise HeadcastException(error=ValueError(f"Unknown route id '{self.route_id}'."),
                                    error_type="InvalidArgument", context={"route_id": self.route_id})
        times = [frame.t for frame in self.frames]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise HeadcastException(error=ValueError("Timestamps must be strictly increasing."),
                                    error_type="InvalidArgument", context={"track": self.name})

    @property
    def name(self) -> str:
        return f"s{self.subject_id}_{self.route_id}" if self.route_id else f"s{self.subject_id}"

    @property
    def group(self) -> Optional[str]:
        return route_group(self.route_id) if self.route_id else None

    def __len__(self) -> int:
        return len(self.frames)


def route_group(route_id: str) -> Optional[str]:
    """R1/R2 -> R12, R3/R4 -> R34, R5/R6 -> R56."""
    for group, members in ROUTE_GROUPS.items():
        if route_id in members:
            return group
    return None


def _parse_error(message: str, line: int) -> HeadcastException:
    return HeadcastException(
        error=ValueError(f"line {line}: {message}"),
        error_type="TrackParseError",
        context={"line": line},
    )


def _quaternion(values: np.ndarray, line: int, strict: bool) -> Optional[UnitQuaternion]:
    if not np.all(np.isfinite(values)):
        return None
    norm = float(np.linalg.norm(values))
    if abs(norm - 1.0) > QUATERNION_PARSE_TOLERANCE + QUATERNION_ROUNDING_SLACK:
        if strict:
            raise _parse_error(f"non-unit quaternion (norm {norm:.6g})", line)
        return None
    return UnitQuaternion(*(float(v) for v in values))


def _position(values: np.ndarray) -> Optional[Vec3]:
    if not np.all(np.isfinite(values)):
        return None
    return Vec3.from_array(values)


def _frame_from_values(values: np.ndarray, line: int) -> Frame:
    t, flag = float(values[0]), values[15]
    if not math.isfinite(t):
        raise _parse_error("timestamp must be finite", line)
    if flag not in (0.0, 1.0):
        raise _parse_error("valid must be 0 or 1", line)
    valid = flag == 1.0
    nose_pos, waist_pos = _position(values[1:4]), _position(values[8:11])
    nose_q = _quaternion(values[4:8], line, strict=valid)
    waist_q = _quaternion(values[11:15], line, strict=valid)
    fields = (nose_pos, nose_q, waist_pos, waist_q)
    if valid and None in fields:
        raise _parse_error("valid frame with non-finite field", line)
    if not valid and None in fields:
        nose_pos = nose_q = waist_pos = waist_q = None
    return Frame(t=t, nose_pos=nose_pos, nose_q=nose_q, waist_pos=waist_pos, waist_q=waist_q, valid=valid)


def _check_field_count(cells: Sequence[str], line_no: int) -> None:
    if len(cells) != len(TRACK_COLUMNS):
        raise _parse_error(f"expected {len(TRACK_COLUMNS)} fields, saw {len(cells)}", line_no)


def parse_frame_line(line: str, line_no: int) -> Frame:
    """Decodes one data row of the track CSV."""
    cells = line.strip().split(",")
    _check_field_count(cells, line_no)
    try:
        values = np.array([float(cell) for cell in cells])
    except ValueError:
        raise _parse_error("non-numeric field", line_no)
    return _frame_from_values(values, line_no)


def parse_meta_line(line: str, line_no: int) -> Dict[str, str]:
    meta = {}
    for pair in line[len(META_PREFIX):].split():
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise _parse_error(f"malformed meta entry '{pair}'", line_no)
        meta[key] = value
    return meta


def check_header(line: str, line_no: int) -> None:
    if tuple(cell.strip() for cell in line.strip().split(",")) != TRACK_COLUMNS:
        raise _parse_error("malformed header", line_no)


def _meta_fps(meta: Dict[str, str], line_no: int) -> float:
    try:
        return float(meta.get("fps", DEFAULT_FPS))
    except ValueError:
        raise _parse_error("fps must be numeric", line_no)


def parse_track(content: Union[bytes, str]) -> Track:
    """
    Parses track file content.

    Raises:
        HeadcastException: TrackParseError naming the offending line for a malformed
            header, bad fields, non-monotone timestamps or a non-unit quaternion.
    """
    if isinstance(content, bytes):
        try:
            text = content.decode("utf-8")
        except UnicodeDecodeError as e:
            raise _parse_error("invalid UTF-8", content.count(b"\n", 0, e.start) + 1)
    else:
        text = content
    lines = text.splitlines()
    meta: Dict[str, str] = {}
    header_index = 0
    while header_index < len(lines) and lines[header_index].startswith(META_PREFIX):
        meta.update(parse_meta_line(lines[header_index], header_index + 1))
        header_index += 1
    header_line = header_index + 1
    if header_index >= len(lines):
        raise _parse_error("malformed header", header_line)
    check_header(lines[header_index], header_line)
    for offset, row in enumerate(lines[header_index + 1:]):
        if row.strip():
            _check_field_count(row.split(","), header_line + 1 + offset)

    try:
        table = pd.read_csv(io.StringIO("\n".join(lines[header_index:])), dtype=str, index_col=False,
                            keep_default_na=False, skipinitialspace=True)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line = header_index + int(match.group(1)) if match else header_line
        raise _parse_error(f"malformed row ({e})", line)

    numeric = table.apply(pd.to_numeric, errors="coerce")
    literal = table.apply(lambda column: column.str.strip().str.lower())
    bad_cells = numeric.isna() & literal.ne("nan")
    if bad_cells.to_numpy().any():
        row = int(np.flatnonzero(bad_cells.to_numpy().any(axis=1))[0])
        raise _parse_error("non-numeric field", header_line + 1 + row)

    values = numeric.to_numpy(dtype=float)
    frames: List[Frame] = []
    for row, row_values in enumerate(values):
        line = header_line + 1 + row
        frame = _frame_from_values(row_values, line)
        if frames and frame.t <= frames[-1].t:
            raise _parse_error("non-monotone timestamp", line)
        frames.append(frame)

    route_id = meta.get("route_id") or None
    if route_id is not None and route_id not in ROUTE_IDS:
        raise _parse_error(f"unknown route_id '{route_id}'", 1)
    return Track(
        subject_id=meta.get("subject_id", "unknown"),
        route_id=route_id,
        frames=tuple(frames),
        fps=_meta_fps(meta, 1),
    )


def read_track(path: Path) -> Track:
    try:
        content = Path(path).read_bytes()
    except OSError as e:
        raise HeadcastException(error=e, error_type="TrackReadError", context={"path": str(path)})
    try:
        return parse_track(content)
    except HeadcastException as e:
        e.context.setdefault("path", str(path))
        raise


def track_arrays(track: Track) -> Dict[str, np.ndarray]:
    """Column arrays of a track; absent pose fields become NaN."""
    count = len(track.frames)
    columns = {name: np.full(count, np.nan) for name in TRACK_COLUMNS}
    for index, frame in enumerate(track.frames):
        columns["t"][index] = frame.t
        columns["valid"][index] = 1.0 if frame.valid else 0.0
        for prefix, position, quaternion in (
            ("nose", frame.nose_pos, frame.nose_q),
            ("waist", frame.waist_pos, frame.waist_q),
        ):
            if position is not None:
                columns[f"{prefix}_x"][index] = position.x
                columns[f"{prefix}_y"][index] = position.y
                columns[f"{prefix}_z"][index] = position.z
            if quaternion is not None:
                columns[f"{prefix}_qw"][index] = quaternion.qw
                columns[f"{prefix}_qx"][index] = quaternion.qx
                columns[f"{prefix}_qy"][index] = quaternion.qy
                columns[f"{prefix}_qz"][index] = quaternion.qz
    return columns


def serialize_track(track: Track) -> str:
    """Track CSV text with up to 9 significant digits per number."""
    meta = [f"subject_id={track.subject_id}"]
    if track.route_id:
        meta.append(f"route_id={track.route_id}")
    meta.append(f"fps={track.fps:.9g}")
    table = pd.DataFrame(track_arrays(track), columns=list(TRACK_COLUMNS))
    table["valid"] = table["valid"].astype(np.int64)
    body = table.to_csv(index=False, float_format=FLOAT_FORMAT, na_rep="nan", lineterminator="\n")
    return META_PREFIX + " ".join(meta) + "\n" + body


def write_track(track: Track, path: Path) -> Path:
    return write_text(serialize_track(track), Path(path))


def mark_out_of_range(frame: Frame, operating_range: OperatingRange) -> Frame:
    """Invalidates a frame whose nose depth lies outside the closed operating range."""
    if not frame.valid:
        return frame
    if operating_range.min_depth <= frame.nose_pos.z <= operating_range.max_depth:
        return frame
    return replace(frame, valid=False)


def filter_operating_range(track: Track, operating_range: OperatingRange) -> Track:
    """Marks frames whose nose depth lies outside [min_depth, max_depth] as invalid."""
    return replace(track, frames=tuple(mark_out_of_range(frame, operating_range) for frame in track.frames))


def head_pose_series(track: Track) -> List[Optional[float]]:
    """
    Per-frame head pose (nose yaw relative to waist yaw); None for invalid
    frames and frames with a degenerate orientation.
    """
    columns = track_arrays(track)
    nose_q = np.column_stack([columns[f"nose_q{c}"] for c in "wxyz"])
    waist_q = np.column_stack([columns[f"waist_q{c}"] for c in "wxyz"])
    series = wrap_angles(yaws_from_quaternions(nose_q) - yaws_from_quaternions(waist_q))
    valid = columns["valid"] == 1.0
    return [float(value) if ok and math.isfinite(value) else None for value, ok in zip(series, valid)]


class Grouped(Protocol):
    @property
    def group(self) -> Optional[str]: ...


G = TypeVar("G", bound=Grouped)


def tracks_in_group(tracks: Sequence[G], group: str) -> List[G]:
    """Tracks, raw or filtered, whose route belongs to the group; input order is kept."""
    return [track for track in tracks if track.group == group]
