from pathlib import Path

CONFIG_FILEPATH = Path(__file__).resolve().parent.parent.parent / "config" / "config.yaml"

# Sensor / protocol anchors
DEFAULT_FPS = 30.0
DEFAULT_N_STEPS = 15
DEFAULT_MIN_DEPTH_M = 0.5
DEFAULT_MAX_DEPTH_M = 5.46
DEFAULT_ALPHA = 0.05
DEFAULT_HEAD_LEAD_S = 0.2

ROUTE_IDS = ("R1", "R2", "R3", "R4", "R5", "R6")
ROUTE_GROUPS = {
    "R12": ("R1", "R2"),
    "R34": ("R3", "R4"),
    "R56": ("R5", "R6"),
}

# Room in front of the camera, camera frame (x right, z depth)
ROOM_X_RANGE_M = (-3.65, 3.65)
ROOM_Z_RANGE_M = (0.0, 9.0)

TRACK_COLUMNS = (
    "t",
    "nose_x", "nose_y", "nose_z",
    "nose_qw", "nose_qx", "nose_qy", "nose_qz",
    "waist_x", "waist_y", "waist_z",
    "waist_qw", "waist_qx", "waist_qy", "waist_qz",
    "valid",
)
META_PREFIX = "#meta "
PREDICTION_COLUMNS = ("t", "ax", "ay", "az", "bx", "by", "bz", "cx", "cy", "cz")
FRAME_ERROR_COLUMNS = ("track", "t", "err_baseline_m", "err_proposed_m")
MANIFEST_FILENAME = "manifest.json"
