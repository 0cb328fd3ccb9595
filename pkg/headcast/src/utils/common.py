import os
import json
from box.exceptions import BoxValueError
import yaml
from ensure import ensure_annotations
from box import ConfigBox
from pathlib import Path
from typing import Any
from headcast.src.utils.exception import HeadcastException
from headcast.src.utils.logger import logger


def get_project_root() -> Path:
    """
    Returns the project root directory (the one holding pyproject.toml).
    """
    return Path(__file__).parent.parent.parent.parent


@ensure_annotations
def read_yaml(path_to_yaml: Path) -> ConfigBox:
    """
    Reads a YAML file and returns its contents as a ConfigBox object.

    Args:
        path_to_yaml (Path): Path to the YAML file, relative to the project root or absolute.

    Returns:
        ConfigBox: Parsed YAML content as a ConfigBox object, which allows attribute-style access.

    Raises:
        HeadcastException: If the file is empty, not found, or an error occurs during reading.
    """
    try:
        if not path_to_yaml.is_absolute() and not path_to_yaml.exists():
            path_to_yaml = get_project_root() / path_to_yaml
        if not path_to_yaml.exists():
            raise FileNotFoundError(f"No such file or directory: '{path_to_yaml}'")
        with open(path_to_yaml) as yaml_file:
            content = yaml.safe_load(yaml_file)
            if content is None:
                raise ValueError("YAML file is empty")
            logger.info(f"YAML file: {path_to_yaml} loaded successfully.")
            return ConfigBox(content)
    except BoxValueError as e:
        raise HeadcastException(
            error=e,
            error_type="EmptyYAML",
            context={"path": str(path_to_yaml)},
            log_immediately=True
        )
    except FileNotFoundError as e:
        raise HeadcastException(
            error=e,
            error_type="FileNotFound",
            context={"path": str(path_to_yaml)},
            log_immediately=True
        )
    except Exception as e:
        raise HeadcastException(
            error=e,
            error_type="YAMLReadError",
            context={"path": str(path_to_yaml)},
            log_immediately=True
        )


@ensure_annotations
def create_directories(path_to_directories: list, verbose: bool = True):
    """
    Creates directories specified in the list if they do not exist.

    Args:
        path_to_directories (list): List of directory paths to create.
        verbose (bool): If True, logs the directory creation.

    Raises:
        HeadcastException: If an error occurs while creating a directory.
    """
    for path in path_to_directories:
        try:
            os.makedirs(path, exist_ok=True)
            if verbose:
                logger.info(f"Created directory at: {path}")
        except Exception as e:
            raise HeadcastException(
                error=e,
                error_type="OutputError",
                context={"path": str(path)},
                log_immediately=True
            )


def write_text(text: str, file_path: Path) -> Path:
    """
    Writes text to a file with '\\n' line endings, creating parent directories.

    Args:
        text (str): Content to write.
        file_path (Path): Destination path.

    Returns:
        Path: The written path.

    Raises:
        HeadcastException: If the file cannot be written.
    """
    try:
        file_path = Path(file_path)
        file_path.parent.mkdir(parents=True, exist_ok=True)
        with open(file_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        return file_path
    except OSError as e:
        raise HeadcastException(
            error=e,
            error_type="OutputError",
            context={"path": str(file_path)},
            log_immediately=True
        )


def write_json(data: Any, file_path: Path) -> Path:
    """
    Writes a JSON-serialisable object, keeping insertion key order.

    Args:
        data: Dict/list to serialise.
        file_path (Path): Destination path.

    Returns:
        Path: The written path.
    """
    path = write_text(json.dumps(data, indent=2) + "\n", file_path)
    logger.info(f"JSON written to {path}")
    return path
