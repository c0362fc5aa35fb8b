"""
Output files for experiment runs

CSV tables start with a '#' comment header echoing the tool version, the
resolved config and the master seed. Files are written atomically.
"""
import io
import logging
import os
from typing import Dict, Optional

import pandas as pd

from .. import __version__

logger = logging.getLogger("cointurn.output")

DEFAULT_OUTPUT_DIR = "output"
FLOAT_FORMAT = "%.12g"


def get_output_dir() -> str:
    return os.getenv("COINTURN_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)


def resolve_output_path(out: Optional[str], default_name: str) -> str:
    """Explicit paths are kept; bare file names go under the output directory"""
    name = out or default_name
    if os.path.dirname(name) or os.path.isabs(name):
        return name
    return os.path.join(get_output_dir(), name)


def _ensure_parent_dir(file_path):
    parent = os.path.dirname(file_path)
    if parent:
        os.makedirs(parent, exist_ok=True)


def _atomic_write(file_path, content):
    _ensure_parent_dir(file_path)
    temp_path = f"{file_path}.tmp"
    with open(temp_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(content)
    os.replace(temp_path, file_path)


def render_header(config: Dict[str, str], master_seed: Optional[int] = None) -> str:
    lines = [f"# cointurn {__version__}"]
    lines.append("# config: " + " ".join(f"{key}={value}" for key, value in config.items()))
    if master_seed is not None:
        lines.append(f"# master_seed: {master_seed}")
    return "\n".join(lines) + "\n"


def render_csv(frame: pd.DataFrame, config: Dict[str, str], master_seed: Optional[int] = None) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return render_header(config, master_seed) + buffer.getvalue()


def write_csv(file_path: str, frame: pd.DataFrame, config: Dict[str, str],
              master_seed: Optional[int] = None) -> str:
    _atomic_write(file_path, render_csv(frame, config, master_seed))
    logger.info(f"Wrote {len(frame)} rows to {file_path}")
    return file_path


def write_text(file_path: str, content: str) -> str:
    _atomic_write(file_path, content)
    logger.info(f"Wrote {file_path}")
    return file_path


def read_csv(file_path: str) -> pd.DataFrame:
    """Read a table written by write_csv, skipping the comment header"""
    return pd.read_csv(file_path, comment="#")


def read_header(file_path: str) -> Dict[str, str]:
    header = {}
    with open(file_path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if body.startswith("cointurn "):
                header["version"] = body.split(" ", 1)[1]
            elif ":" in body:
                key, value = body.split(":", 1)
                header[key.strip()] = value.strip()
    return header
