"""
PNG and PFM readers/writers for frames and depth maps.
Images are float arrays in [0, 1] with shape (H, W, 3); depths are float32 (H, W).
"""
import os
import re

import numpy as np
from PIL import Image

from src.utils.errors import DatasetIOError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


def save_png(image: np.ndarray, file_path: str):
    """Quantizes an (H, W, 3) float image in [0, 1] to 8-bit RGB."""
    data = np.clip(np.round(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    try:
        Image.fromarray(data, mode="RGB").save(file_path, format="PNG")
    except OSError as e:
        raise DatasetIOError(f"Could not write PNG {file_path}: {e}") from e


def save_mask_png(mask: np.ndarray, file_path: str):
    data = (np.asarray(mask, dtype=bool).astype(np.uint8) * 255)
    try:
        Image.fromarray(data, mode="L").save(file_path, format="PNG")
    except OSError as e:
        raise DatasetIOError(f"Could not write PNG {file_path}: {e}") from e


def load_png(file_path: str) -> np.ndarray:
    if not os.path.exists(file_path):
        raise DatasetIOError(f"PNG not found: {file_path}")
    try:
        with Image.open(file_path) as img:
            data = np.asarray(img.convert("RGB"), dtype=np.float32)
    except OSError as e:
        raise DatasetIOError(f"Could not read PNG {file_path}: {e}") from e
    return data / 255.0


def save_pfm(depth: np.ndarray, file_path: str):
    """
    Writes a single-channel little-endian PFM.
    PFM stores rows bottom-to-top; a negative scale marks little-endian data.
    """
    data = np.asarray(depth, dtype="<f4")
    if data.ndim != 2:
        raise DatasetIOError(f"PFM expects a 2D depth map, got shape {data.shape} for {file_path}")
    height, width = data.shape
    try:
        with open(file_path, "wb") as f:
            f.write(b"Pf\n")
            f.write(f"{width} {height}\n".encode("ascii"))
            f.write(b"-1.0\n")
            f.write(np.flipud(data).tobytes())
    except OSError as e:
        raise DatasetIOError(f"Could not write PFM {file_path}: {e}") from e


def load_pfm(file_path: str) -> np.ndarray:
    if not os.path.exists(file_path):
        raise DatasetIOError(f"PFM not found: {file_path}")
    try:
        with open(file_path, "rb") as f:
            header = f.readline().decode("ascii").strip()
            if header != "Pf":
                raise DatasetIOError(f"Unsupported PFM header '{header}' in {file_path}")
            dims = re.match(r"^(\d+)\s+(\d+)\s*$", f.readline().decode("ascii"))
            if not dims:
                raise DatasetIOError(f"Malformed PFM dimensions in {file_path}")
            width, height = int(dims.group(1)), int(dims.group(2))
            scale = float(f.readline().decode("ascii").strip())
            dtype = "<f4" if scale < 0 else ">f4"
            data = np.frombuffer(f.read(), dtype=dtype)
    except (OSError, UnicodeDecodeError, ValueError) as e:
        raise DatasetIOError(f"Could not read PFM {file_path}: {e}") from e

    if data.size != width * height:
        raise DatasetIOError(f"PFM {file_path} holds {data.size} values, expected {width * height}")
    return np.flipud(data.reshape(height, width)).astype(np.float32)
