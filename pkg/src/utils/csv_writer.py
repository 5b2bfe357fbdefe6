import os
from typing import Dict, List

import pandas as pd

from src.utils.errors import DatasetIOError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)

FLOAT_FORMAT = "%.6f"


def write_rows(rows: List[Dict], columns: List[str], file_path: str) -> pd.DataFrame:
    """
    Writes rows to CSV with a fixed column order and float format,
    so identical results produce identical bytes.
    """
    df = pd.DataFrame(rows, columns=columns)
    directory = os.path.dirname(file_path)
    try:
        if directory:
            os.makedirs(directory, exist_ok=True)
        df.to_csv(file_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise DatasetIOError(f"Could not write CSV {file_path}: {e}") from e
    logger.info(f"Wrote {len(df)} rows to {file_path}")
    return df


def append_row(row: Dict, columns: List[str], file_path: str):
    """Appends one row, writing the header when the file is new."""
    exists = os.path.exists(file_path) and os.path.getsize(file_path) > 0
    df = pd.DataFrame([row], columns=columns)
    try:
        df.to_csv(file_path, mode="a", header=not exists, index=False,
                  float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        raise DatasetIOError(f"Could not append to CSV {file_path}: {e}") from e


def load_csv(file_path: str) -> pd.DataFrame:
    if not os.path.exists(file_path):
        raise DatasetIOError(f"File not found: {file_path}")
    return pd.read_csv(file_path)
