"""
Utility functions for input digests, uploads and report writing
"""

import hashlib
import json
import os
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from utils.logger_config import get_logger

# Get logger for this module
logger = get_logger("file_utils")


def file_sha256(path, request_id: Optional[str] = None) -> str:
    """Hex sha256 digest of a file's contents"""
    if not os.path.exists(path):
        logger.error(f"File not found: {path}", extra={"request_id": request_id})
        raise FileNotFoundError(f"File not found: {path}")
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def save_uploaded_file(uploaded_file, destination_folder: str, filename: Optional[str] = None,
                       request_id: Optional[str] = None) -> str:
    """Save an uploaded file to the specified destination folder"""
    start_time = time.time()
    logger.info(f"Saving uploaded file: {uploaded_file.filename}", extra={"request_id": request_id})

    try:
        os.makedirs(destination_folder, exist_ok=True)
        if not filename:
            file_ext = os.path.splitext(uploaded_file.filename or "")[1]
            filename = f"uploaded_candles_{os.urandom(4).hex()}{file_ext}"

        file_path = os.path.join(destination_folder, filename)
        with open(file_path, "wb") as buffer:
            file_content = uploaded_file.file.read()
            buffer.write(file_content)
            file_size_kb = len(file_content) / 1024

        logger.info(f"Saved uploaded file to {file_path}, size: {file_size_kb:.2f}KB, "
                    f"time: {time.time() - start_time:.3f}s", extra={"request_id": request_id})
        return file_path

    except Exception as e:
        logger.error(f"Error saving uploaded file: {str(e)}", extra={"request_id": request_id}, exc_info=True)
        raise


def create_file_data_dict(path: str, request_id: Optional[str] = None) -> Dict[str, Any]:
    """Create a dictionary describing an input file for API responses"""
    try:
        stats = os.stat(path)
        return {
            "file_name": os.path.basename(path),
            "file_size_kb": round(stats.st_size / 1024, 2),
            "sha256": file_sha256(path, request_id),
        }
    except Exception as e:
        logger.error(f"Error creating file data dict: {str(e)}", extra={"request_id": request_id}, exc_info=True)
        return {"file_name": os.path.basename(path), "error": str(e)}


def write_json(data: Any, path) -> Path:
    """Deterministic JSON: sorted keys, trailing newline"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def write_csv(rows: List[Dict[str, Any]], path, columns: Optional[List[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path
