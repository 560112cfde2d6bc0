"""Byte-stable JSON containers for checkpoints and datasets.

Arrays are stored as base64-encoded little-endian float64 bytes so files
round-trip exactly and are identical across platforms. JSON is always
written with sorted keys and fixed separators.
"""

from __future__ import annotations

import base64
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataError


def encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return {"shape": list(arr.shape), "dtype": "float64",
            "data": base64.b64encode(data).decode("ascii")}


def decode_array(obj: dict) -> np.ndarray:
    if obj.get("dtype") != "float64":
        raise DataError(f"unsupported array dtype {obj.get('dtype')!r}")
    raw = base64.b64decode(obj["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return arr.reshape(obj["shape"])


def dump_json(path: str | Path, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_json(path: str | Path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
