"""Writers and readers for the .hsc / .hsg exchange formats.

.hsc: one UTF-8 JSON header line
{"magic":"HSC1","width":W,"height":H,"bands":B,"dtype":"f32le","layout":"bsq"}
then W*H*B little-endian float32 values, band-sequential (band, row, column).

.hsg: one UTF-8 JSON header line with magic "HSG1", dtype "u16le", layout
"row-major", plus "nclass" and "class_names", then H*W little-endian uint16
labels (0 = unlabeled).
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np


class FormatError(ValueError):
    pass


def _atomic_write(path, header: dict, payload: bytes) -> None:
    """Write header line + payload via a temp file; no partial output on failure."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write((json.dumps(header) + "\n").encode("utf-8"))
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_hsc(path, values: np.ndarray) -> dict:
    """values: float32 [bands, height, width]."""
    if values.ndim != 3:
        raise FormatError(f"cube must be [bands, height, width], got shape {values.shape}")
    bands, height, width = values.shape
    header = {"magic": "HSC1", "width": width, "height": height, "bands": bands,
              "dtype": "f32le", "layout": "bsq"}
    _atomic_write(path, header, np.ascontiguousarray(values, dtype="<f4").tobytes())
    return header


def write_hsg(path, labels: np.ndarray, nclass: int, class_names: list[str]) -> dict:
    """labels: uint16 [height, width]; ids 0..nclass with 0 = unlabeled."""
    if labels.ndim != 2:
        raise FormatError(f"labels must be 2-D, got shape {labels.shape}")
    height, width = labels.shape
    header = {"magic": "HSG1", "width": width, "height": height, "dtype": "u16le",
              "layout": "row-major", "nclass": int(nclass),
              "class_names": list(class_names)}
    _atomic_write(path, header, np.ascontiguousarray(labels, dtype="<u2").tobytes())
    return header


def _read(path, magic: str):
    with open(path, "rb") as fh:
        line = fh.readline()
        try:
            header = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: unreadable header: {exc}") from exc
        if header.get("magic") != magic:
            raise FormatError(f"{path}: expected magic {magic!r}, got {header.get('magic')!r}")
        payload = fh.read()
    return header, payload


def read_hsc(path) -> tuple[dict, np.ndarray]:
    header, payload = _read(path, "HSC1")
    w, h, b = int(header["width"]), int(header["height"]), int(header["bands"])
    if len(payload) != w * h * b * 4:
        raise FormatError(f"{path}: payload {len(payload)} bytes, expected {w * h * b * 4}")
    return header, np.frombuffer(payload, dtype="<f4").reshape(b, h, w)


def read_hsg(path) -> tuple[dict, np.ndarray]:
    header, payload = _read(path, "HSG1")
    w, h = int(header["width"]), int(header["height"])
    if len(payload) != w * h * 2:
        raise FormatError(f"{path}: payload {len(payload)} bytes, expected {w * h * 2}")
    return header, np.frombuffer(payload, dtype="<u2").reshape(h, w)
