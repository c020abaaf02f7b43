"""Shared text and binary encoding helpers for traces and model files."""

from __future__ import annotations

import base64

import numpy as np


def fmt_float(x: float) -> str:
    """Shortest round-trip decimal form of a float (repr semantics).

    Trace and metric files must be byte-identical across runs with the
    same seed, so every float goes through this one formatter.
    """
    return repr(float(x))


def encode_f64(a: np.ndarray) -> str:
    """Base64 text of a float64 array's little-endian bytes (C order)."""
    a = np.ascontiguousarray(a, dtype="<f8")
    return base64.b64encode(a.tobytes()).decode("ascii")


def decode_f64(text: str, shape: tuple[int, ...]) -> np.ndarray:
    """Inverse of encode_f64; raises ValueError on a size mismatch."""
    raw = base64.b64decode(text.encode("ascii"), validate=True)
    a = np.frombuffer(raw, dtype="<f8")
    expected = int(np.prod(shape)) if shape else 1
    if a.size != expected:
        raise ValueError(f"decoded {a.size} floats, expected {expected} for shape {shape}")
    return a.reshape(shape).astype(np.float64, copy=True)
