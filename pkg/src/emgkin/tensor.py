"""Dense array arithmetic used by every other module.

All tensors are plain row-major ``numpy.ndarray`` objects; this module adds
the shape-checked operations the rest of the pipeline relies on, plus a
process-wide precision switch. Production code runs in 32-bit; gradient
checks flip to 64-bit where finite differences need the headroom.
"""

from __future__ import annotations

import contextlib
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionError

PRODUCTION_DTYPE = np.float32
VERIFICATION_DTYPE = np.float64

_current_dtype = PRODUCTION_DTYPE


def default_dtype() -> np.dtype:
    """Dtype newly created tensors use under the current precision mode."""
    return np.dtype(_current_dtype)


def set_precision(mode: str) -> None:
    """Switch the process-wide precision mode ("f32" or "f64")."""
    global _current_dtype
    if mode == "f32":
        _current_dtype = PRODUCTION_DTYPE
    elif mode == "f64":
        _current_dtype = VERIFICATION_DTYPE
    else:
        raise ValueError(f"unknown precision mode {mode!r}")


@contextlib.contextmanager
def precision(mode: str) -> Iterator[None]:
    """Temporarily switch precision, e.g. ``with precision("f64"): ...``."""
    previous = "f64" if _current_dtype == VERIFICATION_DTYPE else "f32"
    set_precision(mode)
    try:
        yield
    finally:
        set_precision(previous)


def tensor(values, dtype=None) -> np.ndarray:
    """Build an array at the current (or given) precision."""
    return np.asarray(values, dtype=dtype or default_dtype())


def zeros(shape, dtype=None) -> np.ndarray:
    return np.zeros(shape, dtype=dtype or default_dtype())


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul shapes incompatible: {tuple(a.shape)} x {tuple(b.shape)}"
        )
    return a @ b


def _check_same_shape(op: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(
            f"{op} requires identical shapes, got {tuple(a.shape)} vs {tuple(b.shape)}"
        )


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    _check_same_shape("add", a, b)
    return a + b


def sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    _check_same_shape("sub", a, b)
    return a - b


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise (Hadamard) product."""
    a, b = np.asarray(a), np.asarray(b)
    _check_same_shape("mul", a, b)
    return a * b


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic sigmoid 1 / (1 + exp(-x)), overflow-safe in both branches."""
    x = np.asarray(x)
    out = np.empty_like(x, dtype=x.dtype if x.dtype.kind == "f" else default_dtype())
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(np.asarray(x))


def reshape(a: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Row-major reshape; element counts must agree exactly."""
    a = np.asarray(a)
    if int(np.prod(shape)) != a.size:
        raise DimensionError(
            f"cannot reshape {a.size} elements into {tuple(shape)}"
        )
    return a.reshape(shape)


def concat(parts: Sequence[np.ndarray], axis: int = 0) -> np.ndarray:
    """Concatenate along ``axis``; all other dimensions must match."""
    arrays = [np.asarray(p) for p in parts]
    if not arrays:
        raise DimensionError("concat requires at least one part")
    ref = arrays[0].shape
    for arr in arrays[1:]:
        if arr.ndim != len(ref) or any(
            s != r for i, (s, r) in enumerate(zip(arr.shape, ref)) if i != axis
        ):
            raise DimensionError(
                f"concat shapes incompatible along axis {axis}: "
                f"{[tuple(a.shape) for a in arrays]}"
            )
    return np.concatenate(arrays, axis=axis)
