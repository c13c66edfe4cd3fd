"""Input validation helpers for the estimator API."""

from __future__ import annotations

import numpy as np

__all__ = ["check_frame_array", "check_matching_frames"]


def check_frame_array(x, name: str = "X", n_features: int | None = None) -> np.ndarray:
    """Validate a stacked frame batch: float64 (n_frames, n_features, n_steps),
    finite, with an even feature count (real halves over imaginary halves)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"{name} must be 3-D (n_frames, n_features, n_steps), got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} contains no frames")
    if arr.shape[1] % 2 != 0:
        raise ValueError(f"{name} feature count must be even (real/imag stacking)")
    if n_features is not None and arr.shape[1] != n_features:
        raise ValueError(f"{name} has {arr.shape[1]} features, expected {n_features}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_matching_frames(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate an (input, target) pair of stacked frame batches."""
    x = check_frame_array(x, "X")
    y = check_frame_array(y, "y", n_features=x.shape[1])
    if x.shape != y.shape:
        raise ValueError(f"X and y shapes differ: {x.shape} vs {y.shape}")
    return x, y
