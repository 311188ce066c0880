"""Finite-difference verification of analytic gradients.

Checks run in float64 regardless of the training dtype; the ops preserve
dtype, so evaluating a float64 point exercises the same code paths at
higher precision.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


def grad_check(
    f: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    eps: float = 1e-5,
) -> float:
    """Max relative error between f's analytic gradient and central differences.

    ``f(x)`` must return ``(scalar_value, gradient_like_x)``.  The error at
    each coordinate is |analytic - fd| / max(1, |fd|); the maximum over
    coordinates is returned.
    """
    x = np.asarray(point, dtype=np.float64)
    value, analytic = f(x)
    analytic = np.asarray(analytic, dtype=np.float64)
    if not np.isfinite(value) or not np.all(np.isfinite(analytic)):
        raise FloatingPointError("non-finite value or gradient at the check point")
    if analytic.shape != x.shape:
        raise ValueError(f"gradient shape {analytic.shape} != point shape {x.shape}")

    flat = x.ravel()
    fd = np.empty_like(flat)
    for i in range(flat.size):
        saved = flat[i]
        flat[i] = saved + eps
        up, _ = f(x)
        flat[i] = saved - eps
        down, _ = f(x)
        flat[i] = saved
        fd[i] = (up - down) / (2 * eps)
    if not np.all(np.isfinite(fd)):
        raise FloatingPointError("non-finite central-difference evaluation")
    fd = fd.reshape(x.shape)
    rel = np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd))
    return float(rel.max())
