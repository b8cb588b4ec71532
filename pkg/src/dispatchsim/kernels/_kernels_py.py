"""Pure-Python reference kernels for the hot candidate scans.

These are the fallback used when the compiled extension is unavailable.
Semantics (including first-index tie-breaking) must match the compiled
versions exactly; `tests/test_kernels.py` enforces this.  Inputs are
numpy arrays, so the scans vectorize; np.argmin picks the first minimal
index, matching the compiled tie-break.
"""

from __future__ import annotations

import numpy as np


def nearest_index(xs: np.ndarray, ys: np.ndarray, ax: float, ay: float) -> int:
    """Index of the candidate with minimal L1 distance to (ax, ay).

    Ties resolve to the first (lowest) index.  Returns -1 on empty input.
    """
    n = len(xs)
    if n == 0:
        return -1
    d = np.abs(np.asarray(xs) - ax) + np.abs(np.asarray(ys) - ay)
    return int(np.argmin(d))


def nearest_index_masked(
    xs: np.ndarray,
    ys: np.ndarray,
    eligible: np.ndarray,
    ax: float,
    ay: float,
) -> int:
    """Like nearest_index but only over candidates with a truthy mask entry."""
    n = len(xs)
    if n == 0:
        return -1
    mask = np.asarray(eligible, dtype=bool)
    if not mask.any():
        return -1
    d = np.abs(np.asarray(xs) - ax) + np.abs(np.asarray(ys) - ay)
    d = np.where(mask, d, np.inf)
    return int(np.argmin(d))
