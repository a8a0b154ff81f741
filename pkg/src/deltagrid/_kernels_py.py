"""Pure-numpy implementations of the hot kernels.

Selected by :mod:`deltagrid.kernels` when the compiled extension is missing
or disabled. Membership predicates evaluate the exact same float expressions
in the same order as the compiled versions, so the two backends agree
bit-for-bit on every boolean output. Mass sums may differ from the compiled
backend in the last ulp when weights are not exactly representable dyadics
(numpy uses pairwise summation); all shipped fixtures use dyadic weights,
for which both orders are exact.
"""

from __future__ import annotations

import numpy as np


def interval_cover(kmin: np.ndarray, kmax: np.ndarray, n: int) -> np.ndarray:
    """Mark cells covered by any of the closed index ranges [kmin_i, kmax_i].

    Ranges are clipped to [0, n). Returns a bool array of length n.
    """
    marks = np.zeros(n + 1, dtype=np.int64)
    lo = np.clip(kmin, 0, n)
    hi = np.clip(kmax + 1, 0, n)
    keep = lo < hi
    np.add.at(marks, lo[keep], 1)
    np.add.at(marks, hi[keep], -1)
    return np.cumsum(marks[:-1]) > 0


def strip_raster(
    nx: float,
    ny: float,
    c: float,
    rprime: float,
    x0: float,
    y0: float,
    step: float,
    ncx: int,
    ncy: int,
) -> np.ndarray:
    """Cells whose center satisfies |nx*cx + (ny*cy + c)| < rprime.

    Cell (i, j) has center cx = (i + 0.5)*step + x0, cy = (j + 0.5)*step + y0.
    Returns a bool array of shape (ncx, ncy).
    """
    cx = (np.arange(ncx, dtype=np.float64) + 0.5) * step + x0
    cy = (np.arange(ncy, dtype=np.float64) + 0.5) * step + y0
    t = nx * cx[:, None] + (ny * cy[None, :] + c)
    return np.abs(t) < rprime
