"""K3 line scans (t3 = ratio * t2) and (t2, t3) grid scans at fixed t1.

Both use the quantum-collapse correlators; every value is produced by
:func:`lgdecay.correlators.k3_components`, the same path as a direct
:func:`~lgdecay.correlators.k3` call.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .correlators import k3_components
from .errors import DomainError, LGDecayError

__all__ = ["LineScan", "ScanGrid", "scan_line", "scan_grid", "DEFAULT_GRID_SIZE"]

DEFAULT_GRID_SIZE = 200


@dataclass(frozen=True)
class LineScan:
    t1: float
    ratio: float
    t2: np.ndarray
    k3: np.ndarray

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.t2.tolist(), self.k3.tolist()))

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.k3 - 1.0)))


@dataclass(frozen=True)
class ScanGrid:
    """K3 - 1 on the (t2, t3) grid; ``values`` is NaN where t3 <= t2 or evaluation failed."""

    t1: float
    t2_axis: np.ndarray
    t3_axis: np.ndarray
    values: np.ndarray
    max_point: tuple[float, float, float] | None
    min_point: tuple[float, float, float] | None
    errors: list[str] = field(default_factory=list)

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def cells(self):
        """Defined cells as (t2, t3, k3 - 1) in row-major order."""
        for i, t2 in enumerate(self.t2_axis):
            for j, t3 in enumerate(self.t3_axis):
                v = self.values[i, j]
                if not np.isnan(v):
                    yield float(t2), float(t3), float(v)


def _axis(values, name) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or len(arr) < 1 or not (np.diff(arr) > 0).all():
        raise DomainError(f"{name} must be a strictly increasing 1-d array")
    return arr


def scan_line(model, t1: float, ratio: float, t2_range: tuple[float, float], n_points: int) -> LineScan:
    """K3(t1, t2, ratio * t2) on ``n_points`` uniform t2 values spanning ``t2_range``."""
    t1 = float(t1)
    ratio = float(ratio)
    start, stop = (float(x) for x in t2_range)
    if not ratio > 1:
        raise DomainError(f"ratio must be > 1, got {ratio!r}")
    if int(n_points) != n_points or n_points < 2:
        raise DomainError(f"n_points must be an integer >= 2, got {n_points!r}")
    if not (0 <= t1 < start < stop):
        raise DomainError(f"need 0 <= t1 < t2_start < t2_stop, got t1={t1!r}, range={t2_range!r}")
    t2 = np.linspace(start, stop, int(n_points))
    c12, c23, c13 = k3_components(model, t1, t2, ratio * t2)
    return LineScan(t1=t1, ratio=ratio, t2=t2, k3=c12 + c23 - c13)


def _extreme(values, t2_axis, t3_axis, sign):
    # row-major argmax picks the smallest t2, then the smallest t3, on ties
    if not np.isfinite(values).any():
        return None
    filled = np.where(np.isnan(values), -np.inf, sign * values)
    i, j = np.unravel_index(int(np.argmax(filled)), values.shape)
    return float(t2_axis[i]), float(t3_axis[j]), float(values[i, j])


def scan_grid(model, t1: float, t2_axis, t3_axis, workers: int = 1) -> ScanGrid:
    """Fill K3 - 1 wherever t1 < t2 < t3 and locate the grid extremes.

    Rows are independent; ``workers`` > 1 fills them on a thread pool with
    identical results.  A row whose evaluation fails is masked and its error
    message recorded.
    """
    t1 = float(t1)
    t2_axis = _axis(t2_axis, "t2_axis")
    t3_axis = _axis(t3_axis, "t3_axis")
    if not 0 <= t1 < t2_axis[0]:
        raise DomainError(f"need 0 <= t1 < min(t2_axis), got t1={t1!r}")

    def row(i):
        t2 = t2_axis[i]
        out = np.full(len(t3_axis), np.nan)
        mask = t3_axis > t2
        if not mask.any():
            return out, None
        try:
            c12, c23, c13 = k3_components(model, t1, t2, t3_axis[mask])
        except LGDecayError as exc:
            return out, f"t2={t2!r}: {exc}"
        out[mask] = (c12 + c23 - c13) - 1.0
        return out, None

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(row, range(len(t2_axis))))
    else:
        rows = [row(i) for i in range(len(t2_axis))]
    values = np.vstack([r[0] for r in rows])
    errors = [r[1] for r in rows if r[1] is not None]
    return ScanGrid(
        t1=t1,
        t2_axis=t2_axis,
        t3_axis=t3_axis,
        values=values,
        max_point=_extreme(values, t2_axis, t3_axis, 1.0),
        min_point=_extreme(values, t2_axis, t3_axis, -1.0),
        errors=errors,
    )
