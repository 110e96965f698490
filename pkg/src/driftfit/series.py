"""Regularly sampled complex velocity records."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

__all__ = ["ComplexSeries"]

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class ComplexSeries:
    """A regularly sampled complex velocity record u + iv.

    Parameters
    ----------
    values : array of complex
        Velocities (conventionally cm/s), length >= 2, gap-free.  Records with
        gaps must be split upstream; pass ``allow_gaps=True`` only to carry
        NaN-marked gaps into window-skipping code.
    dt : float
        Sampling interval in seconds (> 0).
    t0 : datetime, optional
        Timestamp of the first sample.
    """

    values: np.ndarray
    dt: float
    t0: datetime | None = None
    allow_gaps: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("series must be one-dimensional with length >= 2")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not self.allow_gaps and not np.all(np.isfinite(vals.real) & np.isfinite(vals.imag)):
            raise ValueError("series contains non-finite values; split gaps upstream")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.values.size

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def dt_days(self) -> float:
        return self.dt / SECONDS_PER_DAY

    @property
    def duration_days(self) -> float:
        return (self.n - 1) * self.dt_days

    def time_seconds(self) -> np.ndarray:
        """Elapsed seconds of each sample relative to the first."""
        return np.arange(self.n) * self.dt

    def window(self, start: int, length: int) -> "ComplexSeries":
        """A contiguous sub-record of ``length`` samples starting at ``start``."""
        if start < 0 or start + length > self.n:
            raise ValueError("window extends outside the series")
        return ComplexSeries(
            values=self.values[start : start + length],
            dt=self.dt,
            t0=self.t0,
            allow_gaps=self.allow_gaps,
        )

    def scaled(self, factor: float) -> "ComplexSeries":
        return ComplexSeries(values=self.values * factor, dt=self.dt, t0=self.t0)
