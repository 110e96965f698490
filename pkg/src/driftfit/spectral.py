"""Fourier grids, periodograms, and finite-sample expected periodograms.

The periodogram of a complex record is asymmetric in frequency: negative and
positive frequencies carry clockwise and anticlockwise motion separately, so
the full grid of nonzero Fourier frequencies (2N - 2 real degrees of freedom)
is kept.  The expected periodogram reproduces what the periodogram estimates
on average at finite N, including leakage and aliasing, and is the model side
of the blurred Whittle objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, model_acvs
from .series import ComplexSeries, SECONDS_PER_DAY

__all__ = [
    "Periodogram",
    "FrequencyMask",
    "fourier_frequencies",
    "periodogram",
    "expected_periodogram",
    "write_periodogram_csv",
]


def _grid_bins(n: int) -> np.ndarray:
    """DFT bin indices 1..n-1 ordered by ascending signed frequency.

    Bins above (n-1)//2 are negative frequencies; for even n the Nyquist bin
    n/2 appears once, at the negative end (-pi/dt convention).
    """
    k = np.arange(1, n)
    signed = np.where(k <= (n - 1) // 2, k, k - n)
    order = np.argsort(signed, kind="stable")
    return k[order]


def fourier_frequencies(n: int, dt: float) -> np.ndarray:
    """Nonzero Fourier frequencies of an n-point record, ascending (rad per time unit).

    The zero frequency is excluded (the mean is removed before any transform);
    for even n the Nyquist frequency is represented once, as -pi/dt.  The grid
    always has n - 1 entries.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    if dt <= 0:
        raise ValueError("dt must be positive")
    k = _grid_bins(n)
    signed = np.where(k <= (n - 1) // 2, k, k - n)
    return 2.0 * np.pi * signed / (n * dt)


@dataclass(frozen=True)
class Periodogram:
    """Spectral density estimates on the nonzero Fourier frequencies.

    ``freqs`` ascend and are in radians per time unit of ``dt``; ``values``
    are nonnegative densities with the same units as ``|z|^2 * dt``.
    """

    freqs: np.ndarray
    values: np.ndarray
    n: int
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "freqs", np.asarray(self.freqs, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.freqs.shape != self.values.shape:
            raise ValueError("freqs and values must have matching shapes")
        if self.freqs.size != self.n - 1:
            raise ValueError(f"expected {self.n - 1} frequencies, got {self.freqs.size}")

    @property
    def resolution(self) -> float:
        """Frequency grid spacing 2*pi / (n*dt)."""
        return 2.0 * np.pi / (self.n * self.dt)


def periodogram(z: ComplexSeries) -> Periodogram:
    """Periodogram of a complex record: mean removed, scaled by dt/n.

    Satisfies the discrete Parseval identity
    ``sum(values) / (n*dt) == mean(|z - mean(z)|^2)``.
    """
    vals = z.values - z.values.mean()
    spec = np.abs(np.fft.fft(vals)) ** 2 * (z.dt / z.n)
    bins = _grid_bins(z.n)
    return Periodogram(
        freqs=fourier_frequencies(z.n, z.dt), values=spec[bins], n=z.n, dt=z.dt
    )


def _expected_ordinates_from_acvs(s: np.ndarray, n: int, dt: float) -> np.ndarray:
    """Expected periodogram ordinates (ascending-frequency order) from the
    one-sided model autocovariance ``s`` at lags 0..n-1 (in steps of dt)."""
    tau = np.arange(n)
    w = 1.0 - tau / n
    g = np.zeros(2 * n, dtype=complex)
    g[:n] = w * s
    g[n + 1 :] = np.conj((w * s)[1:][::-1])
    G = np.fft.fft(g)[::2]  # even bins = the n Fourier frequencies
    scale = np.max(np.abs(G.real))
    if scale > 0 and np.max(np.abs(G.imag)) > 1e-8 * scale:
        raise RuntimeError("expected periodogram has a non-negligible imaginary part")
    return dt * G.real[_grid_bins(n)]


def _expected_ordinates(p: ModelParams, n: int, dt: float) -> np.ndarray:
    s = np.asarray(model_acvs(p, np.arange(n) * dt), dtype=complex)
    return _expected_ordinates_from_acvs(s, n, dt)


def expected_periodogram(p: ModelParams, n: int, dt: float) -> Periodogram:
    """Finite-sample mean of the periodogram under the model.

    Computed as the transform of the triangle-weighted model autocovariance
    sampled at lag multiples of dt, evaluated at the Fourier frequencies by a
    length-2n FFT.  Sampling the autocovariance at dt wraps all energy above
    the Nyquist frequency back into the grid, so aliasing (and leakage) are
    encoded exactly.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    return Periodogram(
        freqs=fourier_frequencies(n, dt),
        values=_expected_ordinates(p, n, dt),
        n=n,
        dt=dt,
    )


@dataclass(frozen=True)
class FrequencyMask:
    """Selection rule for the set of fitted frequencies.

    Parameters
    ----------
    side : {"negative", "positive", "both", "auto"}
        Which half of the rotary spectrum to fit.  "auto" picks the side the
        inertial peak falls on (the sign of the supplied Coriolis frequency).
    cutoff : float, optional
        Absolute upper bound on |omega| (radians per time unit).
    cutoff_multiple : float, optional
        Upper bound expressed as a multiple of |f0|; requires a Coriolis
        frequency at resolution time.  Mutually exclusive with ``cutoff``.
    exclude : tuple of (lo, hi)
        Frequency intervals to drop explicitly.
    """

    side: str = "both"
    cutoff: float | None = None
    cutoff_multiple: float | None = None
    exclude: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.side not in ("negative", "positive", "both", "auto"):
            raise ValueError(f"invalid side {self.side!r}")
        if self.cutoff is not None and self.cutoff_multiple is not None:
            raise ValueError("give cutoff or cutoff_multiple, not both")
        if self.cutoff is not None and self.cutoff <= 0:
            raise ValueError("cutoff must be positive")
        if self.cutoff_multiple is not None and self.cutoff_multiple <= 0:
            raise ValueError("cutoff_multiple must be positive")
        for pair in self.exclude:
            lo, hi = pair
            if hi < lo:
                raise ValueError(f"bad exclusion interval {pair}")

    def resolve(self, freqs: np.ndarray, f0: float | None = None) -> np.ndarray:
        """Indices of ``freqs`` retained by this mask (never the zero frequency)."""
        freqs = np.asarray(freqs, dtype=float)
        side = self.side
        if side == "auto":
            if f0 is None or f0 == 0.0:
                raise ValueError("side='auto' needs a nonzero Coriolis frequency")
            side = "negative" if f0 < 0 else "positive"
        keep = freqs != 0.0
        if side == "negative":
            keep &= freqs < 0.0
        elif side == "positive":
            keep &= freqs > 0.0
        bound = self.cutoff
        if self.cutoff_multiple is not None:
            if f0 is None or f0 == 0.0:
                raise ValueError("cutoff_multiple needs a nonzero Coriolis frequency")
            bound = self.cutoff_multiple * abs(f0)
        if bound is not None:
            if bound < np.min(np.abs(freqs[freqs != 0.0])):
                raise ValueError(
                    "cutoff lies below the frequency resolution; no frequencies left"
                )
            keep &= np.abs(freqs) <= bound
        for lo, hi in self.exclude:
            keep &= ~((freqs >= lo) & (freqs <= hi))
        idx = np.nonzero(keep)[0]
        if idx.size == 0:
            raise ValueError("frequency mask selects no frequencies")
        return idx

    def describe(self) -> dict:
        return {
            "side": self.side,
            "cutoff": self.cutoff,
            "cutoff_multiple": self.cutoff_multiple,
            "exclude": [list(pair) for pair in self.exclude],
        }


def rad_per_s_to_cpd(omega: np.ndarray | float) -> np.ndarray | float:
    """Angular rad/s to cycles per day (the human-facing frequency unit)."""
    return omega * SECONDS_PER_DAY / (2.0 * np.pi)


def write_periodogram_csv(pg: Periodogram, path, db: bool = False) -> None:
    """Export a periodogram as CSV with metadata header lines.

    Columns: freq_rad_per_s, freq_cpd, psd.  Frequencies assume ``dt`` is in
    seconds; with ``db=True`` the psd column holds 10*log10(psd).
    """
    vals = 10.0 * np.log10(pg.values) if db else pg.values
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# n={pg.n}\n")
        fh.write(f"# dt={float(pg.dt)!r}\n")
        if db:
            fh.write("# units=db\n")
        fh.write("freq_rad_per_s,freq_cpd,psd\n")
        for f, v in zip(pg.freqs, vals):
            fh.write(f"{float(f)!r},{float(rad_per_s_to_cpd(f))!r},{float(v)!r}\n")
