"""Time-varying estimation by sliding-window fits.

Nonstationarity is handled semi-parametrically: each window of W points gets
its own stationary fit (with the window's mean Coriolis frequency driving the
frequency mask), and the parameter trajectories, time-varying model spectra,
and per-window likelihood-ratio traces are read off the sequence of fits.
Windows are independent computations unless warm starts are requested.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace as _dc_replace

import numpy as np

from .ingest import coriolis_frequency
from .inference import FitResult, LrtResult, chi2_threshold, fit, fit_nested
from .model import FREE_PARAMS, Variant, model_spectrum, parse_variant
from .series import ComplexSeries
from .spectral import FrequencyMask, fourier_frequencies, periodogram

__all__ = [
    "RollingFit",
    "LrtTrace",
    "rolling_fit",
    "tv_spectrogram",
    "lrt_trace",
    "window_centers",
    "write_rolling_csv",
    "write_spectrogram_csv",
    "write_lrt_csv",
]


def window_centers(n: int, window: int, stride: int) -> np.ndarray:
    """Center indices t of all complete windows z[t-W/2+1 .. t+W/2]."""
    if window % 2 != 0:
        raise ValueError("window length must be even")
    if window < 4 or window > n:
        raise ValueError(f"window length {window} invalid for a series of {n} points")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return np.arange(window // 2 - 1, n - window // 2, stride)


def _window_f0(lat, f0, start: int, window: int) -> float | None:
    if f0 is not None:
        return float(f0)
    if lat is None:
        return None
    lat = np.asarray(lat, dtype=float)
    if lat.ndim == 0:
        return float(coriolis_frequency(float(lat)))
    return float(coriolis_frequency(float(np.mean(lat[start : start + window]))))


def _concrete_mask(mask: FrequencyMask | None, f0: float | None) -> FrequencyMask | None:
    """Pin an 'auto' side to the hemisphere the window's f0 implies."""
    if mask is None or mask.side != "auto":
        return mask
    if f0 is None or f0 == 0.0:
        raise ValueError("side='auto' mask needs latitude or f0")
    return _dc_replace(mask, side="negative" if f0 < 0 else "positive")


@dataclass(frozen=True)
class RollingFit:
    """Per-window fits over a sliding window.

    ``fits[i]`` is None when window i was skipped; ``skip_reasons`` maps the
    center index to the reason.  The source series is kept so spectrogram
    surfaces can be built without re-supplying the data.
    """

    centers: np.ndarray
    fits: tuple
    f0_series: np.ndarray
    window_len: int
    stride: int
    series: ComplexSeries
    skip_reasons: dict

    @property
    def dt(self) -> float:
        return self.series.dt

    def center_times(self) -> np.ndarray:
        """Window-center times in seconds from the start of the record."""
        return self.centers * self.series.dt

    def param_traces(self) -> dict:
        """Parameter trajectories as name -> array (NaN where skipped)."""
        out = {}
        for name in ("A", "B", "omega0", "c", "h", "alpha"):
            out[name] = np.array(
                [getattr(f.params, name) if f is not None else np.nan for f in self.fits]
            )
        out["loglik"] = np.array(
            [f.loglik if f is not None else np.nan for f in self.fits]
        )
        return out


def _fit_window(args):
    z, start, window, variant, mask, f0, kind, init, maxfev = args
    sub = z.values[start : start + window]
    if not np.all(np.isfinite(sub.real) & np.isfinite(sub.imag)):
        return None, "window overlaps a data gap"
    wz = ComplexSeries(values=sub, dt=z.dt)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return (
                fit(wz, variant, mask=mask, f0=f0, init=init, kind=kind, maxfev=maxfev),
                None,
            )
    except ValueError as exc:
        return None, str(exc)


def rolling_fit(
    z: ComplexSeries,
    lat=None,
    f0: float | None = None,
    window: int = 1000,
    stride: int = 25,
    variant: Variant | str = Variant.FULL6,
    mask: FrequencyMask | None = None,
    kind: str = "blurred",
    warm_start: bool = False,
    n_jobs: int = 1,
    maxfev: int = 2000,
) -> RollingFit:
    """Fit the model over a rolling window, yielding parameter trajectories.

    Parameters
    ----------
    z : ComplexSeries
    lat : float or array, optional
        Latitude (degrees), scalar or per-sample; each window uses the Coriolis
        frequency of its mean latitude.  Alternatively pass ``f0`` directly.
    window : int
        Window length W in points (even); each fit sees z[t-W/2+1 .. t+W/2].
    stride : int
        Spacing of window centers in points.
    mask : FrequencyMask, optional
        Mask rule, re-resolved per window; defaults to the hemisphere side of
        the window's f0 with a cutoff of 1.75 |f0|.
    warm_start : bool
        Start each window from the previous window's estimates (sequential).
    n_jobs : int
        Fit windows in parallel processes when > 1 (requires warm_start=False).

    Windows containing non-finite samples are skipped and recorded, as are
    windows whose fit raises; per-window non-convergence is kept in the
    FitResult, not raised.
    """
    variant = parse_variant(variant)
    if mask is None:
        mask = FrequencyMask(side="auto", cutoff_multiple=1.75)
    if warm_start and n_jobs != 1:
        raise ValueError("warm_start is sequential; use n_jobs=1")
    centers = window_centers(z.n, window, stride)
    starts = centers - (window // 2 - 1)
    f0s = np.array(
        [_window_f0(lat, f0, s, window) or np.nan for s in starts], dtype=float
    )

    tasks = []
    for s, w_f0 in zip(starts, f0s):
        w_f0 = None if math.isnan(w_f0) else w_f0
        tasks.append((z, int(s), window, variant, _concrete_mask(mask, w_f0), w_f0, kind, None, maxfev))

    fits: list[FitResult | None] = []
    reasons: dict[int, str] = {}
    if warm_start:
        prev: FitResult | None = None
        for i, task in enumerate(tasks):
            task = task[:7] + (prev.params if prev is not None else None, maxfev)
            result, reason = _fit_window(task)
            fits.append(result)
            if reason is not None:
                reasons[int(centers[i])] = reason
            if result is not None:
                prev = result
    elif n_jobs == 1:
        for i, task in enumerate(tasks):
            result, reason = _fit_window(task)
            fits.append(result)
            if reason is not None:
                reasons[int(centers[i])] = reason
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            for i, (result, reason) in enumerate(pool.map(_fit_window, tasks)):
                fits.append(result)
                if reason is not None:
                    reasons[int(centers[i])] = reason

    return RollingFit(
        centers=centers,
        fits=tuple(fits),
        f0_series=f0s,
        window_len=window,
        stride=stride,
        series=z,
        skip_reasons=reasons,
    )


def tv_spectrogram(rf: RollingFit, db: bool = True):
    """Observed and modeled time-frequency surfaces from a rolling fit.

    Returns ``(freqs, center_times, observed, modeled)`` where each surface is
    (n_freqs, n_windows): the observed side is the windowed periodogram, the
    modeled side the fitted model spectrum evaluated on the window's Fourier
    frequencies.  Surfaces are in decibels (10 log10) unless ``db=False``;
    skipped windows give NaN columns.
    """
    W = rf.window_len
    freqs = fourier_frequencies(W, rf.dt)
    observed = np.full((freqs.size, rf.centers.size), np.nan)
    modeled = np.full((freqs.size, rf.centers.size), np.nan)
    starts = rf.centers - (W // 2 - 1)
    for j, (s, f) in enumerate(zip(starts, rf.fits)):
        sub = rf.series.values[s : s + W]
        if np.all(np.isfinite(sub.real) & np.isfinite(sub.imag)):
            observed[:, j] = periodogram(ComplexSeries(values=sub, dt=rf.dt)).values
        if f is not None:
            modeled[:, j] = model_spectrum(f.params, freqs)
    if db:
        with np.errstate(divide="ignore"):
            observed = 10.0 * np.log10(observed)
            modeled = 10.0 * np.log10(modeled)
    return freqs, rf.center_times(), observed, modeled


@dataclass(frozen=True)
class LrtTrace:
    """Per-window likelihood-ratio statistics for a nested variant pair."""

    centers: np.ndarray
    results: tuple
    fits_null: tuple
    fits_alt: tuple
    threshold: float
    df: int
    window_len: int
    stride: int
    dt: float
    skip_reasons: dict

    def statistics(self) -> np.ndarray:
        return np.array(
            [r.statistic if r is not None else np.nan for r in self.results]
        )

    def exceedances(self) -> np.ndarray:
        """Boolean flags: statistic above the 95% significance line."""
        stats = self.statistics()
        return np.where(np.isnan(stats), False, stats > self.threshold)

    def center_times(self) -> np.ndarray:
        return self.centers * self.dt


def _lrt_window(args):
    z, start, window, null_variant, alt_variant, mask, f0, kind, maxfev = args
    sub = z.values[start : start + window]
    if not np.all(np.isfinite(sub.real) & np.isfinite(sub.imag)):
        return None, None, None, "window overlaps a data gap"
    wz = ComplexSeries(values=sub, dt=z.dt)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit0, fit1, result = fit_nested(
                wz, null_variant, alt_variant, mask=mask, f0=f0, kind=kind, maxfev=maxfev
            )
        return fit0, fit1, result, None
    except ValueError as exc:
        return None, None, None, str(exc)


def lrt_trace(
    z: ComplexSeries,
    lat=None,
    f0: float | None = None,
    window: int = 1000,
    stride: int = 25,
    null_variant: Variant | str = Variant.FIXED_FREQ5,
    alt_variant: Variant | str = Variant.FULL6,
    mask: FrequencyMask | None = None,
    kind: str = "blurred",
    n_jobs: int = 1,
    maxfev: int = 2000,
    level: float = 0.95,
) -> LrtTrace:
    """Likelihood-ratio statistic per rolling window for a nested pair.

    Both variants are fit on identical windows with identical masks; the
    95% chi-square line for the free-parameter difference is attached.
    """
    null_variant = parse_variant(null_variant)
    alt_variant = parse_variant(alt_variant)
    if mask is None:
        mask = FrequencyMask(side="auto", cutoff_multiple=1.75)
    centers = window_centers(z.n, window, stride)
    starts = centers - (window // 2 - 1)

    tasks = []
    for s in starts:
        w_f0 = _window_f0(lat, f0, int(s), window)
        tasks.append(
            (z, int(s), window, null_variant, alt_variant, _concrete_mask(mask, w_f0), w_f0, kind, maxfev)
        )

    if n_jobs == 1:
        outcomes = [_lrt_window(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(_lrt_window, tasks))

    fits0, fits1, results = [], [], []
    reasons: dict[int, str] = {}
    for center, (f0_fit, f1_fit, res, reason) in zip(centers, outcomes):
        fits0.append(f0_fit)
        fits1.append(f1_fit)
        results.append(res)
        if reason is not None:
            reasons[int(center)] = reason

    df = len(FREE_PARAMS[alt_variant]) - len(FREE_PARAMS[null_variant])
    return LrtTrace(
        centers=centers,
        results=tuple(results),
        fits_null=tuple(fits0),
        fits_alt=tuple(fits1),
        threshold=chi2_threshold(max(df, 1), level),
        df=df,
        window_len=window,
        stride=stride,
        dt=z.dt,
        skip_reasons=reasons,
    )


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

_PARAM_ORDER = ("A", "B", "omega0", "c", "h", "alpha")


def write_rolling_csv(rf: RollingFit, path, lrt: LrtTrace | None = None) -> None:
    """One row per window: center time, estimates, CI half-widths, loglik,
    the likelihood-ratio statistic when a trace is supplied, and flags."""
    halfwidth_cols = ",".join(f"{p},{p}_ci95_halfwidth" for p in _PARAM_ORDER)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"center_time_s,f0_rad_per_s,{halfwidth_cols},loglik,R,converged,skip_reason\n"
        )
        times = rf.center_times()
        stats = lrt.statistics() if lrt is not None else None
        for i, f in enumerate(rf.fits):
            t = times[i]
            f0 = rf.f0_series[i]
            f0_txt = repr(float(f0)) if np.isfinite(f0) else ""
            r_txt = ""
            if stats is not None and i < stats.size and np.isfinite(stats[i]):
                r_txt = repr(float(stats[i]))
            if f is None:
                reason = rf.skip_reasons.get(int(rf.centers[i]), "skipped")
                blanks = ",".join([""] * (2 * len(_PARAM_ORDER)))
                fh.write(f"{float(t)!r},{f0_txt},{blanks},,{r_txt},,{reason}\n")
                continue
            cells = []
            for p in _PARAM_ORDER:
                cells.append(repr(float(getattr(f.params, p))))
                if p in f.ci:
                    lo, hi = f.ci[p]
                    cells.append(repr(float((hi - lo) / 2.0)))
                else:
                    cells.append("")
            fh.write(
                f"{float(t)!r},{f0_txt},{','.join(cells)},{float(f.loglik)!r},{r_txt},{f.converged},\n"
            )


def write_spectrogram_csv(freqs, center_times, surface, path) -> None:
    """Dense time-frequency grid: rows are frequencies, columns window centers."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("freq_rad_per_s," + ",".join(repr(float(t)) for t in center_times) + "\n")
        for i, f in enumerate(freqs):
            row = ",".join(repr(float(v)) for v in surface[i])
            fh.write(f"{float(f)!r},{row}\n")


def write_lrt_csv(trace: LrtTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            "center_time_s,R,df,p_value,threshold_95,converged_null,converged_alt,note\n"
        )
        times = trace.center_times()
        for i, res in enumerate(trace.results):
            t = times[i]
            if res is None:
                reason = trace.skip_reasons.get(int(trace.centers[i]), "skipped")
                fh.write(f"{float(t)!r},,,,{float(trace.threshold)!r},,,{reason}\n")
                continue
            c0 = trace.fits_null[i].converged
            c1 = trace.fits_alt[i].converged
            note = res.caveat or ""
            fh.write(
                f"{float(t)!r},{float(res.statistic)!r},{res.df},{float(res.p_value)!r},"
                f"{float(trace.threshold)!r},{c0},{c1},{note}\n"
            )
