"""Drifter position records to regularly sampled complex velocities.

Positions (latitude/longitude degrees at regular intervals) become local
east/north velocities in cm/s on a spherical Earth, with per-sample Coriolis
frequencies.  Irregular records are split at gaps rather than interpolated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .series import ComplexSeries

__all__ = [
    "EARTH_ROTATION_RATE",
    "EARTH_RADIUS_CM",
    "Trajectory",
    "VelocitySegment",
    "coriolis_frequency",
    "positions_to_velocities",
    "parse_trajectory_csv",
    "write_velocity_csv",
    "read_velocity_csv",
]

EARTH_ROTATION_RATE = 7.29e-5  # rad/s
EARTH_RADIUS_CM = 6.371e8  # spherical Earth, 6371 km

_HEADER = ["id", "time", "lat", "lon"]
_MAX_BAD_FRACTION = 0.01
_GAP_TOLERANCE = 0.01  # fractional deviation from the modal interval


def coriolis_frequency(lat_degrees):
    """Signed Coriolis frequency -2 * rotation_rate * sin(latitude), rad/s.

    Negative in the Northern Hemisphere: the sign encodes the rotation sense
    of inertial oscillations (clockwise north of the equator).
    """
    lat = np.asarray(lat_degrees, dtype=float)
    if np.any(np.abs(lat) > 90.0):
        raise ValueError("latitude must lie in [-90, 90] degrees")
    out = -2.0 * EARTH_ROTATION_RATE * np.sin(np.deg2rad(lat))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class Trajectory:
    """One drifter's position record: strictly increasing times, finite coords."""

    id: str
    times: np.ndarray  # datetime64[s]
    lat: np.ndarray
    lon: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype="datetime64[s]")
        lat = np.asarray(self.lat, dtype=float)
        lon = np.asarray(self.lon, dtype=float)
        if not (times.size == lat.size == lon.size):
            raise ValueError("times, lat, lon must have equal length")
        if times.size >= 2 and not np.all(np.diff(times).astype(float) > 0):
            raise ValueError("times must be strictly increasing")
        if np.any(np.abs(lat) > 90.0) or not np.all(np.isfinite(lat) & np.isfinite(lon)):
            raise ValueError("coordinates must be finite with |lat| <= 90")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class VelocitySegment:
    """A gap-free velocity record with its per-sample latitude and times."""

    series: ComplexSeries
    lat: np.ndarray
    times: np.ndarray  # datetime64[s]

    @property
    def f0(self) -> np.ndarray:
        return coriolis_frequency(self.lat)


def _wrap_degrees(d):
    """Shortest signed angular difference in degrees (handles the date line)."""
    return (np.asarray(d, dtype=float) + 180.0) % 360.0 - 180.0


def _segment_velocities(times_s, lat, lon):
    """Central differences inside, one-sided at the ends; cm/s components."""
    n = lat.size
    u = np.empty(n)
    v = np.empty(n)
    deg = math.pi / 180.0

    def east_north(i, j, k):
        # displacement from sample i to sample j, evaluated around sample k's
        # latitude band (midpoint of the span)
        span = times_s[j] - times_s[i]
        mid = 0.5 * (lat[i] + lat[j])
        east = EARTH_RADIUS_CM * math.cos(mid * deg) * _wrap_degrees(lon[j] - lon[i]) * deg
        north = EARTH_RADIUS_CM * (lat[j] - lat[i]) * deg
        return east / span, north / span

    u[0], v[0] = east_north(0, 1, 0)
    u[-1], v[-1] = east_north(n - 2, n - 1, n - 1)
    for t in range(1, n - 1):
        u[t], v[t] = east_north(t - 1, t + 1, t)
    return u, v


def positions_to_velocities(tr: Trajectory) -> list[VelocitySegment]:
    """Differentiate positions into complex velocities, splitting at gaps.

    Sampling is taken as regular where each interval is within 1% of the
    record's modal interval; runs between gaps become separate segments
    (segments shorter than 2 points are dropped).  Velocities use central
    differences at interior points and one-sided differences at segment ends,
    with east displacements scaled by cos(latitude) at the span midpoint.
    """
    if len(tr) < 2:
        raise ValueError("need at least 2 positions to differentiate")
    times_s = tr.times.astype("datetime64[s]").astype(np.int64).astype(float)
    diffs = np.diff(times_s)
    vals, counts = np.unique(diffs, return_counts=True)
    modal = vals[np.argmax(counts)]
    if modal <= 0:
        raise ValueError("non-increasing timestamps")
    breaks = np.nonzero(np.abs(diffs - modal) > _GAP_TOLERANCE * modal)[0]
    bounds = [0, *(b + 1 for b in breaks), len(tr)]

    segments = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi - lo < 2:
            continue
        u, v = _segment_velocities(times_s[lo:hi], tr.lat[lo:hi], tr.lon[lo:hi])
        t0 = tr.times[lo].astype(datetime)
        series = ComplexSeries(values=u + 1j * v, dt=float(modal), t0=t0)
        segments.append(
            VelocitySegment(series=series, lat=tr.lat[lo:hi], times=tr.times[lo:hi])
        )
    if not segments:
        raise ValueError("no segment of two or more regularly spaced positions")
    return segments


def parse_trajectory_csv(source) -> tuple[list[Trajectory], list[str]]:
    """Parse a position CSV (header id,time,lat,lon; ISO-8601 times).

    Returns ``(trajectories, errors)``: one time-sorted Trajectory per
    distinct id, and a line-numbered diagnostic per malformed row.  More than
    1% malformed rows (or a missing/incorrect header) is a hard failure.
    """
    own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    fh = open(source, "r", encoding="utf-8", newline="") if own else source
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty input: missing header id,time,lat,lon") from None
        if [c.strip().lower() for c in header] != _HEADER:
            raise ValueError(f"expected header {','.join(_HEADER)!r}, got {','.join(header)!r}")

        rows: dict[str, list] = {}
        errors: list[str] = []
        total = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            total += 1
            if len(row) != 4:
                errors.append(f"line {lineno}: expected 4 fields, got {len(row)}")
                continue
            ident, time_txt, lat_txt, lon_txt = (c.strip() for c in row)
            try:
                when = datetime.fromisoformat(time_txt)
            except ValueError:
                errors.append(f"line {lineno}: unparseable time {time_txt!r}")
                continue
            try:
                lat = float(lat_txt)
                lon = float(lon_txt)
            except ValueError:
                errors.append(f"line {lineno}: unparseable coordinates")
                continue
            if not (math.isfinite(lat) and math.isfinite(lon)) or abs(lat) > 90.0:
                errors.append(f"line {lineno}: latitude {lat!r} outside [-90, 90]")
                continue
            lon = float(_wrap_degrees(lon))
            rows.setdefault(ident, []).append((when, lat, lon, lineno))
    finally:
        if own:
            fh.close()

    if total == 0:
        raise ValueError("no data rows")
    if len(errors) > _MAX_BAD_FRACTION * total:
        summary = "; ".join(errors[:10])
        raise ValueError(
            f"{len(errors)} of {total} rows malformed (over the 1% threshold): {summary}"
        )

    trajectories = []
    for ident in rows:
        entries = sorted(rows[ident], key=lambda e: e[0])
        deduped = []
        for entry in entries:
            if deduped and entry[0] == deduped[-1][0]:
                errors.append(f"line {entry[3]}: duplicate timestamp for id {ident!r}")
                continue
            deduped.append(entry)
        if not deduped:
            continue
        times = np.array([e[0] for e in deduped], dtype="datetime64[s]")
        trajectories.append(
            Trajectory(
                id=ident,
                times=times,
                lat=np.array([e[1] for e in deduped]),
                lon=np.array([e[2] for e in deduped]),
            )
        )
    return trajectories, errors


# ---------------------------------------------------------------------------
# Velocity CSV files
# ---------------------------------------------------------------------------


def write_velocity_csv(path, series: ComplexSeries, lat=None, times=None) -> None:
    """Velocity record as CSV: time, u_cms, v_cms, lat, f0_rad_per_s.

    ``times`` (datetime64) writes ISO timestamps; otherwise the time column is
    elapsed seconds.  Latitude and Coriolis columns are left empty when no
    latitude is supplied (e.g. simulated records).
    """
    lat_arr = None if lat is None else np.asarray(lat, dtype=float)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time,u_cms,v_cms,lat,f0_rad_per_s\n")
        for i in range(series.n):
            if times is not None:
                t_txt = str(np.asarray(times, dtype="datetime64[s]")[i])
            else:
                t_txt = repr(i * series.dt)
            if lat_arr is not None:
                lat_i = lat_arr[i] if lat_arr.ndim else float(lat_arr)
                lat_txt = repr(float(lat_i))
                f0_txt = repr(float(coriolis_frequency(lat_i)))
            else:
                lat_txt = f0_txt = ""
            z = series.values[i]
            fh.write(f"{t_txt},{float(z.real)!r},{float(z.imag)!r},{lat_txt},{f0_txt}\n")


def read_velocity_csv(path):
    """Read a velocity CSV back into ``(ComplexSeries, lat_or_None)``.

    Accepts the time column either as ISO-8601 timestamps or elapsed seconds;
    the interval must be uniform to within one part in 1e6.
    """
    times: list[float] = []
    u: list[float] = []
    v: list[float] = []
    lats: list[float] = []
    t0 = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "u_cms" not in reader.fieldnames:
            raise ValueError(f"{path}: not a velocity CSV (missing u_cms column)")
        for row in reader:
            t_txt = row["time"].strip()
            try:
                t_val = float(t_txt)
            except ValueError:
                when = datetime.fromisoformat(t_txt)
                if t0 is None:
                    t0 = when
                t_val = (when - t0).total_seconds()
            times.append(t_val)
            u.append(float(row["u_cms"]))
            v.append(float(row["v_cms"]))
            lat_txt = (row.get("lat") or "").strip()
            if lat_txt:
                lats.append(float(lat_txt))
    if len(times) < 2:
        raise ValueError(f"{path}: need at least two samples")
    diffs = np.diff(times)
    dt = float(np.median(diffs))
    if dt <= 0 or np.any(np.abs(diffs - dt) > 1e-6 * dt):
        raise ValueError(f"{path}: time column is not regularly spaced")
    series = ComplexSeries(values=np.asarray(u) + 1j * np.asarray(v), dt=dt, t0=t0)
    lat = np.asarray(lats) if len(lats) == len(times) else None
    return series, lat
