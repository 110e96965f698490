"""Position records to complex velocities; CSV parsing and export."""

import io
import math

import numpy as np
import pytest

from driftfit import (
    ComplexSeries,
    Trajectory,
    coriolis_frequency,
    parse_trajectory_csv,
    positions_to_velocities,
    read_velocity_csv,
    write_velocity_csv,
)
from driftfit.ingest import EARTH_RADIUS_CM


def _traj(times_h, lat, lon, ident="d1"):
    base = np.datetime64("2005-01-01T00:00:00", "s")
    times = base + (np.asarray(times_h) * 3600).astype("timedelta64[s]")
    return Trajectory(id=ident, times=times, lat=np.asarray(lat, float), lon=np.asarray(lon, float))


class TestCoriolis:
    def test_reference_latitudes(self):
        assert coriolis_frequency(30.0) == pytest.approx(-7.29e-5, rel=1e-14)
        assert coriolis_frequency(0.0) == 0.0
        assert coriolis_frequency(-30.0) == pytest.approx(7.29e-5, rel=1e-14)

    def test_odd_and_monotone(self):
        lats = np.linspace(-90.0, 90.0, 181)
        f = coriolis_frequency(lats)
        np.testing.assert_allclose(f, -f[::-1], rtol=1e-14)
        assert np.all(np.diff(f) < 0)

    def test_range_check(self):
        with pytest.raises(ValueError):
            coriolis_frequency(91.0)


class TestVelocities:
    def test_stationary_drifter_zero(self):
        tr = _traj([0, 6, 12, 18], [10.0] * 4, [20.0] * 4)
        (seg,) = positions_to_velocities(tr)
        np.testing.assert_allclose(np.abs(seg.series.values), 0.0, atol=1e-12)

    def test_equatorial_eastward_hand_value(self):
        # 0.01 degrees of longitude per 6 h at the equator:
        # u = 0.01 * pi/180 * R / 21600 s, roughly 5.15 cm/s
        steps = np.arange(5)
        tr = _traj(6 * steps, np.zeros(5), 0.01 * steps)
        (seg,) = positions_to_velocities(tr)
        want = 0.01 * math.pi / 180.0 * EARTH_RADIUS_CM / 21600.0
        np.testing.assert_allclose(seg.series.values.real, want, rtol=1e-3)
        np.testing.assert_allclose(seg.series.values.imag, 0.0, atol=1e-12)
        assert want == pytest.approx(5.15, abs=0.01)

    def test_dateline_crossing_no_spike(self):
        lon = np.array([179.98, 179.99, -180.0 + 0.0, -179.99, -179.98]) % 360.0
        lon = np.where(lon >= 180.0, lon - 360.0, lon)
        tr = _traj(6 * np.arange(5), np.zeros(5), lon)
        (seg,) = positions_to_velocities(tr)
        u = seg.series.values.real
        assert np.all(u > 0)  # steady eastward motion
        assert np.ptp(u) < 1e-6 * np.abs(u).max()

    def test_time_reversal_antisymmetry(self):
        rng = np.random.default_rng(0)
        lat = 40.0 + np.cumsum(rng.standard_normal(12)) * 1e-3
        lon = -30.0 + np.cumsum(rng.standard_normal(12)) * 1e-3
        fwd = positions_to_velocities(_traj(6 * np.arange(12), lat, lon))[0]
        rev = positions_to_velocities(_traj(6 * np.arange(12), lat[::-1], lon[::-1]))[0]
        np.testing.assert_allclose(
            rev.series.values[1:-1], -fwd.series.values[::-1][1:-1], rtol=1e-10
        )

    def test_round_trip_constant_velocity(self):
        # integrate a constant eastward velocity at fixed latitude, then a
        # constant northward velocity, and recover both within 0.1%
        dt_s = 21600.0
        u_true = 20.0  # cm/s
        lat0 = 45.0
        dlon = u_true * dt_s / (EARTH_RADIUS_CM * math.cos(math.radians(lat0))) * 180.0 / math.pi
        n = 10
        tr = _traj(6 * np.arange(n), np.full(n, lat0), 5.0 + dlon * np.arange(n))
        (seg,) = positions_to_velocities(tr)
        np.testing.assert_allclose(seg.series.values.real[1:-1], u_true, rtol=1e-3)

        v_true = 15.0
        dlat = v_true * dt_s / EARTH_RADIUS_CM * 180.0 / math.pi
        tr = _traj(6 * np.arange(n), 10.0 + dlat * np.arange(n), np.full(n, 5.0))
        (seg,) = positions_to_velocities(tr)
        np.testing.assert_allclose(seg.series.values.imag[1:-1], v_true, rtol=1e-3)

    def test_two_positions_one_sided(self):
        tr = _traj([0, 6], [0.0, 0.0], [0.0, 0.01])
        (seg,) = positions_to_velocities(tr)
        assert seg.series.n == 2
        assert seg.series.values[0] == seg.series.values[1]

    def test_split_at_gap(self):
        hours = np.array([0, 6, 12, 30, 36, 42])  # 18-hour hole
        tr = _traj(hours, np.zeros(6), 0.01 * np.arange(6))
        segments = positions_to_velocities(tr)
        assert len(segments) == 2
        assert segments[0].series.n == 3 and segments[1].series.n == 3

    def test_per_sample_coriolis(self):
        tr = _traj(6 * np.arange(4), [30.0, 30.0, -30.0, -30.0], np.zeros(4))
        (seg,) = positions_to_velocities(tr)
        assert seg.f0[0] == pytest.approx(-7.29e-5, rel=1e-12)
        assert seg.f0[-1] == pytest.approx(7.29e-5, rel=1e-12)


class TestParseCsv:
    def test_two_row_file(self):
        src = io.StringIO("id,time,lat,lon\n7,2005-01-01T00:00:00,10,20\n7,2005-01-01T06:00:00,10.1,20.1\n")
        trajectories, errors = parse_trajectory_csv(src)
        assert errors == []
        assert len(trajectories) == 1 and len(trajectories[0]) == 2

    def test_interleaved_ids_grouped_and_sorted(self):
        src = io.StringIO(
            "id,time,lat,lon\n"
            "a,2005-01-01T06:00:00,1,1\n"
            "b,2005-01-01T00:00:00,2,2\n"
            "a,2005-01-01T00:00:00,1,1\n"
            "b,2005-01-01T06:00:00,2,2\n"
        )
        trajectories, errors = parse_trajectory_csv(src)
        assert sorted(t.id for t in trajectories) == ["a", "b"]
        for t in trajectories:
            assert np.all(np.diff(t.times).astype(float) > 0)

    def test_bad_latitude_line_numbered(self):
        rows = ["id,time,lat,lon"]
        for k in range(200):
            rows.append(f"a,2005-01-01T{k % 24:02d}:{k // 24:02d}:00,10,{k * 0.01}")
        rows[50] = "a,2005-12-31T00:00:00,95,0"
        trajectories, errors = parse_trajectory_csv(io.StringIO("\n".join(rows) + "\n"))
        assert len(errors) == 1
        assert "line 51" in errors[0] and "95" in errors[0]

    def test_malformed_over_threshold_fails(self):
        src = io.StringIO(
            "id,time,lat,lon\n"
            "a,2005-01-01T00:00:00,10,0\n"
            "a,not-a-time,10,0\n"
            "a,2005-01-01T12:00:00,10,0\n"
        )
        with pytest.raises(ValueError, match="1% threshold"):
            parse_trajectory_csv(src)

    def test_missing_header_fails(self):
        with pytest.raises(ValueError, match="header"):
            parse_trajectory_csv(io.StringIO("time,id,lat,lon\nx,y,z,w\n"))


class TestVelocityCsv:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        vals = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        series = ComplexSeries(values=vals, dt=7200.0)
        lat = np.linspace(10.0, 11.0, 16)
        path = tmp_path / "vel.csv"
        write_velocity_csv(path, series, lat=lat)
        back, lat_back = read_velocity_csv(path)
        np.testing.assert_allclose(back.values, vals, rtol=1e-15)
        assert back.dt == 7200.0
        np.testing.assert_allclose(lat_back, lat, rtol=1e-15)

    def test_iso_times_round_trip(self, tmp_path):
        tr = _traj(6 * np.arange(4), np.full(4, 12.0), 0.01 * np.arange(4))
        (seg,) = positions_to_velocities(tr)
        path = tmp_path / "vel.csv"
        write_velocity_csv(path, seg.series, lat=seg.lat, times=seg.times)
        back, lat_back = read_velocity_csv(path)
        assert back.dt == 21600.0
        assert back.t0 is not None
        np.testing.assert_allclose(back.values, seg.series.values, rtol=1e-15)
