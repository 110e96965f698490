"""Sliding-window fits, time-varying spectra, and likelihood-ratio traces."""

import warnings

import numpy as np
import pytest

from driftfit import (
    ComplexSeries,
    FrequencyMask,
    ModelParams,
    fit,
    lrt_trace,
    model_spectrum,
    rolling_fit,
    simulate,
    tv_spectrogram,
)
from driftfit.rolling import window_centers, write_lrt_csv, write_rolling_csv

BOTH = FrequencyMask(side="both", cutoff_multiple=1.5)
F0 = -0.8 * np.pi
FULL = ModelParams.full6(A=1.0, B=10.0, omega0=F0, c=0.1, h=0.1, alpha=0.9)
MATERN = ModelParams.matern_only3(B=10.0, h=0.1, alpha=0.9)


class TestGeometry:
    def test_centers_cover_complete_windows_only(self):
        centers = window_centers(100, 10, 1)
        assert centers[0] == 4 and centers[-1] == 94
        assert np.all(np.diff(centers) == 1)

    def test_odd_window_rejected(self):
        with pytest.raises(ValueError, match="even"):
            window_centers(100, 9, 1)

    def test_window_longer_than_series_rejected(self):
        with pytest.raises(ValueError):
            window_centers(100, 128, 1)

    def test_full_length_window_single_center(self):
        centers = window_centers(64, 64, 25)
        assert centers.tolist() == [31]


class TestRollingFit:
    def test_single_window_equals_plain_fit(self):
        z = simulate(MATERN, 512, 1.0, seed=0)
        rf = rolling_fit(z, f0=F0, window=512, stride=1, variant="matern3", mask=BOTH)
        assert len(rf.fits) == 1
        direct = fit(z, "matern3", mask=BOTH, f0=F0)
        assert rf.fits[0].params == direct.params
        assert rf.fits[0].loglik == direct.loglik

    def test_stride_subsampling_consistency(self):
        z = simulate(MATERN, 800, 1.0, seed=1)
        dense = rolling_fit(z, f0=F0, window=256, stride=64, variant="matern3", mask=BOTH)
        sparse = rolling_fit(z, f0=F0, window=256, stride=192, variant="matern3", mask=BOTH)
        assert sparse.centers.tolist() == dense.centers[::3].tolist()
        for a, b in zip(sparse.fits, dense.fits[::3]):
            assert a.params == b.params

    def test_warm_start_agrees_with_cold(self):
        z = simulate(MATERN, 1024, 1.0, seed=2)
        cold = rolling_fit(z, f0=F0, window=512, stride=256, variant="matern3", mask=BOTH)
        warm = rolling_fit(
            z, f0=F0, window=512, stride=256, variant="matern3", mask=BOTH, warm_start=True
        )
        for a, b in zip(cold.fits, warm.fits):
            for name in ("B", "h", "alpha"):
                va, vb = getattr(a.params, name), getattr(b.params, name)
                assert abs(va - vb) / abs(va) < 1e-3

    def test_hemisphere_mask_rule(self):
        z = simulate(MATERN, 300, 3600.0, seed=3)
        north = rolling_fit(z, lat=35.0, window=150 * 2, stride=50, variant="matern3",
                            mask=FrequencyMask(side="auto"))
        south = rolling_fit(z, lat=-35.0, window=150 * 2, stride=50, variant="matern3",
                            mask=FrequencyMask(side="auto"))
        assert all(f.mask.side == "negative" for f in north.fits if f is not None)
        assert all(f.f0 < 0 for f in north.fits if f is not None)
        assert all(f.mask.side == "positive" for f in south.fits if f is not None)
        assert all(f.f0 > 0 for f in south.fits if f is not None)

    def test_gap_windows_skipped_with_reason(self):
        z0 = simulate(MATERN, 600, 1.0, seed=4)
        vals = z0.values.copy()
        vals[300] = np.nan
        z = ComplexSeries(values=vals, dt=1.0, allow_gaps=True)
        rf = rolling_fit(z, f0=F0, window=128, stride=64, variant="matern3", mask=BOTH)
        skipped = [i for i, f in enumerate(rf.fits) if f is None]
        assert skipped, "windows over the gap must be skipped"
        assert all("gap" in r for r in rf.skip_reasons.values())
        kept = [i for i, f in enumerate(rf.fits) if f is not None]
        assert kept, "windows away from the gap must still fit"

    def test_per_window_coriolis_from_latitude(self):
        z = simulate(MATERN, 400, 3600.0, seed=5)
        lat = np.linspace(10.0, 40.0, 400)
        rf = rolling_fit(z, lat=lat, window=200, stride=100, variant="matern3",
                         mask=FrequencyMask(side="auto"))
        assert np.all(np.diff(rf.f0_series) < 0)  # f0 more negative as lat rises


class TestSpectrogram:
    def test_single_window_column_is_model_spectrum(self):
        z = simulate(MATERN, 512, 1.0, seed=6)
        rf = rolling_fit(z, f0=F0, window=512, stride=1, variant="matern3", mask=BOTH)
        freqs, times, observed, modeled = tv_spectrogram(rf, db=False)
        assert modeled.shape == (511, 1)
        np.testing.assert_allclose(
            modeled[:, 0], np.asarray(model_spectrum(rf.fits[0].params, freqs)), rtol=1e-12
        )

    def test_stationary_columns_agree(self):
        z = simulate(MATERN, 1536, 1.0, seed=7)
        rf = rolling_fit(z, f0=F0, window=512, stride=256, variant="matern3", mask=BOTH)
        _, _, _, modeled_db = tv_spectrogram(rf)
        spread = np.ptp(modeled_db, axis=1)
        assert np.median(spread) < 3.0  # columns within a few dB of each other

    def test_level_shift_detected_and_loglik_steps_at_jump(self):
        jump = ModelParams.matern_only3(B=30.0, h=0.1, alpha=0.9)
        first = simulate(MATERN, 1024, 1.0, seed=8).values
        second = simulate(jump, 1024, 1.0, seed=9).values
        z = ComplexSeries(values=np.concatenate([first, second]), dt=1.0)
        W = 512
        rf = rolling_fit(z, f0=F0, window=W, stride=128, variant="matern3", mask=BOTH)
        _, _, _, modeled_db = tv_spectrogram(rf)
        level = np.nanmedian(modeled_db, axis=0)
        # 3x amplitude jump is ~9.5 dB in power
        assert level[-1] - level[0] > 6.0
        # a louder background costs log-likelihood, so the per-window trace
        # steps down as windows start mixing in post-jump data; the steepest
        # step straddles the change point (a pure amplitude jump keeps the
        # mixture inside the model family, so there is no shape misfit)
        ll = rf.param_traces()["loglik"]
        drops = np.diff(ll)
        mid = 0.5 * (rf.centers[1:] + rf.centers[:-1])
        steepest = mid[int(np.argmin(drops))]
        assert abs(steepest - 1024) <= W // 2
        assert ll[0] - ll[-1] > 100.0


class TestLrtTrace:
    def test_null_equals_alt_gives_zero(self):
        z = simulate(MATERN, 512, 1.0, seed=10)
        trace = lrt_trace(z, f0=F0, window=256, stride=128, null_variant="matern3",
                          alt_variant="matern3", mask=BOTH)
        stats = trace.statistics()
        np.testing.assert_allclose(stats, 0.0, atol=1e-9)
        assert trace.df == 0

    def test_null_exceedance_rate_disjoint_windows(self):
        # 100 disjoint windows of null data: the 95% line should be crossed
        # about 5% of the time (window overlap would correlate the trace, so
        # the windows here are non-overlapping)
        truth = ModelParams.fixed_freq5(A=1.0, B=10.0, c=0.1, h=0.1, alpha=0.9, f0=F0)
        n_windows, W = 100, 512
        z = simulate(truth, n_windows * W, 1.0, seed=11)
        trace = lrt_trace(z, f0=F0, window=W, stride=W, null_variant="fixed5",
                          alt_variant="full6", mask=BOTH)
        assert len(trace.centers) == n_windows
        rate = trace.exceedances().mean()
        assert 0.01 <= rate <= 0.12
        assert trace.threshold == pytest.approx(3.8414588, rel=1e-6)

    def test_trace_csv_export(self, tmp_path):
        z = simulate(MATERN, 512, 1.0, seed=12)
        trace = lrt_trace(z, f0=F0, window=256, stride=128, null_variant="matern3",
                          alt_variant="full6", mask=BOTH)
        path = tmp_path / "lrt.csv"
        write_lrt_csv(trace, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("center_time_s,R,df,p_value,threshold_95")
        assert len(lines) == 1 + len(trace.centers)


def test_rolling_csv_export(tmp_path):
    z0 = simulate(MATERN, 700, 1.0, seed=13)
    vals = z0.values.copy()
    vals[500] = np.nan  # forces at least one skipped window
    z = ComplexSeries(values=vals, dt=1.0, allow_gaps=True)
    rf = rolling_fit(z, f0=F0, window=256, stride=128, variant="matern3", mask=BOTH)
    path = tmp_path / "roll.csv"
    write_rolling_csv(rf, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:4] == ["center_time_s", "f0_rad_per_s", "A", "A_ci95_halfwidth"]
    assert len(lines) == 1 + len(rf.centers)
    assert any("gap" in line for line in lines[1:])
