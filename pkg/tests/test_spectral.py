"""Fourier grids, periodogram, expected periodogram, frequency masks."""

import numpy as np
import pytest

from driftfit import (
    ComplexSeries,
    FrequencyMask,
    ModelParams,
    expected_periodogram,
    fourier_frequencies,
    matern_spectrum,
    model_spectrum,
    periodogram,
    simulate,
)
from driftfit.spectral import (
    _expected_ordinates_from_acvs,
    rad_per_s_to_cpd,
    write_periodogram_csv,
)


class TestFourierFrequencies:
    def test_even_four_has_single_nyquist(self):
        np.testing.assert_allclose(
            fourier_frequencies(4, 1.0), [-np.pi, -np.pi / 2, np.pi / 2]
        )

    def test_odd_five(self):
        np.testing.assert_allclose(
            fourier_frequencies(5, 1.0),
            [-4 * np.pi / 5, -2 * np.pi / 5, 2 * np.pi / 5, 4 * np.pi / 5],
        )

    def test_two_hourly_grid_spacing(self):
        # 1200 points at 2-hour sampling: spacing 2*pi/2400 per hour
        freqs = fourier_frequencies(1200, 7200.0)
        spacing_per_hour = (freqs[-1] - freqs[-2]) * 3600.0
        assert spacing_per_hour == pytest.approx(2 * np.pi / 2400)

    @pytest.mark.parametrize("n", [4, 5, 64, 65, 1200])
    def test_count_and_exclusions(self, n):
        freqs = fourier_frequencies(n, 1.0)
        assert freqs.size == n - 1
        assert np.all(freqs != 0.0)
        assert np.all(np.diff(freqs) > 0)
        if n % 2 == 0:
            assert np.sum(np.isclose(np.abs(freqs), np.pi)) == 1
            assert freqs[0] == pytest.approx(-np.pi)
        else:
            assert np.max(np.abs(freqs)) < np.pi


class TestPeriodogram:
    def test_constant_series_is_zero(self):
        z = ComplexSeries(values=np.full(32, 2.0 + 1.0j), dt=1.0)
        assert np.all(periodogram(z).values == 0.0)

    def test_pure_tone_at_fourier_frequency(self):
        n, dt = 64, 0.5
        freqs = fourier_frequencies(n, dt)
        wk = freqs[n // 2 + 5]
        t = np.arange(n) * dt
        z = ComplexSeries(values=np.exp(1j * wk * t), dt=dt)
        pg = periodogram(z)
        k = np.argmin(np.abs(pg.freqs - wk))
        assert pg.values[k] == pytest.approx(n * dt, rel=1e-10)
        others = np.delete(pg.values, k)
        assert np.max(others) < 1e-10 * n * dt

    def test_parseval_randomized(self):
        rng = np.random.default_rng(123)
        for _ in range(100):
            n = int(rng.integers(2, 200))
            dt = float(rng.uniform(0.1, 10.0))
            vals = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            z = ComplexSeries(values=vals, dt=dt)
            pg = periodogram(z)
            lhs = pg.values.sum() / (n * dt)
            rhs = np.mean(np.abs(vals - vals.mean()) ** 2)
            assert abs(lhs - rhs) <= 1e-10 * max(rhs, 1e-30)

    def test_constant_offset_invariance(self):
        rng = np.random.default_rng(5)
        vals = rng.standard_normal(100) + 1j * rng.standard_normal(100)
        a = periodogram(ComplexSeries(values=vals, dt=1.0)).values
        b = periodogram(ComplexSeries(values=vals + (7.0 - 3.0j), dt=1.0)).values
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_real_series_symmetric(self):
        rng = np.random.default_rng(6)
        vals = rng.standard_normal(101).astype(complex)
        pg = periodogram(ComplexSeries(values=vals, dt=1.0))
        np.testing.assert_allclose(pg.values, pg.values[::-1], rtol=1e-12)


class TestExpectedPeriodogram:
    def test_white_noise_is_flat(self):
        n, dt, sigma2 = 64, 2.0, 3.0
        s = np.zeros(n, dtype=complex)
        s[0] = sigma2
        vals = _expected_ordinates_from_acvs(s, n, dt)
        np.testing.assert_allclose(vals, sigma2 * dt, rtol=1e-12)

    def test_matches_monte_carlo_mean(self):
        # light version of the simulation oracle (the acceptance suite runs
        # the full 1000-replicate comparison)
        p = ModelParams.matern_only3(B=10.0, h=0.1, alpha=0.9)
        n, dt, reps = 256, 1.0, 400
        acc = np.zeros(n - 1)
        acc2 = np.zeros(n - 1)
        for seed in range(reps):
            v = periodogram(simulate(p, n, dt, seed=2000 + seed)).values
            acc += v
            acc2 += v**2
        mean = acc / reps
        se = np.sqrt((acc2 / reps - mean**2) / (reps - 1))
        want = expected_periodogram(p, n, dt).values
        frac = np.mean(np.abs(mean - want) <= 3 * se)
        assert frac >= 0.97

    def test_steep_slope_bias_is_upward_at_high_frequency(self):
        # leakage + aliasing push the finite-sample mean above the true
        # spectrum where the true spectrum is smallest
        p = ModelParams.matern_only3(B=10.0, h=0.1, alpha=1.65)
        n = 512
        want = expected_periodogram(p, n, 1.0)
        truth = np.asarray(model_spectrum(p, want.freqs))
        top = np.abs(want.freqs) > 0.8 * np.pi
        assert np.all(want.values[top] > truth[top])

    def test_converges_to_true_spectrum(self):
        p = ModelParams.matern_only3(B=10.0, h=0.1, alpha=0.9)
        devs = []
        for n in (256, 1024, 4096):
            ep = expected_periodogram(p, n, 1.0)
            truth = np.asarray(model_spectrum(p, ep.freqs))
            central = np.abs(ep.freqs) <= 0.5 * np.pi
            devs.append(np.max(np.abs(ep.values - truth)[central] / truth[central]))
        assert devs[0] > devs[1] > devs[2]

    def test_positive_output(self):
        p = ModelParams.full6(A=1.0, B=10.0, omega0=-2.0, c=0.05, h=0.1, alpha=1.3)
        assert np.all(expected_periodogram(p, 333, 1.0).values > 0)


class TestFrequencyMask:
    def test_side_selection_counts(self):
        freqs = fourier_frequencies(65, 1.0)
        both = FrequencyMask(side="both").resolve(freqs)
        neg = FrequencyMask(side="negative").resolve(freqs)
        pos = FrequencyMask(side="positive").resolve(freqs)
        assert both.size == 64 and neg.size == 32 and pos.size == 32
        assert np.all(freqs[neg] < 0) and np.all(freqs[pos] > 0)

    def test_auto_follows_hemisphere(self):
        freqs = fourier_frequencies(64, 1.0)
        m = FrequencyMask(side="auto")
        assert np.all(freqs[m.resolve(freqs, f0=-0.5)] < 0)
        assert np.all(freqs[m.resolve(freqs, f0=+0.5)] > 0)
        with pytest.raises(ValueError):
            m.resolve(freqs)

    def test_cutoff_multiple_of_coriolis(self):
        freqs = fourier_frequencies(128, 1.0)
        m = FrequencyMask(side="negative", cutoff_multiple=1.75)
        idx = m.resolve(freqs, f0=-0.5)
        assert np.all(np.abs(freqs[idx]) <= 1.75 * 0.5)
        with pytest.raises(ValueError):
            m.resolve(freqs)  # multiple needs f0

    def test_absolute_cutoff_and_excludes(self):
        freqs = fourier_frequencies(128, 1.0)
        m = FrequencyMask(side="both", cutoff=1.0, exclude=((0.2, 0.4),))
        kept = freqs[m.resolve(freqs)]
        assert np.all(np.abs(kept) <= 1.0)
        assert not np.any((kept >= 0.2) & (kept <= 0.4))

    def test_cutoff_below_resolution_rejected(self):
        freqs = fourier_frequencies(64, 1.0)
        with pytest.raises(ValueError):
            FrequencyMask(side="both", cutoff=1e-4).resolve(freqs)

    def test_invalid_construction(self):
        with pytest.raises(ValueError):
            FrequencyMask(side="up")
        with pytest.raises(ValueError):
            FrequencyMask(cutoff=1.0, cutoff_multiple=1.5)


def test_periodogram_csv_export(tmp_path):
    p = ModelParams.matern_only3(B=10.0, h=0.1, alpha=0.9)
    pg = periodogram(simulate(p, 64, 2.0, seed=0))
    path = tmp_path / "pg.csv"
    write_periodogram_csv(pg, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# n=64"
    assert lines[1].startswith("# dt=")
    assert lines[2] == "freq_rad_per_s,freq_cpd,psd"
    assert len(lines) == 3 + 63
    f, cpd, psd = (float(x) for x in lines[3].split(","))
    assert cpd == pytest.approx(rad_per_s_to_cpd(f))
    assert psd == pytest.approx(pg.values[0])
