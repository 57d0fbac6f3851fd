import math

import numpy as np
import pytest

from searesponse.errors import ConfigurationError, SchemaError
from searesponse.simulator import (
    DEFAULT_SIM_CONFIG,
    SimConfig,
    ThrustCurve,
    TransferFunction,
    WaveSpectrum,
    extract_peaks,
    load_sim_config,
    realize_time_series,
    response_spectrum,
    simulate,
    wave_spectrum,
    wind_moment,
    write_sim_config,
)
from searesponse.weather import WeatherRecord


class TestWaveSpectrum:
    def test_zero_hs_gives_zero_density(self, fast_sim_config):
        spec = wave_spectrum(0.0, 10.0, fast_sim_config.omega_grid)
        assert np.all(spec.density == 0.0)

    @pytest.mark.parametrize("hs,tp", [(3.2, 11.3), (7.4, 9.6)])
    def test_zeroth_moment_normalization(self, fast_sim_config, hs, tp):
        spec = wave_spectrum(hs, tp, fast_sim_config.omega_grid)
        m0 = np.trapezoid(spec.density, spec.omega)
        assert m0 == pytest.approx(hs * hs / 16.0, rel=0.005)

    def test_normalization_over_random_inputs(self, fast_sim_config, rng):
        for _ in range(25):
            hs = rng.uniform(0.2, 12.0)
            tp = rng.uniform(4.0, 20.0)
            spec = wave_spectrum(hs, tp, fast_sim_config.omega_grid)
            assert spec.moment(0) == pytest.approx(hs * hs / 16.0, rel=0.005)

    def test_peak_location_on_grid(self):
        omega = DEFAULT_SIM_CONFIG.omega_grid
        spec = wave_spectrum(3.2, 11.3, omega)
        argmax = int(np.argmax(spec.density))
        wp = 2.0 * math.pi / 11.3
        step = omega[1] - omega[0]
        assert abs(omega[argmax] - wp) <= step

    def test_peak_above_nyquist_rejected(self, fast_sim_config):
        with pytest.raises(ConfigurationError):
            wave_spectrum(1.0, 0.5, fast_sim_config.omega_grid)

    def test_negative_hs_rejected(self, fast_sim_config):
        with pytest.raises(ConfigurationError):
            wave_spectrum(-0.1, 10.0, fast_sim_config.omega_grid)


class TestResponseSpectrum:
    def test_zero_in_zero_out(self, fast_sim_config):
        wave = wave_spectrum(0.0, 10.0, fast_sim_config.omega_grid)
        resp = response_spectrum(wave, fast_sim_config.transfer)
        assert np.all(resp.density == 0.0)

    def test_resonant_amplification_value(self):
        # |H(omega0)|^2 = gain^2 / (2 zeta)^2
        tf = TransferFunction(omega0=1.1, zeta=0.1, gain=1.0)
        assert tf.magnitude_squared(np.array([1.1]))[0] == pytest.approx(25.0, rel=1e-12)

    def test_density_non_negative(self, fast_sim_config, rng):
        for _ in range(10):
            wave = wave_spectrum(rng.uniform(0.2, 12), rng.uniform(4, 20), fast_sim_config.omega_grid)
            resp = response_spectrum(wave, fast_sim_config.transfer)
            assert np.all(resp.density >= 0.0)


class TestRealizeTimeSeries:
    def test_zero_density_gives_zero_series(self, fast_sim_config):
        wave = wave_spectrum(0.0, 10.0, fast_sim_config.omega_grid)
        series = realize_time_series(wave, fast_sim_config.dt, fast_sim_config.duration, seed=4)
        assert np.all(series == 0.0)
        assert len(series) == fast_sim_config.n_samples

    def test_deterministic(self, fast_sim_config):
        wave = wave_spectrum(2.0, 9.0, fast_sim_config.omega_grid)
        resp = response_spectrum(wave, fast_sim_config.transfer)
        a = realize_time_series(resp, fast_sim_config.dt, fast_sim_config.duration, seed=11)
        b = realize_time_series(resp, fast_sim_config.dt, fast_sim_config.duration, seed=11)
        c = realize_time_series(resp, fast_sim_config.dt, fast_sim_config.duration, seed=12)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_variance_matches_spectral_integral(self, fast_sim_config):
        wave = wave_spectrum(3.0, 10.0, fast_sim_config.omega_grid)
        resp = response_spectrum(wave, fast_sim_config.transfer)
        target = np.trapezoid(resp.density, resp.omega)
        variances = [
            realize_time_series(resp, fast_sim_config.dt, fast_sim_config.duration, seed=s).var()
            for s in range(200)
        ]
        assert np.mean(variances) == pytest.approx(target, rel=0.02)

    def test_grid_mismatch_rejected(self, fast_sim_config):
        wave = wave_spectrum(2.0, 9.0, fast_sim_config.omega_grid)
        with pytest.raises(ConfigurationError):
            realize_time_series(wave, dt=0.25, duration=fast_sim_config.duration, seed=0)

    def test_too_short_duration_rejected(self, fast_sim_config):
        wave = wave_spectrum(2.0, 9.0, fast_sim_config.omega_grid)
        with pytest.raises(ConfigurationError):
            realize_time_series(wave, dt=0.5, duration=100.0, seed=0)


class TestWindMoment:
    CURVE = ThrustCurve(rated_speed=11.0, cutout_speed=25.0, rated_force=1.0e3)

    def test_zero_speed(self):
        assert wind_moment(0.0, self.CURVE, 50.0) == 0.0

    def test_continuity_at_rated(self):
        below = wind_moment(11.0 - 1e-9, self.CURVE, 50.0)
        at = wind_moment(11.0, self.CURVE, 50.0)
        assert at == pytest.approx(self.CURVE.rated_force * 50.0)
        assert below == pytest.approx(at, rel=1e-6)

    def test_flat_between_rated_and_cutout(self):
        assert wind_moment(18.0, self.CURVE, 50.0) == self.CURVE.rated_force * 50.0
        assert wind_moment(25.0, self.CURVE, 50.0) == self.CURVE.rated_force * 50.0

    def test_zero_above_cutout(self):
        assert wind_moment(26.0, self.CURVE, 50.0) == 0.0

    def test_cubic_below_rated(self):
        assert wind_moment(5.5, self.CURVE, 50.0) == pytest.approx(1.0e3 * 0.5**3 * 50.0)


def _reference_peak_scan(series, threshold):
    """Independent linear scan: walk the series, track segment maxima."""
    peaks = []
    in_segment = False
    current = None
    for i in range(len(series) - 1):
        if series[i] <= threshold < series[i + 1]:
            if in_segment:
                peaks.append(current)
            in_segment = True
            current = -math.inf
        if in_segment and series[i + 1] > current:
            current = series[i + 1]
    if in_segment:
        peaks.append(current)
    return np.array(peaks)


class TestExtractPeaks:
    def test_constant_series_has_no_peaks(self):
        out = extract_peaks(np.full(100, 3.0), 3.0)
        assert out.count == 0

    def test_sine_wave_ten_periods(self):
        # 100 samples/period puts a sample exactly on every crest.
        t = np.arange(1000)
        series = np.sin(2.0 * np.pi * t / 100.0)
        out = extract_peaks(series, 0.0)
        assert out.count == 10
        np.testing.assert_allclose(out.peaks, 1.0, rtol=0, atol=0)

    def test_matches_reference_scan_on_random_series(self, rng):
        for _ in range(1000):
            n = int(rng.integers(2, 400))
            series = rng.normal(0.0, 1.0, n)
            threshold = float(series.mean())
            out = extract_peaks(series, threshold)
            expected = _reference_peak_scan(series, threshold)
            np.testing.assert_array_equal(out.peaks, expected)
            assert np.all(out.peaks > threshold) or out.count == 0

    def test_all_above_threshold_gives_no_crossings(self):
        out = extract_peaks(np.array([5.0, 6.0, 5.5, 7.0]), 1.0)
        assert out.count == 0

    def test_too_short_series_rejected(self):
        with pytest.raises(ConfigurationError):
            extract_peaks(np.array([1.0]), 0.0)


class TestSimulate:
    def test_small_sea_state(self, fast_sim_config):
        record = WeatherRecord(hs=0.2, tp=10.0, vw=0.0, index=0)
        out = simulate(record, fast_sim_config, seed=3)
        assert out.count >= 0

    def test_peaks_exceed_series_mean(self, fast_sim_config):
        record = WeatherRecord(hs=2.5, tp=9.0, vw=8.0, index=0)
        wave = wave_spectrum(record.hs, record.tp, fast_sim_config.omega_grid)
        resp = response_spectrum(wave, fast_sim_config.transfer)
        series = realize_time_series(resp, fast_sim_config.dt, fast_sim_config.duration, seed=21)
        series = series + wind_moment(record.vw, fast_sim_config.thrust, fast_sim_config.lever_arm)
        out = simulate(record, fast_sim_config, seed=21)
        assert out.count > 0
        assert np.all(out.peaks > series.mean())

    def test_deterministic(self, fast_sim_config):
        record = WeatherRecord(hs=3.0, tp=10.0, vw=5.0, index=0)
        a = simulate(record, fast_sim_config, seed=77)
        b = simulate(record, fast_sim_config, seed=77)
        np.testing.assert_array_equal(a.peaks, b.peaks)

    def test_max_peak_monotone_in_hs(self, fast_sim_config):
        maxima = []
        for hs in (0.5, 1.0, 2.0, 4.0, 8.0):
            record = WeatherRecord(hs=hs, tp=10.0, vw=3.0, index=0)
            out = simulate(record, fast_sim_config, seed=5)
            maxima.append(out.peaks.max())
        assert all(a <= b for a, b in zip(maxima, maxima[1:]))

    def test_count_varies_with_seed(self, fast_sim_config):
        record = WeatherRecord(hs=3.0, tp=10.0, vw=0.0, index=0)
        counts = {simulate(record, fast_sim_config, seed=s).count for s in range(25)}
        assert len(counts) > 1


class TestSimConfigFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "sim.json"
        write_sim_config(path, DEFAULT_SIM_CONFIG)
        assert load_sim_config(path) == DEFAULT_SIM_CONFIG

    def test_missing_key_rejected(self, tmp_path):
        path = tmp_path / "sim.json"
        path.write_text('{"dt": 0.5}')
        with pytest.raises(SchemaError):
            load_sim_config(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "sim.json"
        path.write_text("not json")
        with pytest.raises(SchemaError):
            load_sim_config(path)


def test_spectrum_type_validation():
    with pytest.raises(ConfigurationError):
        WaveSpectrum(omega=np.array([0.0, 1.0, 1.5]), density=np.array([0.0, 1.0, 1.0]))
    with pytest.raises(ConfigurationError):
        WaveSpectrum(omega=np.array([0.0, 1.0]), density=np.array([0.0, -1.0]))
