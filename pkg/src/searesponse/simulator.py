"""Stochastic spectral response simulator.

Maps one hour of weather to an array of peak structural responses:
parametric wave spectrum -> transfer-function filtering -> random-phase
time-domain realization -> constant wind-moment offset -> mean-crossing
peak extraction. The number of peaks L is itself random, varying with the
realization seed.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from searesponse.errors import ConfigurationError, SchemaError
from searesponse.weather import WeatherRecord

logger = logging.getLogger(__name__)

PEAK_ENHANCEMENT = 3.3

# Relative tolerance for matching a spectrum grid against FFT bins.
_GRID_RTOL = 1e-9


@dataclass(frozen=True)
class TransferFunction:
    """Single-degree-of-freedom resonant response amplitude operator.

    Parameters
    ----------
    omega0 : natural angular frequency [rad/s]
    zeta : damping ratio (0 < zeta < 1)
    gain : response scale [N*m per meter of wave amplitude]
    """

    omega0: float = 0.65
    zeta: float = 0.10
    gain: float = 3.2e4

    def __post_init__(self):
        if self.omega0 <= 0.0:
            raise ConfigurationError(f"omega0 must be positive, got {self.omega0}")
        if not 0.0 < self.zeta < 1.0:
            raise ConfigurationError(f"zeta must be in (0, 1), got {self.zeta}")
        if self.gain <= 0.0:
            raise ConfigurationError(f"gain must be positive, got {self.gain}")

    def magnitude_squared(self, omega: np.ndarray) -> np.ndarray:
        w0sq = self.omega0 * self.omega0
        return (
            self.gain * self.gain * w0sq * w0sq
            / ((w0sq - omega * omega) ** 2 + (2.0 * self.zeta * self.omega0 * omega) ** 2)
        )


@dataclass(frozen=True)
class ThrustCurve:
    """Piecewise wind load: cubic below rated speed, flat to cutout, zero above.

    The default rated moment (rated_force * lever arm) is a few percent of
    typical wave-induced peaks: wind is a secondary load, so fitted peak
    distributions vary smoothly across the input box.
    """

    rated_speed: float = 11.0
    cutout_speed: float = 25.0
    rated_force: float = 100.0

    def __post_init__(self):
        if not 0.0 < self.rated_speed < self.cutout_speed:
            raise ConfigurationError(
                f"need 0 < rated_speed < cutout_speed, got {self.rated_speed}, {self.cutout_speed}"
            )
        if self.rated_force <= 0.0:
            raise ConfigurationError(f"rated_force must be positive, got {self.rated_force}")


@dataclass
class WaveSpectrum:
    """One-sided spectral density on a uniform angular-frequency grid."""

    omega: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        if self.omega.shape != self.density.shape or self.omega.ndim != 1:
            raise ConfigurationError("omega and density must be 1-d arrays of equal length")
        if len(self.omega) < 2:
            raise ConfigurationError("spectrum grid needs at least 2 points")
        steps = np.diff(self.omega)
        if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9):
            raise ConfigurationError("omega grid must be strictly increasing with uniform spacing")
        if np.any(self.density < 0.0):
            raise ConfigurationError("spectral density must be non-negative")

    def moment(self, order: int = 0) -> float:
        """Spectral moment m_n by trapezoid quadrature."""
        return float(np.trapezoid(self.density * self.omega**order, self.omega))


@dataclass
class SimOutput:
    """Array of peak responses from one simulated hour."""

    peaks: np.ndarray

    def __post_init__(self):
        self.peaks = np.asarray(self.peaks, dtype=float)

    @property
    def count(self) -> int:
        return len(self.peaks)


@dataclass(frozen=True)
class SimConfig:
    """Discretization and structure model for one simulator run.

    duration/dt fixes the sample count (>= 1024, zero-padded to the next
    power of two for the transform); the omega grid is matched to the
    transform bins so the Nyquist frequency pi/dt caps the grid exactly.
    """

    duration: float = 3600.0
    dt: float = 0.5
    transfer: TransferFunction = field(default_factory=TransferFunction)
    thrust: ThrustCurve = field(default_factory=ThrustCurve)
    lever_arm: float = 50.0

    def __post_init__(self):
        if self.duration <= 0.0 or self.dt <= 0.0:
            raise ConfigurationError("duration and dt must be positive")
        if self.n_samples < 1024:
            raise ConfigurationError(
                f"duration/dt must give at least 1024 samples, got {self.n_samples}"
            )
        if self.lever_arm <= 0.0:
            raise ConfigurationError(f"lever_arm must be positive, got {self.lever_arm}")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def n_fft(self) -> int:
        return 1 << math.ceil(math.log2(self.n_samples))

    @property
    def omega_grid(self) -> np.ndarray:
        """Angular frequencies of the rfft bins, 0 .. pi/dt."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.n_fft, d=self.dt)


DEFAULT_SIM_CONFIG = SimConfig()

_SIM_CONFIG_KEYS = (
    "dt", "duration", "omega0", "zeta", "gain",
    "rated_speed", "cutout_speed", "rated_force", "lever_arm",
)


def load_sim_config(path: str | Path) -> SimConfig:
    """Read a simulator configuration from a flat JSON file."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    missing = [k for k in _SIM_CONFIG_KEYS if k not in raw]
    extra = [k for k in raw if k not in _SIM_CONFIG_KEYS]
    if missing or extra:
        raise SchemaError(f"{path}: missing keys {missing}, unexpected keys {extra}")
    try:
        values = {k: float(raw[k]) for k in _SIM_CONFIG_KEYS}
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: non-numeric value: {exc}")
    return SimConfig(
        duration=values["duration"],
        dt=values["dt"],
        transfer=TransferFunction(values["omega0"], values["zeta"], values["gain"]),
        thrust=ThrustCurve(values["rated_speed"], values["cutout_speed"], values["rated_force"]),
        lever_arm=values["lever_arm"],
    )


def write_sim_config(path: str | Path, cfg: SimConfig) -> None:
    payload = {
        "dt": cfg.dt,
        "duration": cfg.duration,
        "omega0": cfg.transfer.omega0,
        "zeta": cfg.transfer.zeta,
        "gain": cfg.transfer.gain,
        "rated_speed": cfg.thrust.rated_speed,
        "cutout_speed": cfg.thrust.cutout_speed,
        "rated_force": cfg.thrust.rated_force,
        "lever_arm": cfg.lever_arm,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def wave_spectrum(hs: float, tp: float, omega: np.ndarray) -> WaveSpectrum:
    """Single-peak parametric wave spectrum on the given grid.

    Uses the JONSWAP functional form with peak enhancement 3.3, then
    rescales so the zeroth spectral moment equals hs^2/16 exactly on the
    discrete grid (trapezoid rule). hs = 0 yields a zero density.
    """
    if hs < 0.0:
        raise ConfigurationError(f"hs must be non-negative, got {hs}")
    if tp <= 0.0:
        raise ConfigurationError(f"tp must be positive, got {tp}")
    omega = np.asarray(omega, dtype=float)
    wp = 2.0 * np.pi / tp
    if wp > omega[-1]:
        raise ConfigurationError(
            f"peak frequency {wp:.4f} rad/s above top of grid {omega[-1]:.4f} rad/s (tp={tp})"
        )
    density = np.zeros_like(omega)
    if hs > 0.0:
        w = omega[omega > 0.0]
        sigma = np.where(w > wp, 0.09, 0.07)
        peak_arg = np.exp(-0.5 * ((w - wp) / (sigma * wp)) ** 2)
        shape = w**-5.0 * np.exp(-1.25 * (wp / w) ** 4) * PEAK_ENHANCEMENT**peak_arg
        density[omega > 0.0] = shape
        m0 = np.trapezoid(density, omega)
        density *= (hs * hs / 16.0) / m0
    return WaveSpectrum(omega=omega, density=density)


def response_spectrum(wave: WaveSpectrum, tf: TransferFunction) -> WaveSpectrum:
    """Filter the wave density through |H(omega)|^2."""
    return WaveSpectrum(omega=wave.omega, density=tf.magnitude_squared(wave.omega) * wave.density)


def _fft_layout(dt: float, duration: float) -> tuple[int, int]:
    n_samples = int(round(duration / dt))
    if n_samples < 1024:
        raise ConfigurationError(f"duration/dt must give at least 1024 samples, got {n_samples}")
    return n_samples, 1 << math.ceil(math.log2(n_samples))


def realize_time_series(resp: WaveSpectrum, dt: float, duration: float, seed: int) -> np.ndarray:
    """Synthesize one zero-mean stationary realization of the response.

    Each frequency bin gets deterministic amplitude sqrt(2 S(w_k) dw) and an
    independent uniform random phase; the series is the inverse transform,
    truncated to duration/dt samples. The series variance equals the
    trapezoid integral of the density in expectation.
    """
    n_samples, n_fft = _fft_layout(dt, duration)
    omega = resp.omega
    if len(omega) != n_fft // 2 + 1 or omega[0] != 0.0:
        raise ConfigurationError(
            f"spectrum grid ({len(omega)} bins) does not match rfft layout for "
            f"dt={dt}, duration={duration} ({n_fft // 2 + 1} bins)"
        )
    domega = 2.0 * np.pi / (n_fft * dt)
    if abs(omega[1] - domega) > _GRID_RTOL * domega:
        raise ConfigurationError(
            f"grid spacing {omega[1]:.6e} does not match transform bin width {domega:.6e}"
        )
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, len(omega))
    amplitude = np.sqrt(2.0 * resp.density * domega)
    spectrum = (n_fft / 2.0) * amplitude * np.exp(1j * phases)
    spectrum[0] = 0.0   # zero mean
    spectrum[-1] = 0.0  # drop the (phase-less) Nyquist bin
    series = np.fft.irfft(spectrum, n=n_fft)
    return series[:n_samples]


def wind_moment(vw: float, thrust: ThrustCurve, lever_arm: float) -> float:
    """Quasi-static wind-induced moment from the thrust curve."""
    if vw < 0.0:
        raise ConfigurationError(f"vw must be non-negative, got {vw}")
    if vw < thrust.rated_speed:
        force = thrust.rated_force * (vw / thrust.rated_speed) ** 3
    elif vw <= thrust.cutout_speed:
        force = thrust.rated_force
    else:
        force = 0.0
    return force * lever_arm


def extract_peaks(series: np.ndarray, threshold: float) -> SimOutput:
    """Per-cycle maxima between successive threshold up-crossings.

    An up-crossing sits at index i when series[i] <= threshold < series[i+1].
    Each pair of consecutive up-crossings contributes the maximum strictly
    between them; the tail segment after the last up-crossing contributes
    its maximum as well. No crossings (e.g. a constant series) gives L = 0.
    """
    series = np.asarray(series, dtype=float)
    if len(series) < 2:
        raise ConfigurationError("series must have at least 2 samples")
    up = np.nonzero((series[:-1] <= threshold) & (series[1:] > threshold))[0]
    if len(up) == 0:
        return SimOutput(peaks=np.empty(0))
    # Segment [up[j]+1 : up[j+1]+1) contains the crossing sample up[j+1]
    # (below threshold, never the max), so its maximum equals the maximum
    # strictly between the two crossings; reduceat's final segment runs to
    # the end of the series.
    peaks = np.maximum.reduceat(series, up + 1)
    return SimOutput(peaks=peaks)


def simulate(record: WeatherRecord, cfg: SimConfig = DEFAULT_SIM_CONFIG, seed: int = 0) -> SimOutput:
    """One stochastic simulator run: weather in, peak response array out.

    The wind moment enters as a constant offset over the hour and the
    up-crossing threshold is the arithmetic mean of the realized series, so
    peak values are absolute moments while the crossing structure follows
    the wave-induced part alone.
    """
    wave = wave_spectrum(record.hs, record.tp, cfg.omega_grid)
    resp = response_spectrum(wave, cfg.transfer)
    series = realize_time_series(resp, cfg.dt, cfg.duration, seed)
    series = series + wind_moment(record.vw, cfg.thrust, cfg.lever_arm)
    return extract_peaks(series, threshold=float(series.mean()))
