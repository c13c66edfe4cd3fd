"""Doubly-selective fading channel synthesis and application.

Each channel tap is a zero-mean complex Gaussian process with Jakes
autocorrelation ``J0(2*pi*f_d*T_sym*lag)``, synthesized by a sum of
sinusoids with random arrival angles and phases.  The per-symbol frequency
response over the active subcarriers is the DFT of the tap vector, and the
channel acts multiplicatively per subcarrier (block fading within one OFDM
symbol, no intercarrier interference).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

__all__ = [
    "ChannelProfile",
    "ChannelRealization",
    "NoiseSpec",
    "Scenario",
    "scenario",
    "SCENARIOS",
    "active_bins_80211p",
    "dft_on_matrix",
    "default_profile",
    "load_profile",
    "generate_channel",
    "apply_channel",
]

# 802.11p (10 MHz) numerology defaults.
DEFAULT_K_FFT = 64
DEFAULT_SYMBOL_DURATION = 8e-6  # 6.4 us FFT + 1.6 us guard interval
DEFAULT_N_SINUSOIDS = 32


def active_bins_80211p(k_fft: int = DEFAULT_K_FFT) -> np.ndarray:
    """The 52 used subcarriers in spectral order: bins -26..-1, +1..+26 (no DC)."""
    neg = np.arange(k_fft - 26, k_fft)
    pos = np.arange(1, 27)
    return np.concatenate([neg, pos])


def dft_on_matrix(active_bins: np.ndarray, n_taps: int, k_fft: int) -> np.ndarray:
    """Row-selected DFT matrix: F[k, l] = exp(-2j*pi*bin_k*l / k_fft)."""
    bins = np.asarray(active_bins, dtype=np.float64)
    taps = np.arange(n_taps, dtype=np.float64)
    return np.exp(-2j * np.pi * np.outer(bins, taps) / k_fft)


@dataclass(frozen=True)
class ChannelProfile:
    """Power-delay profile plus Doppler and OFDM numerology.

    ``delays`` are integer sample offsets; ``powers`` are linear fractions
    summing to one.  ``n_taps`` (max delay + 1) must not exceed the number
    of active subcarriers or the delay-subspace projection is ill-posed.
    """

    delays: np.ndarray
    powers: np.ndarray
    doppler_hz: float
    symbol_duration: float = DEFAULT_SYMBOL_DURATION
    k_fft: int = DEFAULT_K_FFT
    active_bins: np.ndarray = field(default_factory=active_bins_80211p)

    def __post_init__(self):
        delays = np.asarray(self.delays, dtype=np.int64)
        powers = np.asarray(self.powers, dtype=np.float64)
        if delays.ndim != 1 or delays.shape != powers.shape:
            raise ValueError("delays and powers must be 1-D and equal length")
        if delays.size == 0 or np.any(delays < 0):
            raise ValueError("delays must be non-negative and non-empty")
        if len(np.unique(delays)) != delays.size:
            raise ValueError("duplicate tap delays")
        if np.any(powers < 0) or abs(powers.sum() - 1.0) > 1e-9:
            raise ValueError("tap powers must be non-negative and sum to 1")
        bins = np.asarray(self.active_bins, dtype=np.int64)
        if self.n_taps > bins.size:
            raise ValueError(
                f"channel length {self.n_taps} exceeds {bins.size} active subcarriers"
            )
        object.__setattr__(self, "delays", delays)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "active_bins", bins)

    @property
    def n_taps(self) -> int:
        """Channel length L = max delay + 1."""
        return int(self.delays.max()) + 1

    @property
    def k_on(self) -> int:
        return self.active_bins.size

    def with_doppler(self, doppler_hz: float) -> "ChannelProfile":
        return replace(self, doppler_hz=doppler_hz)

    def dft_matrix(self) -> np.ndarray:
        return dft_on_matrix(self.active_bins, self.n_taps, self.k_fft)


@dataclass(frozen=True)
class ChannelRealization:
    """One frame's channel: frequency response H (k_on, I) and the
    per-symbol tap gains (n_taps, I) that generated it."""

    freq_response: np.ndarray
    taps: np.ndarray


@dataclass(frozen=True)
class NoiseSpec:
    """AWGN level: sigma2 = 10**(-snr_db/10) for unit average signal power."""

    snr_db: float
    sigma2: float

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoiseSpec":
        return cls(snr_db=snr_db, sigma2=10.0 ** (-snr_db / 10.0))


@dataclass(frozen=True)
class Scenario:
    name: str
    speed_kmph: float
    doppler_hz: float
    n_pilots: int


SCENARIOS = {
    "low": Scenario("low", 45.0, 250.0, 1),
    "high": Scenario("high", 100.0, 500.0, 2),
    "very_high": Scenario("very_high", 200.0, 1000.0, 3),
}


def scenario(name: str) -> Scenario:
    """Mobility scenario -> (vehicle speed, Doppler frequency, pilot count)."""
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None


def default_profile(doppler_hz: float = 0.0) -> ChannelProfile:
    """Stand-in vehicular profile: 12 taps, exponentially decaying powers.

    Real deployments should load a measured power-delay profile from a
    config file; every estimator here is profile-agnostic.
    """
    delays = np.arange(12)
    powers = np.exp(-delays / 3.0)
    return ChannelProfile(delays=delays, powers=powers / powers.sum(), doppler_hz=doppler_hz)


def load_profile(path_or_text, doppler_hz: float | None = None) -> ChannelProfile:
    """Read a ChannelProfile from a JSON config.

    Schema: ``delays_samples`` (list of int), ``powers`` (list of float),
    ``powers_unit`` ('linear' | 'db', default linear; powers are normalized
    to unit total), ``doppler_hz``, optional ``symbol_duration_s``,
    ``fft_size`` and ``active_bins`` (defaults: 8e-6 s, 64, 802.11p set).
    """
    if hasattr(path_or_text, "read"):
        raw = json.load(path_or_text)
    else:
        with open(path_or_text) as fh:
            raw = json.load(fh)
    powers = np.asarray(raw["powers"], dtype=np.float64)
    if raw.get("powers_unit", "linear") == "db":
        powers = 10.0 ** (powers / 10.0)
    powers = powers / powers.sum()
    k_fft = int(raw.get("fft_size", DEFAULT_K_FFT))
    bins = raw.get("active_bins")
    bins = np.asarray(bins, dtype=np.int64) if bins is not None else active_bins_80211p(k_fft)
    return ChannelProfile(
        delays=np.asarray(raw["delays_samples"], dtype=np.int64),
        powers=powers,
        doppler_hz=float(doppler_hz if doppler_hz is not None else raw.get("doppler_hz", 0.0)),
        symbol_duration=float(raw.get("symbol_duration_s", DEFAULT_SYMBOL_DURATION)),
        k_fft=k_fft,
        active_bins=bins,
    )


def packaged_profile(name: str = "vehicular_exp12", doppler_hz: float | None = None) -> ChannelProfile:
    """Load one of the profiles shipped with the package."""
    ref = resources.files("ofdmchest.profiles").joinpath(f"{name}.json")
    with ref.open() as fh:
        return load_profile(fh, doppler_hz=doppler_hz)


def generate_channel(
    profile: ChannelProfile,
    n_symbols: int,
    rng: np.random.Generator,
    n_sinusoids: int = DEFAULT_N_SINUSOIDS,
) -> ChannelRealization:
    """Draw one channel realization over ``n_symbols`` OFDM symbols.

    Tap ``l`` with power ``P_l`` is ``sqrt(P_l / M) * sum_m exp(j*(w_m*t + phi_m))``
    with ``w_m = 2*pi*f_d*cos(alpha_m)`` and i.i.d. uniform angles/phases, so
    the ensemble autocorrelation at lag ``d`` symbols is ``P_l * J0(2*pi*f_d*T_sym*d)``.
    Draw order (angles then phases, per call) is fixed for reproducibility.
    """
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    n_paths = profile.delays.size
    angles = rng.uniform(0.0, 2.0 * np.pi, size=(n_paths, n_sinusoids))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(n_paths, n_sinusoids))
    t = np.arange(n_symbols) * profile.symbol_duration
    omega = 2.0 * np.pi * profile.doppler_hz * np.cos(angles)
    arg = omega[:, :, None] * t[None, None, :] + phases[:, :, None]
    series = (np.cos(arg) + 1j * np.sin(arg)).sum(axis=1)
    series *= np.sqrt(profile.powers / n_sinusoids)[:, None]

    taps = np.zeros((profile.n_taps, n_symbols), dtype=np.complex128)
    taps[profile.delays, :] = series
    freq = profile.dft_matrix() @ taps
    return ChannelRealization(freq_response=freq, taps=taps)


def apply_channel(
    symbols: np.ndarray,
    realization: ChannelRealization,
    noise: NoiseSpec,
    rng: np.random.Generator,
) -> np.ndarray:
    """Y = H * X + V elementwise, V circular complex Gaussian of variance sigma2."""
    x = np.asarray(symbols)
    h = realization.freq_response
    if x.shape != h.shape:
        raise ValueError(f"frame shape {x.shape} does not match channel {h.shape}")
    y = h * x
    if noise.sigma2 > 0.0:
        scale = np.sqrt(noise.sigma2 / 2.0)
        y = y + scale * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    return y
