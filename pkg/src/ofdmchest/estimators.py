"""Pilot-symbol channel estimation and recurrent-network input assembly.

Two classical per-pilot estimators are provided: plain least squares
(per-subcarrier division by the known pilot) and its delay-subspace
refinement (projection onto the span of the first L DFT columns, which
suppresses noise by a factor of roughly L/K_on).  Data-symbol estimates
come either from Wiener-weighted interpolation between bounding pilots or
from the recurrent interpolator in :mod:`ofdmchest.rnn`, which consumes
the zero-inserted, real-stacked matrix built by :func:`assemble_input`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import j0

from .channel import dft_on_matrix
from .modem import PilotConfig

__all__ = [
    "DftBasis",
    "PilotEstimates",
    "EstimatorInput",
    "ls_pilot",
    "als_pilot",
    "estimate_pilots",
    "stack_real",
    "unstack_real",
    "assemble_input",
    "jakes_correlation",
    "wi_estimate",
    "linear_interp_estimate",
    "nmse",
]


@dataclass(frozen=True)
class DftBasis:
    """Active-subcarrier DFT matrix F (k_on, L) and its pseudo-inverse."""

    f_on: np.ndarray
    f_pinv: np.ndarray

    @classmethod
    def create(cls, active_bins: np.ndarray, n_taps: int, k_fft: int) -> "DftBasis":
        if n_taps > len(active_bins):
            raise ValueError("n_taps must not exceed the number of active subcarriers")
        f_on = dft_on_matrix(active_bins, n_taps, k_fft)
        gram = f_on.conj().T @ f_on
        f_pinv = np.linalg.solve(gram, f_on.conj().T)
        return cls(f_on=f_on, f_pinv=f_pinv)

    @classmethod
    def from_profile(cls, profile, n_taps: int | None = None) -> "DftBasis":
        """Basis matching a ChannelProfile; ``n_taps`` overrides the profile's
        true channel length (receivers often over-estimate it)."""
        return cls.create(profile.active_bins, n_taps or profile.n_taps, profile.k_fft)

    @property
    def k_on(self) -> int:
        return self.f_on.shape[0]

    @property
    def n_taps(self) -> int:
        return self.f_on.shape[1]


@dataclass(frozen=True)
class PilotEstimates:
    """Per-pilot-symbol channel estimates, one column per pilot symbol."""

    h_hat: np.ndarray  # complex, (k_on, P)
    method: str  # 'sls' or 'als'


def ls_pilot(y_pilot: np.ndarray, pilot_values: np.ndarray) -> np.ndarray:
    """Least-squares estimate at one pilot symbol: h = y / p per subcarrier."""
    y = np.asarray(y_pilot, dtype=np.complex128)
    p = np.asarray(pilot_values, dtype=np.complex128)
    if y.shape != p.shape:
        raise ValueError("received pilot and pilot values must have equal shape")
    return y / p


def als_pilot(h_ls: np.ndarray, basis: DftBasis) -> np.ndarray:
    """Project an LS estimate onto the L-tap delay subspace: F (F^+ h)."""
    h = np.asarray(h_ls, dtype=np.complex128)
    if h.shape[0] != basis.k_on:
        raise ValueError(f"expected leading dimension {basis.k_on}, got {h.shape[0]}")
    return basis.f_on @ (basis.f_pinv @ h)


def estimate_pilots(
    received: np.ndarray,
    cfg: PilotConfig,
    basis: DftBasis | None = None,
    method: str = "als",
) -> PilotEstimates:
    """Estimate the channel at every pilot symbol of a received frame."""
    y = np.asarray(received, dtype=np.complex128)
    if y.shape != (cfg.k_on, cfg.n_symbols):
        raise ValueError("received frame shape does not match the pilot config")
    h = y[:, list(cfg.pilot_indices)] / cfg.pilot_values[:, None]
    if method == "als":
        if basis is None:
            raise ValueError("ALS needs a DftBasis")
        h = als_pilot(h, basis)
    elif method != "sls":
        raise ValueError(f"unknown pilot estimation method {method!r}")
    return PilotEstimates(h_hat=h, method=method)


def stack_real(h: np.ndarray) -> np.ndarray:
    """Vertically stack real over imaginary parts: (k, i) complex -> (2k, i) real."""
    h = np.asarray(h, dtype=np.complex128)
    return np.concatenate([h.real, h.imag], axis=0)


def unstack_real(h_stacked: np.ndarray) -> np.ndarray:
    """Inverse of :func:`stack_real`."""
    hs = np.asarray(h_stacked, dtype=np.float64)
    if hs.shape[0] % 2 != 0:
        raise ValueError("stacked matrix must have an even number of rows")
    k = hs.shape[0] // 2
    return hs[:k] + 1j * hs[k:]


@dataclass(frozen=True)
class EstimatorInput:
    """Recurrent-network input: real-stacked pilot estimates with zeroed
    data-symbol columns, plus the pilot-position mask."""

    h_in: np.ndarray  # real, (2*k_on, n_symbols)
    pilot_mask: np.ndarray  # bool, (n_symbols,)


def assemble_input(estimates: PilotEstimates, cfg: PilotConfig) -> EstimatorInput:
    """Zero-insert pilot estimates at the frame grid and stack to the real domain."""
    h_hat = np.asarray(estimates.h_hat, dtype=np.complex128)
    if h_hat.shape != (cfg.k_on, cfg.n_pilots):
        raise ValueError("estimates shape does not match the pilot config")
    full = np.zeros((cfg.k_on, cfg.n_symbols), dtype=np.complex128)
    full[:, list(cfg.pilot_indices)] = h_hat
    mask = np.zeros(cfg.n_symbols, dtype=bool)
    mask[list(cfg.pilot_indices)] = True
    return EstimatorInput(h_in=stack_real(full), pilot_mask=mask)


def jakes_correlation(lag_symbols: np.ndarray, doppler_hz: float, symbol_duration: float) -> np.ndarray:
    """Time correlation of a Jakes-faded tap at integer symbol lags."""
    return j0(2.0 * np.pi * doppler_hz * symbol_duration * np.asarray(lag_symbols, dtype=np.float64))


def wi_estimate(
    pilot_estimates: np.ndarray,
    cfg: PilotConfig,
    doppler_hz: float,
    symbol_duration: float,
    noise_var: float,
) -> np.ndarray:
    """Wiener-weighted interpolation of pilot estimates over the whole frame.

    Each data symbol between two pilots is a weighted sum of the bounding
    pilot estimates, weights ``(R_pp + noise_var*I)^-1 R_pd`` built from the
    Jakes correlation at the symbol-index lags (MSE-optimal for the assumed
    model).  Data beyond the last pilot falls back to the single bounding
    pilot.  ``noise_var`` is the error variance of the pilot estimates
    themselves: sigma2 for plain LS, sigma2*L/K_on after the delay-subspace
    projection.
    """
    h_p = np.asarray(pilot_estimates, dtype=np.complex128)
    if h_p.shape != (cfg.k_on, cfg.n_pilots):
        raise ValueError("pilot estimates shape does not match the pilot config")
    pilots = np.asarray(cfg.pilot_indices)
    out = np.zeros((cfg.k_on, cfg.n_symbols), dtype=np.complex128)
    out[:, pilots] = h_p

    def corr(d):
        return jakes_correlation(d, doppler_hz, symbol_duration)

    for i in cfg.data_indices:
        left = np.searchsorted(pilots, i) - 1
        support = [left] if left == cfg.n_pilots - 1 else [left, left + 1]
        p_idx = pilots[support]
        r_pp = corr(p_idx[:, None] - p_idx[None, :]) + noise_var * np.eye(len(support))
        r_pd = corr(p_idx - i)
        # pinv keeps the degenerate static-channel case (all-ones R_pp) solvable
        weights = np.linalg.pinv(r_pp) @ r_pd
        out[:, i] = h_p[:, support] @ weights
    return out


def linear_interp_estimate(pilot_estimates: np.ndarray, cfg: PilotConfig) -> np.ndarray:
    """Per-subcarrier linear interpolation between pilot symbols (weak
    reference baseline; edge symbols hold the nearest pilot)."""
    h_p = np.asarray(pilot_estimates, dtype=np.complex128)
    if h_p.shape != (cfg.k_on, cfg.n_pilots):
        raise ValueError("pilot estimates shape does not match the pilot config")
    t = np.arange(cfg.n_symbols, dtype=np.float64)
    tp = np.asarray(cfg.pilot_indices, dtype=np.float64)
    out = np.empty((cfg.k_on, cfg.n_symbols), dtype=np.complex128)
    for k in range(cfg.k_on):
        out[k] = np.interp(t, tp, h_p[k].real) + 1j * np.interp(t, tp, h_p[k].imag)
    return out


def nmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Normalized MSE of a channel estimate: ||Hhat - H||^2 / ||H||^2."""
    est = np.asarray(estimate)
    tru = np.asarray(truth)
    if est.shape != tru.shape:
        raise ValueError("estimate and truth shapes differ")
    return float(np.sum(np.abs(est - tru) ** 2) / np.sum(np.abs(tru) ** 2))
