"""Bit/symbol mapping, pilot sequences, and OFDM frame assembly.

A frame is a ``K_on x I`` matrix of frequency-domain subcarrier symbols:
``I`` OFDM symbols of which ``P`` are full-pilot symbols (every active
subcarrier carries a known unit-modulus value) and the remaining ``I - P``
carry modulated payload data.  Gray constellation tables for QPSK and
16QAM are fixed here and documented in ``docs/constellations.md``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModulationScheme",
    "PilotConfig",
    "Frame",
    "get_scheme",
    "map_bits",
    "demap_symbols",
    "make_pilot_sequence",
    "default_pilot_indices",
    "make_pilot_config",
    "build_frame",
    "extract_data_symbols",
    "extract_payload_bits",
]

DEFAULT_PILOT_SEED = 7


@dataclass(frozen=True)
class ModulationScheme:
    """A Gray-labelled constellation with unit average power.

    ``constellation[j]`` is the point whose bit label is the binary
    expansion of ``j`` (MSB first, ``bits_per_symbol`` bits).
    """

    name: str
    bits_per_symbol: int
    constellation: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.constellation, dtype=np.complex128)
        if points.ndim != 1 or points.size != 2**self.bits_per_symbol:
            raise ValueError("constellation size must be 2**bits_per_symbol")
        power = np.mean(np.abs(points) ** 2)
        if abs(power - 1.0) > 1e-12:
            raise ValueError(f"constellation not unit power: {power!r}")
        object.__setattr__(self, "constellation", points)


def _qpsk_points() -> np.ndarray:
    # Label b0 b1 -> ((1-2*b0) + 1j*(1-2*b1)) / sqrt(2); 00 -> (+1+1j)/sqrt(2).
    pts = np.empty(4, dtype=np.complex128)
    for j in range(4):
        b0, b1 = (j >> 1) & 1, j & 1
        pts[j] = ((1 - 2 * b0) + 1j * (1 - 2 * b1)) / np.sqrt(2.0)
    return pts


def _qam16_points() -> np.ndarray:
    # Per-axis Gray on two bits: 00->+3, 01->+1, 11->-1, 10->-3, scale 1/sqrt(10).
    axis = np.array([3.0, 1.0, -3.0, -1.0])  # indexed by the 2-bit integer
    pts = np.empty(16, dtype=np.complex128)
    for j in range(16):
        re = axis[(j >> 2) & 0b11]
        im = axis[j & 0b11]
        pts[j] = (re + 1j * im) / np.sqrt(10.0)
    return pts


QPSK = ModulationScheme("qpsk", 2, _qpsk_points())
QAM16 = ModulationScheme("16qam", 4, _qam16_points())

_SCHEMES = {"qpsk": QPSK, "16qam": QAM16, "qam16": QAM16}


def get_scheme(name: str) -> ModulationScheme:
    """Look up a modulation scheme by name ('qpsk' or '16qam')."""
    try:
        return _SCHEMES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown modulation scheme {name!r}") from None


def map_bits(bits: np.ndarray, scheme: ModulationScheme) -> np.ndarray:
    """Map a bit vector to constellation symbols (Gray labelling).

    The bit count must be a multiple of ``scheme.bits_per_symbol``.
    """
    bits = np.asarray(bits, dtype=np.int64).ravel()
    bps = scheme.bits_per_symbol
    if bits.size % bps != 0:
        raise ValueError(f"bit count {bits.size} not divisible by {bps}")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise ValueError("bits must be 0/1")
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    idx = groups @ weights
    return scheme.constellation[idx]


def demap_symbols(received: np.ndarray, scheme: ModulationScheme) -> np.ndarray:
    """Hard-decide received symbols to bits via the nearest constellation point.

    Exact ties (e.g. a zero'd erasure symbol) resolve to the lowest label,
    i.e. the all-zero bit pattern.
    """
    rx = np.asarray(received, dtype=np.complex128).ravel()
    # |y - c|^2 minimised via Re(y c*) maximisation would drop the tie rule;
    # argmin over explicit distances keeps first-index (all-zeros) ties.
    d2 = np.abs(rx[:, None] - scheme.constellation[None, :]) ** 2
    idx = np.argmin(d2, axis=1)
    bps = scheme.bits_per_symbol
    shifts = np.arange(bps - 1, -1, -1)
    return ((idx[:, None] >> shifts) & 1).astype(np.int8).ravel()


def make_pilot_sequence(k_on: int, seed: int = DEFAULT_PILOT_SEED) -> np.ndarray:
    """Deterministic unit-modulus BPSK pilot vector of length ``k_on``."""
    if k_on <= 0:
        raise ValueError("k_on must be positive")
    rng = np.random.default_rng(seed)
    return (2 * rng.integers(0, 2, size=k_on) - 1).astype(np.complex128)


def default_pilot_indices(n_symbols: int, n_pilots: int) -> tuple[int, ...]:
    """Pilot symbol positions: index 0, then evenly spread so pilots bound
    the data symbols on both sides (last pilot at ``n_symbols - 1``).

    Rounding is floor(x + 0.5) so placement is platform-independent.
    """
    if not 1 <= n_pilots <= n_symbols:
        raise ValueError("need 1 <= n_pilots <= n_symbols")
    if n_pilots == 1:
        return (0,)
    pos = [int(np.floor(q * (n_symbols - 1) / (n_pilots - 1) + 0.5)) for q in range(n_pilots)]
    if len(set(pos)) != n_pilots:
        raise ValueError("pilot positions collide; reduce n_pilots")
    return tuple(pos)


@dataclass(frozen=True)
class PilotConfig:
    """Frame geometry: which OFDM symbols are pilots and what they carry."""

    k_on: int
    n_symbols: int
    pilot_indices: tuple[int, ...]
    pilot_values: np.ndarray

    def __post_init__(self):
        idx = tuple(int(i) for i in self.pilot_indices)
        if len(idx) < 1:
            raise ValueError("at least one pilot symbol required")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("pilot_indices must be strictly increasing")
        if idx[0] != 0:
            raise ValueError("index 0 must be a pilot symbol")
        if idx[-1] >= self.n_symbols:
            raise ValueError("pilot index out of range")
        vals = np.asarray(self.pilot_values, dtype=np.complex128)
        if vals.shape != (self.k_on,):
            raise ValueError("pilot_values must have shape (k_on,)")
        if np.any(np.abs(np.abs(vals) - 1.0) > 1e-12):
            raise ValueError("pilot values must be unit modulus")
        object.__setattr__(self, "pilot_indices", idx)
        object.__setattr__(self, "pilot_values", vals)

    @property
    def n_pilots(self) -> int:
        return len(self.pilot_indices)

    @property
    def n_data(self) -> int:
        return self.n_symbols - self.n_pilots

    @property
    def data_indices(self) -> np.ndarray:
        mask = np.ones(self.n_symbols, dtype=bool)
        mask[list(self.pilot_indices)] = False
        return np.nonzero(mask)[0]

    def payload_length(self, scheme: ModulationScheme) -> int:
        return self.n_data * self.k_on * scheme.bits_per_symbol


def make_pilot_config(
    k_on: int,
    n_symbols: int,
    n_pilots: int,
    pilot_seed: int = DEFAULT_PILOT_SEED,
) -> PilotConfig:
    """PilotConfig with the default placement and BPSK pilot sequence."""
    return PilotConfig(
        k_on=k_on,
        n_symbols=n_symbols,
        pilot_indices=default_pilot_indices(n_symbols, n_pilots),
        pilot_values=make_pilot_sequence(k_on, pilot_seed),
    )


@dataclass(frozen=True)
class Frame:
    """One transmitted OFDM frame: subcarrier symbols plus per-symbol roles."""

    symbols: np.ndarray  # complex, (k_on, n_symbols)
    roles: np.ndarray  # '<U5' array of 'pilot'/'data' per OFDM symbol
    payload_bits: np.ndarray
    config: PilotConfig = field(repr=False)


def build_frame(payload_bits: np.ndarray, cfg: PilotConfig, scheme: ModulationScheme) -> Frame:
    """Assemble a frame: pilot columns carry ``cfg.pilot_values``, data columns
    are filled column-major with the mapped payload."""
    bits = np.asarray(payload_bits, dtype=np.int8).ravel()
    expected = cfg.payload_length(scheme)
    if bits.size != expected:
        raise ValueError(f"payload length {bits.size}, expected {expected}")
    symbols = np.empty((cfg.k_on, cfg.n_symbols), dtype=np.complex128)
    symbols[:, list(cfg.pilot_indices)] = cfg.pilot_values[:, None]
    if cfg.n_data:
        data = map_bits(bits, scheme).reshape(cfg.k_on, cfg.n_data, order="F")
        symbols[:, cfg.data_indices] = data
    roles = np.full(cfg.n_symbols, "data", dtype="<U5")
    roles[list(cfg.pilot_indices)] = "pilot"
    return Frame(symbols=symbols, roles=roles, payload_bits=bits, config=cfg)


def extract_data_symbols(symbols: np.ndarray, cfg: PilotConfig) -> np.ndarray:
    """Data-symbol columns of a frame-shaped matrix, in frame order."""
    symbols = np.asarray(symbols)
    if symbols.shape != (cfg.k_on, cfg.n_symbols):
        raise ValueError("matrix shape does not match the pilot config")
    return symbols[:, cfg.data_indices]


def extract_payload_bits(symbols: np.ndarray, cfg: PilotConfig, scheme: ModulationScheme) -> np.ndarray:
    """Demap the data columns of a (possibly equalized) frame back to bits.

    Inverse of ``build_frame`` on noiseless input.
    """
    data = extract_data_symbols(symbols, cfg)
    return demap_symbols(data.ravel(order="F"), scheme)
