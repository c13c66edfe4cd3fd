"""Link-level Monte-Carlo evaluation: BER and NMSE over SNR sweeps.

Frames are simulated once per (seed, SNR index, frame index) and shared by
every estimator under test, so estimator comparisons are paired and the
results are bit-identical for any worker count.  Bits are recovered with a
one-tap zero-forcing equalizer and hard demapping; no channel coding, so
BER is the uncoded bit error rate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np

from .channel import (
    ChannelProfile,
    NoiseSpec,
    default_profile,
    generate_channel,
    apply_channel,
    scenario,
)
from .estimators import (
    DftBasis,
    assemble_input,
    estimate_pilots,
    linear_interp_estimate,
    nmse,
    wi_estimate,
)
from .modem import (
    DEFAULT_PILOT_SEED,
    QPSK,
    PilotConfig,
    build_frame,
    demap_symbols,
    extract_data_symbols,
    get_scheme,
    make_pilot_config,
    map_bits,
)
from .rnn import RnnModel, estimate_channel

__all__ = [
    "ESTIMATOR_NAMES",
    "EstimatorChoice",
    "SnrPoint",
    "BerReport",
    "equalize_and_demap",
    "run_link_sim",
    "ber_sweep",
    "rayleigh_qpsk_reference",
    "simulate_flat_qpsk_ber",
    "paired_delta_stats",
    "write_ber_csv",
    "write_plot_script",
]

ESTIMATOR_NAMES = ("perfect", "sls-interp", "als-wi", "bi-srnn", "bi-lstm", "bi-gru")
_ZF_ERASURE = 1e-12


@dataclass
class EstimatorChoice:
    """A channel estimator under test; recurrent choices need trained weights."""

    name: str
    model: RnnModel | None = None
    label: str | None = None

    def __post_init__(self):
        if self.name not in ESTIMATOR_NAMES:
            raise ValueError(f"unknown estimator {self.name!r}; choose from {ESTIMATOR_NAMES}")
        if self.name.startswith("bi-"):
            if self.model is None:
                raise ValueError(f"estimator {self.name!r} needs a trained model")
            if self.model.kind != self.name[3:]:
                raise ValueError(f"model kind {self.model.kind!r} does not match {self.name!r}")
        if self.label is None:
            self.label = self.name


@dataclass
class SnrPoint:
    snr_db: float
    frames: int
    bits_total: int
    bits_errored: int
    nmse_per_frame: np.ndarray = field(repr=False)
    errors_per_frame: np.ndarray = field(repr=False)

    @property
    def ber(self) -> float:
        return self.bits_errored / self.bits_total if self.bits_total else 0.0

    @property
    def nmse(self) -> float:
        return float(np.mean(self.nmse_per_frame))


@dataclass
class BerReport:
    estimator: str
    scenario: str
    scheme: str
    points: list[SnrPoint]


def equalize_and_demap(received, h_hat, scheme, cfg: PilotConfig) -> np.ndarray:
    """Zero-forcing equalization of the data symbols, then hard demapping.

    Estimate entries with magnitude below 1e-12 are erasures: those
    symbols decide to all-zero bits.
    """
    y = extract_data_symbols(np.asarray(received), cfg)
    h = extract_data_symbols(np.asarray(h_hat), cfg)
    x_hat = np.zeros_like(y)
    usable = np.abs(h) >= _ZF_ERASURE
    x_hat[usable] = y[usable] / h[usable]
    bits = demap_symbols(x_hat.ravel(order="F"), scheme)
    if not np.all(usable):
        bps = scheme.bits_per_symbol
        erased = np.repeat(~usable.ravel(order="F"), bps)
        bits = bits.copy()
        bits[erased] = 0
    return bits


def _make_estimator_fn(choice: EstimatorChoice, basis: DftBasis, doppler_hz, symbol_duration):
    name = choice.name

    if name == "perfect":
        return lambda ctx: ctx["h_true"]
    if name == "sls-interp":
        return lambda ctx: linear_interp_estimate(
            estimate_pilots(ctx["received"], ctx["cfg"], method="sls").h_hat, ctx["cfg"]
        )
    if name == "als-wi":

        def als_wi(ctx):
            pilots = estimate_pilots(ctx["received"], ctx["cfg"], basis, method="als")
            # projection keeps an L/K_on fraction of the pilot noise
            pilot_var = ctx["sigma2"] * basis.n_taps / basis.k_on
            return wi_estimate(pilots.h_hat, ctx["cfg"], doppler_hz, symbol_duration, pilot_var)

        return als_wi

    def recurrent(ctx):
        pilots = estimate_pilots(ctx["received"], ctx["cfg"], basis, method="als")
        return estimate_channel(choice.model, assemble_input(pilots, ctx["cfg"]))

    return recurrent


def _simulate_chunk(task):
    """Simulate a contiguous run of frames at one SNR for every estimator.

    Returns per-frame NMSE and bit-error arrays per estimator label.
    Frames depend only on (seed, snr index, frame index), never on the
    estimator list or the chunking.
    """
    (seed, snr_idx, frame_lo, frame_hi, snr_db, choices, profile, cfg, basis_taps, scheme_name, n_sinusoids) = task
    scheme = get_scheme(scheme_name)
    noise = NoiseSpec.from_snr_db(snr_db)
    basis = DftBasis.from_profile(profile, basis_taps)
    fns = {
        c.label: _make_estimator_fn(c, basis, profile.doppler_hz, profile.symbol_duration)
        for c in choices
    }
    count = frame_hi - frame_lo
    nmse_out = {label: np.empty(count) for label in fns}
    err_out = {label: np.zeros(count, dtype=np.int64) for label in fns}
    payload_len = cfg.payload_length(scheme)
    for pos in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([seed, snr_idx, frame_lo + pos]))
        realization = generate_channel(profile, cfg.n_symbols, rng, n_sinusoids)
        bits = rng.integers(0, 2, size=payload_len)
        frame = build_frame(bits, cfg, scheme)
        received = apply_channel(frame.symbols, realization, noise, rng)
        ctx = {
            "received": received,
            "h_true": realization.freq_response,
            "sigma2": noise.sigma2,
            "cfg": cfg,
        }
        for label, fn in fns.items():
            h_hat = fn(ctx)
            nmse_out[label][pos] = nmse(h_hat, realization.freq_response)
            if payload_len:
                decided = equalize_and_demap(received, h_hat, scheme, cfg)
                err_out[label][pos] = int(np.count_nonzero(decided != frame.payload_bits))
    return frame_lo, nmse_out, err_out


def run_link_sim(
    choices: list[EstimatorChoice],
    scenario_name: str,
    scheme_name: str,
    snr_db_list,
    n_frames: int,
    seed: int,
    profile: ChannelProfile | None = None,
    n_symbols: int = 100,
    n_pilots: int | None = None,
    pilot_seed: int = DEFAULT_PILOT_SEED,
    basis_taps: int | None = None,
    n_sinusoids: int = 32,
    workers: int = 1,
) -> dict[str, BerReport]:
    """Monte-Carlo sweep shared across estimators; returns a report per label."""
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    labels = [c.label for c in choices]
    if len(set(labels)) != len(labels):
        raise ValueError("estimator labels must be unique")
    scn = scenario(scenario_name)
    profile = (profile or default_profile()).with_doppler(scn.doppler_hz)
    cfg = make_pilot_config(profile.k_on, n_symbols, n_pilots or scn.n_pilots, pilot_seed)
    scheme = get_scheme(scheme_name)
    bits_per_frame = cfg.payload_length(scheme)
    snr_db_list = [float(s) for s in snr_db_list]

    chunk = max(1, min(n_frames, 64))
    tasks = []
    for snr_idx, snr_db in enumerate(snr_db_list):
        for lo in range(0, n_frames, chunk):
            tasks.append(
                (
                    seed,
                    snr_idx,
                    lo,
                    min(lo + chunk, n_frames),
                    snr_db,
                    choices,
                    profile,
                    cfg,
                    basis_taps,
                    scheme_name,
                    n_sinusoids,
                )
            )
    nmse_all = {lbl: [np.empty(n_frames) for _ in snr_db_list] for lbl in labels}
    err_all = {lbl: [np.zeros(n_frames, dtype=np.int64) for _ in snr_db_list] for lbl in labels}

    if workers > 1:
        with get_context("spawn").Pool(workers) as pool:
            results = pool.map(_simulate_chunk, tasks)
    else:
        results = [_simulate_chunk(t) for t in tasks]
    for task, (frame_lo, nmse_out, err_out) in zip(tasks, results):
        snr_idx = task[1]
        hi = frame_lo + len(next(iter(nmse_out.values())))
        for lbl in labels:
            nmse_all[lbl][snr_idx][frame_lo:hi] = nmse_out[lbl]
            err_all[lbl][snr_idx][frame_lo:hi] = err_out[lbl]

    reports = {}
    for lbl in labels:
        points = [
            SnrPoint(
                snr_db=snr_db,
                frames=n_frames,
                bits_total=bits_per_frame * n_frames,
                bits_errored=int(err_all[lbl][i].sum()),
                nmse_per_frame=nmse_all[lbl][i],
                errors_per_frame=err_all[lbl][i],
            )
            for i, snr_db in enumerate(snr_db_list)
        ]
        reports[lbl] = BerReport(
            estimator=lbl, scenario=scenario_name, scheme=scheme.name, points=points
        )
    return reports


def ber_sweep(
    choice: EstimatorChoice,
    scenario_name: str,
    scheme_name: str,
    snr_db_list,
    n_frames: int,
    seed: int,
    **kwargs,
) -> BerReport:
    """Sweep one estimator over SNR (see :func:`run_link_sim` for options)."""
    reports = run_link_sim([choice], scenario_name, scheme_name, snr_db_list, n_frames, seed, **kwargs)
    return reports[choice.label]


def rayleigh_qpsk_reference(snr_db: float) -> float:
    """Closed-form Gray-QPSK bit error rate over flat Rayleigh fading.

    With unit signal power and sigma2 = 10**(-snr_db/10), the average SNR
    per bit is gamma = 1 / (2*sigma2) and BER = 0.5*(1 - sqrt(gamma/(1+gamma))).
    """
    gamma = 10.0 ** (snr_db / 10.0) / 2.0
    return 0.5 * (1.0 - np.sqrt(gamma / (1.0 + gamma)))


def simulate_flat_qpsk_ber(
    snr_db: float,
    n_bits: int,
    seed: int,
    fading: bool = True,
    chunk_bits: int = 4_000_000,
) -> float:
    """Monte-Carlo QPSK bit error rate with perfect CSI on a one-tap channel.

    ``fading=True`` draws an independent CN(0,1) gain per symbol (flat
    Rayleigh, no temporal correlation); ``fading=False`` is pure AWGN.
    Uses the library mapper/demapper and the zero-forcing rule.
    """
    sigma = np.sqrt(10.0 ** (-snr_db / 10.0) / 2.0)
    rng = np.random.default_rng(seed)
    errors = 0
    done = 0
    while done < n_bits:
        take = min(chunk_bits, n_bits - done)
        take -= take % 2
        bits = rng.integers(0, 2, size=take)
        x = map_bits(bits, QPSK)
        if fading:
            h = (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size)) / np.sqrt(2.0)
        else:
            h = np.ones(x.size)
        y = h * x + sigma * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
        decided = demap_symbols(y / h, QPSK)
        errors += int(np.count_nonzero(decided != bits))
        done += take
    return errors / done


def paired_delta_stats(baseline: np.ndarray, candidate: np.ndarray) -> tuple[float, float]:
    """Mean and standard error of per-frame paired differences
    (baseline - candidate); positive mean favours the candidate."""
    d = np.asarray(baseline, dtype=np.float64) - np.asarray(candidate, dtype=np.float64)
    if d.size < 2:
        raise ValueError("need at least two paired samples")
    return float(d.mean()), float(d.std(ddof=1) / np.sqrt(d.size))


def write_ber_csv(reports: dict[str, BerReport] | list[BerReport], path) -> None:
    """One CSV row per (estimator, SNR point)."""
    if isinstance(reports, dict):
        reports = list(reports.values())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["estimator", "scenario", "scheme", "snr_db", "frames", "bits", "errors", "ber", "nmse"]
        )
        for rep in reports:
            for pt in rep.points:
                writer.writerow(
                    [
                        rep.estimator,
                        rep.scenario,
                        rep.scheme,
                        f"{pt.snr_db:g}",
                        pt.frames,
                        pt.bits_total,
                        pt.bits_errored,
                        f"{pt.ber:.10g}",
                        f"{pt.nmse:.10g}",
                    ]
                )


_PLOT_TEMPLATE = '''"""Plot BER and NMSE versus SNR from a sweep CSV (generated file)."""

import csv
from collections import defaultdict

import matplotlib.pyplot as plt

CSV_PATH = {csv_path!r}

curves = defaultdict(list)
with open(CSV_PATH) as fh:
    for row in csv.DictReader(fh):
        curves[row["estimator"]].append(
            (float(row["snr_db"]), float(row["ber"]), float(row["nmse"]))
        )

fig, (ax_ber, ax_nmse) = plt.subplots(1, 2, figsize=(11, 4.5))
for name, pts in sorted(curves.items()):
    pts.sort()
    snr = [p[0] for p in pts]
    ax_ber.semilogy(snr, [max(p[1], 1e-12) for p in pts], marker="o", label=name)
    ax_nmse.semilogy(snr, [max(p[2], 1e-12) for p in pts], marker="s", label=name)
for ax, ylabel in ((ax_ber, "BER"), (ax_nmse, "NMSE")):
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(ylabel)
    ax.grid(True, which="both", alpha=0.4)
    ax.legend()
fig.tight_layout()
fig.savefig("ber_nmse.png", dpi=150)
print("wrote ber_nmse.png")
'''


def write_plot_script(csv_path, out_path) -> None:
    """Emit a standalone matplotlib script for a sweep CSV (keeps this
    package headless)."""
    with open(out_path, "w") as fh:
        fh.write(_PLOT_TEMPLATE.format(csv_path=str(csv_path)))
