"""Dataset synthesis and from-scratch training of the recurrent estimators.

Training is plain minibatch gradient descent with ADAM on an MSE loss over
every frame entry (pilot and data columns alike).  Gradients come from
exact backpropagation through time over both scan directions and the
output projection; :func:`grad_check` verifies them against central finite
differences.  Everything is deterministic given the config seed.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass

import numpy as np

from .channel import (
    ChannelProfile,
    NoiseSpec,
    default_profile,
    generate_channel,
    apply_channel,
    scenario,
)
from .estimators import DftBasis, assemble_input, estimate_pilots, stack_real
from .modem import DEFAULT_PILOT_SEED, build_frame, get_scheme, make_pilot_config
from .rnn import RnnModel, SequenceActivations, forward_batch, init_model

__all__ = [
    "TrainingConfig",
    "Dataset",
    "TrainResult",
    "TrainingDiverged",
    "AdamState",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "mse_loss",
    "backward",
    "adam_step",
    "train",
    "write_history_csv",
    "grad_check",
]


@dataclass(frozen=True)
class TrainingConfig:
    """Training recipe; defaults are the production values."""

    epochs: int = 500
    batch_size: int = 128
    train_samples: int = 16000
    test_samples: int = 2000
    train_snr_db: float = 40.0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float | None = None
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.train_samples) < 1 or self.test_samples < 0:
            raise ValueError("counts must be positive")


@dataclass
class Dataset:
    """Matched (network input, real-stacked true channel) pairs plus the
    generation metadata needed to reproduce them."""

    inputs: np.ndarray  # (n, 2*k_on, n_symbols) float64
    targets: np.ndarray  # (n, 2*k_on, n_symbols) float64
    scenario: str
    doppler_hz: float
    symbol_duration: float
    snr_db: float
    scheme: str
    k_on: int
    n_symbols: int
    pilot_indices: tuple[int, ...]
    n_taps: int
    seed: int
    pilot_seed: int = DEFAULT_PILOT_SEED

    def __post_init__(self):
        if self.inputs.shape != self.targets.shape:
            raise ValueError("inputs and targets must have equal shapes")
        if self.inputs.ndim != 3 or self.inputs.shape[1] != 2 * self.k_on:
            raise ValueError("expected (n, 2*k_on, n_symbols) tensors")

    def __len__(self) -> int:
        return self.inputs.shape[0]


def generate_dataset(
    scenario_name: str,
    n_frames: int,
    snr_db: float,
    scheme_name: str,
    seed: int,
    profile: ChannelProfile | None = None,
    n_symbols: int = 100,
    n_pilots: int | None = None,
    pilot_seed: int = DEFAULT_PILOT_SEED,
    basis_taps: int | None = None,
    n_sinusoids: int = 32,
) -> Dataset:
    """Simulate ``n_frames`` independent frames and assemble training pairs.

    Per frame (own child RNG stream, so results are chunking-independent):
    draw a channel, transmit a random payload, add noise at ``snr_db``,
    estimate pilots with the delay-subspace projection, zero-insert and
    stack.  Targets are the real-stacked true frequency responses.
    """
    if n_frames < 1:
        raise ValueError("n_frames must be positive")
    scn = scenario(scenario_name)
    profile = (profile or default_profile()).with_doppler(scn.doppler_hz)
    cfg = make_pilot_config(profile.k_on, n_symbols, n_pilots or scn.n_pilots, pilot_seed)
    basis = DftBasis.from_profile(profile, basis_taps)
    scheme = get_scheme(scheme_name)
    noise = NoiseSpec.from_snr_db(snr_db)

    inputs = np.empty((n_frames, 2 * cfg.k_on, n_symbols))
    targets = np.empty_like(inputs)
    payload_len = cfg.payload_length(scheme)
    for idx, child in enumerate(np.random.SeedSequence(seed).spawn(n_frames)):
        rng = np.random.default_rng(child)
        realization = generate_channel(profile, n_symbols, rng, n_sinusoids)
        bits = rng.integers(0, 2, size=payload_len)
        frame = build_frame(bits, cfg, scheme)
        received = apply_channel(frame.symbols, realization, noise, rng)
        pilots = estimate_pilots(received, cfg, basis, method="als")
        inputs[idx] = assemble_input(pilots, cfg).h_in
        targets[idx] = stack_real(realization.freq_response)
    return Dataset(
        inputs=inputs,
        targets=targets,
        scenario=scenario_name,
        doppler_hz=profile.doppler_hz,
        symbol_duration=profile.symbol_duration,
        snr_db=snr_db,
        scheme=scheme.name,
        k_on=cfg.k_on,
        n_symbols=n_symbols,
        pilot_indices=cfg.pilot_indices,
        n_taps=basis.n_taps,
        seed=seed,
        pilot_seed=pilot_seed,
    )


# ---------------------------------------------------------------------------
# Dataset container: magic 'BRND', u16 version, header, pilot indices, then
# raw little-endian float64 inputs and targets. JSON sidecar mirrors the header.

_DS_MAGIC = b"BRND"
_DS_VERSION = 1
_SCENARIO_CODES = {"low": 0, "high": 1, "very_high": 2}
_SCHEME_CODES = {"qpsk": 0, "16qam": 1}


def save_dataset(ds: Dataset, path) -> None:
    scn_code = _SCENARIO_CODES.get(ds.scenario, 255)
    header = struct.pack(
        "<IIIIBBdddqqI",
        len(ds),
        ds.k_on,
        ds.n_symbols,
        len(ds.pilot_indices),
        scn_code,
        _SCHEME_CODES[ds.scheme],
        ds.doppler_hz,
        ds.symbol_duration,
        ds.snr_db,
        ds.seed,
        ds.pilot_seed,
        ds.n_taps,
    )
    with open(path, "wb") as fh:
        fh.write(_DS_MAGIC)
        fh.write(struct.pack("<H", _DS_VERSION))
        fh.write(header)
        fh.write(struct.pack(f"<{len(ds.pilot_indices)}I", *ds.pilot_indices))
        fh.write(np.ascontiguousarray(ds.inputs, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(ds.targets, dtype="<f8").tobytes())
    sidecar = {
        "format": "BRND",
        "version": _DS_VERSION,
        "frames": len(ds),
        "k_on": ds.k_on,
        "n_symbols": ds.n_symbols,
        "pilot_indices": list(ds.pilot_indices),
        "scenario": ds.scenario,
        "scheme": ds.scheme,
        "doppler_hz": ds.doppler_hz,
        "symbol_duration_s": ds.symbol_duration,
        "snr_db": ds.snr_db,
        "seed": ds.seed,
        "pilot_seed": ds.pilot_seed,
        "n_taps": ds.n_taps,
    }
    with open(f"{path}.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset(path) -> Dataset:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _DS_MAGIC:
        raise ValueError("not a dataset container")
    (version,) = struct.unpack("<H", data[4:6])
    if version != _DS_VERSION:
        raise ValueError(f"unsupported dataset version {version}")
    head = struct.Struct("<IIIIBBdddqqI")
    (
        n_frames,
        k_on,
        n_symbols,
        n_pilots,
        scn_code,
        scheme_code,
        doppler_hz,
        symbol_duration,
        snr_db,
        seed,
        pilot_seed,
        n_taps,
    ) = head.unpack_from(data, 6)
    offset = 6 + head.size
    pilot_indices = struct.unpack_from(f"<{n_pilots}I", data, offset)
    offset += 4 * n_pilots
    count = n_frames * 2 * k_on * n_symbols
    inputs = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
    offset += 8 * count
    targets = np.frombuffer(data, dtype="<f8", count=count, offset=offset)
    shape = (n_frames, 2 * k_on, n_symbols)
    scn_name = {v: k for k, v in _SCENARIO_CODES.items()}.get(scn_code, "custom")
    scheme_name = {v: k for k, v in _SCHEME_CODES.items()}[scheme_code]
    return Dataset(
        inputs=inputs.reshape(shape).copy(),
        targets=targets.reshape(shape).copy(),
        scenario=scn_name,
        doppler_hz=doppler_hz,
        symbol_duration=symbol_duration,
        snr_db=snr_db,
        scheme=scheme_name,
        k_on=k_on,
        n_symbols=n_symbols,
        pilot_indices=tuple(pilot_indices),
        n_taps=n_taps,
        seed=seed,
        pilot_seed=pilot_seed,
    )


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean squared difference over all entries."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError("prediction and target shapes differ")
    return float(np.mean((p - t) ** 2))


def _act_grad(y: np.ndarray, activation: str) -> np.ndarray:
    return 1.0 - y * y if activation == "tanh" else (y > 0.0).astype(np.float64)


def _backward_direction(kind, weights, cache, d_h_time, activation):
    """BPTT through one scan direction; returns grads for (w_x, w_h, b)."""
    d_h_seq = np.ascontiguousarray(d_h_time[:, ::-1]) if cache["reverse"] else d_h_time
    batch, steps, q = d_h_seq.shape
    flat = batch * steps

    if kind == "srnn":
        d_gates = np.empty((batch, steps, q))
        d_next = np.zeros((batch, q))
        h_all = cache["h"]
        for t in range(steps - 1, -1, -1):
            da = (d_h_seq[:, t] + d_next) * _act_grad(h_all[:, t], activation)
            d_gates[:, t] = da
            d_next = da @ weights.w_h
        dw_h = d_gates.reshape(flat, q).T @ cache["h_prev"].reshape(flat, q)
    elif kind == "gru":
        z, r, cand = cache["z"], cache["r"], cache["cand"]
        h_prev, rh = cache["h_prev"], cache["rh"]
        w_h_z = weights.w_h[:q]
        w_h_r = weights.w_h[q : 2 * q]
        w_h_c = weights.w_h[2 * q :]
        d_gates = np.empty((batch, steps, 3 * q))
        d_next = np.zeros((batch, q))
        for t in range(steps - 1, -1, -1):
            dh = d_h_seq[:, t] + d_next
            zt, rt, ct, hp = z[:, t], r[:, t], cand[:, t], h_prev[:, t]
            dc_pre = dh * zt * _act_grad(ct, activation)
            drh = dc_pre @ w_h_c
            dz_pre = dh * (ct - hp) * zt * (1.0 - zt)
            dr_pre = drh * hp * rt * (1.0 - rt)
            d_gates[:, t, :q] = dz_pre
            d_gates[:, t, q : 2 * q] = dr_pre
            d_gates[:, t, 2 * q :] = dc_pre
            d_next = dh * (1.0 - zt) + drh * rt + dz_pre @ w_h_z + dr_pre @ w_h_r
        dz_all = d_gates[:, :, :q].reshape(flat, q)
        dr_all = d_gates[:, :, q : 2 * q].reshape(flat, q)
        dc_all = d_gates[:, :, 2 * q :].reshape(flat, q)
        hp_flat = h_prev.reshape(flat, q)
        dw_h = np.vstack(
            [dz_all.T @ hp_flat, dr_all.T @ hp_flat, dc_all.T @ rh.reshape(flat, q)]
        )
    elif kind == "lstm":
        i_g, f_g, o_g, g_g = cache["i"], cache["f"], cache["o"], cache["g"]
        c_all, c_prev, c_act = cache["c"], cache["c_prev"], cache["c_act"]
        d_gates = np.empty((batch, steps, 4 * q))
        d_next = np.zeros((batch, q))
        dc_next = np.zeros((batch, q))
        for t in range(steps - 1, -1, -1):
            dh = d_h_seq[:, t] + d_next
            it, ft, ot, gt = i_g[:, t], f_g[:, t], o_g[:, t], g_g[:, t]
            state_grad = (
                1.0 - c_act[:, t] ** 2
                if activation == "tanh"
                else (c_all[:, t] > 0.0).astype(np.float64)
            )
            dc = dc_next + dh * ot * state_grad
            di_pre = dc * gt * it * (1.0 - it)
            df_pre = dc * c_prev[:, t] * ft * (1.0 - ft)
            do_pre = dh * c_act[:, t] * ot * (1.0 - ot)
            dg_pre = dc * it * _act_grad(gt, activation)
            d_gates[:, t, :q] = di_pre
            d_gates[:, t, q : 2 * q] = df_pre
            d_gates[:, t, 2 * q : 3 * q] = do_pre
            d_gates[:, t, 3 * q :] = dg_pre
            dc_next = dc * ft
            d_next = d_gates[:, t] @ weights.w_h
        dw_h = d_gates.reshape(flat, 4 * q).T @ cache["h_prev"].reshape(flat, q)
    else:
        raise ValueError(f"unknown cell kind {kind!r}")

    gq = d_gates.shape[2]
    xs = cache["xs"]
    dw_x = d_gates.reshape(flat, gq).T @ xs.reshape(flat, xs.shape[2])
    db = d_gates.sum(axis=(0, 1))
    return dw_x, dw_h, db


def backward(model: RnnModel, acts: SequenceActivations, d_out: np.ndarray) -> dict[str, np.ndarray]:
    """Exact gradients of every weight given dLoss/dOutput for one batch."""
    acts.check_model(model)
    d_out = np.asarray(d_out, dtype=np.float64)
    batch, steps, nf = acts.h_cat.shape[0], acts.h_cat.shape[1], model.n_features
    if d_out.shape != (batch, steps, nf):
        raise ValueError(f"expected output gradient of shape {(batch, steps, nf)}")
    q = model.hidden_size
    flat = batch * steps

    dw_out = d_out.reshape(flat, nf).T @ acts.h_cat.reshape(flat, 2 * q)
    db_out = d_out.sum(axis=(0, 1))
    d_hcat = d_out @ model.w_out  # (batch, steps, 2Q)

    # SRNN reuses the stored hidden sequence for its activation derivative.
    if model.kind == "srnn":
        for cache in (acts.fwd, acts.bwd):
            if "h" not in cache:
                raise ValueError("srnn cache missing hidden states")
    dw_x_f, dw_h_f, db_f = _backward_direction(
        model.kind, model.fwd, acts.fwd, d_hcat[:, :, :q], model.activation
    )
    dw_x_b, dw_h_b, db_b = _backward_direction(
        model.kind, model.bwd, acts.bwd, np.ascontiguousarray(d_hcat[:, :, q:]), model.activation
    )
    return {
        "w_x_fwd": dw_x_f,
        "w_h_fwd": dw_h_f,
        "b_fwd": db_f,
        "w_x_bwd": dw_x_b,
        "w_h_bwd": dw_h_b,
        "b_bwd": db_b,
        "w_out": dw_out,
        "b_out": db_out,
    }


@dataclass
class AdamState:
    """First/second moment accumulators, keyed like ``model.params()``."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    learning_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected ADAM update, applied to ``params`` in place."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for tensor {name!r}")
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= learning_rate * (m / bc1) / (np.sqrt(v / bc2) + eps)


class TrainingDiverged(RuntimeError):
    """Raised when the loss goes non-finite; carries the history so far."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class TrainResult:
    model: RnnModel  # the selected (best-validation) weights
    history: list[dict]
    best_epoch: int
    final_model: RnnModel | None = None


def _epoch_mse(model: RnnModel, inputs: np.ndarray, targets: np.ndarray, batch_size: int) -> float:
    total = 0.0
    n = inputs.shape[0]
    for lo in range(0, n, batch_size):
        x = np.ascontiguousarray(inputs[lo : lo + batch_size].transpose(0, 2, 1))
        y = targets[lo : lo + batch_size].transpose(0, 2, 1)
        out, _ = forward_batch(model, x)
        total += np.sum((out - y) ** 2)
    return total / targets.size


def train(
    model: RnnModel,
    inputs: np.ndarray,
    targets: np.ndarray,
    cfg: TrainingConfig,
    val_inputs: np.ndarray | None = None,
    val_targets: np.ndarray | None = None,
    verbose: int = 0,
) -> TrainResult:
    """Minibatch ADAM training; returns best-on-validation weights.

    ``inputs``/``targets`` are (n, 2*k_on, n_symbols) arrays.  Shuffling,
    and therefore the whole run, is driven by ``cfg.seed``.  Without a
    validation split the lowest training MSE selects the weights.
    """
    if inputs.shape[0] == 0:
        raise ValueError("empty training set")
    model = model.copy()
    params = model.params()
    adam = AdamState.for_params(params)
    rng = np.random.default_rng(cfg.seed)
    n = inputs.shape[0]
    history: list[dict] = []
    best_mse = np.inf
    best_model = model.copy()
    best_epoch = -1

    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        sq_sum = 0.0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            x = np.ascontiguousarray(inputs[idx].transpose(0, 2, 1))
            y = np.ascontiguousarray(targets[idx].transpose(0, 2, 1))
            out, acts = forward_batch(model, x, keep_cache=True)
            diff = out - y
            batch_loss = np.mean(diff**2)
            if not np.isfinite(batch_loss):
                raise TrainingDiverged(f"loss diverged at epoch {epoch}", history)
            sq_sum += np.sum(diff**2)
            grads = backward(model, acts, (2.0 / diff.size) * diff)
            if any(not np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingDiverged(f"gradients diverged at epoch {epoch}", history)
            if cfg.clip_norm is not None:
                total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
                if total > cfg.clip_norm:
                    scale = cfg.clip_norm / total
                    grads = {k: g * scale for k, g in grads.items()}
            adam_step(params, grads, adam, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
        train_mse = sq_sum / targets.size
        record = {"epoch": epoch, "train_mse": float(train_mse)}
        if val_inputs is not None and len(val_inputs):
            val_mse = _epoch_mse(model, val_inputs, val_targets, cfg.batch_size)
            record["val_mse"] = float(val_mse)
            select = val_mse
        else:
            select = train_mse
        if select < best_mse:
            best_mse = select
            best_model = model.copy()
            best_epoch = epoch
        history.append(record)
        if verbose:
            msg = f"epoch {epoch + 1}/{cfg.epochs} train_mse={train_mse:.6g}"
            if "val_mse" in record:
                msg += f" val_mse={record['val_mse']:.6g}"
            print(msg, flush=True)
    return TrainResult(model=best_model, history=history, best_epoch=best_epoch, final_model=model)


def write_history_csv(history: list[dict], path) -> None:
    """Loss history as CSV (epoch, train_mse, val_mse)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_mse", "val_mse"])
        for rec in history:
            writer.writerow([rec["epoch"], rec["train_mse"], rec.get("val_mse", "")])


def grad_check(
    kind: str,
    dims: tuple[int, int, int] = (6, 4, 5),
    seed: int = 0,
    activation: str = "tanh",
    batch: int = 2,
    step: float = 1e-5,
) -> float:
    """Max relative error of analytic vs central-finite-difference gradients.

    ``dims`` is (n_features, hidden_size, steps).  The default tanh
    nonlinearity keeps the loss smooth; relu works too as long as no
    pre-activation sits within ``step`` of a kink.  The default step keeps
    the difference quotient above the double-precision rounding floor for
    gradients down to ~1e-6; smaller steps drown such entries in noise.
    """
    n_features, hidden, steps = dims
    rng = np.random.default_rng(seed)
    model = init_model(kind, hidden, n_features, activation=activation, seed=rng)
    # non-zero biases so their gradients are exercised from a generic point
    params = model.params()
    for name in ("b_fwd", "b_bwd", "b_out"):
        params[name] += rng.uniform(-0.1, 0.1, size=params[name].shape)
    x = rng.standard_normal((batch, steps, n_features))
    target = rng.standard_normal((batch, steps, n_features))

    out, acts = forward_batch(model, x, keep_cache=True)
    diff = out - target
    grads = backward(model, acts, (2.0 / diff.size) * diff)

    def loss() -> float:
        pred, _ = forward_batch(model, x)
        return float(np.mean((pred - target) ** 2))

    worst = 0.0
    for name, tensor in params.items():
        flat = tensor.ravel()
        g_flat = grads[name].ravel()
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + step
            up = loss()
            flat[j] = orig - step
            down = loss()
            flat[j] = orig
            numeric = (up - down) / (2.0 * step)
            analytic = g_flat[j]
            denom = max(abs(analytic), abs(numeric), 1e-12)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst
