"""Bidirectional recurrent estimators: SRNN, LSTM, and GRU cells scanned in
both time directions with a time-distributed affine output projection.

All math is float64.  Gate pre-activations use stacked kernels: for a cell
with G gates, ``w_x`` is (G*Q, n_features), ``w_h`` is (G*Q, Q) and ``b`` is
(G*Q,), with gate blocks ordered [z, r, c] for GRU and [i, f, o, g] for
LSTM.  Gates use the logistic sigmoid; the candidate/state nonlinearity is
configurable ('relu' default, 'tanh' optional).  Forward passes retain the
per-step quantities needed for backpropagation through time in
:class:`SequenceActivations`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as sigmoid

from .estimators import EstimatorInput, unstack_real

__all__ = [
    "GATE_COUNTS",
    "CellWeights",
    "RnnModel",
    "SequenceActivations",
    "init_model",
    "cell_step",
    "forward_batch",
    "birnn_forward",
    "estimate_channel",
    "save_model",
    "load_model",
]

GATE_COUNTS = {"srnn": 1, "lstm": 4, "gru": 3}
ACTIVATIONS = ("tanh", "relu")


def _act(x: np.ndarray, activation: str) -> np.ndarray:
    return np.tanh(x) if activation == "tanh" else np.maximum(x, 0.0)


def _act_grad_from_output(y: np.ndarray, activation: str) -> np.ndarray:
    """Derivative of the nonlinearity expressed through its output value."""
    return 1.0 - y * y if activation == "tanh" else (y > 0.0).astype(np.float64)


@dataclass
class CellWeights:
    """One direction's cell parameters (stacked over gates)."""

    w_x: np.ndarray  # (gates*Q, n_features)
    w_h: np.ndarray  # (gates*Q, Q)
    b: np.ndarray  # (gates*Q,)


@dataclass
class RnnModel:
    """Weights of a bidirectional recurrent estimator.

    ``n_features`` is both the per-step input and output width (the
    real-stacked subcarrier count, 2*K_on, for channel work).
    """

    kind: str
    hidden_size: int
    n_features: int
    activation: str
    fwd: CellWeights
    bwd: CellWeights
    w_out: np.ndarray  # (n_features, 2*hidden_size)
    b_out: np.ndarray  # (n_features,)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in GATE_COUNTS:
            raise ValueError(f"unknown cell kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        gq = GATE_COUNTS[self.kind] * self.hidden_size
        for cell in (self.fwd, self.bwd):
            if cell.w_x.shape != (gq, self.n_features):
                raise ValueError("w_x shape inconsistent with kind/hidden size")
            if cell.w_h.shape != (gq, self.hidden_size):
                raise ValueError("w_h shape inconsistent with kind/hidden size")
            if cell.b.shape != (gq,):
                raise ValueError("bias shape inconsistent with kind/hidden size")
        if self.w_out.shape != (self.n_features, 2 * self.hidden_size):
            raise ValueError("w_out must be (n_features, 2*hidden_size)")
        if self.b_out.shape != (self.n_features,):
            raise ValueError("b_out must be (n_features,)")

    def params(self) -> dict[str, np.ndarray]:
        """Named weight tensors in the fixed serialization order."""
        return {
            "w_x_fwd": self.fwd.w_x,
            "w_h_fwd": self.fwd.w_h,
            "b_fwd": self.fwd.b,
            "w_x_bwd": self.bwd.w_x,
            "w_h_bwd": self.bwd.w_h,
            "b_bwd": self.bwd.b,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }

    def copy(self) -> "RnnModel":
        return RnnModel(
            kind=self.kind,
            hidden_size=self.hidden_size,
            n_features=self.n_features,
            activation=self.activation,
            fwd=CellWeights(self.fwd.w_x.copy(), self.fwd.w_h.copy(), self.fwd.b.copy()),
            bwd=CellWeights(self.bwd.w_x.copy(), self.bwd.w_h.copy(), self.bwd.b.copy()),
            w_out=self.w_out.copy(),
            b_out=self.b_out.copy(),
            meta=dict(self.meta),
        )


def init_model(
    kind: str,
    hidden_size: int,
    n_features: int,
    activation: str = "relu",
    seed: int | np.random.Generator = 0,
    recurrent_init: str = "glorot",
    update_bias: float = 0.0,
    forget_bias: float = 0.0,
) -> RnnModel:
    """Glorot-uniform weights per gate block, zero biases by default.

    ``recurrent_init='orthogonal'`` replaces each recurrent gate block with
    a random orthogonal matrix (norm-preserving hidden dynamics, the usual
    long-memory initialization).  ``update_bias`` offsets the GRU update
    gate (negative values start the cell in a hold-mostly regime) and
    ``forget_bias`` offsets the LSTM forget gate (positive values retain
    the cell state).  Draw order is fixed for reproducibility: per
    direction, input kernel gate blocks then recurrent gate blocks, then
    the output kernel.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if recurrent_init not in ("glorot", "orthogonal"):
        raise ValueError(f"unknown recurrent_init {recurrent_init!r}")
    gates = GATE_COUNTS[kind]
    q = hidden_size

    def glorot(rows, cols):
        a = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-a, a, size=(rows, cols))

    def recurrent_block():
        if recurrent_init == "glorot":
            return glorot(q, q)
        mat, upper = np.linalg.qr(rng.standard_normal((q, q)))
        return mat * np.sign(np.diag(upper))  # unique orthogonal factor

    def make_cell():
        w_x = np.vstack([glorot(q, n_features) for _ in range(gates)])
        w_h = np.vstack([recurrent_block() for _ in range(gates)])
        b = np.zeros(gates * q)
        if kind == "gru" and update_bias:
            b[:q] = update_bias
        if kind == "lstm" and forget_bias:
            b[q : 2 * q] = forget_bias
        return CellWeights(w_x=w_x, w_h=w_h, b=b)

    fwd, bwd = make_cell(), make_cell()
    w_out = glorot(n_features, 2 * q)
    return RnnModel(
        kind=kind,
        hidden_size=q,
        n_features=n_features,
        activation=activation,
        fwd=fwd,
        bwd=bwd,
        w_out=w_out,
        b_out=np.zeros(n_features),
    )


def cell_step(kind: str, weights: CellWeights, x_t: np.ndarray, state, activation: str = "relu"):
    """Advance one recurrent cell by a single step.

    ``state`` is the hidden vector for SRNN/GRU and the ``(hidden, cell)``
    pair for LSTM; the new state has the same structure.  ``x_t`` may carry
    leading batch dimensions.
    """
    x = np.asarray(x_t, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite cell input")
    q = weights.w_h.shape[1]
    if kind == "lstm":
        h, c = state
    else:
        h = state
    h = np.asarray(h, dtype=np.float64)
    a = x @ weights.w_x.T + h @ weights.w_h.T + weights.b
    if kind == "srnn":
        return _act(a, activation)
    if kind == "gru":
        z = sigmoid(a[..., :q])
        r = sigmoid(a[..., q : 2 * q])
        # candidate uses the reset-gated hidden state, so recompute its block
        c_pre = x @ weights.w_x[2 * q :].T + (r * h) @ weights.w_h[2 * q :].T + weights.b[2 * q :]
        cand = _act(c_pre, activation)
        return (1.0 - z) * h + z * cand
    if kind == "lstm":
        c = np.asarray(c, dtype=np.float64)
        i = sigmoid(a[..., :q])
        f = sigmoid(a[..., q : 2 * q])
        o = sigmoid(a[..., 2 * q : 3 * q])
        g = _act(a[..., 3 * q :], activation)
        c_new = f * c + i * g
        return o * _act(c_new, activation), c_new
    raise ValueError(f"unknown cell kind {kind!r}")


@dataclass
class SequenceActivations:
    """Per-step forward quantities retained for backpropagation through time.

    ``fwd``/``bwd`` hold scan-order arrays keyed per cell kind (see
    ``_scan_direction``), including the direction's view of the input.
    """

    x: np.ndarray  # (batch, steps, n_features), time order
    fwd: dict
    bwd: dict
    h_cat: np.ndarray  # (batch, steps, 2Q), time order
    model_token: int

    def check_model(self, model: RnnModel):
        if self.model_token != id(model):
            raise ValueError("activation cache is stale: produced by a different model")


def _scan_direction(kind, weights, x, activation, reverse, keep_cache):
    """Scan one direction over (batch, steps, features) input.

    Returns hidden states in *time* order plus (optionally) a cache dict of
    scan-order arrays.
    """
    batch, steps, _ = x.shape
    q = weights.w_h.shape[1]
    # contiguous input keeps the GEMM rounding identical for both directions
    xs = np.ascontiguousarray(x[:, ::-1] if reverse else x)
    pre = xs @ weights.w_x.T + weights.b

    h = np.zeros((batch, q))
    h_all = np.empty((batch, steps, q))
    cache = {"reverse": reverse, "xs": xs} if keep_cache else None
    if keep_cache:
        keys = {
            "srnn": ("h_prev",),
            "gru": ("h_prev", "z", "r", "cand", "rh"),
            "lstm": ("h_prev", "i", "f", "o", "g", "c_prev", "c", "c_act"),
        }[kind]
        for k in keys:
            cache[k] = np.empty((batch, steps, q))

    if kind == "srnn":
        for t in range(steps):
            if keep_cache:
                cache["h_prev"][:, t] = h
            h = _act(pre[:, t] + h @ weights.w_h.T, activation)
            h_all[:, t] = h
        if keep_cache:
            cache["h"] = h_all  # scan order; backward needs act'(h)
    elif kind == "gru":
        w_h_zr = weights.w_h[: 2 * q]
        w_h_c = weights.w_h[2 * q :]
        for t in range(steps):
            a_zr = pre[:, t, : 2 * q] + h @ w_h_zr.T
            z = sigmoid(a_zr[:, :q])
            r = sigmoid(a_zr[:, q:])
            rh = r * h
            cand = _act(pre[:, t, 2 * q :] + rh @ w_h_c.T, activation)
            if keep_cache:
                cache["h_prev"][:, t] = h
                cache["z"][:, t] = z
                cache["r"][:, t] = r
                cache["rh"][:, t] = rh
                cache["cand"][:, t] = cand
            h = (1.0 - z) * h + z * cand
            h_all[:, t] = h
    else:  # lstm
        c = np.zeros((batch, q))
        for t in range(steps):
            a = pre[:, t] + h @ weights.w_h.T
            i = sigmoid(a[:, :q])
            f = sigmoid(a[:, q : 2 * q])
            o = sigmoid(a[:, 2 * q : 3 * q])
            g = _act(a[:, 3 * q :], activation)
            c_new = f * c + i * g
            c_act = _act(c_new, activation)
            if keep_cache:
                cache["h_prev"][:, t] = h
                cache["i"][:, t] = i
                cache["f"][:, t] = f
                cache["o"][:, t] = o
                cache["g"][:, t] = g
                cache["c_prev"][:, t] = c
                cache["c"][:, t] = c_new
                cache["c_act"][:, t] = c_act
            c = c_new
            h = o * c_act
            h_all[:, t] = h

    h_time = h_all[:, ::-1] if reverse else h_all
    return h_time, cache


def forward_batch(model: RnnModel, x: np.ndarray, keep_cache: bool = False):
    """Bidirectional forward pass over a batch.

    ``x`` is (batch, steps, n_features); returns the projected outputs of the
    same shape and, when requested, the :class:`SequenceActivations` cache.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[2] != model.n_features:
        raise ValueError(f"expected (batch, steps, {model.n_features}) input, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite network input")
    h_f, cache_f = _scan_direction(model.kind, model.fwd, x, model.activation, False, keep_cache)
    h_b, cache_b = _scan_direction(model.kind, model.bwd, x, model.activation, True, keep_cache)
    h_cat = np.concatenate([h_f, h_b], axis=2)
    out = h_cat @ model.w_out.T + model.b_out
    if not keep_cache:
        return out, None
    acts = SequenceActivations(x=x, fwd=cache_f, bwd=cache_b, h_cat=h_cat, model_token=id(model))
    return out, acts


def birnn_forward(model: RnnModel, h_in: np.ndarray) -> np.ndarray:
    """Run the estimator over one frame-shaped matrix (n_features, steps)."""
    h_in = np.asarray(h_in, dtype=np.float64)
    if h_in.ndim != 2 or h_in.shape[0] != model.n_features:
        raise ValueError(f"expected ({model.n_features}, steps) input, got {h_in.shape}")
    out, _ = forward_batch(model, h_in.T[None])
    return out[0].T


def estimate_channel(model: RnnModel, est_input: EstimatorInput) -> np.ndarray:
    """Full-frame channel estimate: forward pass then real/imag unstacking."""
    h_in = est_input.h_in
    if 2 * (h_in.shape[0] // 2) != h_in.shape[0] or h_in.shape[0] != model.n_features:
        raise ValueError("estimator input width does not match the model")
    return unstack_real(birnn_forward(model, h_in))


# ---------------------------------------------------------------------------
# Weight container: versioned binary file + JSON sidecar.
# Layout (all little-endian): magic 'BRNW', u16 version, u8 kind, u8
# activation, u32 hidden, u32 n_features, u32 k_on, u32 n_symbols, u32
# tensor count; then per tensor (params() order): u8 ndim, u32*ndim shape,
# raw float64 data.

_MAGIC = b"BRNW"
_VERSION = 1
_KIND_CODES = {"srnn": 0, "lstm": 1, "gru": 2}
_ACT_CODES = {"tanh": 0, "relu": 1}


def save_model(model: RnnModel, path) -> None:
    kind_code = _KIND_CODES[model.kind]
    act_code = _ACT_CODES[model.activation]
    k_on = int(model.meta.get("k_on", model.n_features // 2))
    n_symbols = int(model.meta.get("n_symbols", 0))
    params = model.params()
    blob = [
        _MAGIC,
        struct.pack(
            "<HBBIIIII",
            _VERSION,
            kind_code,
            act_code,
            model.hidden_size,
            model.n_features,
            k_on,
            n_symbols,
            len(params),
        ),
    ]
    for arr in params.values():
        a = np.ascontiguousarray(arr, dtype="<f8")
        blob.append(struct.pack("<B", a.ndim))
        blob.append(struct.pack(f"<{a.ndim}I", *a.shape))
        blob.append(a.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(blob))
    sidecar = {
        "format": "BRNW",
        "version": _VERSION,
        "kind": model.kind,
        "activation": model.activation,
        "hidden_size": model.hidden_size,
        "n_features": model.n_features,
        "k_on": k_on,
        "n_symbols": n_symbols,
        "tensors": {k: list(v.shape) for k, v in params.items()},
        "meta": {k: v for k, v in model.meta.items() if k not in ("k_on", "n_symbols")},
    }
    with open(f"{path}.json", "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> RnnModel:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError("not a recurrent-estimator weight file")
    head = struct.Struct("<HBBIIIII")
    (version, kind_code, act_code, hidden, n_features, k_on, n_symbols, n_tensors) = head.unpack_from(
        data, 4
    )
    if version != _VERSION:
        raise ValueError(f"unsupported weight file version {version}")
    kind = {v: k for k, v in _KIND_CODES.items()}[kind_code]
    activation = {v: k for k, v in _ACT_CODES.items()}[act_code]
    offset = 4 + head.size
    tensors = []
    for _ in range(n_tensors):
        ndim = data[offset]
        offset += 1
        shape = struct.unpack(f"<{ndim}I", data[offset : offset + 4 * ndim])
        offset += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += 8 * count
        tensors.append(arr)
    w_x_f, w_h_f, b_f, w_x_b, w_h_b, b_b, w_out, b_out = tensors
    return RnnModel(
        kind=kind,
        hidden_size=hidden,
        n_features=n_features,
        activation=activation,
        fwd=CellWeights(w_x_f, w_h_f, b_f),
        bwd=CellWeights(w_x_b, w_h_b, b_b),
        w_out=w_out,
        b_out=b_out,
        meta={"k_on": k_on, "n_symbols": n_symbols},
    )
