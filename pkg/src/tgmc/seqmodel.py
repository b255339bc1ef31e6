"""Recurrent sequence models for embedding and decoder-weight trajectories.

One model is shared by every row of the quantity it forecasts: user rows,
item rows (optionally through the same shared model), or the R flattened
decoder-weight matrices. Inputs are batched as (rows, steps, dim); the
model emits one prediction per consumed step, i.e. output step t is the
forecast for input position t+1.

Cells are implemented from scratch (vanilla tanh RNN, GRU, LSTM; one to
three stacked layers) with exact backpropagation through time and no
truncation. Training is teacher-forced full-batch MSE under Adam;
autoregressive roll-out happens only at prediction time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .numerics import AdamState, Array, adam_step, sigmoid

CELL_TYPES = ("vanilla", "gru", "lstm")
GATE_BLOCKS = {"vanilla": 1, "gru": 3, "lstm": 4}


@dataclass
class SeqModelConfig:
    cell: str = "lstm"
    layers: int = 2
    input_dim: int = 1
    output_dim: int = 1
    hidden_dim: int | None = None   # defaults to input_dim
    share_user_item: bool = True

    def __post_init__(self):
        if self.cell not in CELL_TYPES:
            raise ValueError(f"unknown cell type '{self.cell}'")
        if self.layers not in (1, 2, 3):
            raise ValueError("layers must be 1, 2 or 3")
        if self.input_dim <= 0 or self.output_dim <= 0:
            raise ValueError("dims must be positive")
        if self.hidden_dim is None:
            self.hidden_dim = self.input_dim
        if self.hidden_dim <= 0:
            raise ValueError("hidden_dim must be positive")


class SeqModel:
    """Parameter container: per-layer cell weights plus output projection.

    Layer l holds ``w_x`` (gates*H x in), ``w_h`` (gates*H x H) and a bias
    (gates*H,); gate blocks are stacked row-wise in the order
    [update, reset, candidate] for GRU and [input, forget, cell, output]
    for LSTM. The projection maps the top hidden state to the output dim.
    """

    def __init__(self, config: SeqModelConfig, rng: np.random.Generator,
                 dtype=numerics.DEFAULT_DTYPE):
        self.config = config
        gates = GATE_BLOCKS[config.cell]
        h = config.hidden_dim
        self.layers = []
        in_dim = config.input_dim
        for _ in range(config.layers):
            self.layers.append({
                "w_x": numerics.glorot_uniform(rng, gates * h, in_dim, dtype),
                "w_h": numerics.glorot_uniform(rng, gates * h, h, dtype),
                "b": np.zeros(gates * h, dtype=dtype),
            })
            in_dim = h
        self.proj_w = numerics.glorot_uniform(rng, config.output_dim, h, dtype)
        self.proj_b = np.zeros(config.output_dim, dtype=dtype)

    @property
    def dtype(self):
        return self.proj_w.dtype

    def params(self) -> dict[str, Array]:
        out = {}
        for i, layer in enumerate(self.layers, start=1):
            out[f"l{i}/w_x"] = layer["w_x"]
            out[f"l{i}/w_h"] = layer["w_h"]
            out[f"l{i}/b"] = layer["b"]
        out["proj/w"] = self.proj_w
        out["proj/b"] = self.proj_b
        return out

    def named(self, role: str) -> dict[str, Array]:
        return {f"seq/{role}/{k}": v for k, v in self.params().items()}

    def load_params(self, values: dict[str, Array]) -> None:
        for name, array in self.params().items():
            array[...] = values[name]

    def astype(self, dtype) -> "SeqModel":
        clone = SeqModel.__new__(SeqModel)
        clone.config = self.config
        clone.layers = [{k: v.astype(dtype) for k, v in layer.items()}
                        for layer in self.layers]
        clone.proj_w = self.proj_w.astype(dtype)
        clone.proj_b = self.proj_b.astype(dtype)
        return clone

    def zero_params(self) -> None:
        for layer in self.layers:
            for v in layer.values():
                v[...] = 0
        self.proj_w[...] = 0
        self.proj_b[...] = 0


# ---------------------------------------------------------------------------
# cell steps
# ---------------------------------------------------------------------------

def _step_vanilla(layer, x, h_prev, _c_prev):
    a = x @ layer["w_x"].T + h_prev @ layer["w_h"].T + layer["b"]
    h = np.tanh(a)
    return h, None, {"x": x, "h_prev": h_prev, "h": h}


def _step_gru(layer, x, h_prev, _c_prev):
    hsz = h_prev.shape[1]
    a_x = x @ layer["w_x"].T + layer["b"]
    a_h = h_prev @ layer["w_h"].T
    z = sigmoid(a_x[:, :hsz] + a_h[:, :hsz])
    r = sigmoid(a_x[:, hsz:2 * hsz] + a_h[:, hsz:2 * hsz])
    hn = a_h[:, 2 * hsz:]
    n = np.tanh(a_x[:, 2 * hsz:] + r * hn)
    h = z * h_prev + (1.0 - z) * n
    return h, None, {"x": x, "h_prev": h_prev, "z": z, "r": r, "n": n, "hn": hn}


def _step_lstm(layer, x, h_prev, c_prev):
    hsz = h_prev.shape[1]
    a = x @ layer["w_x"].T + h_prev @ layer["w_h"].T + layer["b"]
    i = sigmoid(a[:, :hsz])
    f = sigmoid(a[:, hsz:2 * hsz])
    g = np.tanh(a[:, 2 * hsz:3 * hsz])
    o = sigmoid(a[:, 3 * hsz:])
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, {"x": x, "h_prev": h_prev, "c_prev": c_prev,
                  "i": i, "f": f, "g": g, "o": o, "c": c, "tc": tc}


_STEP = {"vanilla": _step_vanilla, "gru": _step_gru, "lstm": _step_lstm}


def _step_backward_vanilla(layer, cache, d_h):
    d_a = d_h * (1.0 - cache["h"] * cache["h"])
    grads = {"w_x": d_a.T @ cache["x"], "w_h": d_a.T @ cache["h_prev"],
             "b": d_a.sum(axis=0)}
    d_x = d_a @ layer["w_x"]
    d_h_prev = d_a @ layer["w_h"]
    return d_x, d_h_prev, None, grads


def _step_backward_gru(layer, cache, d_h):
    h_prev, z, r, n, hn = (cache["h_prev"], cache["z"], cache["r"],
                           cache["n"], cache["hn"])
    d_z = d_h * (h_prev - n)
    d_n = d_h * (1.0 - z)
    d_h_prev = d_h * z
    d_an = d_n * (1.0 - n * n)
    d_r = d_an * hn
    d_hn = d_an * r
    d_az = d_z * z * (1.0 - z)
    d_ar = d_r * r * (1.0 - r)
    d_ax = np.concatenate([d_az, d_ar, d_an], axis=1)
    d_ah = np.concatenate([d_az, d_ar, d_hn], axis=1)
    grads = {"w_x": d_ax.T @ cache["x"], "w_h": d_ah.T @ h_prev,
             "b": d_ax.sum(axis=0)}
    d_x = d_ax @ layer["w_x"]
    d_h_prev = d_h_prev + d_ah @ layer["w_h"]
    return d_x, d_h_prev, None, grads


def _step_backward_lstm(layer, cache, d_h, d_c):
    i, f, g, o, tc = cache["i"], cache["f"], cache["g"], cache["o"], cache["tc"]
    d_o = d_h * tc
    d_c = d_c + d_h * o * (1.0 - tc * tc)
    d_i = d_c * g
    d_f = d_c * cache["c_prev"]
    d_g = d_c * i
    d_c_prev = d_c * f
    d_a = np.concatenate([d_i * i * (1.0 - i), d_f * f * (1.0 - f),
                          d_g * (1.0 - g * g), d_o * o * (1.0 - o)], axis=1)
    grads = {"w_x": d_a.T @ cache["x"], "w_h": d_a.T @ cache["h_prev"],
             "b": d_a.sum(axis=0)}
    d_x = d_a @ layer["w_x"]
    d_h_prev = d_a @ layer["w_h"]
    return d_x, d_h_prev, d_c_prev, grads


# ---------------------------------------------------------------------------
# sequence forward / backward
# ---------------------------------------------------------------------------

def _forward_with_cache(model: SeqModel, x: Array):
    """Run the stacked recurrence over (rows, steps, in_dim)."""
    cfg = model.config
    if x.ndim != 3 or x.shape[2] != cfg.input_dim:
        raise ValueError(f"expected input (rows, steps, {cfg.input_dim}), "
                         f"got {x.shape}")
    if x.shape[1] < 1:
        raise ValueError("need at least one input step")
    n, steps, _ = x.shape
    step_fn = _STEP[cfg.cell]
    dtype = model.dtype
    caches = [[None] * steps for _ in range(cfg.layers)]
    layer_in = x.astype(dtype, copy=False)
    top = None
    for li, layer in enumerate(model.layers):
        h = np.zeros((n, cfg.hidden_dim), dtype=dtype)
        c = np.zeros((n, cfg.hidden_dim), dtype=dtype) if cfg.cell == "lstm" else None
        outs = np.empty((n, steps, cfg.hidden_dim), dtype=dtype)
        for t in range(steps):
            h, c, cache = step_fn(layer, layer_in[:, t], h, c)
            caches[li][t] = cache
            outs[:, t] = h
        layer_in = outs
        top = outs
    y = top @ model.proj_w.T + model.proj_b
    return y, {"caches": caches, "top": top, "steps": steps, "rows": n}


def seq_forward(model: SeqModel, sequence: Array) -> Array:
    """Predictions for positions 2..k+1 given inputs x_1..x_k.

    ``sequence`` is (rows, steps, input_dim); a single (steps, input_dim)
    row is also accepted. Initial hidden (and cell) states are zero.
    """
    squeeze = sequence.ndim == 2
    if squeeze:
        sequence = sequence[None]
    y, _ = _forward_with_cache(model, sequence)
    return y[0] if squeeze else y


def seq_backward(model: SeqModel, cache, d_y: Array) -> dict[str, Array]:
    """Full-BPTT gradients of all parameters given output gradients."""
    cfg = model.config
    steps = cache["steps"]
    top = cache["top"]
    d_out = {"proj/w": np.einsum("nto,nth->oh", d_y, top),
             "proj/b": d_y.sum(axis=(0, 1))}
    # gradient flowing into the top layer's hidden states
    d_hidden = d_y @ model.proj_w
    cell = cfg.cell
    for li in range(cfg.layers - 1, -1, -1):
        layer = model.layers[li]
        layer_caches = cache["caches"][li]
        acc = {k: np.zeros_like(v) for k, v in layer.items()}
        d_below = np.empty((cache["rows"], steps, layer["w_x"].shape[1]),
                           dtype=model.dtype)
        d_h_next = np.zeros_like(d_hidden[:, 0])
        d_c_next = np.zeros_like(d_h_next) if cell == "lstm" else None
        for t in range(steps - 1, -1, -1):
            d_h = d_hidden[:, t] + d_h_next
            if cell == "lstm":
                d_x, d_h_next, d_c_next, grads = _step_backward_lstm(
                    layer, layer_caches[t], d_h, d_c_next)
            elif cell == "gru":
                d_x, d_h_next, _, grads = _step_backward_gru(
                    layer, layer_caches[t], d_h)
            else:
                d_x, d_h_next, _, grads = _step_backward_vanilla(
                    layer, layer_caches[t], d_h)
            d_below[:, t] = d_x
            for k, g in grads.items():
                acc[k] += g
        d_out[f"l{li + 1}/w_x"] = acc["w_x"]
        d_out[f"l{li + 1}/w_h"] = acc["w_h"]
        d_out[f"l{li + 1}/b"] = acc["b"]
        d_hidden = d_below
    return d_out


# ---------------------------------------------------------------------------
# training and roll-out
# ---------------------------------------------------------------------------

def mse_loss_and_grad(predicted: Array, target: Array,
                      mask: Array | None = None):
    """Mean-over-steps squared error (Frobenius across rows and dims).

    loss = sum_t ||Y_hat_t - Y_t||_F^2 / n_steps. ``mask`` (rows, steps)
    optionally weights individual row-steps, e.g. to ignore rows before
    their first activity.
    """
    n_steps = predicted.shape[1]
    err = (predicted - target).astype(np.float64)
    if mask is not None:
        err = err * mask[:, :, None]
    loss = float((err * err).sum() / n_steps)
    d_pred = (2.0 / n_steps) * err
    if mask is not None:
        d_pred = d_pred * mask[:, :, None]
    return loss, d_pred.astype(predicted.dtype)


def seq_train(model: SeqModel, sequences: Array, epochs: int = 250,
              learning_rate: float = 1e-2,
              mask: Array | None = None) -> list[float]:
    """Teacher-forced fit of next-step prediction over all rows at once.

    ``sequences`` is (rows, T, dim) with T >= 2; inputs are steps 1..T-1 and
    targets steps 2..T. Returns the per-epoch loss curve. Deterministic:
    full-batch gradients, no sampling.
    """
    sequences = np.asarray(sequences, dtype=model.dtype)
    if sequences.ndim != 3 or sequences.shape[1] < 2:
        raise ValueError("need (rows, T>=2, dim) sequences to fit")
    x = sequences[:, :-1]
    target = sequences[:, 1:]
    step_mask = mask[:, 1:] if mask is not None else None
    params = model.params()
    state = AdamState(learning_rate=learning_rate)
    curve = []
    for _ in range(epochs):
        y, cache = _forward_with_cache(model, x)
        loss, d_y = mse_loss_and_grad(y, target, step_mask)
        grads = seq_backward(model, cache, d_y)
        adam_step(params, grads, state)
        curve.append(loss)
    return curve


def activity_mask(sequences: Array) -> Array:
    """(rows, T) mask that excludes a row until its first nonzero step."""
    active = np.any(sequences != 0, axis=2)
    return (np.cumsum(active, axis=1) > 0).astype(sequences.dtype)


def predict_next(model: SeqModel, sequence: Array, steps: int = 1) -> Array:
    """Autoregressive roll-out: step 1 conditions on the observed sequence,
    later steps feed the previous prediction back as input."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    squeeze = sequence.ndim == 2
    if squeeze:
        sequence = sequence[None]
    cfg = model.config
    if steps > 1 and cfg.input_dim != cfg.output_dim:
        raise ValueError("roll-out beyond one step needs input_dim == output_dim")
    history = np.asarray(sequence, dtype=model.dtype)
    preds = []
    for step in range(steps):
        y, _ = _forward_with_cache(model, history)
        nxt = y[:, -1]
        preds.append(nxt)
        if step + 1 < steps:
            history = np.concatenate([history, nxt[:, None, :]], axis=1)
    out = np.stack(preds, axis=1)
    return out[0] if squeeze else out


def decoder_weight_model(q_over_time, config: SeqModelConfig | None = None,
                         rng: np.random.Generator | None = None,
                         epochs: int = 250, learning_rate: float = 1e-2):
    """Fit one shared LSTM over the R flattened decoder-weight trajectories.

    ``q_over_time`` is (T, R, d, d) (or a list of (R, d, d) with equal d).
    Returns (model, q_next, losses) where q_next is the (R, d, d) one-step
    forecast. Hidden width defaults to d*d capped at 2500.
    """
    try:
        q = np.stack([np.asarray(step) for step in q_over_time])
    except ValueError as exc:
        raise ValueError("decoder-weight sequences disagree in shape "
                         "across time") from exc
    if q.ndim != 4 or q.shape[2] != q.shape[3]:
        raise ValueError(f"expected (T, R, d, d) weight sequence, got {q.shape}")
    steps_t, n_ratings, d, _ = q.shape
    if steps_t < 2:
        raise ValueError("need at least two time steps of decoder weights")
    flat = q.reshape(steps_t, n_ratings, d * d).transpose(1, 0, 2)  # (R, T, d*d)
    if config is None:
        config = SeqModelConfig(cell="lstm", layers=1, input_dim=d * d,
                                output_dim=d * d,
                                hidden_dim=min(d * d, 2500))
    if rng is None:
        rng = numerics.make_rng(0)
    model = SeqModel(config, rng)
    losses = seq_train(model, flat, epochs=epochs, learning_rate=learning_rate)
    q_next = predict_next(model, flat, steps=1)[:, 0].reshape(n_ratings, d, d)
    return model, q_next, losses
