"""Single-layer scalar LSTM with a linear head, trained by truncated BPTT.

Per step::

    i = sigmoid(w_xi x + W_hi h + b_i)
    f = sigmoid(w_xf x + W_hf h + b_f)
    C = f * C + i * tanh(w_xc x + W_hc h + b_c)
    o = sigmoid(w_xo x + W_ho h + b_o)
    h = o * tanh(C)
    y = w_y . h + b_y

The four gates are stored stacked (order i, f, c, o) and the named
parameters are views into the stacks, so in-place optimizer updates keep
them in sync.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DivergenceError, InputError, NotFittedError

logger = logging.getLogger(__name__)

GATES = ("i", "f", "c", "o")
PARAM_NAMES = (
    "w_xi", "w_hi", "b_i",
    "w_xf", "w_hf", "b_f",
    "w_xc", "w_hc", "b_c",
    "w_xo", "w_ho", "b_o",
    "w_y", "b_y",
)


def _slot(name):
    """(stacked array name, gate index) for a gate parameter."""
    if name.startswith("b_"):
        return "b", GATES.index(name[2])
    return name[:3], GATES.index(name[3])


def _gate_view(name):
    def get(self):
        stack, g = _slot(name)
        hu = self.hidden_units
        return getattr(self, stack)[g * hu:(g + 1) * hu]
    return property(get)


@dataclass
class LstmConfig:
    hidden_units: int = 32
    epochs: int = 100
    learning_rate: float = 1e-3
    bptt_window: int = 30
    seed: int = 7
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def validate(self):
        problems = []
        for name in ("hidden_units", "epochs", "bptt_window"):
            value = getattr(self, name)
            if not (isinstance(value, int) and value > 0):
                problems.append(f"{name} must be a positive integer")
        if not self.learning_rate >= 0:
            problems.append("learning_rate must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            problems.append("optimizer must be 'adam' or 'sgd'")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1 and self.epsilon > 0):
            problems.append("adam constants out of range")
        if problems:
            raise ConfigError("lstm: " + "; ".join(problems))
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown lstm keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class TrainingReport:
    train_seconds: float
    effective_samples: int
    loss_history: list = field(default_factory=list)


class LstmModel:
    """Weights plus the running hidden and cell state."""

    def __init__(self, hidden_units):
        hu = hidden_units
        self.hidden_units = hu
        self.w_x = np.zeros(4 * hu)
        self.w_h = np.zeros((4 * hu, hu))
        self.b = np.zeros(4 * hu)
        self.w_y = np.zeros(hu)
        self.b_y = np.zeros(())
        self.fitted = False
        self.reset_state()

    def params(self):
        """Named parameter views in canonical order."""
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def reset_state(self, batch=None):
        shape = (self.hidden_units,) if batch is None else (batch, self.hidden_units)
        self.h = np.zeros(shape)
        self.c = np.zeros(shape)

    @classmethod
    def initialize(cls, hidden_units, seed):
        """Uniform weights in +-1/sqrt(hidden_units)."""
        model = cls(hidden_units)
        rng = np.random.default_rng(seed)
        bound = 1.0 / math.sqrt(hidden_units)
        for arr in (model.w_x, model.w_h, model.b, model.w_y):
            arr[...] = rng.uniform(-bound, bound, size=arr.shape)
        model.b_y[...] = rng.uniform(-bound, bound)
        return model

    def copy(self):
        other = LstmModel(self.hidden_units)
        for name in ("w_x", "w_h", "b", "w_y", "b_y"):
            getattr(other, name)[...] = getattr(self, name)
        other.fitted = self.fitted
        other.h, other.c = self.h.copy(), self.c.copy()
        return other

    def to_dict(self):
        return {
            "hidden_units": self.hidden_units,
            "fitted": self.fitted,
            "params": {name: np.asarray(v).tolist() for name, v in self.params().items()},
        }

    @classmethod
    def from_dict(cls, data):
        model = cls(int(data["hidden_units"]))
        for name, value in data["params"].items():
            getattr(model, name)[...] = value
        model.fitted = bool(data.get("fitted", True))
        return model


for _name in PARAM_NAMES[:-2]:
    setattr(LstmModel, _name, _gate_view(_name))
del _name


def _cell(model, x, h, c):
    """One step for a batch; x is (B,), h and c are (B, H)."""
    hu = model.hidden_units
    z = x[:, None] * model.w_x + h @ model.w_h.T + model.b
    i = expit(z[:, :hu])
    f = expit(z[:, hu:2 * hu])
    g = np.tanh(z[:, 2 * hu:3 * hu])
    o = expit(z[:, 3 * hu:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    y = h_new @ model.w_y + model.b_y
    return y, h_new, c_new, (x, h, c, i, f, g, o, tc)


def lstm_step(model, x):
    """Advance the stored state by one scalar input.

    Returns ``(y, cache)`` where ``cache`` holds the step's input, previous
    states and gate activations.
    """
    if not math.isfinite(x):
        raise InputError(f"non-finite input {x!r}")
    y, h, c, (xs, hp, cp, i, f, g, o, tc) = _cell(
        model, np.array([float(x)]), model.h[None, :], model.c[None, :]
    )
    model.h, model.c = h[0], c[0]
    cache = {"x": float(x), "h_prev": hp[0], "c_prev": cp[0], "i": i[0], "f": f[0],
             "g": g[0], "o": o[0], "tanh_c": tc[0], "h": h[0], "c": c[0]}
    return float(y[0]), cache


def _forward(model, inputs, h0, c0):
    """Run (B, T) inputs; return outputs (B, T), per-step caches, final state."""
    h, c = h0, c0
    batch, steps = inputs.shape
    ys = np.empty((batch, steps))
    caches = []
    for t in range(steps):
        ys[:, t], h, c, cache = _cell(model, inputs[:, t], h, c)
        caches.append(cache)
    return ys, caches, h, c


def _as_batch(a):
    a = np.asarray(a, dtype=np.float64)
    return a[None, :] if a.ndim == 1 else a


def lstm_gradients(model, inputs, targets, h0=None, c0=None):
    """Loss and analytic BPTT gradients for one window or a batch of windows.

    ``inputs`` and ``targets`` are (T,) or (B, T). The loss is the sum over
    windows of each window's mean squared error; ``h0``/``c0`` are treated
    as constants. Returns ``(loss, grads, (h_T, c_T))`` with ``grads`` keyed
    by parameter name.
    """
    inputs, targets = _as_batch(inputs), _as_batch(targets)
    if inputs.size == 0:
        raise InputError("window must be nonempty")
    batch, steps = inputs.shape
    hu = model.hidden_units
    h0 = np.zeros((batch, hu)) if h0 is None else _as_batch(h0)
    c0 = np.zeros((batch, hu)) if c0 is None else _as_batch(c0)
    ys, caches, h_last, c_last = _forward(model, inputs, h0, c0)
    err = ys - targets
    loss = float(np.sum(err ** 2) / steps)
    dy = 2.0 * err / steps

    g_wx = np.zeros_like(model.w_x)
    g_wh = np.zeros_like(model.w_h)
    g_b = np.zeros_like(model.b)
    g_wy = np.zeros_like(model.w_y)
    g_by = float(np.sum(dy))
    dh_next = np.zeros((batch, hu))
    dc_next = np.zeros((batch, hu))
    for t in range(steps - 1, -1, -1):
        x, h_prev, c_prev, i, f, g, o, tc = caches[t]
        h = o * tc
        g_wy += dy[:, t] @ h
        dh = dy[:, t][:, None] * model.w_y + dh_next
        do = dh * tc
        dc = dh * o * (1.0 - tc * tc) + dc_next
        dz = np.concatenate(
            [dc * g * i * (1.0 - i), dc * c_prev * f * (1.0 - f), dc * i * (1.0 - g * g), do * o * (1.0 - o)],
            axis=1,
        )
        g_wx += x @ dz
        g_wh += dz.T @ h_prev
        g_b += dz.sum(axis=0)
        dh_next = dz @ model.w_h
        dc_next = dc * f

    stacked = {"w_x": g_wx, "w_h": g_wh, "b": g_b}
    grads = {"w_y": g_wy, "b_y": np.array(g_by)}
    for name in PARAM_NAMES[:-2]:
        stack, g = _slot(name)
        grads[name] = stacked[stack][g * hu:(g + 1) * hu].copy()
    return loss, {name: grads[name] for name in PARAM_NAMES}, (h_last, c_last)


def _stack_grads(grads):
    # back to storage layout for the optimizer
    out = {"w_y": grads["w_y"], "b_y": grads["b_y"]}
    for stack, fmt in (("w_x", "w_x{}"), ("w_h", "w_h{}"), ("b", "b_{}")):
        out[stack] = np.concatenate([grads[fmt.format(g)] for g in GATES])
    return out


class _Adam:
    def __init__(self, shapes, lr, beta1, beta2, eps):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        scale = self.lr * math.sqrt(1 - b2 ** self.t) / (1 - b1 ** self.t)
        for k, p in params.items():
            g = grads[k]
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            p -= scale * self.m[k] / (np.sqrt(self.v[k]) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for k, p in params.items():
            p -= self.lr * grads[k]


def sequence_mse(model, inputs, targets):
    ys, _, _, _ = _forward(model, _as_batch(inputs), np.zeros((1, model.hidden_units)),
                           np.zeros((1, model.hidden_units)))
    return float(np.mean((ys[0] - np.asarray(targets)) ** 2))


def lstm_fit(config, data, on_epoch=None):
    """Train a fresh model on ``data`` (a SupervisedSet).

    Each epoch walks contiguous ``bptt_window`` chunks of the training
    sequence in order, carrying hidden and cell state across chunks and
    updating after every chunk. ``loss_history[e]`` is the full-sequence
    MSE at the start of epoch ``e``, so entry 0 is the untrained loss.
    """
    config = config.validate()
    inputs = np.asarray(data.inputs, dtype=np.float64)
    targets = np.asarray(data.targets, dtype=np.float64)
    n = len(inputs)
    if n < config.bptt_window:
        raise InputError(f"{n} training pairs shorter than bptt_window {config.bptt_window}")

    start = time.perf_counter()
    model = LstmModel.initialize(config.hidden_units, config.seed)
    params = {"w_x": model.w_x, "w_h": model.w_h, "b": model.b, "w_y": model.w_y, "b_y": model.b_y}
    if config.optimizer == "adam":
        opt = _Adam({k: v.shape for k, v in params.items()}, config.learning_rate,
                    config.beta1, config.beta2, config.epsilon)
    else:
        opt = _SGD(config.learning_rate)

    hu = config.hidden_units
    bounds = list(range(0, n, config.bptt_window))
    history = []
    for epoch in range(config.epochs):
        epoch_loss = sequence_mse(model, inputs, targets)
        if not math.isfinite(epoch_loss):
            raise DivergenceError(f"lstm loss non-finite at start of epoch {epoch}", "lstm")
        history.append(epoch_loss)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
        h = np.zeros((1, hu))
        c = np.zeros((1, hu))
        for w, lo in enumerate(bounds):
            hi = min(lo + config.bptt_window, n)
            loss, grads, (h, c) = lstm_gradients(model, inputs[lo:hi], targets[lo:hi], h, c)
            if not math.isfinite(loss):
                raise DivergenceError(f"lstm loss non-finite at epoch {epoch}, window {w}", "lstm")
            opt.step(params, _stack_grads(grads))
    model.fitted = True
    model.reset_state()
    elapsed = time.perf_counter() - start
    logger.debug("lstm fit: %d epochs in %.2fs", config.epochs, elapsed)
    return model, TrainingReport(elapsed, n, history)


def lstm_predict(model, inputs):
    """Teacher-forced one-step outputs from a zeroed state."""
    if not model.fitted:
        raise NotFittedError("lstm model has not been trained")
    inputs = np.asarray(inputs, dtype=np.float64)
    if not np.all(np.isfinite(inputs)):
        raise InputError("non-finite input")
    hu = model.hidden_units
    ys, _, h, c = _forward(model, inputs[None, :], np.zeros((1, hu)), np.zeros((1, hu)))
    model.h, model.c = h[0], c[0]
    return ys[0]


def lstm_free_run(model, warm_inputs, x0, horizon):
    """Warm up on ``warm_inputs`` from a zeroed state, then feed outputs back."""
    if not model.fitted:
        raise NotFittedError("lstm model has not been trained")
    if horizon < 1:
        raise InputError("horizon must be positive")
    model.reset_state()
    for x in np.asarray(warm_inputs, dtype=np.float64):
        lstm_step(model, x)
    out = np.empty(horizon)
    x = float(x0)
    for i in range(horizon):
        y, _ = lstm_step(model, x)
        if not math.isfinite(y):
            raise DivergenceError(f"lstm free run diverged at step {i}", "lstm")
        out[i] = x = y
    return out
