"""Leaky-integrator echo state network with a ridge-regression readout.

The reservoir evolves as

    r(t+1) = (1 - a) r(t) + a tanh(W_in x(t) + W_res r(t) [+ W_fb y(t)])

and the prediction is ``[1, r(t+1)] @ w_out`` (bias first). Only ``w_out``
is trained.
"""

from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, fields

import numpy as np
import scipy.linalg

from .errors import (
    ConfigError,
    DegenerateReservoirError,
    DivergenceError,
    InputError,
    NotFittedError,
    UnderdeterminedError,
)

logger = logging.getLogger(__name__)

# Above this many readout columns the normal equations lose too many digits
# (cond(R^T R) = cond(R)^2); solve the stacked least-squares problem via QR.
NORMAL_EQUATIONS_MAX_COLUMNS = 501


@dataclass
class ReservoirConfig:
    """Reservoir hyperparameters.

    Defaults reproduce the reference setup: 20 units, leak rate 0.75,
    spectral radius 1.025, input scaling 1.0, 15% recurrent and 20% input
    connectivity, ridge coefficient 1e-8. ``fb_connectivity`` is only used
    when ``feedback_enabled`` and is clamped to 1.0 at construction.
    """

    units: int = 20
    leak_rate: float = 0.75
    spectral_radius: float = 1.025
    input_scaling: float = 1.0
    rc_connectivity: float = 0.15
    input_connectivity: float = 0.2
    fb_connectivity: float = 1.1
    regularization_coef: float = 1e-8
    washout: int = 50
    seed: int = 7
    feedback_enabled: bool = False

    def validate(self):
        problems = []
        if not (isinstance(self.units, int) and self.units > 0):
            problems.append("units must be a positive integer")
        if not 0.0 < self.leak_rate <= 1.0:
            problems.append("leak_rate must lie in (0, 1]")
        if not self.spectral_radius > 0:
            problems.append("spectral_radius must be positive")
        if not self.input_scaling > 0:
            problems.append("input_scaling must be positive")
        for name in ("rc_connectivity", "input_connectivity"):
            if not 0.0 < getattr(self, name) <= 1.0:
                problems.append(f"{name} must lie in (0, 1]")
        if not self.fb_connectivity > 0:
            problems.append("fb_connectivity must be positive")
        if not self.regularization_coef >= 0:
            problems.append("regularization_coef must be non-negative")
        if not (isinstance(self.washout, int) and self.washout >= 0):
            problems.append("washout must be a non-negative integer")
        if problems:
            raise ConfigError("reservoir: " + "; ".join(problems))
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown reservoir keys: {sorted(unknown)}")
        return cls(**data)


@dataclass
class FitReport:
    train_seconds: float
    ridge_residual_norm: float
    effective_samples: int


def spectral_radius(matrix, iterations=200, tol=1e-9, block=48, seed=0):
    """Estimate the largest eigenvalue modulus by block power iteration.

    A block of orthonormal vectors is pushed through ``matrix`` and
    re-orthonormalised each step; the Ritz values of the projected matrix
    are checked every few steps. A block (rather than a single vector) is
    needed because the dominant eigenvalue of a real nonsymmetric matrix is
    often a complex-conjugate pair. Stops when the estimate changes by less
    than ``tol`` relative, or after ``iterations`` steps.
    """
    a = np.asarray(matrix, dtype=np.float64)
    n = a.shape[0]
    b = min(n, block)
    q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, b)))
    estimate = None
    for k in range(1, iterations + 1):
        q, _ = np.linalg.qr(a @ q)
        if k % 5 and k != iterations:
            continue
        ritz = np.linalg.eigvals(q.T @ (a @ q))
        current = float(np.max(np.abs(ritz)))
        if estimate is not None and abs(current - estimate) <= tol * current:
            return current
        estimate = current
    return estimate


def _sparse_vector(rng, n, nonzeros, low, high):
    out = np.zeros(n)
    idx = np.sort(rng.choice(n, size=nonzeros, replace=False))
    out[idx] = rng.uniform(low, high, size=nonzeros)
    return out


class EchoStateNetwork:
    """A built (and possibly trained) reservoir.

    Instances are single-writer: ``update_state``, ``fit_readout`` and the
    predict methods advance the internal state.
    """

    def __init__(self, config, w_in, w_res, w_fb=None, w_out=None):
        self.config = config
        self.w_in = np.asarray(w_in, dtype=np.float64)
        self.w_res = np.asarray(w_res, dtype=np.float64)
        self.w_fb = None if w_fb is None else np.asarray(w_fb, dtype=np.float64)
        self.w_out = None if w_out is None else np.asarray(w_out, dtype=np.float64)
        self.state = np.zeros(config.units)
        self._last_output = 0.0

    @property
    def is_fitted(self):
        return self.w_out is not None

    def reset_state(self):
        self.state = np.zeros(self.config.units)
        self._last_output = 0.0

    def update_state(self, x, y_prev=None):
        """Advance the reservoir by one input and return the new state."""
        if not math.isfinite(x):
            raise InputError(f"non-finite input {x!r}")
        pre = self.w_in * x + self.w_res @ self.state
        if self.config.feedback_enabled:
            if y_prev is None:
                raise InputError("feedback is enabled; y_prev is required")
            if not math.isfinite(y_prev):
                raise InputError(f"non-finite feedback {y_prev!r}")
            pre += self.w_fb * y_prev
        elif y_prev is not None:
            raise InputError("feedback is disabled; y_prev must be omitted")
        a = self.config.leak_rate
        self.state = (1.0 - a) * self.state + a * np.tanh(pre)
        return self.state

    def collect_states(self, data):
        """Teacher-forced run from a zeroed state; one row per pair."""
        self.reset_state()
        n = len(data.inputs)
        states = np.empty((n, self.config.units))
        feedback = self.config.feedback_enabled
        for i, x in enumerate(data.inputs):
            y_prev = (data.targets[i - 1] if i else 0.0) if feedback else None
            states[i] = self.update_state(float(x), y_prev)
        if feedback and n:
            self._last_output = float(data.targets[-1])
        return states

    def fit_readout(self, data):
        """Train ``w_out`` on a supervised set by ridge regression.

        The first ``washout`` states are discarded. The model is left in
        the state reached after the last training input.
        """
        cfg = self.config
        if len(data.inputs) <= cfg.washout:
            raise InputError(f"{len(data.inputs)} training pairs do not exceed washout {cfg.washout}")
        start = time.perf_counter()
        states = self.collect_states(data)[cfg.washout:]
        targets = np.asarray(data.targets[cfg.washout:], dtype=np.float64)
        design = design_matrix(states)
        self.w_out = ridge_solve(design, targets, cfg.regularization_coef)
        elapsed = time.perf_counter() - start
        residual = float(np.linalg.norm(design @ self.w_out - targets))
        logger.debug("esn readout fit: %d samples, residual %.3e", len(targets), residual)
        return FitReport(elapsed, residual, len(targets))

    def _emit(self):
        return float(self.w_out[0] + self.state @ self.w_out[1:])

    def _require_fitted(self):
        if not self.is_fitted:
            raise NotFittedError("readout has not been trained")

    def predict_one_step(self, inputs):
        """One-step-ahead predictions driven by the true inputs."""
        self._require_fitted()
        out = np.empty(len(inputs))
        feedback = self.config.feedback_enabled
        for i, x in enumerate(inputs):
            self.update_state(float(x), self._last_output if feedback else None)
            out[i] = self._last_output = self._emit()
        return out

    def predict_free_running(self, x0, horizon):
        """Feed each prediction back as the next input for ``horizon`` steps."""
        self._require_fitted()
        if horizon < 1:
            raise InputError("horizon must be positive")
        out = np.empty(horizon)
        x = float(x0)
        feedback = self.config.feedback_enabled
        for i in range(horizon):
            self.update_state(x, self._last_output if feedback else None)
            y = self._emit()
            if not math.isfinite(y):
                raise DivergenceError(f"free run diverged at step {i}", "esn")
            out[i] = x = self._last_output = y
        return out

    def to_dict(self):
        rows, cols = np.nonzero(self.w_res)
        return {
            "config": self.config.to_dict(),
            "w_in": self.w_in.tolist(),
            "w_res": {
                "shape": list(self.w_res.shape),
                "rows": rows.tolist(),
                "cols": cols.tolist(),
                "values": self.w_res[rows, cols].tolist(),
            },
            "w_fb": None if self.w_fb is None else self.w_fb.tolist(),
            "w_out": None if self.w_out is None else self.w_out.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        config = ReservoirConfig.from_dict(data["config"])
        coo = data["w_res"]
        w_res = np.zeros(tuple(coo["shape"]))
        w_res[np.asarray(coo["rows"], dtype=int), np.asarray(coo["cols"], dtype=int)] = coo["values"]
        return cls(config, data["w_in"], w_res, data.get("w_fb"), data.get("w_out"))


def build_reservoir(config=None):
    """Draw input, recurrent (and feedback) weights from ``config.seed``.

    The recurrent matrix gets exactly ``round(rc_connectivity * N**2)``
    nonzeros uniform on [-1, 1] and is rescaled to the configured spectral
    radius; the input vector gets ``round(input_connectivity * N)`` nonzeros
    uniform on [-input_scaling, input_scaling].
    """
    config = (config or ReservoirConfig()).validate()
    n = config.units
    rng = np.random.default_rng(config.seed)
    k_in = max(1, round(config.input_connectivity * n))
    w_in = _sparse_vector(rng, n, k_in, -config.input_scaling, config.input_scaling)
    k_res = max(1, round(config.rc_connectivity * n * n))
    w_res = _sparse_vector(rng, n * n, k_res, -1.0, 1.0).reshape(n, n)

    radius = spectral_radius(w_res)
    if not radius > 1e-12:
        raise DegenerateReservoirError(f"reservoir spectral radius is numerically zero ({radius:.3e})")
    w_res *= config.spectral_radius / radius

    w_fb = None
    if config.feedback_enabled:
        fraction = config.fb_connectivity
        if fraction > 1.0:
            warnings.warn(f"fb_connectivity {fraction} exceeds 1; clamped to 1.0", stacklevel=2)
            fraction = 1.0
        w_fb = _sparse_vector(rng, n, max(1, round(fraction * n)), -1.0, 1.0)
    return EchoStateNetwork(config, w_in, w_res, w_fb)


def design_matrix(states):
    states = np.asarray(states, dtype=np.float64)
    return np.hstack([np.ones((states.shape[0], 1)), states])


def ridge_solve(design, targets, ridge):
    """Solve ``(R^T R + ridge I) w = R^T y``.

    Uses a Cholesky factorisation of the normal equations up to
    ``NORMAL_EQUATIONS_MAX_COLUMNS`` columns, and a least-squares solve of
    the ridge-augmented system beyond that.
    """
    design = np.asarray(design, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    rows, cols = design.shape
    if ridge == 0 and rows < cols:
        raise UnderdeterminedError(f"{rows} samples for {cols} readout weights with zero regularization")
    if cols > NORMAL_EQUATIONS_MAX_COLUMNS:
        stacked = np.vstack([design, math.sqrt(ridge) * np.eye(cols)])
        rhs = np.concatenate([targets, np.zeros((cols,) + targets.shape[1:])])
        return np.linalg.lstsq(stacked, rhs, rcond=None)[0]
    gram = design.T @ design
    if ridge:
        gram[np.diag_indices_from(gram)] += ridge
    rhs = design.T @ targets
    try:
        factor = scipy.linalg.cho_factor(gram, lower=True, check_finite=False)
        return scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    except np.linalg.LinAlgError:
        if ridge:
            raise
        return np.linalg.lstsq(design, targets, rcond=None)[0]
