"""Minimal differentiable numeric core.

Fixed operators only: affine layers, a batched LSTM sequence aggregator,
binary cross-entropy on logits, and an adaptive-moment optimizer with
decoupled weight decay and a geometric learning-rate schedule. All values are
float64 numpy arrays (matrices are 2-D, row-major); every backward pass is
hand-derived and checked against central finite differences in the tests.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import PersistenceError, ShapeError, TrainingError

PARAMS_FORMAT_ID = "telegraph-params/1"


class Param:
    """A named matrix with a matching gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value: np.ndarray):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        if self.value.ndim != 2:
            raise ShapeError(f"param {name} must be 2-D, got shape {self.value.shape}")
        if not np.all(np.isfinite(self.value)):
            raise ValueError(f"param {name} contains non-finite values")
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]


class ParamSet:
    """Ordered named collection of parameters."""

    def __init__(self):
        self._params: dict[str, Param] = {}

    def add(self, name: str, value: np.ndarray) -> Param:
        if name in self._params:
            raise ValueError(f"duplicate param name {name!r}")
        p = Param(name, value)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def count_values(self) -> int:
        return sum(p.value.size for p in self._params.values())


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    """Uniform in +-sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# Operators
# ---------------------------------------------------------------------------


class Affine:
    """y = x W + b with exact analytic gradients for W, b and x.

    forward returns (y, ctx); ctx goes back into backward, so one instance
    can serve several forward calls per pass (contexts are independent).
    """

    def __init__(self, params: ParamSet, name: str, in_dim: int, out_dim: int,
                 rng: Optional[np.random.Generator] = None, use_bias: bool = True):
        init = (
            glorot_uniform(rng, in_dim, out_dim)
            if rng is not None
            else np.zeros((in_dim, out_dim))
        )
        self.weight = params.add(f"{name}.W", init)
        self.bias = params.add(f"{name}.b", np.zeros((1, out_dim))) if use_bias else None

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.weight.shape[0]:
            raise ShapeError(
                f"affine expects (n, {self.weight.shape[0]}), got {x.shape}"
            )
        y = x @ self.weight.value
        if self.bias is not None:
            y = y + self.bias.value
        return y, x

    def backward(self, ctx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        x = ctx
        dy = np.asarray(dy, dtype=np.float64)
        if dy.shape != (x.shape[0], self.weight.shape[1]):
            raise ShapeError(
                f"affine backward expects {(x.shape[0], self.weight.shape[1])}, got {dy.shape}"
            )
        self.weight.grad += x.T @ dy
        if self.bias is not None:
            self.bias.grad += dy.sum(axis=0, keepdims=True)
        return dy @ self.weight.value.T


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class LSTM:
    """Standard LSTM cell unrolled over neighbor sequences, batched.

    Gate layout in the packed weight matrices is [input, forget, output,
    candidate]. forward_batch consumes (batch, steps, in_dim) and returns the
    final hidden state (batch, hidden) plus a context for backward_batch,
    which is exact backpropagation through time. An empty sequence (steps=0)
    yields the zero vector so isolated nodes still classify.
    """

    def __init__(self, params: ParamSet, name: str, in_dim: int, hidden_dim: int,
                 rng: Optional[np.random.Generator] = None):
        self.in_dim = in_dim
        self.hidden_dim = hidden_dim
        if rng is not None:
            wx = glorot_uniform(rng, in_dim, hidden_dim, shape=(in_dim, 4 * hidden_dim))
            wh = glorot_uniform(rng, hidden_dim, hidden_dim, shape=(hidden_dim, 4 * hidden_dim))
        else:
            wx = np.zeros((in_dim, 4 * hidden_dim))
            wh = np.zeros((hidden_dim, 4 * hidden_dim))
        self.wx = params.add(f"{name}.Wx", wx)
        self.wh = params.add(f"{name}.Wh", wh)
        self.bias = params.add(f"{name}.b", np.zeros((1, 4 * hidden_dim)))

    def forward_batch(self, x: np.ndarray) -> tuple[np.ndarray, dict]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.in_dim:
            raise ShapeError(f"lstm expects (batch, steps, {self.in_dim}), got {x.shape}")
        batch, steps, _ = x.shape
        hdim = self.hidden_dim
        h = np.zeros((batch, hdim))
        c = np.zeros((batch, hdim))
        ctx: dict = {"x": x, "steps": []}
        for t in range(steps):
            z = x[:, t, :] @ self.wx.value + h @ self.wh.value + self.bias.value
            i = _sigmoid(z[:, :hdim])
            f = _sigmoid(z[:, hdim : 2 * hdim])
            o = _sigmoid(z[:, 2 * hdim : 3 * hdim])
            g = np.tanh(z[:, 3 * hdim :])
            c_next = f * c + i * g
            tanh_c = np.tanh(c_next)
            h_next = o * tanh_c
            ctx["steps"].append((h, c, i, f, o, g, tanh_c))
            h, c = h_next, c_next
        return h, ctx

    def backward_batch(self, ctx: dict, dh: np.ndarray) -> np.ndarray:
        x = ctx["x"]
        batch, steps, _ = x.shape
        hdim = self.hidden_dim
        dh = np.asarray(dh, dtype=np.float64)
        if dh.shape != (batch, hdim):
            raise ShapeError(f"lstm backward expects {(batch, hdim)}, got {dh.shape}")
        dx = np.zeros_like(x)
        dc = np.zeros((batch, hdim))
        for t in range(steps - 1, -1, -1):
            h_prev, c_prev, i, f, o, g, tanh_c = ctx["steps"][t]
            do = dh * tanh_c
            dc = dc + dh * o * (1.0 - tanh_c**2)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dz = np.concatenate(
                [
                    di * i * (1.0 - i),
                    df * f * (1.0 - f),
                    do * o * (1.0 - o),
                    dg * (1.0 - g**2),
                ],
                axis=1,
            )
            self.wx.grad += x[:, t, :].T @ dz
            self.wh.grad += h_prev.T @ dz
            self.bias.grad += dz.sum(axis=0, keepdims=True)
            dx[:, t, :] = dz @ self.wx.value.T
            dh = dz @ self.wh.value.T
            dc = dc * f
        return dx

    def aggregate(self, sequence: np.ndarray) -> tuple[np.ndarray, dict]:
        """Single-sequence aggregation: (steps, in_dim) -> ((hidden,), ctx)."""
        sequence = np.asarray(sequence, dtype=np.float64)
        if sequence.size == 0:
            sequence = sequence.reshape(0, self.in_dim)
        h, ctx = self.forward_batch(sequence[None, :, :])
        return h[0], ctx

    def aggregate_backward(self, ctx: dict, dh: np.ndarray) -> np.ndarray:
        return self.backward_batch(ctx, np.asarray(dh)[None, :])[0]


def bce_with_logits(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy in the numerically stable form.

    Returns (loss, gradient wrt logits); gradient per logit is
    (sigmoid(z) - y) / n.
    """
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if z.size == 0:
        raise ValueError("empty input")
    if z.shape != y.shape:
        raise ShapeError(f"logits {z.shape} vs labels {y.shape}")
    losses = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    grad = (_sigmoid(z) - y) / z.size
    return float(losses.mean()), grad


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


def learning_rate(step: int, base_lr: float = 1e-3, end_lr: float = 1e-5, horizon: int = 100) -> float:
    """Geometric interpolation from base_lr to end_lr, constant after horizon.

    Hits both endpoints exactly: step 0 -> base_lr, step >= horizon -> end_lr.
    """
    if step <= 0:
        return base_lr
    if step >= horizon:
        return end_lr
    return base_lr * (end_lr / base_lr) ** (step / horizon)


@dataclass
class OptimizerState:
    """Adaptive moments with decoupled weight decay (beta1/beta2/eps defaults)."""

    base_lr: float = 1e-3
    end_lr: float = 1e-5
    schedule_horizon: int = 100
    weight_decay: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    moments: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)

    def current_lr(self) -> float:
        return learning_rate(self.step_count, self.base_lr, self.end_lr, self.schedule_horizon)


def optimizer_step(state: OptimizerState, params: ParamSet) -> None:
    """One adaptive-moment update with decoupled weight decay.

    theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
    """
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            bad = int(np.sum(~np.isfinite(p.grad)))
            raise TrainingError(
                f"non-finite gradient in {p.name} ({bad} of {p.grad.size} entries); step aborted"
            )
    lr = state.current_lr()
    t = state.step_count + 1
    bias1 = 1.0 - state.beta1**t
    bias2 = 1.0 - state.beta2**t
    for p in params:
        m, v = state.moments.get(p.name, (np.zeros_like(p.value), np.zeros_like(p.value)))
        m = state.beta1 * m + (1.0 - state.beta1) * p.grad
        v = state.beta2 * v + (1.0 - state.beta2) * p.grad**2
        state.moments[p.name] = (m, v)
        update = (m / bias1) / (np.sqrt(v / bias2) + state.eps)
        p.value -= lr * (update + state.weight_decay * p.value)
    state.step_count = t


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    per_param: dict[str, float]
    step: float

    @property
    def max_relative_error(self) -> float:
        return max(self.per_param.values()) if self.per_param else 0.0

    def passed(self, tolerance: float) -> bool:
        return self.max_relative_error <= tolerance


def grad_check(
    function: Callable[[], float],
    params: ParamSet,
    step: float = 1e-5,
    atol: float = 1e-8,
    max_entries_per_param: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> GradCheckReport:
    """Central finite differences vs analytic gradients, per parameter.

    ``function`` must be deterministic and scalar-valued, and must accumulate
    analytic gradients into ``params`` when called. Relative error per entry
    is |a - n| / max(|a|, |n|). Entries agreeing within ``atol`` count as
    exact: central differences measure a derivative no finer than
    eps_machine * |loss| / step, so near-zero gradients below that floor
    would otherwise report pure measurement noise.
    """
    params.zero_grads()
    function()
    analytic = {p.name: p.grad.copy() for p in params}
    report: dict[str, float] = {}
    for p in params:
        flat = p.value.reshape(-1)
        indices = np.arange(flat.size)
        if max_entries_per_param is not None and flat.size > max_entries_per_param:
            sampler = rng if rng is not None else np.random.default_rng(0)
            indices = sampler.choice(flat.size, size=max_entries_per_param, replace=False)
        worst = 0.0
        for idx in indices:
            original = flat[idx]
            flat[idx] = original + step
            loss_plus = function()
            flat[idx] = original - step
            loss_minus = function()
            flat[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            a = analytic[p.name].reshape(-1)[idx]
            difference = abs(a - numeric)
            if difference <= atol:
                continue
            worst = max(worst, difference / max(abs(a), abs(numeric)))
        report[p.name] = worst
    params.zero_grads()
    function()  # leave gradients consistent with the unperturbed parameters
    return GradCheckReport(per_param=report, step=step)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_params(params: ParamSet, path, config: Optional[dict] = None) -> None:
    """Versioned checkpoint: named matrices with shapes, canonical order."""
    payload = {
        "format": PARAMS_FORMAT_ID,
        "config": config or {},
        "params": {
            name: {
                "shape": list(params[name].shape),
                "values": params[name].value.reshape(-1).tolist(),
            }
            for name in sorted(params.names())
        },
    }
    try:
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, separators=(",", ":"), sort_keys=True),
            encoding="utf-8",
        )
    except OSError as exc:
        raise PersistenceError(path, exc) from exc


def load_params(path) -> tuple[ParamSet, dict]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise PersistenceError(path, exc) from exc
    if payload.get("format") != PARAMS_FORMAT_ID:
        raise PersistenceError(path, f"unknown checkpoint format {payload.get('format')!r}")
    params = ParamSet()
    for name, entry in payload["params"].items():
        shape = tuple(entry["shape"])
        params.add(name, np.asarray(entry["values"], dtype=np.float64).reshape(shape))
    return params, payload.get("config", {})


def assign_params(target: ParamSet, source: ParamSet) -> None:
    """Copy values from a loaded checkpoint into a freshly built model."""
    if sorted(target.names()) != sorted(source.names()):
        raise ValueError("parameter name sets differ")
    for p in target:
        loaded = source[p.name]
        if loaded.shape != p.shape:
            raise ShapeError(f"{p.name}: checkpoint shape {loaded.shape} vs model {p.shape}")
        p.value[...] = loaded.value
