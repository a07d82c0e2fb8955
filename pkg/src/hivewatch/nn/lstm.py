"""One LSTM layer: parameters, batched forward pass, and exact backward pass.

Everything is float64. The four gates are packed along the leading axis of
`W`, `U`, and `b` in the fixed order [input, forget, cell-candidate,
output], so all three have leading dimension 4*hidden_size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit as _sigmoid

from ..errors import ShapeMismatch


@dataclass
class LSTMLayerParams:
    """Weights of a single LSTM layer."""

    input_size: int
    hidden_size: int
    W: np.ndarray  # input weights, (4*hs, input_size)
    U: np.ndarray  # recurrent weights, (4*hs, hs)
    b: np.ndarray  # bias, (4*hs,)

    def __post_init__(self) -> None:
        hs, d = self.hidden_size, self.input_size
        self.W = np.asarray(self.W, dtype=np.float64)
        self.U = np.asarray(self.U, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        for name, shape in (("W", (4 * hs, d)), ("U", (4 * hs, hs)), ("b", (4 * hs,))):
            arr = getattr(self, name)
            if arr.shape != shape:
                raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")


def init_layer(input_size: int, hidden_size: int, rng: np.random.Generator) -> LSTMLayerParams:
    """Fresh layer: weights uniform on [-1/sqrt(hs), +1/sqrt(hs)], biases
    zero except the forget gate's, which starts at 1.0 so memory is open.

    Draw order is fixed (W then U) so a seeded generator reproduces the
    layer bit for bit.
    """
    k = 1.0 / np.sqrt(hidden_size)
    W = rng.uniform(-k, k, size=(4 * hidden_size, input_size))
    U = rng.uniform(-k, k, size=(4 * hidden_size, hidden_size))
    b = np.zeros(4 * hidden_size)
    b[hidden_size : 2 * hidden_size] = 1.0
    return LSTMLayerParams(input_size, hidden_size, W, U, b)


@dataclass
class LSTMCache:
    """Forward-pass intermediates needed by the backward pass."""

    X: np.ndarray  # inputs, (T, B, D)
    H: np.ndarray  # hidden states, (T, B, hs)
    I: np.ndarray  # input-gate activations
    F: np.ndarray  # forget-gate activations
    G: np.ndarray  # cell candidates
    O: np.ndarray  # output-gate activations
    C: np.ndarray  # cell states
    TC: np.ndarray  # tanh of cell states
    h0: np.ndarray  # initial hidden state, (B, hs)
    c0: np.ndarray  # initial cell state, (B, hs)


def lstm_forward(
    params: LSTMLayerParams,
    X: np.ndarray,
    h0: np.ndarray | None = None,
    c0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, LSTMCache]:
    """Run the layer over a (T, B, input_size) batch of sequences.

    Returns the hidden-state sequence (T, B, hs), the final hidden and
    cell states (B, hs), and the cache `lstm_backward` consumes.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != params.input_size:
        raise ShapeMismatch(
            f"input shape {X.shape} incompatible with input_size {params.input_size}"
        )
    T, B, _ = X.shape
    hs = params.hidden_size
    h = np.zeros((B, hs)) if h0 is None else np.array(h0, dtype=np.float64)
    c = np.zeros((B, hs)) if c0 is None else np.array(c0, dtype=np.float64)
    h0_saved, c0_saved = h.copy(), c.copy()

    # Input contributions do not depend on the recurrence: one big matmul.
    XW = (X.reshape(T * B, -1) @ params.W.T).reshape(T, B, 4 * hs)

    I = np.empty((T, B, hs))
    F = np.empty((T, B, hs))
    G = np.empty((T, B, hs))
    O = np.empty((T, B, hs))
    C = np.empty((T, B, hs))
    TC = np.empty((T, B, hs))
    H = np.empty((T, B, hs))
    for t in range(T):
        z = XW[t] + h @ params.U.T + params.b
        i = _sigmoid(z[:, :hs])
        f = _sigmoid(z[:, hs : 2 * hs])
        g = np.tanh(z[:, 2 * hs : 3 * hs])
        o = _sigmoid(z[:, 3 * hs :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        I[t], F[t], G[t], O[t] = i, f, g, o
        C[t], TC[t], H[t] = c, tc, h

    cache = LSTMCache(X=X, H=H, I=I, F=F, G=G, O=O, C=C, TC=TC, h0=h0_saved, c0=c0_saved)
    return H, h.copy(), c.copy(), cache


def lstm_backward(
    params: LSTMLayerParams,
    cache: LSTMCache,
    dH: np.ndarray | None,
    dh_final: np.ndarray | None = None,
    dc_final: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict[str, np.ndarray]]:
    """Backpropagation through time over one layer.

    `dH` is the loss gradient with respect to every emitted hidden state
    (None for no per-step gradient); `dh_final` / `dc_final` add gradient
    arriving at the final states from outside the sequence. Returns
    (dX, dh0, dc0, grads) with grads keyed "W", "U", "b".
    """
    X, H, I, F, G, O, C, TC = (
        cache.X, cache.H, cache.I, cache.F, cache.G, cache.O, cache.C, cache.TC,
    )
    T, B, _ = X.shape
    hs = params.hidden_size

    dh_next = np.zeros((B, hs)) if dh_final is None else np.asarray(dh_final, dtype=np.float64)
    dc_next = np.zeros((B, hs)) if dc_final is None else np.asarray(dc_final, dtype=np.float64)
    dZ = np.empty((T, B, 4 * hs))
    for t in reversed(range(T)):
        dh = dh_next if dH is None else dH[t] + dh_next
        c_prev = C[t - 1] if t > 0 else cache.c0
        do = dh * TC[t]
        dc = dh * O[t] * (1.0 - TC[t] ** 2) + dc_next
        dZ[t, :, :hs] = (dc * G[t]) * I[t] * (1.0 - I[t])
        dZ[t, :, hs : 2 * hs] = (dc * c_prev) * F[t] * (1.0 - F[t])
        dZ[t, :, 2 * hs : 3 * hs] = (dc * I[t]) * (1.0 - G[t] ** 2)
        dZ[t, :, 3 * hs :] = do * O[t] * (1.0 - O[t])
        dh_next = dZ[t] @ params.U
        dc_next = dc * F[t]

    # Weight gradients batch over all (t, b) pairs at once.
    flat_dZ = dZ.reshape(T * B, 4 * hs)
    H_prev = np.concatenate([cache.h0[None], H[:-1]], axis=0)
    grads = {
        "W": flat_dZ.T @ X.reshape(T * B, -1),
        "U": flat_dZ.T @ H_prev.reshape(T * B, hs),
        "b": flat_dZ.sum(axis=0),
    }
    dX = (flat_dZ @ params.W).reshape(X.shape)
    return dX, dh_next, dc_next, grads
