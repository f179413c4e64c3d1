"""LSTM recurrence with exact backpropagation through time.

Gate layout in the stacked weight matrices is [input, forget, candidate,
output].  The recurrence starts from zero hidden and cell state; the final
hidden state feeds the affine head.  Everything is float64 and batched:
inputs are (B, W, D).
"""

from __future__ import annotations

import numpy as np

from .params import HeadKind, LstmSpec, ModelParameters, param_views
from .common import (
    head_backward,
    head_forward,
    head_loss,
    sigmoid,
)


def _gate_slices(h: int) -> tuple[slice, slice, slice, slice]:
    return (slice(0, h), slice(h, 2 * h), slice(2 * h, 3 * h), slice(3 * h, 4 * h))


def _run_recurrence(model: ModelParameters, x: np.ndarray):
    """Run the recurrence over all steps; returns final state plus caches."""
    spec: LstmSpec = model.spec
    h_dim = spec.hidden_dim
    b, w, _ = x.shape
    p = model.unpack()
    si, sf, sg, so = _gate_slices(h_dim)

    # Input contributions for every step at once; the recurrent term is added
    # step by step.
    pre_x = x @ p["w_x"].T + p["b"]

    gates = np.empty((w, b, 4 * h_dim))
    cells = np.empty((w, b, h_dim))
    tanh_cells = np.empty((w, b, h_dim))
    hiddens = np.empty((w, b, h_dim))

    h = np.zeros((b, h_dim))
    c = np.zeros((b, h_dim))
    for t in range(w):
        z = pre_x[:, t, :] + h @ p["w_h"].T
        i_g = sigmoid(z[:, si])
        f_g = sigmoid(z[:, sf])
        g_g = np.tanh(z[:, sg])
        o_g = sigmoid(z[:, so])
        c = f_g * c + i_g * g_g
        tc = np.tanh(c)
        h = o_g * tc
        gates[t, :, si] = i_g
        gates[t, :, sf] = f_g
        gates[t, :, sg] = g_g
        gates[t, :, so] = o_g
        cells[t] = c
        tanh_cells[t] = tc
        hiddens[t] = h
    return h, (gates, cells, tanh_cells, hiddens)


def forward(model: ModelParameters, x: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch of windows.

    Accepts (W, D) or (B, W, D); returns (K,) / (B, K) for the softmax head
    and (1,) / (B, 1) for the sigmoid head.
    """
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    _check_input(model, x)
    h_final, _ = _run_recurrence(model, x)
    p = model.unpack()
    probs = head_forward(h_final, p["w_head"], p["b_head"], model.head)
    return probs[0] if squeeze else probs


def loss_and_grad(
    model: ModelParameters, x: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its exact gradient as a flat vector."""
    _check_input(model, x)
    spec: LstmSpec = model.spec
    h_dim = spec.hidden_dim
    b, w, _ = x.shape
    p = model.unpack()
    si, sf, sg, so = _gate_slices(h_dim)

    h_final, (gates, cells, tanh_cells, hiddens) = _run_recurrence(model, x)
    logits = h_final @ p["w_head"].T + p["b_head"]
    loss, d_logits = head_loss(logits, targets, model.head)

    grad_flat = np.zeros_like(model.values)
    g = param_views(spec, grad_flat)
    dh = head_backward(d_logits, h_final, p["w_head"], g["w_head"], g["b_head"])

    dz_all = np.empty((w, b, 4 * h_dim))
    dc = np.zeros((b, h_dim))
    for t in range(w - 1, -1, -1):
        i_g = gates[t, :, si]
        f_g = gates[t, :, sf]
        g_g = gates[t, :, sg]
        o_g = gates[t, :, so]
        tc = tanh_cells[t]
        c_prev = cells[t - 1] if t > 0 else np.zeros((b, h_dim))
        h_prev = hiddens[t - 1] if t > 0 else np.zeros((b, h_dim))

        d_o = dh * tc
        dc = dc + dh * o_g * (1.0 - tc * tc)
        d_i = dc * g_g
        d_g = dc * i_g
        d_f = dc * c_prev

        dz = dz_all[t]
        dz[:, si] = d_i * i_g * (1.0 - i_g)
        dz[:, sf] = d_f * f_g * (1.0 - f_g)
        dz[:, sg] = d_g * (1.0 - g_g * g_g)
        dz[:, so] = d_o * o_g * (1.0 - o_g)

        g["w_h"] += dz.T @ h_prev
        dh = dz @ p["w_h"]
        dc = dc * f_g

    g["w_x"] += np.einsum("wbh,bwd->hd", dz_all, x)
    g["b"] += dz_all.sum(axis=(0, 1))
    return loss, grad_flat


def _check_input(model: ModelParameters, x: np.ndarray) -> None:
    if x.ndim != 3 or x.shape[2] != model.spec.input_dim:
        raise ValueError(
            f"expected input (..., W, {model.spec.input_dim}), got shape {x.shape}"
        )
