"""Pure numpy implementations of the hot kernels.

These are the reference path; the compiled ``_ckernels`` module provides
drop-in replacements with identical signatures.  Sequences are passed
batch-major ``(B, T, F)`` and processed time-major internally.

GRU weights act on the concatenation ``[h_prev, x]``: the first ``H``
columns of every weight matrix multiply the hidden state.
"""

import numpy as np
from scipy.signal import lfilter


def _sig(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def gru_sequence_forward(W_r, W_u, W_h, b_r, b_u, b_h, X, h0):
    """Run a GRU over ``X`` of shape (B, T, F).

    Returns ``(Hs, cache)`` with ``Hs`` of shape (B, T, H).
    """
    B, T, F = X.shape
    H = W_r.shape[0]
    Xt = np.ascontiguousarray(X.transpose(1, 0, 2))
    Wx = np.vstack([W_r[:, H:], W_u[:, H:], W_h[:, H:]])
    xproj = Xt.reshape(T * B, F) @ Wx.T
    xproj = xproj.reshape(T, B, 3 * H) + np.concatenate([b_r, b_u, b_h])
    Wru_h = np.vstack([W_r[:, :H], W_u[:, :H]])
    Wh_h = W_h[:, :H]

    hprev = np.empty((T, B, H))
    gates = np.empty((T, B, 3 * H))  # r, u, candidate
    h = h0
    for t in range(T):
        hprev[t] = h
        ru = _sig(h @ Wru_h.T + xproj[t, :, :2 * H])
        r = ru[:, :H]
        u = ru[:, H:]
        c = np.tanh((r * h) @ Wh_h.T + xproj[t, :, 2 * H:])
        h = h + u * (c - h)
        gates[t, :, :2 * H] = ru
        gates[t, :, 2 * H:] = c
    Hs = np.empty((B, T, H))
    Hs[:, :-1] = hprev[1:].transpose(1, 0, 2)
    Hs[:, -1] = h
    return Hs, {"hprev": hprev, "gates": gates}


def gru_sequence_backward(W_r, W_u, W_h, X, cache, dHs):
    """Backpropagate ``dHs`` (B, T, H), the loss gradient w.r.t. every
    emitted hidden state, through the unrolled GRU.

    Returns ``(grads, dX, dh0)``.
    """
    B, T, F = X.shape
    H = W_r.shape[0]
    hprev = cache["hprev"]
    gates = cache["gates"]
    Wru_h = np.vstack([W_r[:, :H], W_u[:, :H]])
    Wh_h = W_h[:, :H]
    dHt = dHs.transpose(1, 0, 2)

    da = np.empty((T, B, 3 * H))
    dh = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dh + dHt[t]
        h = hprev[t]
        r = gates[t, :, :H]
        u = gates[t, :, H:2 * H]
        c = gates[t, :, 2 * H:]
        da_c = dh * u * (1.0 - c * c)
        d_rh = da_c @ Wh_h
        da_r = d_rh * h * r * (1.0 - r)
        da_u = dh * (c - h) * u * (1.0 - u)
        da[t, :, :H] = da_r
        da[t, :, H:2 * H] = da_u
        da[t, :, 2 * H:] = da_c
        dh = dh * (1.0 - u) + d_rh * r + da[t, :, :2 * H] @ Wru_h

    Xt = np.ascontiguousarray(X.transpose(1, 0, 2)).reshape(T * B, F)
    da2 = da.reshape(T * B, 3 * H)
    hp2 = hprev.reshape(T * B, H)
    rh2 = gates[:, :, :H].reshape(T * B, H) * hp2
    dWx = da2.T @ Xt
    dWru_h = da2[:, :2 * H].T @ hp2
    dWh_h = da2[:, 2 * H:].T @ rh2
    db = da2.sum(axis=0)
    grads = {
        "W_r": np.hstack([dWru_h[:H], dWx[:H]]),
        "W_u": np.hstack([dWru_h[H:], dWx[H:2 * H]]),
        "W_h": np.hstack([dWh_h, dWx[2 * H:]]),
        "b_r": db[:H].copy(),
        "b_u": db[H:2 * H].copy(),
        "b_h": db[2 * H:].copy(),
    }
    Wx = np.vstack([W_r[:, H:], W_u[:, H:], W_h[:, H:]])
    dX = (da2 @ Wx).reshape(T, B, F).transpose(1, 0, 2)
    return grads, np.ascontiguousarray(dX), dh


def lstm_sequence_forward(W_i, W_f, W_o, W_g, b_i, b_f, b_o, b_g, X, h0, c0):
    B, T, F = X.shape
    H = W_i.shape[0]
    W = np.vstack([W_i, W_f, W_o, W_g])
    b = np.concatenate([b_i, b_f, b_o, b_g])
    Xt = np.ascontiguousarray(X.transpose(1, 0, 2))
    xproj = (Xt.reshape(T * B, F) @ W[:, H:].T).reshape(T, B, 4 * H) + b
    Wh = W[:, :H]

    hprev = np.empty((T, B, H))
    cprev = np.empty((T, B, H))
    gates = np.empty((T, B, 4 * H))  # i, f, o, g
    tanh_c = np.empty((T, B, H))
    h, c = h0, c0
    for t in range(T):
        hprev[t] = h
        cprev[t] = c
        a = h @ Wh.T + xproj[t]
        ifo = _sig(a[:, :3 * H])
        g = np.tanh(a[:, 3 * H:])
        c = ifo[:, H:2 * H] * c + ifo[:, :H] * g
        tc = np.tanh(c)
        h = ifo[:, 2 * H:] * tc
        gates[t, :, :3 * H] = ifo
        gates[t, :, 3 * H:] = g
        tanh_c[t] = tc
    Hs = np.empty((B, T, H))
    Hs[:, :-1] = hprev[1:].transpose(1, 0, 2)
    Hs[:, -1] = h
    return Hs, {"hprev": hprev, "cprev": cprev, "gates": gates, "tanh_c": tanh_c}


def lstm_sequence_backward(W_i, W_f, W_o, W_g, X, cache, dHs):
    B, T, F = X.shape
    H = W_i.shape[0]
    W = np.vstack([W_i, W_f, W_o, W_g])
    Wh = W[:, :H]
    hprev, cprev = cache["hprev"], cache["cprev"]
    gates, tanh_c = cache["gates"], cache["tanh_c"]
    dHt = dHs.transpose(1, 0, 2)

    da = np.empty((T, B, 4 * H))
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dh + dHt[t]
        i = gates[t, :, :H]
        f = gates[t, :, H:2 * H]
        o = gates[t, :, 2 * H:3 * H]
        g = gates[t, :, 3 * H:]
        tc = tanh_c[t]
        dc = dc + dh * o * (1.0 - tc * tc)
        da[t, :, :H] = dc * g * i * (1.0 - i)
        da[t, :, H:2 * H] = dc * cprev[t] * f * (1.0 - f)
        da[t, :, 2 * H:3 * H] = dh * tc * o * (1.0 - o)
        da[t, :, 3 * H:] = dc * i * (1.0 - g * g)
        dc = dc * f
        dh = da[t] @ Wh

    Xt = np.ascontiguousarray(X.transpose(1, 0, 2)).reshape(T * B, F)
    da2 = da.reshape(T * B, 4 * H)
    Z = np.hstack([hprev.reshape(T * B, H), Xt])
    dW = da2.T @ Z
    db = da2.sum(axis=0)
    grads = {}
    for k, name in enumerate("ifog"):
        grads["W_" + name] = dW[k * H:(k + 1) * H].copy()
        grads["b_" + name] = db[k * H:(k + 1) * H].copy()
    dX = (da2 @ W[:, H:]).reshape(T, B, F).transpose(1, 0, 2)
    return grads, np.ascontiguousarray(dX), dh, dc


def css_residuals(w, phi, theta, intercept, start, xreg=None, beta=0.0):
    """One-step innovations of an ARMA(X) recursion.

    ``e[t] = w[t] - c - sum_i phi[i] w[t-1-i] - beta xreg[t] - sum_j theta[j] e[t-1-j]``
    for ``t >= start``; earlier innovations are zero.
    """
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    e = np.zeros(n)
    if start >= n:
        return e
    v = w[start:] - intercept
    for i, ph in enumerate(phi):
        v = v - ph * w[start - 1 - i:n - 1 - i]
    if xreg is not None and beta:
        v = v - beta * np.asarray(xreg, dtype=np.float64)[start:]
    if len(theta):
        v = lfilter([1.0], np.concatenate([[1.0], theta]), v)
    e[start:] = v
    return e
