# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrent-cell and ARMA-residual kernels.

Same signatures and results (to rounding) as ``_pykernels``.  The
time-step loops call BLAS ``dgemm`` from scipy directly and fuse the
elementwise gate arithmetic into C loops; the transcendentals stay one
in-place numpy ``tanh`` per step, whose SIMD code beats scalar libm.
Row-major matrices are handed to the column-major BLAS as their
transposes, so ``C = A @ B.T`` becomes ``C.T = B @ A.T``.
"""

import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef void mm_nt(int M, int N, int K, double* A, int lda, double* B, int ldb,
                double beta, double* C, int ldc) noexcept nogil:
    # C (M x N) = A (M x K) @ B (N x K).T + beta C
    cdef char ta = b'T'
    cdef char tb = b'N'
    cdef double one = 1.0
    dgemm(&ta, &tb, &N, &M, &K, &one, B, &ldb, A, &lda, &beta, C, &ldc)


cdef void mm_nn(int M, int N, int K, double* A, int lda, double* B, int ldb,
                double beta, double* C, int ldc) noexcept nogil:
    # C (M x N) = A (M x K) @ B (K x N) + beta C
    cdef char ta = b'N'
    cdef char tb = b'N'
    cdef double one = 1.0
    dgemm(&ta, &tb, &N, &M, &K, &one, B, &ldb, A, &lda, &beta, C, &ldc)


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def gru_sequence_forward(W_r, W_u, W_h, b_r, b_u, b_h, X, h0):
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], F = X.shape[2]
    cdef Py_ssize_t H = W_r.shape[0]
    Xt = _c(np.asarray(X).transpose(1, 0, 2))
    Wx = np.vstack([W_r[:, H:], W_u[:, H:], W_h[:, H:]])
    xproj_a = _c((Xt.reshape(T * B, F) @ Wx.T).reshape(T, B, 3 * H)
                 + np.concatenate([b_r, b_u, b_h]))
    hprev_a = np.empty((T, B, H))
    gates_a = np.empty((T, B, 3 * H))
    Hs = np.empty((B, T, H))
    if T == 0 or B == 0 or H == 0:
        return Hs, {"hprev": hprev_a, "gates": gates_a}
    cdef double[:, ::1] Wru = _c(np.vstack([W_r[:, :H], W_u[:, :H]]))
    cdef double[:, ::1] Whh = _c(W_h[:, :H])
    cdef double[:, :, ::1] xproj = xproj_a
    cdef double[:, :, ::1] hprev = hprev_a
    cdef double[:, :, ::1] gates = gates_a
    cdef double[:, ::1] h = _c(h0).copy()
    pre_a = np.empty((B, 2 * H))
    cand_a = np.empty((B, H))
    cdef double[:, ::1] pre = pre_a
    cdef double[:, ::1] rh = np.empty((B, H))
    cdef double[:, ::1] cand = cand_a
    cdef Py_ssize_t t, b, j
    cdef double u, c
    for t in range(T):
        hprev[t, :, :] = h
        mm_nt(B, 2 * H, H, &h[0, 0], H, &Wru[0, 0], H, 0.0, &pre[0, 0], 2 * H)
        for b in range(B):
            for j in range(2 * H):
                pre[b, j] = 0.5 * (pre[b, j] + xproj[t, b, j])
        np.tanh(pre_a, out=pre_a)
        for b in range(B):
            for j in range(2 * H):
                gates[t, b, j] = 0.5 * (1.0 + pre[b, j])
            for j in range(H):
                rh[b, j] = gates[t, b, j] * h[b, j]
        mm_nt(B, H, H, &rh[0, 0], H, &Whh[0, 0], H, 0.0, &cand[0, 0], H)
        for b in range(B):
            for j in range(H):
                cand[b, j] = cand[b, j] + xproj[t, b, 2 * H + j]
        np.tanh(cand_a, out=cand_a)
        for b in range(B):
            for j in range(H):
                c = cand[b, j]
                u = gates[t, b, H + j]
                gates[t, b, 2 * H + j] = c
                h[b, j] = h[b, j] + u * (c - h[b, j])
    Hs[:, :-1] = hprev_a[1:].transpose(1, 0, 2)
    Hs[:, -1] = np.asarray(h)
    return Hs, {"hprev": hprev_a, "gates": gates_a}


def gru_sequence_backward(W_r, W_u, W_h, X, cache, dHs):
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], F = X.shape[2]
    cdef Py_ssize_t H = W_r.shape[0]
    hprev_a = _c(cache["hprev"])
    gates_a = _c(cache["gates"])
    da_a = np.zeros((T, B, 3 * H))
    dh_a = np.zeros((B, H))
    cdef double[:, ::1] Wru = _c(np.vstack([W_r[:, :H], W_u[:, :H]]))
    cdef double[:, ::1] Whh = _c(W_h[:, :H])
    cdef double[:, :, ::1] hprev = hprev_a
    cdef double[:, :, ::1] gates = gates_a
    cdef double[:, :, ::1] dH = _c(dHs)
    cdef double[:, :, ::1] da = da_a
    cdef double[:, ::1] dh = dh_a
    cdef double[:, ::1] drh = np.empty((B, H))
    cdef Py_ssize_t t, b, j
    cdef double r, u, c, hv, g
    if T and B and H:
        with nogil:
            for t in range(T - 1, -1, -1):
                for b in range(B):
                    for j in range(H):
                        dh[b, j] += dH[b, t, j]
                        u = gates[t, b, H + j]
                        c = gates[t, b, 2 * H + j]
                        da[t, b, 2 * H + j] = dh[b, j] * u * (1.0 - c * c)
                mm_nn(B, H, H, &da[t, 0, 2 * H], 3 * H, &Whh[0, 0], H, 0.0, &drh[0, 0], H)
                for b in range(B):
                    for j in range(H):
                        r = gates[t, b, j]
                        u = gates[t, b, H + j]
                        c = gates[t, b, 2 * H + j]
                        hv = hprev[t, b, j]
                        g = dh[b, j]
                        da[t, b, j] = drh[b, j] * hv * r * (1.0 - r)
                        da[t, b, H + j] = g * (c - hv) * u * (1.0 - u)
                        dh[b, j] = g * (1.0 - u) + drh[b, j] * r
                mm_nn(B, H, 2 * H, &da[t, 0, 0], 3 * H, &Wru[0, 0], H, 1.0, &dh[0, 0], H)

    Xt = _c(np.asarray(X).transpose(1, 0, 2)).reshape(T * B, F)
    da2 = da_a.reshape(T * B, 3 * H)
    hp2 = hprev_a.reshape(T * B, H)
    rh2 = gates_a[:, :, :H].reshape(T * B, H) * hp2
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
    return grads, np.ascontiguousarray(dX), dh_a


def lstm_sequence_forward(W_i, W_f, W_o, W_g, b_i, b_f, b_o, b_g, X, h0, c0):
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], F = X.shape[2]
    cdef Py_ssize_t H = W_i.shape[0]
    W = np.vstack([W_i, W_f, W_o, W_g])
    bias = np.concatenate([b_i, b_f, b_o, b_g])
    Xt = _c(np.asarray(X).transpose(1, 0, 2))
    xproj_a = _c((Xt.reshape(T * B, F) @ W[:, H:].T).reshape(T, B, 4 * H) + bias)
    hprev_a = np.empty((T, B, H))
    cprev_a = np.empty((T, B, H))
    gates_a = np.empty((T, B, 4 * H))
    tanhc_a = np.empty((T, B, H))
    Hs = np.empty((B, T, H))
    cache = {"hprev": hprev_a, "cprev": cprev_a, "gates": gates_a, "tanh_c": tanhc_a}
    if T == 0 or B == 0 or H == 0:
        return Hs, cache
    cdef double[:, ::1] Wh = _c(W[:, :H])
    cdef double[:, :, ::1] xproj = xproj_a
    cdef double[:, :, ::1] hprev = hprev_a
    cdef double[:, :, ::1] cprev = cprev_a
    cdef double[:, :, ::1] gates = gates_a
    cdef double[:, :, ::1] tanhc = tanhc_a
    cdef double[:, ::1] h = _c(h0).copy()
    cdef double[:, ::1] cs = _c(c0).copy()
    pre_a = np.empty((B, 4 * H))
    cnew_a = np.empty((B, H))
    cdef double[:, ::1] pre = pre_a
    cdef double[:, ::1] cnew = cnew_a
    cdef Py_ssize_t t, b, j
    cdef double gi, gf, go, gg
    for t in range(T):
        hprev[t, :, :] = h
        cprev[t, :, :] = cs
        mm_nt(B, 4 * H, H, &h[0, 0], H, &Wh[0, 0], H, 0.0, &pre[0, 0], 4 * H)
        for b in range(B):
            for j in range(3 * H):
                pre[b, j] = 0.5 * (pre[b, j] + xproj[t, b, j])
            for j in range(3 * H, 4 * H):
                pre[b, j] = pre[b, j] + xproj[t, b, j]
        np.tanh(pre_a, out=pre_a)
        for b in range(B):
            for j in range(3 * H):
                gates[t, b, j] = 0.5 * (1.0 + pre[b, j])
            for j in range(H):
                gi = gates[t, b, j]
                gf = gates[t, b, H + j]
                gg = pre[b, 3 * H + j]
                gates[t, b, 3 * H + j] = gg
                cs[b, j] = gf * cs[b, j] + gi * gg
                cnew[b, j] = cs[b, j]
        np.tanh(cnew_a, out=cnew_a)
        for b in range(B):
            for j in range(H):
                go = gates[t, b, 2 * H + j]
                tanhc[t, b, j] = cnew[b, j]
                h[b, j] = go * cnew[b, j]
    Hs[:, :-1] = hprev_a[1:].transpose(1, 0, 2)
    Hs[:, -1] = np.asarray(h)
    return Hs, cache


def lstm_sequence_backward(W_i, W_f, W_o, W_g, X, cache, dHs):
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], F = X.shape[2]
    cdef Py_ssize_t H = W_i.shape[0]
    W = np.vstack([W_i, W_f, W_o, W_g])
    hprev_a = _c(cache["hprev"])
    da_a = np.zeros((T, B, 4 * H))
    dh_a = np.zeros((B, H))
    dc_a = np.zeros((B, H))
    cdef double[:, ::1] Wh = _c(W[:, :H])
    cdef double[:, :, ::1] cprev = _c(cache["cprev"])
    cdef double[:, :, ::1] gates = _c(cache["gates"])
    cdef double[:, :, ::1] tanhc = _c(cache["tanh_c"])
    cdef double[:, :, ::1] dH = _c(dHs)
    cdef double[:, :, ::1] da = da_a
    cdef double[:, ::1] dh = dh_a
    cdef double[:, ::1] dc = dc_a
    cdef Py_ssize_t t, b, j
    cdef double gi, gf, go, gg, tc, g, d
    if T and B and H:
        with nogil:
            for t in range(T - 1, -1, -1):
                for b in range(B):
                    for j in range(H):
                        g = dh[b, j] + dH[b, t, j]
                        gi = gates[t, b, j]
                        gf = gates[t, b, H + j]
                        go = gates[t, b, 2 * H + j]
                        gg = gates[t, b, 3 * H + j]
                        tc = tanhc[t, b, j]
                        d = dc[b, j] + g * go * (1.0 - tc * tc)
                        da[t, b, j] = d * gg * gi * (1.0 - gi)
                        da[t, b, H + j] = d * cprev[t, b, j] * gf * (1.0 - gf)
                        da[t, b, 2 * H + j] = g * tc * go * (1.0 - go)
                        da[t, b, 3 * H + j] = d * gi * (1.0 - gg * gg)
                        dc[b, j] = d * gf
                mm_nn(B, H, 4 * H, &da[t, 0, 0], 4 * H, &Wh[0, 0], H, 0.0, &dh[0, 0], H)

    Xt = _c(np.asarray(X).transpose(1, 0, 2)).reshape(T * B, F)
    da2 = da_a.reshape(T * B, 4 * H)
    Z = np.hstack([hprev_a.reshape(T * B, H), Xt])
    dW = da2.T @ Z
    db = da2.sum(axis=0)
    grads = {}
    for k, name in enumerate("ifog"):
        grads["W_" + name] = dW[k * H:(k + 1) * H].copy()
        grads["b_" + name] = db[k * H:(k + 1) * H].copy()
    dX = (da2 @ W[:, H:]).reshape(T, B, F).transpose(1, 0, 2)
    return grads, np.ascontiguousarray(dX), dh_a, dc_a


def css_residuals(w, phi, theta, double intercept, Py_ssize_t start, xreg=None,
                  double beta=0.0):
    cdef double[::1] wv = _c(w)
    cdef double[::1] ph = _c(phi)
    cdef double[::1] th = _c(theta)
    cdef Py_ssize_t n = wv.shape[0], p = ph.shape[0], q = th.shape[0]
    e_a = np.zeros(n)
    cdef double[::1] e = e_a
    cdef double[::1] xv
    cdef bint use_x = xreg is not None and beta != 0.0
    if use_x:
        xv = _c(xreg)
    cdef Py_ssize_t t, i
    cdef double v
    with nogil:
        for t in range(start, n):
            v = wv[t] - intercept
            for i in range(p):
                v -= ph[i] * wv[t - 1 - i]
            if use_x:
                v -= beta * xv[t]
            for i in range(q):
                if t - 1 - i >= start:
                    v -= th[i] * e[t - 1 - i]
            e[t] = v
    return e_a
