# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``; same signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expf, log, tanh, tanhf

cnp.import_array()

ctypedef fused real:
    float
    double


cdef inline real _exp(real x) noexcept nogil:
    if real is float:
        return expf(x)
    return exp(x)


cdef inline real _tanh(real x) noexcept nogil:
    if real is float:
        return tanhf(x)
    return tanh(x)


cdef inline real _sig(real x) noexcept nogil:
    cdef real e
    if x >= 0:
        return 1 / (1 + _exp(-x))
    e = _exp(x)
    return e / (1 + e)


def _lstm_fwd(real[:, ::1] pre, real[:, ::1] c_prev, real[:, ::1] h,
              real[:, ::1] c, real[:, ::1] acts):
    cdef Py_ssize_t n = pre.shape[0], H = c_prev.shape[1], i, j
    cdef real x, f, o, g, cc
    with nogil:
        for i in range(n):
            for j in range(H):
                x = _sig(pre[i, j])
                f = _sig(pre[i, H + j])
                o = _sig(pre[i, 2 * H + j])
                g = _tanh(pre[i, 3 * H + j])
                cc = f * c_prev[i, j] + x * g
                acts[i, j] = x
                acts[i, H + j] = f
                acts[i, 2 * H + j] = o
                acts[i, 3 * H + j] = g
                c[i, j] = cc
                h[i, j] = o * _tanh(cc)


def lstm_cell_forward(pre, c_prev):
    pre = np.ascontiguousarray(pre)
    c_prev = np.ascontiguousarray(c_prev, dtype=pre.dtype)
    h = np.empty_like(c_prev)
    c = np.empty_like(c_prev)
    acts = np.empty_like(pre)
    _lstm_fwd(pre, c_prev, h, c, acts)
    return h, c, acts


def _lstm_bwd(real[:, ::1] acts, real[:, ::1] c_prev, real[:, ::1] c,
              real[:, ::1] dh, real[:, ::1] dc, real[:, ::1] dpre, real[:, ::1] dcp):
    cdef Py_ssize_t n = acts.shape[0], H = c_prev.shape[1], i, j
    cdef real x, f, o, g, tc, dct
    with nogil:
        for i in range(n):
            for j in range(H):
                x = acts[i, j]
                f = acts[i, H + j]
                o = acts[i, 2 * H + j]
                g = acts[i, 3 * H + j]
                tc = _tanh(c[i, j])
                dct = dc[i, j] + dh[i, j] * o * (1 - tc * tc)
                dpre[i, j] = dct * g * x * (1 - x)
                dpre[i, H + j] = dct * c_prev[i, j] * f * (1 - f)
                dpre[i, 2 * H + j] = dh[i, j] * tc * o * (1 - o)
                dpre[i, 3 * H + j] = dct * x * (1 - g * g)
                dcp[i, j] = dct * f


def lstm_cell_backward(acts, c_prev, c, dh, dc):
    dt = acts.dtype
    acts = np.ascontiguousarray(acts)
    c_prev = np.ascontiguousarray(c_prev, dtype=dt)
    c = np.ascontiguousarray(c, dtype=dt)
    dh = np.ascontiguousarray(dh, dtype=dt)
    dc = np.ascontiguousarray(dc, dtype=dt)
    dpre = np.empty_like(acts)
    dcp = np.empty_like(c_prev)
    _lstm_bwd(acts, c_prev, c, dh, dc, dpre, dcp)
    return dpre, dcp


def _attend_fwd(real[:, ::1] q, real[:, ::1] cand, const cnp.int64_t[:, ::1] idx,
                real[:, ::1] mix, real[:, ::1] alpha):
    cdef Py_ssize_t N = q.shape[0], D = q.shape[1], C = idx.shape[1]
    cdef Py_ssize_t n, j, d, r
    cdef double s, m, z, a
    with nogil:
        for n in range(N):
            s = 0
            for d in range(D):
                s += q[n, d] * q[n, d]
            alpha[n, 0] = s
            m = s
            for j in range(C):
                r = idx[n, j]
                if r < 0:
                    continue
                s = 0
                for d in range(D):
                    s += q[n, d] * cand[r, d]
                alpha[n, 1 + j] = s
                if s > m:
                    m = s
            z = exp(alpha[n, 0] - m)
            alpha[n, 0] = z
            for j in range(C):
                if idx[n, j] < 0:
                    alpha[n, 1 + j] = 0
                else:
                    a = exp(alpha[n, 1 + j] - m)
                    alpha[n, 1 + j] = a
                    z += a
            for j in range(C + 1):
                alpha[n, j] = alpha[n, j] / z
            a = alpha[n, 0]
            for d in range(D):
                mix[n, d] = a * q[n, d]
            for j in range(C):
                r = idx[n, j]
                if r < 0:
                    continue
                a = alpha[n, 1 + j]
                for d in range(D):
                    mix[n, d] += a * cand[r, d]


def attend_forward(query, cand, idx):
    query = np.ascontiguousarray(query)
    cand = np.ascontiguousarray(cand, dtype=query.dtype)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    mix = np.empty_like(query)
    alpha = np.empty((query.shape[0], idx.shape[1] + 1), dtype=query.dtype)
    if cand.shape[0] == 0:
        cand = np.zeros((1, query.shape[1]), dtype=query.dtype)
    _attend_fwd(query, cand, idx, mix, alpha)
    return mix, alpha


def _attend_bwd(real[:, ::1] q, real[:, ::1] cand, const cnp.int64_t[:, ::1] idx,
                real[:, ::1] alpha, real[:, ::1] dmix, real[:, ::1] dq,
                real[:, ::1] dcand, real[::1] da):
    cdef Py_ssize_t N = q.shape[0], D = q.shape[1], C = idx.shape[1]
    cdef Py_ssize_t n, j, d, r
    cdef double s, tot, de
    with nogil:
        for n in range(N):
            s = 0
            for d in range(D):
                s += dmix[n, d] * q[n, d]
            da[0] = s
            tot = alpha[n, 0] * s
            for j in range(C):
                r = idx[n, j]
                if r < 0:
                    da[1 + j] = 0
                    continue
                s = 0
                for d in range(D):
                    s += dmix[n, d] * cand[r, d]
                da[1 + j] = s
                tot += alpha[n, 1 + j] * s
            # self: logit q.q (query and key) plus value term
            de = alpha[n, 0] * (da[0] - tot)
            for d in range(D):
                dq[n, d] = 2 * de * q[n, d] + alpha[n, 0] * dmix[n, d]
            for j in range(C):
                r = idx[n, j]
                if r < 0:
                    continue
                de = alpha[n, 1 + j] * (da[1 + j] - tot)
                for d in range(D):
                    dq[n, d] += de * cand[r, d]
                    dcand[r, d] += de * q[n, d] + alpha[n, 1 + j] * dmix[n, d]


def attend_backward(query, cand, idx, alpha, dmix):
    dt = query.dtype
    query = np.ascontiguousarray(query)
    cand_c = np.ascontiguousarray(cand, dtype=dt)
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    alpha = np.ascontiguousarray(alpha, dtype=dt)
    dmix = np.ascontiguousarray(dmix, dtype=dt)
    dq = np.empty_like(query)
    dcand = np.zeros_like(cand_c)
    if cand_c.shape[0] == 0:
        cand_c = np.zeros((1, query.shape[1]), dtype=dt)
        dcand_buf = np.zeros_like(cand_c)
    else:
        dcand_buf = dcand
    da = np.empty(idx.shape[1] + 1, dtype=dt)
    _attend_bwd(query, cand_c, idx, alpha, dmix, dq, dcand_buf, da)
    return dq, dcand


def _xent_fwd(real[:, ::1] logits, const cnp.int64_t[::1] targets,
              real[::1] loss, real[:, ::1] probs):
    cdef Py_ssize_t P = logits.shape[0], V = logits.shape[1], p, v
    cdef real m, e
    cdef double z
    cdef real inv
    with nogil:
        for p in range(P):
            m = logits[p, 0]
            for v in range(1, V):
                if logits[p, v] > m:
                    m = logits[p, v]
            z = 0
            for v in range(V):
                e = _exp(logits[p, v] - m)
                probs[p, v] = e
                z += e
            inv = <real>(1.0 / z)
            for v in range(V):
                probs[p, v] = probs[p, v] * inv
            loss[p] = <real>log(z) - (logits[p, targets[p]] - m)


def xent_forward(logits, targets):
    logits = np.ascontiguousarray(logits)
    targets = np.ascontiguousarray(targets, dtype=np.int64)
    loss = np.empty(logits.shape[0], dtype=logits.dtype)
    probs = np.empty_like(logits)
    _xent_fwd(logits, targets, loss, probs)
    return loss, probs


def _xent_bwd(real[:, ::1] probs, const cnp.int64_t[::1] targets,
              real[::1] dloss, real[:, ::1] out):
    cdef Py_ssize_t P = probs.shape[0], V = probs.shape[1], p, v
    cdef real g
    with nogil:
        for p in range(P):
            g = dloss[p]
            for v in range(V):
                out[p, v] = probs[p, v] * g
            out[p, targets[p]] -= g


def xent_backward(probs, targets, dloss):
    probs = np.ascontiguousarray(probs)
    out = np.empty_like(probs)
    _xent_bwd(probs, np.ascontiguousarray(targets, dtype=np.int64),
              np.ascontiguousarray(dloss, dtype=probs.dtype), out)
    return out


def _scatter(real[:, ::1] out, const cnp.int64_t[::1] idx, real[:, ::1] src):
    cdef Py_ssize_t n = idx.shape[0], D = src.shape[1], i, d, r
    with nogil:
        for i in range(n):
            r = idx[i]
            for d in range(D):
                out[r, d] += src[i, d]


def scatter_add_rows(out, idx, src):
    if out.ndim != 2 or not out.flags.c_contiguous:
        np.add.at(out, idx, src)
        return out
    _scatter(out, np.ascontiguousarray(idx, dtype=np.int64),
             np.ascontiguousarray(src, dtype=out.dtype))
    return out
