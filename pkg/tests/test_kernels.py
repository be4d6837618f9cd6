import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgrec import _kernels
from dgrec._kernels import py

native = _kernels.native
needs_native = pytest.mark.skipif(native is None, reason="compiled kernels not built")
TOL = {np.float32: 1e-5, np.float64: 1e-12}


def close(a, b, dtype):
    tol = TOL[dtype]
    return np.allclose(a, b, rtol=tol, atol=tol)


def test_backend_name():
    assert _kernels.BACKEND in ("cython", "python")
    assert (_kernels.BACKEND == "cython") == (native is not None)


@needs_native
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@given(st.integers(1, 7), st.integers(1, 6), st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_lstm_parity(dtype, n, H, seed):
    rng = np.random.default_rng(seed)
    pre = (rng.normal(size=(n, 4 * H)) * 3).astype(dtype)
    c_prev = rng.normal(size=(n, H)).astype(dtype)
    dh, dc = rng.normal(size=(n, H)).astype(dtype), rng.normal(size=(n, H)).astype(dtype)
    outs_py = py.lstm_cell_forward(pre, c_prev)
    outs_c = native.lstm_cell_forward(pre, c_prev)
    for a, b in zip(outs_py, outs_c):
        assert b.dtype == dtype and close(a, b, dtype)
    _, c, acts = outs_py
    for a, b in zip(py.lstm_cell_backward(acts, c_prev, c, dh, dc), native.lstm_cell_backward(acts, c_prev, c, dh, dc)):
        assert close(a, b, dtype)


@needs_native
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@given(st.integers(1, 6), st.integers(0, 5), st.integers(0, 5), st.integers(1, 5), st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_attend_parity(dtype, N, M, C, D, seed):
    rng = np.random.default_rng(seed)
    q = rng.normal(size=(N, D)).astype(dtype)
    cand = rng.normal(size=(M, D)).astype(dtype)
    idx = rng.integers(-1, M, size=(N, C)) if M else np.full((N, C), -1)
    idx = idx.astype(np.int64)
    mix_p, al_p = py.attend_forward(q, cand, idx)
    mix_c, al_c = native.attend_forward(q, cand, idx)
    assert close(mix_p, mix_c, dtype) and close(al_p, al_c, dtype)
    assert np.all(al_c[:, 1:][idx < 0] == 0)
    dmix = rng.normal(size=(N, D)).astype(dtype)
    for a, b in zip(py.attend_backward(q, cand, idx, al_p, dmix), native.attend_backward(q, cand, idx, al_p, dmix)):
        assert close(a, b, dtype)


@needs_native
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@given(st.integers(1, 6), st.integers(1, 9), st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_xent_parity(dtype, P, V, seed):
    rng = np.random.default_rng(seed)
    logits = (rng.normal(size=(P, V)) * 5).astype(dtype)
    targets = rng.integers(0, V, size=P).astype(np.int64)
    lp, pp = py.xent_forward(logits, targets)
    lc, pc = native.xent_forward(logits, targets)
    assert close(lp, lc, dtype) and close(pp, pc, dtype)
    dloss = rng.random(P).astype(dtype)
    assert close(py.xent_backward(pp.copy(), targets, dloss), native.xent_backward(pp.copy(), targets, dloss), dtype)


@needs_native
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_scatter_parity(dtype):
    rng = np.random.default_rng(0)
    idx = rng.integers(0, 5, size=40).astype(np.int64)
    src = rng.normal(size=(40, 3)).astype(dtype)
    a = py.scatter_add_rows(np.zeros((5, 3), dtype), idx, src)
    b = native.scatter_add_rows(np.zeros((5, 3), dtype), idx, src)
    assert close(a, b, dtype)


def test_pure_python_switch():
    env = {**os.environ, "DGREC_PURE_PYTHON": "1"}
    out = subprocess.run([sys.executable, "-c", "from dgrec import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
