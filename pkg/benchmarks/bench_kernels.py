"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20] [--dtype float32]

Shapes follow the default model: hidden 100, fan-out 10, 200 sessions of
about 4 positions, and an item vocabulary of a few thousand. The last
table times one full training step in each backend (separate processes,
since the backend is chosen at import).
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dgrec._kernels import native, py

STEP_SNIPPET = """
import time
from dgrec import _kernels
from dgrec.config import ModelConfig
from dgrec.evaluation.synth import synth_social_data
from dgrec.model import DGRec, make_batch, training_sessions
from dgrec.pipeline import dataset_from_synth
from dgrec.rng import CounterRNG
from dgrec.tensorcore import AdamState
from dgrec.train import make_context, train_step

ev, ed = synth_social_data(300, 2000, sessions_per_user=6, influence_prob=0.5, seed=0)
ds = dataset_from_synth(ev, ed, holdout_days=7, seed=0)
cfg = ModelConfig(dtype="{dtype}")
ctx = make_context(ds.train, ds.valid, ds.test)
batch = make_batch(training_sessions(ds.train)[:200], ctx, ds.graph, cfg, ("train",))
model, adam = DGRec(cfg, len(ds.items), len(ds.users)), AdamState()
train_step(model, adam, batch, CounterRNG(0))
t = time.perf_counter()
for _ in range({steps}):
    train_step(model, adam, batch, CounterRNG(0, adam.step))
print(_kernels.BACKEND, batch.n_positions, (time.perf_counter() - t) / {steps})
"""


def cases(dtype, rng):
    P, H, C, M, V = 800, 100, 10, 2000, 3000
    pre = rng.normal(size=(P, 4 * H)).astype(dtype)
    c_prev = rng.normal(size=(P, H)).astype(dtype)
    dh, dc = rng.normal(size=(P, H)).astype(dtype), rng.normal(size=(P, H)).astype(dtype)
    q = rng.normal(size=(P, H)).astype(dtype)
    cand = rng.normal(size=(M, H)).astype(dtype)
    idx = rng.integers(-1, M, size=(P, C)).astype(np.int64)
    dmix = rng.normal(size=(P, H)).astype(dtype)
    logits = rng.normal(size=(P, V)).astype(dtype)
    targets = rng.integers(0, V, size=P).astype(np.int64)
    dloss = np.full(P, 1.0 / P, dtype=dtype)
    scatter_idx = rng.integers(0, M, size=P * C).astype(np.int64)
    scatter_src = rng.normal(size=(P * C, H)).astype(dtype)

    def lstm(m):
        h, c, acts = m.lstm_cell_forward(pre, c_prev)
        m.lstm_cell_backward(acts, c_prev, c, dh, dc)

    def attend(m):
        _, alpha = m.attend_forward(q, cand, idx)
        m.attend_backward(q, cand, idx, alpha, dmix)

    def xent(m):
        _, probs = m.xent_forward(logits, targets)
        m.xent_backward(probs, targets, dloss)

    def scatter(m):
        m.scatter_add_rows(np.zeros((M, H), dtype), scatter_idx, scatter_src)

    return {
        f"lstm cell fwd+bwd ({P}x{H})": lstm,
        f"gather attention fwd+bwd ({P}x{C}, pool {M})": attend,
        f"softmax xent fwd+bwd ({P}x{V})": xent,
        f"scatter-add rows ({P * C}->{M})": scatter,
    }


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--dtype", choices=("float32", "float64"), default="float32")
    ap.add_argument("--steps", type=int, default=3, help="training steps per backend (0 skips)")
    args = ap.parse_args(argv)
    if native is None:
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1
    dtype = np.dtype(args.dtype).type
    print(f"{'kernel':48s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(dtype, np.random.default_rng(0)).items():
        t_py = best_of(lambda: fn(py), args.repeat)
        t_c = best_of(lambda: fn(native), args.repeat)
        print(f"{name:48s} {t_py * 1e3:10.2f} {t_c * 1e3:10.2f} {t_py / t_c:7.2f}x")

    if args.steps > 0:
        print(f"\n{'training step (default config, 200 sessions)':48s} {'positions':>10s} {'ms/step':>10s}")
        snippet = STEP_SNIPPET.format(dtype=args.dtype, steps=args.steps)
        for pure in ("1", "0"):
            env = {**os.environ, "DGREC_PURE_PYTHON": pure, "OPENBLAS_NUM_THREADS": "1"}
            out = subprocess.run([sys.executable, "-c", snippet], env=env, capture_output=True, text=True,
                                 check=True).stdout.split()
            print(f"{'backend=' + out[0]:48s} {out[1]:>10s} {float(out[2]) * 1e3:10.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
