"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20] [--hidden 32] [--batch 16]

Kernel timings call both implementations side by side in one process.  The
training-epoch timing runs a child process per backend, because the
backend is fixed at import time by DYADFC_DISABLE_NUMBA.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from dyadforecast.numkernel.kernels import NUMBA_KERNELS, NUMPY_KERNELS

EPOCH_SNIPPET = """
import time
from dyadforecast.motiondata import synth_dyads, training_view
from dyadforecast.trainer import preset, train
data = training_view(synth_dyads(0, {n}, 0.8))
cfg = preset("desk", epochs=3, warmup_epochs=1)
train(cfg, data, progress=False)  # includes compilation / warm caches
t0 = time.perf_counter()
train(cfg, data, progress=False)
print((time.perf_counter() - t0) / 3)
"""


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_inputs(rng, T, B, H, D):
    xw = rng.normal(size=(T, B, 4 * H))
    w_hh = rng.normal(scale=0.2, size=(H, 4 * H))
    h0, c0 = np.zeros((B, H)), np.zeros((B, H))
    prev0 = rng.normal(size=(B, D))
    ctxw = rng.normal(size=(B, 4 * H))
    w_p = rng.normal(scale=0.1, size=(D, 4 * H))
    w_o = rng.normal(scale=0.1, size=(H, D))
    b_o = np.zeros(D)
    return xw, w_hh, h0, c0, prev0, ctxw, w_p, w_o, b_o


def bench_kernels(kernels, args):
    rng = np.random.default_rng(0)
    T, B, H, D = 100, args.batch, args.hidden, 56
    xw, w_hh, h0, c0, prev0, ctxw, w_p, w_o, b_o = kernel_inputs(rng, T, B, H, D)
    hs, cs, acts = kernels["lstm_forward"](xw, w_hh, h0, c0)
    dhs = rng.normal(size=hs.shape)
    prevs, rhs, rcs, racts = kernels["rollout_forward"](prev0, ctxw, w_p, w_hh, h0, c0, w_o, b_o, 50)
    dout = rng.normal(size=prevs.shape)
    w_hh_t, w_p_t, w_o_t = w_hh.T.copy(), w_p.T.copy(), w_o.T.copy()
    return {
        "lstm forward (T=100)": best_of(lambda: kernels["lstm_forward"](xw, w_hh, h0, c0), args.repeat),
        "lstm backward (T=100)": best_of(
            lambda: kernels["lstm_backward"](dhs, np.zeros((B, H)), w_hh_t, acts, cs), args.repeat
        ),
        "rollout forward (50)": best_of(
            lambda: kernels["rollout_forward"](prev0, ctxw, w_p, w_hh, h0, c0, w_o, b_o, 50), args.repeat
        ),
        "rollout backward (50)": best_of(
            lambda: kernels["rollout_backward"](dout, w_p_t, w_hh_t, w_o_t, racts, rcs), args.repeat
        ),
    }


def bench_epoch(disable, n):
    env = dict(os.environ, DYADFC_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run(
        [sys.executable, "-c", EPOCH_SNIPPET.format(n=n)], env=env, capture_output=True, text=True, check=True
    )
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--samples", type=int, default=64, help="dyads for the epoch timing")
    p.add_argument("--skip-epoch", action="store_true")
    args = p.parse_args(argv)

    nb = bench_kernels(NUMBA_KERNELS, args)
    npy = bench_kernels(NUMPY_KERNELS, args)
    print(f"B={args.batch} H={args.hidden}")
    print(f"{'kernel':24s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for name in nb:
        print(f"{name:24s} {1e3 * nb[name]:10.3f} {1e3 * npy[name]:10.3f} {npy[name] / nb[name]:7.2f}x")
    if not args.skip_epoch:
        e_nb, e_np = bench_epoch(False, args.samples), bench_epoch(True, args.samples)
        label = f"desk epoch ({args.samples} smp)"
        print(f"{label:24s} {1e3 * e_nb:10.1f} {1e3 * e_np:10.1f} {e_np / e_nb:7.2f}x")


if __name__ == "__main__":
    main()
