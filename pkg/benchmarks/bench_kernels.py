"""Compare the compiled kernel backend against the pure-numpy fallback.

Times the three hot kernels (im2col, col2im, warp_bilinear) at training
shapes plus one full model forward/backward step per backend, and checks
that both backends produce bit-identical outputs while at it.

Run:  python3 benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from swapkit._kernels import BACKEND, numpy_backend

try:
    from swapkit._kernels import _native as native_backend
except ImportError:
    native_backend = None


def best_of(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_case(name, make_args, runners, repeats):
    args = make_args()
    rows = []
    outs = {}
    for label, backend in runners:
        fn = getattr(backend, name)
        outs[label] = fn(*args)
        rows.append((label, best_of(lambda: fn(*args), repeats)))
    if len(outs) == 2:
        a, b = outs.values()
        match = "bit-identical" if np.array_equal(a, b) else "MISMATCH"
    else:
        match = "single backend"
    base = rows[0][1]
    print(f"{name}:")
    for label, t in rows:
        speed = f"{base / t:5.2f}x" if t > 0 else "   inf"
        print(f"  {label:<8} {t * 1e3:8.2f} ms   {speed}")
    print(f"  outputs: {match}")
    return match


def kernel_benchmarks(repeats: int) -> list:
    rng = np.random.default_rng(0)
    runners = [("numpy", numpy_backend)]
    if native_backend is not None:
        runners.append(("native", native_backend))

    n, c, res, k = 4, 32, 66, 3  # batch of padded 64px feature maps
    x = np.ascontiguousarray(rng.standard_normal((n, c, res, res)), dtype=np.float32)
    oh = ow = res - k + 1
    cols = np.ascontiguousarray(
        rng.standard_normal((c * k * k, n * oh * ow)), dtype=np.float32)
    img = np.ascontiguousarray(rng.random((256, 256, 3)))
    m = np.array([[0.8, 0.1, 12.0], [-0.1, 0.8, 30.0]])

    results = []
    results.append(bench_case(
        "im2col", lambda: (x, k, 1, oh, ow), runners, repeats))
    results.append(bench_case(
        "col2im", lambda: (cols, n, c, res, res, k, 1, oh, ow), runners, repeats))
    results.append(bench_case(
        "warp_bilinear", lambda: (img, m, 128, 128), runners, repeats))
    return results


def train_step_benchmark(repeats: int) -> None:
    """One full training iteration per backend (same data, same seed)."""
    import importlib
    import os
    import subprocess
    import sys

    script = r"""
import time
import numpy as np
from swapkit._kernels import BACKEND
from swapkit.models import FaceSwapModel, ModelConfig
from swapkit.training.config import TrainConfig
from swapkit.training.loop import FaceDataset, train

rng = np.random.default_rng(3)
res = 64
imgs = rng.random((6, res, res, 3)).astype(np.float32)
masks = np.ones((6, res, res), dtype=np.float32)
lms = rng.random((6, 68, 2)) * (res - 1)
data = FaceDataset(imgs, masks, lms)
model = FaceSwapModel(ModelConfig(resolution=res, base_channels=16, ae_dims=64), seed=0)
cfg = TrainConfig(iterations=%(iters)d, batch_size=4, seed=0)
t0 = time.perf_counter()
train(model, data, data, cfg)
dt = (time.perf_counter() - t0) / %(iters)d
w = np.concatenate([t.data.ravel() for t in model.parameters()])
print(f"{BACKEND} {dt:.4f} {w[:131072].sum():.6e}")
""" % {"iters": max(2, repeats)}

    print("train_step (resolution 64, batch 4):")
    sums = {}
    for backend in ("numpy", "native"):
        if backend == "native" and native_backend is None:
            continue
        env = dict(os.environ, SWAPKIT_BACKEND=backend)
        proc = subprocess.run([sys.executable, "-c", script], env=env,
                              capture_output=True, text=True)
        if proc.returncode != 0:
            print(f"  {backend:<8} failed:\n{proc.stderr}")
            continue
        name, dt, wsum = proc.stdout.split()
        sums[name] = wsum
        print(f"  {name:<8} {float(dt) * 1e3:8.1f} ms/iteration")
    if len(sums) == 2:
        vals = list(sums.values())
        verdict = "bit-identical" if vals[0] == vals[1] else "MISMATCH"
        print(f"  trained weights: {verdict}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    print(f"active backend: {BACKEND}")
    if native_backend is None:
        print("compiled extension not built; timing the numpy fallback only\n")
    results = kernel_benchmarks(args.repeats)
    print()
    train_step_benchmark(args.repeats)
    return 1 if "MISMATCH" in results else 0


if __name__ == "__main__":
    raise SystemExit(main())
