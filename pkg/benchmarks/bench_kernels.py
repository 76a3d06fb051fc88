"""Compare the jit kernels against the pure-numpy fallback.

The backend is chosen at import time (ONIONLENS_NO_NUMBA=1 forces the
fallback), so this script re-runs itself once per backend and prints a
side-by-side table. Compile time is excluded: every kernel is called
once before the clock starts.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 9
"""

from __future__ import annotations

import argparse
import json
import os
import pathlib
import statistics
import subprocess
import sys
import time

HERE = pathlib.Path(__file__).resolve().parent
MICRO_MODEL = HERE.parent / "tests" / "fixtures" / "models" / "micro_e2e.onnx"


def build_workloads():
    import numpy as np

    from onionlens import kernels
    from onionlens.engine import forward
    from onionlens.model import load_model

    rng = np.random.default_rng(20260823)
    luma = rng.uniform(0.0, 255.0, (512, 768))
    big = rng.uniform(0.0, 255.0, (256, 256))
    conv_x = rng.standard_normal((1, 32, 64, 64)).astype(np.float32)
    conv_w = rng.standard_normal((64, 32, 3, 3)).astype(np.float32)
    conv_b = rng.standard_normal(64).astype(np.float32)
    pool_x = rng.standard_normal((1, 64, 64, 64)).astype(np.float32)
    gemm_x = rng.standard_normal((64, 512)).astype(np.float32)
    gemm_w = rng.standard_normal((256, 512)).astype(np.float32)
    model = load_model(str(MICRO_MODEL))
    batch = rng.standard_normal((8, 3, 16, 16)).astype(np.float32)

    return {
        "resize 512x768 -> 8x9": lambda: kernels.resize_bilinear(luma, 8, 9),
        "resize 256x256 -> 64x64": lambda: kernels.resize_bilinear(big, 64, 64),
        "conv 32->64 3x3 on 64x64": lambda: kernels.conv2d(
            conv_x, conv_w, conv_b, (1, 1), (1, 1, 1, 1)),
        "maxpool 2x2 on 64c 64x64": lambda: kernels.maxpool2d(pool_x),
        "gemm 64x512 @ 512x256": lambda: kernels.dense(gemm_x, gemm_w),
        "micro model forward, batch 8": lambda: forward(model, batch),
    }


def measure(repeats: int) -> dict:
    from onionlens import kernels

    works = build_workloads()
    timings = {}
    for name, fn in works.items():
        fn()  # warm: trigger jit compilation outside the clock
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            samples.append(time.perf_counter() - t0)
        timings[name] = statistics.median(samples)
    return {"backend": kernels.backend(), "timings": timings}


def run_child(no_numba: bool, repeats: int) -> dict:
    env = dict(os.environ)
    if no_numba:
        env["ONIONLENS_NO_NUMBA"] = "1"
    else:
        env.pop("ONIONLENS_NO_NUMBA", None)
    res = subprocess.run(
        [sys.executable, __file__, "--worker", "--repeats", str(repeats)],
        capture_output=True, text=True, env=env, check=True)
    return json.loads(res.stdout)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=7,
                    help="timed calls per kernel; the median is reported")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.worker:
        json.dump(measure(args.repeats), sys.stdout)
        return

    jit = run_child(no_numba=False, repeats=args.repeats)
    plain = run_child(no_numba=True, repeats=args.repeats)
    if jit["backend"] == plain["backend"]:
        print(f"note: both runs used the {jit['backend']} backend "
              "(numba unavailable?)", file=sys.stderr)

    width = max(len(k) for k in jit["timings"])
    print(f"{'kernel':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for name, t_jit in jit["timings"].items():
        t_np = plain["timings"][name]
        ratio = t_np / t_jit if t_jit > 0 else float("inf")
        print(f"{name:<{width}}  {t_jit * 1e3:>8.3f}ms  {t_np * 1e3:>8.3f}ms  "
              f"{ratio:>7.2f}x")


if __name__ == "__main__":
    main()
