"""Time the numba kernels against the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Kernel timings call both backends in one process. ``--end-to-end`` also
runs a short particle filter and an i.i.d. score pass in subprocesses, once
with ``NOISYABC_DISABLE_NUMBA=1`` and once without.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from noisyabc.kernels import numba_backend, numpy_backend

END_TO_END = """
import time, numpy as np
from noisyabc import smc
from noisyabc.iid import iid_scores
from noisyabc.kernels import BACKEND_NAME
from noisyabc.models import GandKModel, SVAlphaRModel
sv, gk = SVAlphaRModel(), GandKModel()
y = np.arctan(sv.simulate([1.9, 0.9, 0.1], 300, np.random.default_rng(0)))
yg = np.arctan(gk.simulate([2.0, 0.5, 0.0, 2.0], 2000, np.random.default_rng(0)))
smc.run_filter(y[:5], sv, [1.9, 0.9, 0.1], 0.1, 50, np.random.default_rng(1), "ON2")
iid_scores(yg[:5], gk, [2.0, 0.5, 0.0, 2.0], 0.1, 100, np.random.default_rng(1))
t = time.perf_counter(); smc.run_filter(y, sv, [1.9, 0.9, 0.1], 0.1, 200, np.random.default_rng(1), "ON2")
t_pf = time.perf_counter() - t
t = time.perf_counter(); iid_scores(yg, gk, [2.0, 0.5, 0.0, 2.0], 0.1, 1000, np.random.default_rng(1))
t_iid = time.perf_counter() - t
print(f"{BACKEND_NAME:6s} SVaR ON2 filter n=300 N=200: {t_pf:8.3f} s   g-and-k i.i.d. scores n=2000 N=1000: {t_iid:8.3f} s")
"""


def _inputs(rng):
    m, n = 200, 1000
    u1 = rng.uniform(-np.pi / 2, np.pi / 2, (m, n))
    u2 = rng.exponential(size=(m, n))
    z = rng.standard_normal((m, n))
    y = np.arctan(rng.standard_normal(m))
    N = 300
    mix = (rng.standard_normal(N), rng.standard_normal(N) - np.log(N), rng.standard_normal((N, 3)),
           rng.standard_normal(N), 0.9, 0.1, 0.0, 0, 1, -1)
    return u1, u2, z, y, mix


def bench(repeat: int) -> None:
    u1, u2, z, y, mix = _inputs(np.random.default_rng(0))
    cases = {
        "stable_tau_grad (2e5 draws)": lambda b: b.stable_tau_grad(u1, u2, 1.5, 0.5),
        "gk_tau_grad (2e5 draws)": lambda b: b.gk_tau_grad(z, 2.0, 0.5, 0.0, 2.0, 0.8),
        "stable_iid_scores (200 x 1000)": lambda b: b.stable_iid_scores(y, u1, u2, [1.5, 0.5, 0.0, 0.5], 0.1, True),
        "gk_iid_scores (200 x 1000)": lambda b: b.gk_iid_scores(y, z, [2.0, 0.5, 0.0, 2.0], 0.8, 0.1, True),
        "ar1_mixture (N = 300)": lambda b: b.ar1_mixture(*mix),
    }
    print(f"{'kernel':34s} {'numpy [ms]':>11s} {'numba [ms]':>11s} {'speedup':>8s}")
    for name, fn in cases.items():
        times = {}
        for label, b in (("numpy", numpy_backend), ("numba", numba_backend)):
            if b is None:
                continue
            fn(b)  # compile / warm caches
            times[label] = min(timeit.repeat(lambda: fn(b), number=1, repeat=repeat)) * 1e3
        if "numba" in times:
            print(f"{name:34s} {times['numpy']:11.2f} {times['numba']:11.2f} {times['numpy'] / times['numba']:7.1f}x")
        else:
            print(f"{name:34s} {times['numpy']:11.2f} {'n/a':>11s}")


def end_to_end() -> None:
    sys.stdout.flush()
    for disable in ("1", ""):
        env = dict(os.environ, NOISYABC_DISABLE_NUMBA=disable)
        subprocess.run([sys.executable, "-c", END_TO_END], env=env, check=True)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--end-to-end", action="store_true")
    args = p.parse_args()
    bench(args.repeat)
    if args.end_to_end:
        end_to_end()


if __name__ == "__main__":
    main()
