"""Compiled vs NumPy closed-loop kernel.

    python3 benchmarks/bench_kernels.py [--samples 12500] [--modes 1 8 165] [--repeat 3]

Each case runs the decoupled loop recurrence over ``samples x modes`` random
inputs with the case-study dynamics and reports the best of ``repeat`` runs.
"""
import argparse
import timeit

import numpy as np

from cdsysid import kernels
from cdsysid.dynamics import ControllerParams, discretize
from cdsysid.modal import geometric_sigma


def case(n_samples, n_modes, seed=0):
    sigma = geometric_sigma(n_modes, 195.0, 0.02)
    params = ControllerParams.from_sigma(sigma, lambda_bar_hz=176.0, mu=1.0, a_hz=700.0,
                                         tau_d_s=900e-6, fs_hz=10_000.0)
    g = discretize(params.plant, params.Ts)
    lam = discretize(params.shaping, params.Ts)
    rng = np.random.default_rng(seed)
    d, n, r = (rng.standard_normal((n_samples, n_modes)) for _ in range(3))
    return (d, n, r, sigma, params.gamma, g.p, lam.p, g.delay)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--samples", type=int, default=12_500)
    ap.add_argument("--modes", type=int, nargs="+", default=[1, 8, 165])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if kernels.BACKEND != "cython":
        print("compiled kernel not available; build with `pip install -e . --no-build-isolation`")
        return 1
    print(f"{'modes':>6} {'python_s':>10} {'cython_s':>10} {'speedup':>8} {'max_diff':>10}")
    for m in args.modes:
        inputs = case(args.samples, m)
        t = {}
        out = {}
        for backend in ("python", "cython"):
            out[backend] = kernels.modal_loop(*inputs, backend=backend)
            t[backend] = min(timeit.repeat(lambda: kernels.modal_loop(*inputs, backend=backend),
                                           number=1, repeat=args.repeat))
        diff = max(np.max(np.abs(a - b)) for a, b in zip(out["python"], out["cython"]))
        print(f"{m:>6} {t['python']:>10.4f} {t['cython']:>10.4f} {t['python'] / t['cython']:>8.1f} {diff:>10.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
