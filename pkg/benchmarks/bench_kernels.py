"""Compiled vs numpy kernels, plus one full split-step run per backend.

    python3 benchmarks/bench_kernels.py [--n 4096] [--repeat 200]

The end-to-end timing runs in a subprocess with MODSCAT_PURE_PYTHON set, so the
backend is picked exactly as a user would get it.
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from modscat import _kernels_py

try:
    from modscat import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

E2E = """
import time, json
from modscat import BACKEND
from modscat.grid import GridSpec, reference_profile, sample_profile
from modscat.evolve import EvolveConfig, evolve_physical
u = sample_profile(reference_profile(), GridSpec({n}, 60.0)) * 0.1
t = time.perf_counter()
evolve_physical(u, 0.0, 5.0, 1.0, EvolveConfig(dt_base=5e-3))
print(json.dumps({{"backend": BACKEND, "seconds": time.perf_counter() - t}}))
"""


def kernel_cases(mod, n, rng):
    u = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * 0.1
    out = np.empty_like(u)
    acc = np.zeros(n)
    theta = rng.standard_normal(n)
    return {
        "nonlinear_phase": lambda: mod.nonlinear_phase(u, 1e-3),
        "cubic": lambda: mod.cubic(u, out),
        "phase_mul": lambda: mod.phase_mul(u, theta, 1e-3),
        "abs2_accumulate": lambda: mod.abs2_accumulate(acc, u, 0.5),
    }


def check_agreement(n, rng):
    u0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    theta = rng.standard_normal(n)
    worst = 0.0
    for name in ("nonlinear_phase", "cubic", "phase_mul", "abs2_accumulate"):
        res = []
        for mod in (_kernels_py, _kernels_c):
            u = u0.copy()
            if name == "nonlinear_phase":
                mod.nonlinear_phase(u, 0.3)
                res.append(u)
            elif name == "cubic":
                o = np.empty_like(u)
                mod.cubic(u, o)
                res.append(o)
            elif name == "phase_mul":
                mod.phase_mul(u, theta, 0.7)
                res.append(u)
            else:
                a = np.zeros(n)
                mod.abs2_accumulate(a, u, 0.5)
                res.append(a)
        worst = max(worst, float(np.max(np.abs(res[0] - res[1])) / np.max(np.abs(res[0]))))
    return worst


def end_to_end(n, pure):
    env = dict(os.environ)
    if pure:
        env["MODSCAT_PURE_PYTHON"] = "1"
    else:
        env.pop("MODSCAT_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", E2E.format(n=n)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--no-e2e", action="store_true")
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)

    if _kernels_c is None:
        print("compiled extension not built; timing the numpy kernels only")
    else:
        print(f"max relative difference between backends: {check_agreement(args.n, rng):.2e}")
    print(f"{'kernel':<18}{'numpy [us]':>12}{'cython [us]':>13}{'speedup':>9}")
    py = kernel_cases(_kernels_py, args.n, rng)
    c = kernel_cases(_kernels_c, args.n, rng) if _kernels_c else {}
    for name, fn in py.items():
        tp = min(timeit.repeat(fn, number=args.repeat, repeat=3)) / args.repeat * 1e6
        if name in c:
            tc = min(timeit.repeat(c[name], number=args.repeat, repeat=3)) / args.repeat * 1e6
            print(f"{name:<18}{tp:12.2f}{tc:13.2f}{tp / tc:9.2f}")
        else:
            print(f"{name:<18}{tp:12.2f}{'-':>13}{'-':>9}")

    if not args.no_e2e:
        print("\nsplit-step, t in [0, 5], dt = 5e-3:")
        for pure in (True, False):
            r = end_to_end(args.n, pure)
            print(f"  backend={r['backend']:<7} {r['seconds']:.3f} s")


if __name__ == "__main__":
    main()
