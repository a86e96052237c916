import os
import subprocess
import sys

import numpy as np
import pytest

from modscat import _kernels_py, kernels

try:
    from modscat import _kernels as compiled
except ImportError:
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled extension not built")


def _data(n=1000, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n), rng.standard_normal(n)


def test_fallback_semantics():
    u, th = _data()
    a = u.copy()
    _kernels_py.nonlinear_phase(a, 0.3)
    assert np.allclose(a, u * np.exp(-0.3j * np.abs(u) ** 2))
    out = np.empty_like(u)
    _kernels_py.cubic(u, out)
    assert np.allclose(out, np.abs(u) ** 2 * u)
    b = u.copy()
    _kernels_py.phase_mul(b, th, 0.7)
    assert np.allclose(b, u * np.exp(0.7j * th))
    acc = np.ones(u.size)
    _kernels_py.abs2_accumulate(acc, u, 0.5)
    assert np.allclose(acc, 1 + 0.5 * np.abs(u) ** 2)


@needs_ext
def test_backends_agree():
    u, th = _data(4097)
    for name, args in (("nonlinear_phase", (0.3,)), ("phase_mul", (th, 0.7))):
        a, b = u.copy(), u.copy()
        getattr(_kernels_py, name)(a, *args)
        getattr(compiled, name)(b, *args)
        assert np.max(np.abs(a - b)) < 1e-14
    oa, ob = np.empty_like(u), np.empty_like(u)
    _kernels_py.cubic(u, oa)
    compiled.cubic(u, ob)
    assert np.max(np.abs(oa - ob)) < 1e-13
    aa, ab = np.zeros(u.size), np.zeros(u.size)
    _kernels_py.abs2_accumulate(aa, u, 0.25)
    compiled.abs2_accumulate(ab, u, 0.25)
    assert np.max(np.abs(aa - ab)) < 1e-14


def test_backend_label():
    assert kernels.BACKEND in ("cython", "python")
    if compiled is not None and os.environ.get("MODSCAT_PURE_PYTHON", "") in ("", "0"):
        assert kernels.BACKEND == "cython"


def test_env_forces_fallback():
    env = dict(os.environ, MODSCAT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import modscat; print(modscat.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pure_python_solver_matches():
    code = (
        "from modscat.grid import GridSpec, reference_profile, sample_profile\n"
        "from modscat.evolve import EvolveConfig, evolve_physical\n"
        "import numpy as np, sys\n"
        "u = sample_profile(reference_profile(), GridSpec(512, 30.0)) * 0.5\n"
        "v, _ = evolve_physical(u, 0, 1, 1.0, EvolveConfig())\n"
        "np.save(sys.argv[1], v.values)\n"
    )
    res = []
    for flag in ("1", "0"):
        path = f"/tmp/modscat_backend_{flag}_{os.getpid()}.npy"
        subprocess.run([sys.executable, "-c", code, path], check=True,
                       env=dict(os.environ, MODSCAT_PURE_PYTHON=flag))
        res.append(np.load(path))
        os.unlink(path)
    assert np.max(np.abs(res[0] - res[1])) < 1e-13
