"""Backend selection for the elementwise hot kernels.

The compiled extension ``modscat._kernels`` is used when it imports; otherwise the
numpy fallback is used.  Setting ``MODSCAT_PURE_PYTHON=1`` forces the fallback.
"""

import os

BACKEND = "python"

if os.environ.get("MODSCAT_PURE_PYTHON", "") not in ("", "0"):
    from ._kernels_py import abs2_accumulate, cubic, nonlinear_phase, phase_mul
else:
    try:
        from ._kernels import abs2_accumulate, cubic, nonlinear_phase, phase_mul

        BACKEND = "cython"
    except ImportError:  # extension not built
        from ._kernels_py import abs2_accumulate, cubic, nonlinear_phase, phase_mul

__all__ = ["BACKEND", "abs2_accumulate", "cubic", "nonlinear_phase", "phase_mul"]
