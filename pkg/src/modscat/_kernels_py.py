"""Pure numpy versions of the compiled kernels (same signatures, same in-place semantics)."""

import numpy as np


def nonlinear_phase(u, coef):
    u *= np.exp(-1j * coef * (u.real**2 + u.imag**2))


def cubic(g, out):
    np.multiply(g, g.real**2 + g.imag**2, out=out)


def phase_mul(u, theta, scale):
    u *= np.exp(1j * scale * theta)


def abs2_accumulate(acc, g, weight):
    acc += weight * (g.real**2 + g.imag**2)
