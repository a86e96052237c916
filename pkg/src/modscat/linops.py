"""Free Schrodinger group and its factorization ``U(t) = M(t) D(t) F M(t)``.

``M(t)`` multiplies by the chirp ``exp(i x^2 / 2t)``, ``D(t) f(x) = (it)^{-1/2} f(x/t)``
(principal branch) and ``U(t) = exp(i t d_x^2 / 2)``.  ``R(t) = M D F (M - 1) F^{-1}``
measures the defect ``U(t) F^{-1} - M D``.
"""

from __future__ import annotations

import warnings
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .grid import (
    FOURIER,
    PHYSICAL,
    GridSpec,
    NormKind,
    ProfileSpec,
    SideError,
    WaveFunction,
    derivative,
    fourier,
    grid_for_spread,
    norm,
    physical,
    to_fourier,
    to_physical,
)

EDGE_TOL = 1e-12


class ResolutionWarning(UserWarning):
    """Resampling or propagation left the band resolved by the grid."""


def _require_physical(w: WaveFunction, op: str):
    if w.side != PHYSICAL:
        raise SideError(f"{op} expects a physical-side wave function")


def _nonzero_time(t: float, op: str) -> float:
    t = float(t)
    if t == 0.0 or not np.isfinite(t):
        raise ValueError(f"{op} requires a finite nonzero time, got {t!r}")
    return t


@lru_cache(maxsize=64)
def _chirp(grid: GridSpec, t: float) -> np.ndarray:
    x = grid.x
    c = np.exp(1j * (x * x) / (2.0 * t))
    c.flags.writeable = False
    return c


@lru_cache(maxsize=64)
def _kinetic(grid: GridSpec, t: float) -> np.ndarray:
    """``exp(-i t xi^2 / 2)`` in FFT order."""
    xi = grid.xi_fft
    p = np.exp(-0.5j * t * xi * xi)
    p.flags.writeable = False
    return p


def chirp_values(grid: GridSpec, t: float) -> np.ndarray:
    return _chirp(grid, float(t))


def multiply_chirp(w: WaveFunction, t: float) -> WaveFunction:
    """``M(t) w = exp(i x^2 / 2t) w``."""
    _require_physical(w, "multiply_chirp")
    t = _nonzero_time(t, "multiply_chirp")
    return w.with_values(w.values * _chirp(w.grid, t))


def free_propagate_values(grid: GridSpec, f: np.ndarray, t: float) -> np.ndarray:
    if t == 0.0:
        return np.array(f, dtype=np.complex128)
    g = sfft.fft(f)
    g *= _kinetic(grid, float(t))
    return sfft.ifft(g)


def free_propagate(w: WaveFunction, t: float) -> WaveFunction:
    """``U(t) w = F^{-1}[exp(-i t xi^2 / 2) F w]`` (exact group on the grid)."""
    _require_physical(w, "free_propagate")
    return w.with_values(free_propagate_values(w.grid, w.values, float(t)))


# --------------------------------------------------------------------------
# dilation
# --------------------------------------------------------------------------

class _Bluestein:
    """``X_j = sum_k c_k exp(i (theta0 k + delta j k))`` for ``j, k < n``.

    The chirps are built from the real angles directly; passing ``exp(i delta)``
    through a complex power (as generic chirp-z code does) loses the small
    angle to rounding and costs several digits on large grids.
    """

    def __init__(self, n: int, theta0: float, delta: float):
        self.n = n
        self.nfft = sfft.next_fast_len(2 * n - 1)
        k = np.arange(n, dtype=np.float64)
        half = 0.5 * delta * k * k
        self.pre = np.exp(1j * (theta0 * k + half))
        self.post = np.exp(1j * half)
        m = np.arange(-(n - 1), n, dtype=np.float64)
        kern = np.exp(-0.5j * delta * m * m)
        buf = np.zeros(self.nfft, dtype=np.complex128)
        buf[:n] = kern[n - 1:]
        buf[self.nfft - (n - 1):] = kern[: n - 1]
        self.kernel = sfft.fft(buf)

    def __call__(self, c: np.ndarray) -> np.ndarray:
        a = sfft.fft(c * self.pre, self.nfft)
        a *= self.kernel
        return sfft.ifft(a)[: self.n] * self.post


@lru_cache(maxsize=8)
def _dilation_plan(grid: GridSpec, side: str, t: float):
    """Bluestein plan evaluating the trigonometric interpolant at ``x_j / t``."""
    n = grid.n
    if side == PHYSICAL:
        a0, h = grid.x[0], grid.dx
    else:
        a0, h = grid.xi[0], grid.dxi
    period = n * h
    y0 = grid.x[0] / t
    dy = grid.dx / t
    theta0 = 2.0 * np.pi * (y0 - a0) / period
    delta = 2.0 * np.pi * dy / period
    plan = _Bluestein(n, theta0, delta)
    # z_j^{-n/2} restores the symmetric index range -n/2..n/2-1
    j = np.arange(n)
    shift = np.exp(-1j * (n // 2) * (theta0 + delta * j))
    y = y0 + dy * j
    inside = (y >= a0 - 0.5 * h) & (y <= a0 + period - 0.5 * h)
    return plan, shift, inside


def dilate(w: WaveFunction, t: float) -> WaveFunction:
    """``D(t) f(x) = (it)^{-1/2} f(x/t)`` as a physical-side function.

    ``w`` may live on either side; its samples are read as a function of the
    axis they sit on (``x`` or ``xi``) and evaluated at the points ``x_j / t``
    by band-limited (trigonometric) interpolation.  Target points outside the
    sampled window are set to zero; a :class:`ResolutionWarning` is emitted when
    the data there are not negligible.
    """
    t = _nonzero_time(t, "dilate")
    grid = w.grid
    if not np.any(w.values):
        return physical(grid, np.zeros(grid.n, dtype=np.complex128))
    plan, shift, inside = _dilation_plan(grid, w.side, t)
    # coefficients c_k, k=-n/2..n/2-1, of f(y) = sum c_k exp(2 pi i k (y - a0) / (n h))
    c = np.fft.fftshift(sfft.fft(w.values)) / grid.n
    vals = plan(c) * shift
    scale = (1j * t) ** -0.5
    vals *= scale
    peak = float(np.abs(w.values).max())
    if not inside.all():
        vals[~inside] = 0.0
        if w.boundary_magnitude() > EDGE_TOL * max(peak, 1.0):
            warnings.warn(
                f"dilate(t={t:g}) samples outside the {w.side} window where the data "
                f"are not negligible (edge {w.boundary_magnitude():.2e})",
                ResolutionWarning,
                stacklevel=2,
            )
    if abs(t) < 1.0:
        spec = np.abs(np.fft.fftshift(sfft.fft(vals)))
        edge = max(spec[:4].max(), spec[-4:].max()) / max(spec.max(), 1e-300)
        if edge > 1e-10:
            warnings.warn(f"dilate(t={t:g}) output is not resolved by the grid",
                          ResolutionWarning, stacklevel=2)
    return physical(grid, vals)


# --------------------------------------------------------------------------
# J(t), R(t), and the factorization check
# --------------------------------------------------------------------------

def apply_J(w: WaveFunction, t: float, factorized: bool = False) -> WaveFunction:
    """``J(t) w = (x + i t d_x) w`` with a spectral derivative.

    With ``factorized=True`` the equivalent form ``i t M(t) d_x (M(-t) w)`` is
    used, which avoids cancellation between the two terms when ``|t|`` is large.
    """
    _require_physical(w, "apply_J")
    t = float(t)
    if factorized:
        if t == 0.0:
            return w.with_values(w.grid.x * w.values)
        inner = multiply_chirp(w, -t)
        return multiply_chirp(derivative(inner), t) * (1j * t)
    return w.with_values(w.grid.x * w.values + 1j * t * derivative(w).values)


def mdf(w: WaveFunction, t: float) -> WaveFunction:
    """``M(t) D(t) F (M(t) w)``: the factorized free flow."""
    _require_physical(w, "mdf")
    t = _nonzero_time(t, "mdf")
    return multiply_chirp(dilate(to_fourier(multiply_chirp(w, t)), t), t)


def apply_R(f: WaveFunction, t: float) -> WaveFunction:
    """``R(t) f = M(t) D(t) F (M(t) - 1) F^{-1} f`` for a Fourier-side ``f``.

    Equal to ``U(t) F^{-1} f - M(t) D(t) f``.
    """
    if f.side != FOURIER:
        raise SideError("apply_R expects a fourier-side wave function")
    t = float(t)
    if not abs(t) >= 1.0:
        raise ValueError(f"apply_R requires |t| >= 1, got {t!r}")
    g = to_physical(f)
    h = g.with_values((_chirp(g.grid, t) - 1.0) * g.values)
    return multiply_chirp(dilate(to_fourier(h), t), t)


def apply_R_via_group(f: WaveFunction, t: float) -> WaveFunction:
    """Second route to ``R(t) f`` through ``F (M(t) - 1) F^{-1} = U(-1/t) - 1``.

    Here ``U(-1/t)`` acts on the Fourier-side function ``f`` in its own variable.
    """
    if f.side != FOURIER:
        raise SideError("apply_R_via_group expects a fourier-side wave function")
    t = float(t)
    if not abs(t) >= 1.0:
        raise ValueError(f"apply_R requires |t| >= 1, got {t!r}")
    grid = f.grid
    # the xi axis is a uniform grid with spacing dxi; its dual has spacing dx
    own = GridSpec(grid.n, np.pi / grid.dx)
    moved = free_propagate_values(own, f.values, -1.0 / t) - f.values
    return multiply_chirp(dilate(fourier(grid, moved), t), t)


def check_mdf_identity(w: WaveFunction, t: float) -> float:
    """``||U(t) w - M(t) D(t) F (M(t) w)||_{L2}``."""
    _require_physical(w, "check_mdf_identity")
    t = _nonzero_time(t, "check_mdf_identity")
    if not np.any(w.values):
        return 0.0
    diff = free_propagate(w, t) - mdf(w, t)
    return norm(diff, NormKind.L2())


def check_J_conjugation(w: WaveFunction, t: float) -> float:
    """``||J(t) w - U(t) (x U(-t) w)||_{L2}``."""
    back = free_propagate(w, -t)
    rhs = free_propagate(back.with_values(w.grid.x * back.values), t)
    return norm(apply_J(w, t) - rhs, NormKind.L2())


def gn_constant(w: WaveFunction, t: float) -> float:
    """Smallest ``C`` with ``||w||_inf <= C |t|^{-1/2} ||w||^{1/2} ||J(t) w||^{1/2}``."""
    a = norm(w, NormKind.Linf())
    b = norm(w, NormKind.L2()) * norm(apply_J(w, t, factorized=True), NormKind.L2())
    return a * np.sqrt(abs(t)) / np.sqrt(b) if b > 0 else 0.0


# --------------------------------------------------------------------------
# decay measurements for R(t)
# --------------------------------------------------------------------------

def grid_for_R(t: float, x_extent: float = 12.0, xi_extent: float = 6.0,
               base: GridSpec | None = None) -> GridSpec:
    """Grid large enough to hold ``R(t) f`` for data supported in the given extents."""
    g = grid_for_spread(x_extent, xi_extent, t)
    if base is not None and base.half_width >= g.half_width and base.dx <= g.dx:
        return base
    return g


def R_decay_norms(spec: ProfileSpec, t: float, grid: GridSpec | None = None,
                  x_extent: float = 12.0, xi_extent: float = 6.0) -> dict:
    """Norms of ``R(t) f`` for ``f = spec`` sampled on the Fourier axis.

    Returns ``Linf``, ``L2``, ``J`` (``||J(t) R(t) f||``) and ``dx``
    (``||d_x R(t) f||``), evaluated on a grid sized for the spread at time ``t``.
    """
    grid = grid or grid_for_R(t, x_extent, xi_extent)
    f = fourier(grid, spec(grid.xi))
    r = apply_R(f, t)
    return {
        "t": float(t),
        "n": grid.n,
        "L": grid.half_width,
        "Linf": norm(r, NormKind.Linf()),
        "L2": norm(r, NormKind.L2()),
        "J": norm(apply_J(r, t, factorized=True), NormKind.L2()),
        "dx": norm(derivative(r), NormKind.L2()),
    }


__all__ = [
    "ResolutionWarning",
    "apply_J",
    "apply_R",
    "apply_R_via_group",
    "check_J_conjugation",
    "check_mdf_identity",
    "chirp_values",
    "dilate",
    "free_propagate",
    "free_propagate_values",
    "gn_constant",
    "grid_for_R",
    "mdf",
    "multiply_chirp",
    "R_decay_norms",
]
