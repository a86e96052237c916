"""Integrators for ``i u_t + u_xx / 2 = lam |u|^2 u``.

Two routes:

* ``evolve_physical``: Fourier split-step (Strang or Yoshida triple jump) in the
  physical picture, for bounded time windows.
* ``evolve_profile``: RK4 in ``s = log t`` for the modulated profile
  ``w_hat = exp(iA) F(U(-t) u)`` with ``A = lam \\int_1^t |v_hat|^2 dtau / tau``, valid to
  very large ``t``.  The right-hand side uses only chirps and transforms:

      i d_t w_hat = (lam / t) exp(iA) (F M(-t) F^{-1} X - |v_hat|^2 v_hat),
      X = |F(M(t) v)|^2 F(M(t) v),  v = F^{-1}(exp(-iA) w_hat).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.fft as sfft

from . import kernels
from .grid import (
    FOURIER,
    PHYSICAL,
    GridSpec,
    NormKind,
    SideError,
    WaveFunction,
    fourier,
    norm,
    physical,
)
from .linops import _kinetic, chirp_values, free_propagate_values

_YOSHIDA_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_YOSHIDA_W0 = -(2.0 ** (1.0 / 3.0)) * _YOSHIDA_W1


class ConservationError(RuntimeError):
    """L2 drift exceeded the configured tolerance (under-resolved run)."""


@dataclass(frozen=True)
class EvolveConfig:
    """Step control shared by both integrators.

    Physical steps have size ``dt_base * max(1, |t|) ** dt_growth``.  The profile
    integrator takes uniform steps ``log_step`` in ``s = log t``.
    """

    dt_base: float = 5e-3
    dt_growth: float = 0.0
    order: str = "yoshida4"
    conservation_tol: float = 1e-8
    log_step: float = 0.02

    def __post_init__(self):
        if not self.dt_base > 0:
            raise ValueError("dt_base must be positive")
        if not 0.0 <= self.dt_growth <= 1.0:
            raise ValueError("dt_growth must lie in [0, 1]")
        if self.order not in ("strang2", "yoshida4"):
            raise ValueError(f"unknown scheme {self.order!r}")
        if not self.conservation_tol >= 1e-12:
            raise ValueError("conservation_tol must be >= 1e-12")
        if not self.log_step > 0:
            raise ValueError("log_step must be positive")

    def to_dict(self) -> dict:
        return {"dt_base": self.dt_base, "dt_growth": self.dt_growth, "order": self.order,
                "conservation_tol": self.conservation_tol, "log_step": self.log_step}


@dataclass(frozen=True, eq=False)
class PhaseAccumulator:
    """Accumulated long-range phase ``A(t, xi)``; ``B = exp(iA)``."""

    grid: GridSpec
    A: np.ndarray = field(repr=False)
    t_current: float = 1.0

    def __post_init__(self):
        a = np.array(self.A, dtype=np.float64, copy=True)
        if a.shape != (self.grid.n,):
            raise ValueError("phase array has the wrong length")
        a.flags.writeable = False
        object.__setattr__(self, "A", a)

    @classmethod
    def fresh(cls, grid: GridSpec, t: float = 1.0) -> "PhaseAccumulator":
        return cls(grid, np.zeros(grid.n), float(t))

    @property
    def B(self) -> np.ndarray:
        return np.exp(1j * self.A)


@dataclass(frozen=True, eq=False)
class ProfileState:
    w_hat: WaveFunction
    phase: PhaseAccumulator
    t: float

    def __post_init__(self):
        if self.w_hat.side != FOURIER:
            raise SideError("w_hat must be fourier-side")

    @property
    def v_hat(self) -> WaveFunction:
        return self.w_hat.with_values(np.exp(-1j * self.phase.A) * self.w_hat.values)

    def psi(self, lam: float) -> np.ndarray:
        """``A(t) - lam |w_hat(t)|^2 log t``; tends to the phase corrector."""
        return self.phase.A - lam * np.abs(self.w_hat.values) ** 2 * math.log(self.t)


@dataclass
class EvolveDiagnostics:
    steps: int = 0
    max_l2_drift: float = 0.0
    max_boundary: float = 0.0
    t0: float = 0.0
    t1: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# --------------------------------------------------------------------------
# physical split-step
# --------------------------------------------------------------------------

def _strang_inplace(grid: GridSpec, u: np.ndarray, dt: float, lam: float, kin) -> np.ndarray:
    u = sfft.ifft(sfft.fft(u) * kin)
    if lam != 0.0:
        kernels.nonlinear_phase(u, lam * dt)
    return sfft.ifft(sfft.fft(u) * kin)


def _half_kinetic(grid: GridSpec, dt: float) -> np.ndarray:
    return _kinetic(grid, 0.5 * dt)


def _step(grid: GridSpec, u: np.ndarray, dt: float, lam: float, order: str) -> np.ndarray:
    if order == "strang2":
        return _strang_inplace(grid, u, dt, lam, _half_kinetic(grid, dt))
    for w in (_YOSHIDA_W1, _YOSHIDA_W0, _YOSHIDA_W1):
        u = _strang_inplace(grid, u, w * dt, lam, _half_kinetic(grid, w * dt))
    return u


def strang_step(u: WaveFunction, t: float, dt: float, lam: float) -> WaveFunction:
    """One Strang step: half kinetic, nonlinear phase ``exp(-i lam |u|^2 dt)``, half kinetic.

    ``t`` is the current time; the splitting is autonomous so it only serves
    the caller's bookkeeping.
    """
    if u.side != PHYSICAL:
        raise SideError("strang_step expects a physical-side wave function")
    if not dt > 0:
        raise ValueError("dt must be positive")
    return u.with_values(_strang_inplace(u.grid, u.values.copy(), dt, float(lam),
                                         _half_kinetic(u.grid, dt)))


def _time_steps(t0: float, t1: float, cfg: EvolveConfig) -> np.ndarray:
    """Step boundaries from ``t0`` to ``t1`` honoring the growth law."""
    if t1 == t0:
        return np.array([t0])
    if cfg.dt_growth == 0.0:
        # uniform steps, no short final step; the count tolerates rounding in |t1 - t0| / dt
        n = max(1, math.ceil(abs(t1 - t0) / cfg.dt_base * (1.0 - 1e-12)))
        return np.linspace(t0, t1, n + 1)
    sign = 1.0 if t1 > t0 else -1.0
    pts = [t0]
    t = t0
    while sign * (t1 - t) > 1e-14 * max(1.0, abs(t1)):
        h = cfg.dt_base * max(1.0, abs(t)) ** cfg.dt_growth
        t = t + sign * h
        if sign * (t - t1) > 0:
            t = t1
        pts.append(t)
    return np.array(pts)


def evolve_physical(u: WaveFunction, t0: float, t1: float, lam: float, cfg: EvolveConfig,
                    snapshots: list | None = None, snapshot_times=()):
    """Integrate from ``t0`` to ``t1`` (either direction) with the split-step scheme.

    Returns ``(u(t1), EvolveDiagnostics)``.  Raises :class:`ConservationError` when
    the relative L2 drift exceeds ``cfg.conservation_tol``.  When ``snapshots`` is a
    list, ``(t, WaveFunction)`` pairs are appended at the requested times (rounded
    to the nearest step boundary).
    """
    if u.side != PHYSICAL:
        raise SideError("evolve_physical expects a physical-side wave function")
    t0, t1, lam = float(t0), float(t1), float(lam)
    grid = u.grid
    diag = EvolveDiagnostics(t0=t0, t1=t1, max_boundary=u.boundary_magnitude())
    ts = _time_steps(t0, t1, cfg)
    vals = u.values.copy()
    n0 = math.sqrt(np.vdot(vals, vals).real)
    want = sorted(snapshot_times)
    wi = 0
    if snapshots is not None and want and abs(want[0] - t0) < 1e-12:
        snapshots.append((t0, u))
        wi = 1
    check_every = 64
    for i in range(len(ts) - 1):
        dt = ts[i + 1] - ts[i]
        # negative dt is fine: the symmetric splittings are time-reversible
        vals = _step(grid, vals, dt, lam, cfg.order)
        diag.steps += 1
        last = i == len(ts) - 2
        if diag.steps % check_every == 0 or last:
            nn = math.sqrt(np.vdot(vals, vals).real)
            drift = abs(nn - n0) / n0 if n0 > 0 else nn
            diag.max_l2_drift = max(diag.max_l2_drift, drift)
            edge = float(max(np.abs(vals[:4]).max(), np.abs(vals[-4:]).max()))
            diag.max_boundary = max(diag.max_boundary, edge)
            if drift > cfg.conservation_tol:
                raise ConservationError(
                    f"L2 drift {drift:.3e} exceeds tolerance {cfg.conservation_tol:.1e} "
                    f"at t={ts[i + 1]:.6g}")
        if snapshots is not None:
            while wi < len(want) and (ts[i + 1] - want[wi]) * np.sign(t1 - t0) >= -1e-12:
                snapshots.append((float(ts[i + 1]), physical(grid, vals)))
                wi += 1
    return physical(grid, vals), diag


# --------------------------------------------------------------------------
# profile picture
# --------------------------------------------------------------------------

def _to_fft_order(a: np.ndarray) -> np.ndarray:
    return np.fft.ifftshift(a)


def _from_fft_order(a: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(a)


class _ProfileRHS:
    """Right-hand side in ``s = log t`` on FFT-ordered arrays.

    ``d w/ds = -i lam exp(iA) (F M(-t) F^{-1} X - |v|^2 v)``, ``dA/ds = lam |w|^2``.
    """

    def __init__(self, grid: GridSpec, lam: float):
        self.grid = grid
        self.lam = lam
        self.scale = grid._scale_fft
        self.x2 = grid.x * grid.x
        self.cub = np.empty(grid.n, dtype=np.complex128)

    def __call__(self, t: float, w: np.ndarray, A: np.ndarray):
        lam = self.lam
        vh = w.copy()
        kernels.phase_mul(vh, A, -1.0)
        v = sfft.ifft(vh / self.scale)
        kernels.phase_mul(v, self.x2, 0.5 / t)
        g = sfft.fft(v) * self.scale
        kernels.cubic(g, self.cub)
        y = sfft.ifft(self.cub / self.scale)
        kernels.phase_mul(y, self.x2, -0.5 / t)
        Y = sfft.fft(y) * self.scale
        kernels.cubic(vh, self.cub)
        Y -= self.cub
        kernels.phase_mul(Y, A, 1.0)
        dw = (-1j * lam) * Y
        dA = np.zeros(self.grid.n)
        kernels.abs2_accumulate(dA, w, lam)
        return dw, dA


def profile_derivative(state: ProfileState, lam: float) -> WaveFunction:
    """``d_t w_hat = -i (lam / t) B (I1 + I2)`` at the state's time."""
    if not state.t >= 1.0:
        raise ValueError(f"profile_derivative requires t >= 1, got {state.t!r}")
    lam = float(lam)
    if lam == 0.0:
        return fourier(state.w_hat.grid, np.zeros(state.w_hat.grid.n))
    rhs = _ProfileRHS(state.w_hat.grid, lam)
    dw, _ = rhs(state.t, _to_fft_order(state.w_hat.values), _to_fft_order(state.phase.A))
    return fourier(state.w_hat.grid, _from_fft_order(dw) / state.t)


def interaction_terms(state: ProfileState) -> WaveFunction:
    """``I1 + I2 = F M(-t) F^{-1} X - |v_hat|^2 v_hat`` (unit coupling)."""
    rhs = _ProfileRHS(state.w_hat.grid, 1.0)
    A = _to_fft_order(state.phase.A)
    dw, _ = rhs(state.t, _to_fft_order(state.w_hat.values), A)
    return fourier(state.w_hat.grid, _from_fft_order(1j * np.exp(-1j * A) * dw))


def evolve_profile(state: ProfileState, t1: float, lam: float, cfg: EvolveConfig,
                   callback: Callable[[ProfileState], None] | None = None) -> ProfileState:
    """Classical RK4 in ``s = log t`` from ``state.t`` to ``t1`` (``t1 >= 1``).

    The phase ``A`` is advanced with the same stages as ``w_hat``.  Integration
    toward smaller ``t`` is allowed (it is used by the backward construction).
    Raises :class:`ConservationError` when ``||w_hat||`` drifts by more than
    ``cfg.conservation_tol`` relative.
    """
    t0, t1, lam = float(state.t), float(t1), float(lam)
    if not (t0 >= 1.0 and t1 >= 1.0):
        raise ValueError("profile integration requires t >= 1")
    grid = state.w_hat.grid
    if t1 == t0:
        return state
    if lam == 0.0:
        return ProfileState(state.w_hat, replace(state.phase, t_current=t1), t1)
    s0, s1 = math.log(t0), math.log(t1)
    nsteps = max(1, math.ceil(abs(s1 - s0) / cfg.log_step))
    h = (s1 - s0) / nsteps
    rhs = _ProfileRHS(grid, lam)
    w = _to_fft_order(state.w_hat.values).copy()
    A = _to_fft_order(state.phase.A).copy()
    n0 = math.sqrt(np.vdot(w, w).real)
    for i in range(nsteps):
        s = s0 + i * h
        ta, tm, tb = math.exp(s), math.exp(s + 0.5 * h), math.exp(s + h)
        k1w, k1a = rhs(ta, w, A)
        k2w, k2a = rhs(tm, w + 0.5 * h * k1w, A + 0.5 * h * k1a)
        k3w, k3a = rhs(tm, w + 0.5 * h * k2w, A + 0.5 * h * k2a)
        k4w, k4a = rhs(tb, w + h * k3w, A + h * k3a)
        w = w + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        A = A + (h / 6.0) * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        if callback is not None or i == nsteps - 1:
            nn = math.sqrt(np.vdot(w, w).real)
            drift = abs(nn - n0) / n0 if n0 > 0 else nn
            if drift > cfg.conservation_tol:
                raise ConservationError(
                    f"profile norm drift {drift:.3e} exceeds {cfg.conservation_tol:.1e}")
        if callback is not None:
            tt = tb if i < nsteps - 1 else t1
            callback(ProfileState(fourier(grid, _from_fft_order(w)),
                                  PhaseAccumulator(grid, _from_fft_order(A), tt), tt))
    return ProfileState(fourier(grid, _from_fft_order(w)),
                        PhaseAccumulator(grid, _from_fft_order(A), t1), t1)


def handoff(u: WaveFunction, t: float, phase: PhaseAccumulator | None = None) -> ProfileState:
    """Physical ``u(t)`` to the profile ``w_hat = B(t) F(U(-t) u)``."""
    if u.side != PHYSICAL:
        raise SideError("handoff expects a physical-side wave function")
    t = float(t)
    if not t >= 1.0:
        raise ValueError("handoff requires t >= 1")
    grid = u.grid
    phase = PhaseAccumulator.fresh(grid, t) if phase is None else phase
    if phase.grid != grid:
        raise ValueError("phase accumulator lives on a different grid")
    v = free_propagate_values(grid, u.values, -t)
    vh = np.fft.fftshift(sfft.fft(v) * grid._scale_fft)
    return ProfileState(fourier(grid, phase.B * vh), replace(phase, t_current=t), t)


def handoff_inverse(state: ProfileState) -> WaveFunction:
    """``u(t) = U(t) F^{-1}(exp(-iA) w_hat)``."""
    grid = state.w_hat.grid
    vh = np.fft.ifftshift(np.exp(-1j * state.phase.A) * state.w_hat.values)
    v = sfft.ifft(vh / grid._scale_fft)
    return physical(grid, free_propagate_values(grid, v, state.t))


__all__ = [
    "ConservationError",
    "EvolveConfig",
    "EvolveDiagnostics",
    "PhaseAccumulator",
    "ProfileState",
    "evolve_physical",
    "evolve_profile",
    "handoff",
    "handoff_inverse",
    "interaction_terms",
    "profile_derivative",
    "strang_step",
]
