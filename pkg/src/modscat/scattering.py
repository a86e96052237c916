"""Modified wave operator, its inverse, and the modified scattering map.

The backward construction runs in the profile picture.  With the time reversal
``u~(s) = conj(u(-s))`` (again a solution), the data launched at ``t = -T``,

    u(-T) = U(-T) F^{-1}[u_hat_- exp(i lam |u_hat_-|^2 log T)],

become forward data at ``s = T`` whose profile is integrated down to ``s = 1`` by
the same RK4-in-log-time scheme used for the forward direction.  The physical
split-step then covers ``[-1, 0]``.

The forward direction runs the split-step on ``[0, 1]``, hands off to the profile
picture at ``t = 1`` with ``A(1) = 0``, and integrates to ``T_plus``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .evolve import (
    EvolveConfig,
    PhaseAccumulator,
    ProfileState,
    evolve_physical,
    evolve_profile,
    handoff,
    handoff_inverse,
)
from .grid import (
    FOURIER,
    PHYSICAL,
    GridSpec,
    NormKind,
    SideError,
    WaveFunction,
    _json_default,
    fourier,
    norm,
    physical,
    to_fourier,
    to_physical,
)
from .linops import dilate, free_propagate, multiply_chirp


class NonConvergenceWarning(UserWarning):
    """Launch or extraction time too small for the requested accuracy."""


@dataclass(frozen=True)
class WaveOpConfig:
    """Settings for the wave operators.

    ``T_minus`` is the launch time magnitude, ``T_plus`` the extraction time.
    ``gamma`` is only consumed by the matching-time comparison in the corrector
    module.  ``solver_tol`` is the accuracy the integrators are trusted to; the
    launch check flags a run when doubling ``T_minus`` moves ``u0`` by more than
    ten times that.
    """

    T_minus: float = 1e6
    gamma: float = 1.0
    evolve: EvolveConfig = field(default_factory=EvolveConfig)
    T_plus: float = 1e6
    solver_tol: float = 1e-10
    check_launch: bool = False

    def __post_init__(self):
        if not self.T_minus >= 10:
            raise ValueError("T_minus must be >= 10")
        if not 0.0 < self.gamma < 2.0:
            raise ValueError("gamma must lie in (0, 2)")
        if not self.T_plus >= 100:
            raise ValueError("T_plus must be >= 100")

    def to_dict(self) -> dict:
        return {"T_minus": self.T_minus, "gamma": self.gamma, "T_plus": self.T_plus,
                "solver_tol": self.solver_tol, "check_launch": self.check_launch,
                "evolve": self.evolve.to_dict()}


@dataclass(frozen=True, eq=False)
class ScatteringProfile:
    """Limit profile ``W``, phase corrector ``Phi`` and ``u_plus = F^{-1}(W exp(-i Phi))``."""

    W: WaveFunction
    Phi: np.ndarray = field(repr=False)
    u_plus: WaveFunction = field(repr=False)
    t_extracted: float
    convergence_estimate: float
    converged: bool = True

    @classmethod
    def build(cls, W: WaveFunction, Phi: np.ndarray, t_extracted: float,
              convergence_estimate: float, converged: bool = True) -> "ScatteringProfile":
        Phi = np.array(Phi, dtype=np.float64)
        Phi.flags.writeable = False
        u_plus = to_physical(W.with_values(W.values * np.exp(-1j * Phi)))
        return cls(W, Phi, u_plus, float(t_extracted), float(convergence_estimate), converged)

    def summary(self) -> dict:
        return {
            "t_extracted": self.t_extracted,
            "convergence_estimate": self.convergence_estimate,
            "converged": self.converged,
            "W_L2": norm(self.W, NormKind.L2()),
            "Phi_Linf": float(np.abs(self.Phi).max()),
            "u_plus_L2": norm(self.u_plus, NormKind.L2()),
            "u_plus_Sigma": norm(self.u_plus, NormKind.Sigma()),
        }


def _check_physical(u: WaveFunction, op: str):
    if u.side != PHYSICAL:
        raise SideError(f"{op} expects a physical-side wave function")


def launch_profile(u_minus: WaveFunction, lam: float, T: float) -> np.ndarray:
    """``u_hat_- exp(i lam |u_hat_-|^2 log T)`` (ascending xi order)."""
    uh = to_fourier(u_minus).values
    return uh * np.exp(1j * lam * np.abs(uh) ** 2 * math.log(T))


def asymptotic_input(u_minus: WaveFunction, lam: float, T: float) -> WaveFunction:
    """``u2(-T) = U(-T) F^{-1}[u_hat_- exp(i lam |u_hat_-|^2 log T)]``.

    The grid must hold the free spread at time ``T`` for the result to be free of
    wrap-around; the integrators never need this physical-side field.
    """
    _check_physical(u_minus, "asymptotic_input")
    if not T >= 10:
        raise ValueError("T must be >= 10")
    w = fourier(u_minus.grid, launch_profile(u_minus, float(lam), float(T)))
    return free_propagate(to_physical(w), -float(T))


def approximate_u1(u_minus: WaveFunction, lam: float, t: float) -> WaveFunction:
    """``u1(t) = (it)^{-1/2} exp(i x^2/2t) u_hat_-(x/t) exp(i lam |u_hat_-(x/t)|^2 log|t|)``."""
    _check_physical(u_minus, "approximate_u1")
    t = float(t)
    d = dilate(to_fourier(u_minus), t)
    mod2 = abs(t) * np.abs(d.values) ** 2
    return multiply_chirp(d.with_values(d.values * np.exp(1j * lam * mod2 * math.log(abs(t)))), t)


def _reverse_fourier(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``conj(f(-xi))`` on the ascending xi grid (the Nyquist mode maps to itself)."""
    out = np.empty_like(values)
    out[0] = np.conj(values[0])
    out[1:] = np.conj(values[1:][::-1])
    return out


def _backward_to_minus_one(u_minus: WaveFunction, lam: float, T: float,
                           cfg: EvolveConfig) -> WaveFunction:
    """``u(-1)`` for the solution launched from ``u2(-T)``."""
    grid = u_minus.grid
    wl = launch_profile(u_minus, lam, T)
    # reversed picture: v~_hat(T) = conj(w_launch(-xi)); A(T) anchored so w~ is smooth in log t
    vt = _reverse_fourier(wl, grid)
    A = lam * np.abs(vt) ** 2 * math.log(T)
    state = ProfileState(fourier(grid, np.exp(1j * A) * vt), PhaseAccumulator(grid, A, T), T)
    state = evolve_profile(state, 1.0, lam, cfg)
    u_rev = handoff_inverse(state)
    return physical(grid, np.conj(u_rev.values))


def wave_operator_with_diagnostics(u_minus: WaveFunction, lam: float, cfg: WaveOpConfig):
    """``W_-^mod(u_-)`` plus a diagnostics dict."""
    _check_physical(u_minus, "modified_wave_operator")
    lam = float(lam)
    diag: dict = {"T_minus": cfg.T_minus}

    def run(T):
        um1 = _backward_to_minus_one(u_minus, lam, T, cfg.evolve)
        u0, d = evolve_physical(um1, -1.0, 0.0, lam, cfg.evolve)
        return u0, d

    u0, d = run(cfg.T_minus)
    diag["physical"] = d.to_dict()
    if cfg.check_launch:
        u0b, _ = run(2.0 * cfg.T_minus)
        sens = norm(u0 - u0b, NormKind.Sigma())
        diag["launch_sensitivity"] = sens
        diag["converged"] = bool(sens <= 10.0 * cfg.solver_tol)
    return u0, diag


def modified_wave_operator(u_minus: WaveFunction, lam: float, cfg: WaveOpConfig) -> WaveFunction:
    """Initial value ``u(0)`` of the solution that behaves like ``exp(iS_-) U(t) u_-`` as ``t -> -inf``.

    Emits :class:`NonConvergenceWarning` when the launch check is enabled and
    doubling ``T_minus`` moves ``u(0)`` by more than ``10 * solver_tol`` in Sigma.
    """
    u0, diag = wave_operator_with_diagnostics(u_minus, lam, cfg)
    if cfg.check_launch and not diag.get("converged", True):
        warnings.warn(
            f"launch time T_minus={cfg.T_minus:g} not converged "
            f"(sensitivity {diag['launch_sensitivity']:.2e})",
            NonConvergenceWarning, stacklevel=2)
    return u0


def extract_final_state(u0: WaveFunction, lam: float, T_plus: float, cfg: EvolveConfig,
                        richardson: bool = False) -> ScatteringProfile:
    """Limit profile, phase corrector and asymptotic state of the solution with ``u(0) = u0``.

    ``W = w_hat(T_plus)``, ``Phi = A(T_plus) - lam |W|^2 log T_plus`` and the reported
    ``convergence_estimate`` is ``||w_hat(T_plus) - w_hat(T_plus / 2)||_{L2}``.  With
    ``richardson=True`` the ``1/t`` leading term of the tail is eliminated from
    ``W`` (``2 w_hat(T) - w_hat(T/2)``); off by default.
    """
    _check_physical(u0, "extract_final_state")
    T_plus, lam = float(T_plus), float(lam)
    if not T_plus >= 100:
        raise ValueError("T_plus must be >= 100")
    grid = u0.grid
    u1, _ = evolve_physical(u0, 0.0, 1.0, lam, cfg)
    st = handoff(u1, 1.0, PhaseAccumulator.fresh(grid))
    half = evolve_profile(st, 0.5 * T_plus, lam, cfg)
    full = evolve_profile(half, T_plus, lam, cfg)
    inc = norm(full.w_hat - half.w_hat, NormKind.L2())
    W = full.w_hat
    Phi = full.psi(lam)
    if richardson:
        W = W * 2.0 - half.w_hat
    ok = inc <= 1e-2 * norm(W, NormKind.L2())
    if not ok:
        warnings.warn(f"T_plus={T_plus:g} too small: increment {inc:.2e}",
                      NonConvergenceWarning, stacklevel=2)
    return ScatteringProfile.build(W, Phi, T_plus, inc, ok)


def inverse_wave_operator(u0: WaveFunction, lam: float, cfg: WaveOpConfig) -> WaveFunction:
    """``(W_+^mod)^{-1}(u0) = u_plus``."""
    return extract_final_state(u0, lam, cfg.T_plus, cfg.evolve).u_plus


def modified_scattering(u_minus: WaveFunction, lam: float, cfg: WaveOpConfig) -> ScatteringProfile:
    """``S^mod(u_-)``: wave operator followed by final-state extraction."""
    u0 = modified_wave_operator(u_minus, lam, cfg)
    return extract_final_state(u0, lam, cfg.T_plus, cfg.evolve)


def save_scattering_profile(sp: ScatteringProfile, path, extra: dict | None = None):
    """CSV (x, xi, W, Phi, u_plus) plus a JSON sidecar with grid and diagnostics."""
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    g = sp.W.grid
    data = np.column_stack([g.x, g.xi, sp.W.values.real, sp.W.values.imag, sp.Phi,
                            sp.u_plus.values.real, sp.u_plus.values.imag])
    np.savetxt(base.with_suffix(".csv"), data, delimiter=",", fmt="%.17g", comments="",
               header="x,xi,W_re,W_im,Phi,u_plus_re,u_plus_im")
    meta = {"grid": g.to_dict(), "W_side": FOURIER, "u_plus_side": PHYSICAL, **sp.summary()}
    if extra:
        meta.update(extra)
    base.with_suffix(".json").write_text(json.dumps(meta, indent=2, default=_json_default) + "\n")
    return base.with_suffix(".csv"), base.with_suffix(".json")


def load_scattering_profile(path) -> ScatteringProfile:
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    meta = json.loads(base.with_suffix(".json").read_text())
    g = GridSpec(meta["grid"]["n"], meta["grid"]["half_width"])
    d = np.loadtxt(base.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    W = fourier(g, d[:, 2] + 1j * d[:, 3])
    u_plus = physical(g, d[:, 5] + 1j * d[:, 6])
    Phi = d[:, 4].copy()
    Phi.flags.writeable = False
    return ScatteringProfile(W, Phi, u_plus, meta["t_extracted"], meta["convergence_estimate"],
                             meta["converged"])


__all__ = [
    "NonConvergenceWarning",
    "ScatteringProfile",
    "WaveOpConfig",
    "approximate_u1",
    "asymptotic_input",
    "extract_final_state",
    "inverse_wave_operator",
    "launch_profile",
    "load_scattering_profile",
    "modified_scattering",
    "modified_wave_operator",
    "save_scattering_profile",
    "wave_operator_with_diagnostics",
]
