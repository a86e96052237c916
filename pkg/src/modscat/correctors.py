"""First correctors of the wave and scattering operators at the origin.

All three are renormalized Duhamel integrals of the cubic term
``N(tau) = U(-tau)(|U(tau) v|^2 U(tau) v)``.  For ``|tau| >= 1`` the integrand is
evaluated through the exact identity

    N(tau) = |tau|^{-1} M(-tau) F^{-1}(|F(M(tau) v)|^2 F(M(tau) v)),

which needs no dilation and stays on the data's own grid for any ``tau``.  As
``|tau| -> inf`` the right side tends to ``|tau|^{-1} F^{-1}(|v_hat|^2 v_hat)``; this is
the counterterm removed from the improper integrals:

    w2  = -i lam \\int_{-inf}^{-1} [N(tau) - |tau|^{-1} F^{-1}(|v_hat|^2 v_hat)] dtau
          - i lam \\int_{-1}^{0} N(tau) dtau
    mu2 = -i lam \\int_0^1 N(s) ds
          - i lam \\int_1^inf [M(-tau) F^{-1} X(tau) - F^{-1}(|v_hat|^2 v_hat)] dtau / tau
    nu2 = w2 + mu2

with ``X(tau) = |F(M(tau) v)|^2 F(M(tau) v)``.  Under ``sigma = 1/|tau|`` both tails
become integrals over ``(0, 1]`` of functions analytic in ``sigma``, so Gauss-Legendre
converges geometrically.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

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
    sigma_gamma_norm,
    to_fourier,
)
from .linops import chirp_values, free_propagate_values


class TailWarning(UserWarning):
    """Quadrature tail estimate above the requested fraction of the result."""


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature settings.

    ``near_nodes`` and ``tail_nodes`` are starting node counts; both are doubled
    until successive values differ by less than ``rtol`` (relative), at most
    ``max_doublings`` times.  With ``tail_subst=False`` the improper integral is
    truncated at ``tail_cut`` instead of mapped by ``sigma = 1/|tau|``.
    """

    near_nodes: int = 64
    tail_cut: float = 1e4
    tail_subst: bool = True
    node_rule: str = "gauss_legendre"
    tail_nodes: int = 64
    rtol: float = 1e-8
    max_doublings: int = 6
    threads: int = 1

    def __post_init__(self):
        if self.near_nodes < 16 or self.tail_nodes < 16:
            raise ValueError("node counts must be >= 16")
        if not self.tail_cut >= 100:
            raise ValueError("tail_cut must be >= 100")
        if self.node_rule not in ("gauss_legendre", "simpson"):
            raise ValueError(f"unknown node rule {self.node_rule!r}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True, eq=False)
class CorrectorResult:
    field: WaveFunction
    tail_estimate: float
    integrand_decay_slope: float
    diagnostics: dict = field(default_factory=dict)

    def norms(self, gamma: float = 0.75) -> dict:
        return {
            "L2": norm(self.field, NormKind.L2()),
            "Sigma": norm(self.field, NormKind.Sigma()),
            f"Sigma_gamma({gamma:g})": sigma_gamma_norm(self.field, gamma),
        }


# --------------------------------------------------------------------------
# integrands (arrays on the physical side, ascending x)
# --------------------------------------------------------------------------

def _to_hat(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    """Continuum transform in FFT order."""
    return sfft.fft(f) * grid._scale_fft


def _from_hat(grid: GridSpec, g: np.ndarray) -> np.ndarray:
    return sfft.ifft(g / grid._scale_fft)


def _cube(g: np.ndarray) -> np.ndarray:
    out = np.empty_like(g)
    kernels.cubic(np.ascontiguousarray(g), out)
    return out


def _direct(grid: GridSpec, v: np.ndarray, tau: float) -> np.ndarray:
    u = free_propagate_values(grid, v, tau)
    return free_propagate_values(grid, _cube(u), -tau)


def _chirped_cube(grid: GridSpec, v: np.ndarray, tau: float) -> np.ndarray:
    """``M(-tau) F^{-1}(|F(M(tau) v)|^2 F(M(tau) v))``."""
    g = _to_hat(grid, v * chirp_values(grid, tau))
    return _from_hat(grid, _cube(g)) * chirp_values(grid, -tau)


def _counterterm(grid: GridSpec, v: np.ndarray) -> np.ndarray:
    """``F^{-1}(|v_hat|^2 v_hat)``."""
    return _from_hat(grid, _cube(_to_hat(grid, v)))


def _cubic_values(grid: GridSpec, v: np.ndarray, tau: float, route: str = "auto") -> np.ndarray:
    if route == "auto":
        route = "direct" if abs(tau) <= 1.0 else "factorized"
    if route == "direct" or tau == 0.0:
        return _direct(grid, v, tau)
    return _chirped_cube(grid, v, tau) / abs(tau)


def _phys(v: WaveFunction, op: str) -> WaveFunction:
    if v.side != PHYSICAL:
        raise SideError(f"{op} expects a physical-side wave function")
    return v


def cubic_duhamel_integrand(v: WaveFunction, tau: float, route: str = "auto") -> WaveFunction:
    """``U(-tau)(|U(tau) v|^2 U(tau) v)``.

    ``route="direct"`` propagates on the grid; ``route="factorized"`` uses the
    chirp identity (exact for every ``tau != 0``); ``auto`` picks the direct route
    for ``|tau| <= 1``.
    """
    _phys(v, "cubic_duhamel_integrand")
    if route not in ("auto", "direct", "factorized"):
        raise ValueError(f"unknown route {route!r}")
    return v.with_values(_cubic_values(v.grid, v.values, float(tau), route))


def renormalized_tail_integrand(v: WaveFunction, tau: float, counterterm_sign: int = -1) -> WaveFunction:
    """``U(-tau)(|U(tau) v|^2 U(tau) v) - |tau|^{-1} F^{-1}(|v_hat|^2 v_hat)`` for ``tau <= -1``.

    This combination is ``O(|tau|^{-2})``.  ``counterterm_sign=+1`` adds the
    counterterm instead; the sum then only decays like ``|tau|^{-1}`` and is kept
    for the comparison in the tests.
    """
    _phys(v, "renormalized_tail_integrand")
    tau = float(tau)
    if not tau <= -1.0:
        raise ValueError(f"tail integrand requires tau <= -1, got {tau!r}")
    grid = v.grid
    vals = _cubic_values(grid, v.values, tau) + counterterm_sign * _counterterm(grid, v.values) / abs(tau)
    return v.with_values(vals)


def mu2_far_integrand(v0: WaveFunction, tau: float) -> WaveFunction:
    """``M(-tau) F^{-1} X(tau) - F^{-1}(|v0_hat|^2 v0_hat)`` for ``tau >= 1`` (without ``1/tau``)."""
    _phys(v0, "mu2_far_integrand")
    tau = float(tau)
    if not tau >= 1.0:
        raise ValueError("far integrand requires tau >= 1")
    grid = v0.grid
    return v0.with_values(_chirped_cube(grid, v0.values, tau) - _counterterm(grid, v0.values))


def J_terms(v0: WaveFunction, t: float) -> tuple[WaveFunction, WaveFunction]:
    """Fourier-side ``(J1(t), J2(t))``.

    ``J1 = F (M(-t) - 1) F^{-1} X``, ``J2 = X - |v0_hat|^2 v0_hat`` with
    ``X = |F(M(t) v0)|^2 F(M(t) v0)``.
    """
    _phys(v0, "J_terms")
    grid = v0.grid
    t = float(t)
    X = _cube(_to_hat(grid, v0.values * chirp_values(grid, t)))
    y = _from_hat(grid, X)
    J1 = _to_hat(grid, (chirp_values(grid, -t) - 1.0) * y)
    J2 = X - _cube(_to_hat(grid, v0.values))
    return fourier(grid, np.fft.fftshift(J1)), fourier(grid, np.fft.fftshift(J2))


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

def _nodes(rule: str, n: int, a: float, b: float):
    if rule == "gauss_legendre":
        x, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w
    m = n if n % 2 == 0 else n + 1
    x = np.linspace(a, b, m + 1)
    w = np.full(m + 1, 2.0)
    w[1:-1:2] = 4.0
    w[0] = w[-1] = 1.0
    return x, w * (b - a) / (3.0 * m)


def _map(fn, xs, threads: int):
    if threads <= 1:
        return [fn(x) for x in xs]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, xs))


def _integrate(fn, a: float, b: float, q: QuadConfig, n0: int, measure=None,
               open_left: bool = False):
    """Node-doubling quadrature of a vector-valued ``fn`` on ``[a, b]``.

    Returns ``(value, change, nodes)`` where ``change`` is the norm of the last
    refinement difference.  Sums run in node order for reproducibility.  With
    ``open_left`` the integrand is only defined as a limit at ``a``; a node there
    (Simpson) is filled by cubic extrapolation from the next three nodes.
    """
    measure = measure or (lambda d: float(np.linalg.norm(d)))
    prev = None
    n = n0
    for _ in range(q.max_doublings + 1):
        x, w = _nodes(q.node_rule, n, a, b)
        if open_left and x[0] == a:
            vals = _map(fn, list(x[1:]), q.threads)
            vals.insert(0, 3.0 * vals[0] - 3.0 * vals[1] + vals[2])
        else:
            vals = _map(fn, list(x), q.threads)
        total = np.zeros_like(vals[0])
        for wi, fi in zip(w, vals):
            total += wi * fi
        if prev is not None:
            change = measure(total - prev)
            if change <= q.rtol * max(measure(total), 1e-300):
                return total, change, n
        prev = total
        n *= 2
    change = measure(total - prev) if prev is not None else float("inf")
    return total, change, n // 2


def _slope(ts, ys) -> float:
    ys = np.asarray(ys, dtype=float)
    if np.any(ys <= 0):
        return float("nan")
    return float(np.polyfit(np.log(ts), np.log(ys), 1)[0])


def _sigma_measure(grid: GridSpec):
    def m(d):
        return norm(physical(grid, d), NormKind.Sigma())
    return m


def _l2_measure(grid: GridSpec):
    def m(d):
        return math.sqrt(grid.dx) * float(np.linalg.norm(d))
    return m


def _flag(res_norm: float, tail: float, name: str):
    if tail > 1e-6 * res_norm:
        warnings.warn(f"{name}: tail estimate {tail:.2e} exceeds 1e-6 of |field| = {res_norm:.3e}",
                      TailWarning, stacklevel=3)


def _zero_result(grid: GridSpec) -> CorrectorResult:
    return CorrectorResult(physical(grid, np.zeros(grid.n)), 0.0, float("nan"),
                           {"trivial": True})


def corrector_w2(v_minus: WaveFunction, lam: float, q: QuadConfig = QuadConfig()) -> CorrectorResult:
    """Coefficient of ``eps^3`` in the expansion of the modified wave operator at 0."""
    _phys(v_minus, "corrector_w2")
    lam = float(lam)
    grid = v_minus.grid
    v = v_minus.values
    if lam == 0.0 or not np.any(v):
        return _zero_result(grid)
    meas = _sigma_measure(grid)
    near, near_change, near_n = _integrate(lambda s: _cubic_values(grid, v, s), -1.0, 0.0,
                                           q, q.near_nodes, meas)
    F = _counterterm(grid, v)
    if q.tail_subst:
        def g(sig):
            # R4(-1/sig) / sig^2 with R4 = N - sig F
            return (_chirped_cube(grid, v, -1.0 / sig) - F) / sig
        tail, tail_est, tail_n = _integrate(g, 0.0, 1.0, q, q.tail_nodes, meas, open_left=True)
    else:
        T = q.tail_cut

        def g(u):
            tau = -math.exp(u)
            return (_cubic_values(grid, v, tau) - F / abs(tau)) * abs(tau)
        tail, _, tail_n = _integrate(g, 0.0, math.log(T), q, q.tail_nodes, meas)
        r_end = _cubic_values(grid, v, -T) - F / T
        tail_est = meas(r_end) * T
    vals = -1j * lam * (near + tail)
    taus = np.logspace(1, 3, 9)
    r_norms = [norm(renormalized_tail_integrand(v_minus, -t), NormKind.L2()) for t in taus]
    res = physical(grid, vals)
    tail_est *= abs(lam)
    sig = norm(res, NormKind.Sigma())
    _flag(sig, tail_est, "w2")
    diag = {"near_nodes": near_n, "tail_nodes": tail_n, "near_change": abs(lam) * near_change,
            "tail_mode": "substitution" if q.tail_subst else "truncation", "Sigma": sig}
    return CorrectorResult(res, float(tail_est), _slope(taus, r_norms), diag)


def _near_mu2(grid: GridSpec, v: np.ndarray, q: QuadConfig, meas):
    return _integrate(lambda s: _cubic_values(grid, v, s), 0.0, 1.0, q, q.near_nodes, meas)


def corrector_mu2(v0: WaveFunction, lam: float, q: QuadConfig = QuadConfig()) -> CorrectorResult:
    """Coefficient of ``eps^3`` in the expansion of the inverse wave operator at 0."""
    _phys(v0, "corrector_mu2")
    lam = float(lam)
    grid = v0.grid
    v = v0.values
    if lam == 0.0 or not np.any(v):
        return _zero_result(grid)
    meas = _l2_measure(grid)
    near, near_change, near_n = _near_mu2(grid, v, q, meas)
    F = _counterterm(grid, v)
    if q.tail_subst:
        def g(sig):
            return (_chirped_cube(grid, v, 1.0 / sig) - F) / sig
        tail, tail_est, tail_n = _integrate(g, 0.0, 1.0, q, q.tail_nodes, meas, open_left=True)
    else:
        T = q.tail_cut

        def g(u):
            return _chirped_cube(grid, v, math.exp(u)) - F
        tail, _, tail_n = _integrate(g, 0.0, math.log(T), q, q.tail_nodes, meas)
        tail_est = meas(_chirped_cube(grid, v, T) - F)
    vals = -1j * lam * (near + tail)
    taus = np.logspace(1, 3, 9)
    f_norms = [norm(mu2_far_integrand(v0, t), NormKind.L2()) / t for t in taus]
    res = physical(grid, vals)
    tail_est *= abs(lam)
    l2 = norm(res, NormKind.L2())
    _flag(l2, tail_est, "mu2")
    diag = {"near_nodes": near_n, "tail_nodes": tail_n, "near_change": abs(lam) * near_change,
            "tail_mode": "substitution" if q.tail_subst else "truncation", "L2": l2}
    return CorrectorResult(res, float(tail_est), _slope(taus, f_norms), diag)


def corrector_nu2(v_minus: WaveFunction, lam: float, q: QuadConfig = QuadConfig()) -> CorrectorResult:
    """Coefficient of ``eps^3`` for the scattering map: ``w2(v) + mu2(v)``."""
    w2 = corrector_w2(v_minus, lam, q)
    mu2 = corrector_mu2(v_minus, lam, q)
    f = w2.field + mu2.field
    slope = max(w2.integrand_decay_slope, mu2.integrand_decay_slope) \
        if not (math.isnan(w2.integrand_decay_slope) or math.isnan(mu2.integrand_decay_slope)) \
        else float("nan")
    diag = {"w2": w2.diagnostics, "mu2": mu2.diagnostics}
    return CorrectorResult(f, w2.tail_estimate + mu2.tail_estimate, slope, diag)


def truncated_limit(v_minus: WaveFunction, lam: float, eps: float, gamma: float,
                    q: QuadConfig = QuadConfig()) -> WaveFunction:
    """Matching-time form of the renormalized limit at ``t = 0``.

    ``-i lam gamma (log eps) F^{-1}(|v_hat|^2 v_hat) - i lam \\int_{-eps^{-gamma}}^0 N(tau) dtau``,
    i.e. the profile ``U(-t) u2(t) / eps^3`` at ``t = 0`` built at matching time
    ``-1/eps^gamma``; differs from ``w2`` by ``O(eps^gamma)``.
    """
    _phys(v_minus, "truncated_limit")
    grid = v_minus.grid
    v = v_minus.values
    lam = float(lam)
    T = float(eps) ** (-float(gamma))
    meas = _sigma_measure(grid)
    near, _, _ = _integrate(lambda s: _cubic_values(grid, v, s), -1.0, 0.0, q, q.near_nodes, meas)
    if T > 1.0:
        def g(u):
            tau = -math.exp(u)
            return _cubic_values(grid, v, tau) * abs(tau)
        mid, _, _ = _integrate(g, 0.0, math.log(T), q, q.tail_nodes, meas)
    else:
        mid = np.zeros(grid.n, dtype=np.complex128)
    F = _counterterm(grid, v)
    vals = -1j * lam * gamma * math.log(eps) * F - 1j * lam * (near + mid)
    return physical(grid, vals)


__all__ = [
    "CorrectorResult",
    "QuadConfig",
    "TailWarning",
    "J_terms",
    "corrector_mu2",
    "corrector_nu2",
    "corrector_w2",
    "cubic_duhamel_integrand",
    "mu2_far_integrand",
    "renormalized_tail_integrand",
    "truncated_limit",
]
