"""Periodic-box discretization of functions on the line.

The box is ``[-L, L)`` sampled at ``n`` points (``n`` a power of two).  The dual
grid holds the frequencies ``xi_k = pi k / L`` for ``k = -n/2 .. n/2 - 1``.
Both sides are stored in ascending order.

The discrete transform approximates

    F f(xi) = (2 pi)^{-1/2} \\int f(x) exp(-i x xi) dx

with the rectangle rule, so that ``dx * sum |f|^2 == dxi * sum |F f|^2`` holds
exactly (Plancherel on the grid).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from numpy.polynomial import hermite as _herm

PHYSICAL = "physical"
FOURIER = "fourier"
_SIDES = (PHYSICAL, FOURIER)

BOUNDARY_TOL = 1e-12


class BoundaryDecayWarning(UserWarning):
    """Samples do not decay inside the box (wrap-around / aliasing risk)."""


class SideError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on ``[-half_width, half_width)`` with ``n`` points."""

    n: int
    half_width: float

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 16 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 16, got {n!r}")
        if not np.isfinite(self.half_width) or self.half_width <= 0:
            raise ValueError(f"half_width must be positive, got {self.half_width!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "half_width", float(self.half_width))

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def dxi(self) -> float:
        return np.pi / self.half_width

    @property
    def xi_max(self) -> float:
        """Magnitude of the Nyquist frequency ``pi n / (2 L)``."""
        return 0.5 * self.n * self.dxi

    @cached_property
    def x(self) -> np.ndarray:
        a = -self.half_width + self.dx * np.arange(self.n)
        a.flags.writeable = False
        return a

    @cached_property
    def k(self) -> np.ndarray:
        a = np.arange(-self.n // 2, self.n // 2)
        a.flags.writeable = False
        return a

    @cached_property
    def xi(self) -> np.ndarray:
        a = self.dxi * self.k
        a.flags.writeable = False
        return a

    @cached_property
    def xi_fft(self) -> np.ndarray:
        """Frequencies in raw FFT order (0, 1, ..., -1)."""
        a = np.fft.ifftshift(self.xi)
        a.flags.writeable = False
        return a

    @cached_property
    def _scale_fft(self) -> np.ndarray:
        # (-1)^k from the shift of origin to -L, times dx / sqrt(2 pi)
        s = np.where(np.fft.ifftshift(self.k) % 2 == 0, 1.0, -1.0)
        s = s * (self.dx / np.sqrt(2.0 * np.pi))
        s.flags.writeable = False
        return s

    def to_dict(self) -> dict:
        return {"n": self.n, "half_width": self.half_width}


def make_grid(n: int, half_width: float) -> GridSpec:
    """Build a :class:`GridSpec`; rejects non power-of-two ``n`` and ``half_width <= 0``."""
    return GridSpec(n, half_width)


def grid_for_spread(x_extent: float, xi_extent: float, t_max: float = 0.0,
                    margin: float = 1.25, n_min: int = 256) -> GridSpec:
    """Smallest power-of-two grid holding a function dispersing up to ``t_max``.

    ``x_extent`` and ``xi_extent`` are the half-widths (in x and xi) outside of
    which the data are negligible.  Free flow up to time ``t_max`` moves mass to
    ``|x| <= x_extent + t_max * xi_extent``; the box gets ``margin`` times that, and
    the frequency grid resolves ``margin * xi_extent``.
    """
    half_width = margin * (x_extent + abs(t_max) * xi_extent)
    n_needed = 2.0 * half_width * margin * xi_extent / np.pi
    n = max(n_min, 16)
    while n < n_needed:
        n *= 2
    return GridSpec(n, half_width)


# --------------------------------------------------------------------------
# raw transforms on arrays; FFT order on the Fourier side
# --------------------------------------------------------------------------

def fft_raw(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    """Physical samples (ascending x) -> continuum transform values in FFT order."""
    out = sfft.fft(f)
    out *= grid._scale_fft
    return out


def ifft_raw(grid: GridSpec, g: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft_raw`."""
    return sfft.ifft(g / grid._scale_fft)


def fourier_values(grid: GridSpec, f: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(fft_raw(grid, f))


def physical_values(grid: GridSpec, g: np.ndarray) -> np.ndarray:
    return ifft_raw(grid, np.fft.ifftshift(g))


# --------------------------------------------------------------------------
# WaveFunction
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WaveFunction:
    """Complex samples of one function on one side of a grid."""

    grid: GridSpec
    side: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.side not in _SIDES:
            raise SideError(f"side must be one of {_SIDES}, got {self.side!r}")
        v = np.array(self.values, dtype=np.complex128, copy=True)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} samples, got shape {v.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def axis(self) -> np.ndarray:
        return self.grid.x if self.side == PHYSICAL else self.grid.xi

    @property
    def spacing(self) -> float:
        return self.grid.dx if self.side == PHYSICAL else self.grid.dxi

    def with_values(self, values) -> "WaveFunction":
        return WaveFunction(self.grid, self.side, values)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, c):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.with_values(self.values / c)

    def __neg__(self):
        return self.with_values(-self.values)

    def conj(self) -> "WaveFunction":
        """Complex conjugate of the represented function, kept on the same side.

        On the Fourier side this is ``F(conj f)(xi) = conj(F f(-xi))``.
        """
        if self.side == PHYSICAL:
            return self.with_values(np.conj(self.values))
        return to_fourier(to_physical(self).conj())

    def boundary_magnitude(self, width: int = 4) -> float:
        v = np.abs(self.values)
        return float(max(v[:width].max(), v[-width:].max()))


def _check_compatible(a: WaveFunction, b: WaveFunction):
    if not isinstance(b, WaveFunction):
        raise TypeError("expected a WaveFunction")
    if a.grid != b.grid or a.side != b.side:
        raise SideError("wave functions live on different grids or sides")


def physical(grid: GridSpec, values) -> WaveFunction:
    return WaveFunction(grid, PHYSICAL, values)


def fourier(grid: GridSpec, values) -> WaveFunction:
    return WaveFunction(grid, FOURIER, values)


def zeros(grid: GridSpec, side: str = PHYSICAL) -> WaveFunction:
    return WaveFunction(grid, side, np.zeros(grid.n, dtype=np.complex128))


def to_fourier(w: WaveFunction) -> WaveFunction:
    if w.side != PHYSICAL:
        raise SideError("to_fourier expects a physical-side wave function")
    return WaveFunction(w.grid, FOURIER, fourier_values(w.grid, w.values))


def to_physical(w: WaveFunction) -> WaveFunction:
    if w.side != FOURIER:
        raise SideError("to_physical expects a fourier-side wave function")
    return WaveFunction(w.grid, PHYSICAL, physical_values(w.grid, w.values))


def as_side(w: WaveFunction, side: str) -> WaveFunction:
    if w.side == side:
        return w
    return to_fourier(w) if side == FOURIER else to_physical(w)


# --------------------------------------------------------------------------
# profiles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ProfileSpec:
    """Closed-form test data.

    gaussian: ``amplitude * exp(-(x - center)^2 / (2 width^2)) * exp(i momentum x)``
    sech:     ``amplitude * sech(x / width)``
    hermite:  L2-normalized Hermite function of the given order, scale ``width``
    """

    family: str
    amplitude: float = 1.0
    width: float = 1.0
    center: float = 0.0
    momentum: float = 0.0
    order: int = 0

    def __post_init__(self):
        if self.family not in ("gaussian", "sech", "hermite"):
            raise ValueError(f"unknown profile family {self.family!r}")
        if not self.width > 0:
            raise ValueError("width must be positive")
        if self.family == "hermite" and self.order < 0:
            raise ValueError("hermite order must be >= 0")

    @classmethod
    def gaussian(cls, amplitude=1.0, width=1.0, center=0.0, momentum=0.0):
        return cls("gaussian", amplitude, width, center, momentum)

    @classmethod
    def sech(cls, amplitude=1.0, width=1.0):
        return cls("sech", amplitude, width)

    @classmethod
    def hermite(cls, order=0, width=1.0):
        return cls("hermite", 1.0, width, order=order)

    @classmethod
    def parse(cls, text: str) -> "ProfileSpec":
        """Parse ``family:p1,p2,...`` (e.g. ``gaussian:1,0.7071,0,0``).

        The bare word ``reference`` gives ``exp(-x^2)``.
        """
        text = text.strip()
        if text == "reference":
            return reference_profile()
        family, _, rest = text.partition(":")
        args = [float(a) for a in rest.split(",") if a.strip()] if rest else []
        if family == "gaussian":
            return cls.gaussian(*args)
        if family == "sech":
            return cls.sech(*args)
        if family == "hermite":
            order = int(args[0]) if args else 0
            return cls.hermite(order, *args[1:])
        raise ValueError(f"unknown profile family {family!r}")

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.family == "gaussian":
            y = (x - self.center) / self.width
            return self.amplitude * np.exp(-0.5 * y * y + 1j * self.momentum * x)
        if self.family == "sech":
            return (self.amplitude / np.cosh(x / self.width)).astype(complex)
        y = x / self.width
        c = np.zeros(self.order + 1)
        c[-1] = 1.0
        norm = np.sqrt(2.0**self.order * _factorial(self.order) * np.sqrt(np.pi) * self.width)
        return (_herm.hermval(y, c) * np.exp(-0.5 * y * y) / norm).astype(complex)

    def l2_norm(self) -> float:
        """Exact L2 norm on the whole line."""
        if self.family == "gaussian":
            return abs(self.amplitude) * np.sqrt(self.width * np.sqrt(np.pi))
        if self.family == "sech":
            return abs(self.amplitude) * np.sqrt(2.0 * self.width)
        return 1.0

    def to_dict(self) -> dict:
        return {"family": self.family, "amplitude": self.amplitude, "width": self.width,
                "center": self.center, "momentum": self.momentum, "order": self.order}


def _factorial(k: int) -> float:
    out = 1.0
    for j in range(2, k + 1):
        out *= j
    return out


def reference_profile() -> ProfileSpec:
    """``exp(-x^2)``, the default test datum."""
    return ProfileSpec.gaussian(1.0, 1.0 / np.sqrt(2.0))


def sample_profile(spec: ProfileSpec, grid: GridSpec) -> WaveFunction:
    """Sample ``spec`` on the physical side of ``grid``.

    Emits :class:`BoundaryDecayWarning` when the samples at the box edge exceed
    ``1e-12`` or when the box misses part of the profile's mass.
    """
    w = physical(grid, spec(grid.x))
    exact = spec.l2_norm()
    captured = norm(w, NormKind.L2())
    if w.boundary_magnitude() > BOUNDARY_TOL or (exact > 0 and captured < exact * (1 - 1e-10)):
        warnings.warn(
            f"profile {spec.family} does not decay inside the box [-{grid.half_width}, "
            f"{grid.half_width}) (edge {w.boundary_magnitude():.2e}, "
            f"captured L2 {captured:.6g} of {exact:.6g})",
            BoundaryDecayWarning,
            stacklevel=2,
        )
    return w


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class NormKind:
    """Which norm to evaluate; ``s`` is used by ``Hs`` and ``FHs``."""

    tag: str
    s: float = 0.0

    _TAGS = ("L2", "Linf", "Hs", "FHs", "Sigma", "Hcal")

    def __post_init__(self):
        if self.tag not in self._TAGS:
            raise ValueError(f"unknown norm {self.tag!r}")
        if self.s < 0:
            raise ValueError("s must be >= 0")

    @classmethod
    def L2(cls):
        return cls("L2")

    @classmethod
    def Linf(cls):
        return cls("Linf")

    @classmethod
    def Hs(cls, s):
        return cls("Hs", float(s))

    @classmethod
    def FHs(cls, s):
        return cls("FHs", float(s))

    @classmethod
    def Sigma(cls):
        return cls("Sigma")

    @classmethod
    def Hcal(cls):
        return cls("Hcal")

    @classmethod
    def parse(cls, text: str) -> "NormKind":
        text = text.strip()
        if "(" in text:
            tag, arg = text.rstrip(")").split("(")
            return cls(tag, float(arg))
        return cls(text)

    def label(self) -> str:
        return f"{self.tag}({self.s:g})" if self.tag in ("Hs", "FHs") else self.tag


def _l2(values, spacing) -> float:
    return float(np.sqrt(spacing * np.vdot(values, values).real))


def _dual(w: WaveFunction) -> WaveFunction:
    """Values of the same function on the other side of the grid."""
    return to_fourier(w) if w.side == PHYSICAL else to_physical(w)


def norm(w: WaveFunction, kind: NormKind) -> float:
    """Continuum norm of the sampled function, by the rectangle rule.

    Norms treat the samples as a function of the variable they are sampled in.
    Derivatives are spectral; for a Fourier-side function the derivative in xi
    is ``F(-i x f)``.  ``Hs`` uses the multiplier ``<.>^s`` on the dual side, ``FHs``
    the weight ``<.>^s`` on the own side.
    """
    v, h = w.values, w.spacing
    own = w.axis
    tag = kind.tag
    if tag == "L2":
        return _l2(v, h)
    if tag == "Linf":
        return float(np.abs(v).max()) if v.size else 0.0
    if tag == "FHs":
        return _l2((1.0 + own**2) ** (0.5 * kind.s) * v, h)
    d = _dual(w)
    if tag == "Hs":
        return _l2((1.0 + d.axis**2) ** (0.5 * kind.s) * d.values, d.spacing)
    if tag == "Sigma":
        return _l2(v, h) + _l2(d.axis * d.values, d.spacing) + _l2(own * v, h)
    # Hcal: ||<y> f'|| + ||<y>^3 f|| with y the own variable
    deriv = _derivative(w, d)
    weight = np.sqrt(1.0 + own**2)
    return _l2(weight * deriv, h) + _l2(weight**3 * v, h)


def _derivative(w: WaveFunction, d: WaveFunction | None = None) -> np.ndarray:
    d = _dual(w) if d is None else d
    sign = 1j if w.side == PHYSICAL else -1j
    back = d.with_values(sign * d.axis * d.values)
    return (to_physical(back) if w.side == PHYSICAL else to_fourier(back)).values


def derivative(w: WaveFunction) -> WaveFunction:
    """Spectral derivative with respect to the variable ``w`` is sampled in."""
    return w.with_values(_derivative(w))


# --------------------------------------------------------------------------
# serialization: CSV (axis, re, im) + JSON sidecar
# --------------------------------------------------------------------------

def save_wavefunction(w: WaveFunction, path, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>.csv`` and ``<path>.json``; returns both paths."""
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    col = "x" if w.side == PHYSICAL else "xi"
    data = np.column_stack([w.axis, w.values.real, w.values.imag])
    np.savetxt(csv_path, data, delimiter=",", header=f"{col},re,im", comments="", fmt="%.17g")
    meta = {"grid": w.grid.to_dict(), "side": w.side}
    if extra:
        meta.update(extra)
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=False, default=_json_default) + "\n")
    return csv_path, json_path


def load_wavefunction(path) -> WaveFunction:
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    meta = json.loads(base.with_suffix(".json").read_text())
    grid = GridSpec(meta["grid"]["n"], meta["grid"]["half_width"])
    data = np.loadtxt(base.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    return WaveFunction(grid, meta["side"], data[:, 1] + 1j * data[:, 2])


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def sigma_gamma_norm(w: WaveFunction, gamma: float) -> float:
    """``||f||_{H^gamma} + ||<y>^gamma f||_{L2}`` in the variable ``w`` is sampled in.

    Invariant under the Fourier transform, like ``Sigma``.
    """
    return norm(w, NormKind.Hs(gamma)) + norm(w, NormKind.FHs(gamma))


def profile_extents(spec: ProfileSpec, tol: float = 1e-14) -> tuple[float, float]:
    """Half-widths in ``x`` and ``xi`` beyond which ``|f|`` and ``|F f|`` stay below ``tol * max``.

    Measured on a generous probe grid; used to size boxes for dispersive spread.
    """
    probe = GridSpec(8192, max(200.0, 40.0 * spec.width + abs(spec.center)))
    f = spec(probe.x)
    fh = fourier_values(probe, f)

    def extent(axis, vals):
        a = np.abs(vals)
        big = np.nonzero(a > tol * a.max())[0] if a.max() > 0 else np.array([0])
        return float(max(abs(axis[big[0]]), abs(axis[big[-1]])))

    return extent(probe.x, f), extent(probe.xi, fh)
