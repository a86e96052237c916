"""Small-data sweeps: residuals of the operators after subtracting ``eps v`` and ``eps^3 c2``."""

from __future__ import annotations

import csv
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .correctors import QuadConfig, corrector_mu2, corrector_nu2, corrector_w2
from .evolve import ConservationError, EvolveConfig
from .grid import GridSpec, NormKind, ProfileSpec, norm, reference_profile, sample_profile
from .scattering import WaveOpConfig, inverse_wave_operator, modified_scattering, modified_wave_operator

OPERATORS = ("wave_op", "inverse_wave_op", "scattering")
LEADING_BAND = (2.8, 3.1)
CORRECTED_BAND = (4.5, 5.2)


class FloorLimitedWarning(UserWarning):
    """Residuals sit at the solver floor; slopes are not meaningful."""


def primary_norm(operator: str) -> NormKind:
    """Sigma for the wave operator, L2 for the inverse and the scattering map."""
    return NormKind.Sigma() if operator == "wave_op" else NormKind.L2()


@dataclass(frozen=True)
class SweepConfig:
    operator: str = "wave_op"
    epsilons: tuple = (0.2, 0.14, 0.1, 0.07, 0.05)
    norm_kinds: tuple = ()
    base_profile: ProfileSpec = field(default_factory=reference_profile)
    lam: float = 1.0
    grid: GridSpec = field(default_factory=lambda: GridSpec(2048, 60.0))
    wave_cfg: WaveOpConfig = field(default_factory=WaveOpConfig)
    quad_cfg: QuadConfig = field(default_factory=QuadConfig)
    threads: int = 1
    measure_floor: bool = True

    def __post_init__(self):
        if self.operator not in OPERATORS:
            raise ValueError(f"operator must be one of {OPERATORS}")
        eps = tuple(sorted((float(e) for e in self.epsilons), reverse=True))
        if len(eps) < 4:
            raise ValueError("need at least 4 epsilon values")
        if any(not 0 < e <= 0.2 for e in eps):
            raise ValueError("epsilons must lie in (0, 0.2]")
        if eps[0] / eps[-1] < 4.0 - 1e-12:
            raise ValueError("epsilons must span at least a factor of 4")
        object.__setattr__(self, "epsilons", eps)
        kinds = tuple(self.norm_kinds) or (primary_norm(self.operator),)
        if primary_norm(self.operator) not in kinds:
            kinds = (primary_norm(self.operator),) + kinds
        object.__setattr__(self, "norm_kinds", kinds)

    def to_dict(self) -> dict:
        return {
            "operator": self.operator,
            "epsilons": list(self.epsilons),
            "norm_kinds": [k.label() for k in self.norm_kinds],
            "base_profile": self.base_profile.to_dict(),
            "lam": self.lam,
            "grid": self.grid.to_dict(),
            "wave_cfg": self.wave_cfg.to_dict(),
            "quad_cfg": self.quad_cfg.to_dict(),
            "threads": self.threads,
            "measure_floor": self.measure_floor,
        }


@dataclass(frozen=True)
class SweepRow:
    eps: float
    norm_kind: str
    leading_residual: float
    corrected_residual: float
    floor_limited: bool = False


@dataclass(frozen=True)
class ExpansionReport:
    operator: str
    rows: tuple
    slope_leading: float
    slope_corrected: float
    r_squared: float
    corrector_norm: float
    primary_norm: str = "Sigma"
    intercept_leading: float = float("nan")
    intercept_corrected: float = float("nan")
    r_squared_leading: float = float("nan")
    floor: float = 0.0
    fits: dict = field(default_factory=dict)
    failed_rows: tuple = ()
    notes: tuple = ()

    def primary_rows(self) -> list:
        return [r for r in self.rows if r.norm_kind == self.primary_norm]

    def floor_limited(self) -> bool:
        return math.isnan(self.slope_leading) or math.isnan(self.slope_corrected)

    def bands(self) -> dict:
        """Pass/fail of the slope bands (both ``False`` when floor-limited)."""
        lo, hi = LEADING_BAND
        clo, chi = CORRECTED_BAND
        return {
            "leading": bool(lo <= self.slope_leading <= hi),
            "corrected": bool(clo <= self.slope_corrected <= chi),
        }

    def ratios(self) -> dict:
        """``leading / eps^3`` and ``corrected / eps^3`` at the smallest epsilon."""
        rows = self.primary_rows()
        if not rows:
            return {}
        r = min(rows, key=lambda r: r.eps)
        return {"eps": r.eps, "leading_over_eps3": r.leading_residual / r.eps**3,
                "corrected_over_eps3": r.corrected_residual / r.eps**3,
                "corrector_norm": self.corrector_norm}


def fit_loglog(points, min_points: int = 4):
    """Least-squares line through ``(log eps, log residual)``.

    Returns ``(slope, intercept, r_squared)``.
    """
    pts = [(float(e), float(r)) for e, r in points]
    if len(pts) < min_points:
        raise ValueError(f"need at least {min_points} points, got {len(pts)}")
    if any(r <= 0 or e <= 0 for e, r in pts):
        raise ValueError("residuals and epsilons must be positive")
    x = np.log([e for e, _ in pts])
    y = np.log([r for _, r in pts])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (slope * x + intercept)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


def _operator(cfg: SweepConfig, wave_cfg: WaveOpConfig):
    lam = cfg.lam
    if cfg.operator == "wave_op":
        return lambda u: modified_wave_operator(u, lam, wave_cfg)
    if cfg.operator == "inverse_wave_op":
        return lambda u: inverse_wave_operator(u, lam, wave_cfg)
    return lambda u: modified_scattering(u, lam, wave_cfg).u_plus


def compute_corrector(cfg: SweepConfig):
    v = sample_profile(cfg.base_profile, cfg.grid)
    fn = {"wave_op": corrector_w2, "inverse_wave_op": corrector_mu2,
          "scattering": corrector_nu2}[cfg.operator]
    return v, fn(v, cfg.lam, cfg.quad_cfg)


def _refined(wc: WaveOpConfig) -> WaveOpConfig:
    ev = wc.evolve
    return replace(wc, T_minus=2 * wc.T_minus, T_plus=2 * wc.T_plus,
                   evolve=replace(ev, dt_base=ev.dt_base / 2, log_step=ev.log_step / 2))


def sweep(cfg: SweepConfig, corrector=None) -> ExpansionReport:
    """Run the operator at each ``eps`` and fit the residual slopes.

    ``corrector`` may be a precomputed :class:`CorrectorResult` for the same
    profile and coupling.  Rows whose integration fails are dropped (and listed
    in ``failed_rows``); at least four must survive.  Residuals below ten times
    the solver floor are flagged and excluded from the fit.
    """
    v, corr = compute_corrector(cfg) if corrector is None else (
        sample_profile(cfg.base_profile, cfg.grid), corrector)
    c2 = corr.field
    op = _operator(cfg, cfg.wave_cfg)

    def row(eps):
        try:
            return eps, op(v * eps), None
        except (ConservationError, FloatingPointError, ValueError) as exc:
            return eps, None, f"{type(exc).__name__}: {exc}"

    eps_list = list(cfg.epsilons)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(row, eps_list))
    else:
        results = [row(e) for e in eps_list]

    floor = 10.0 * cfg.wave_cfg.solver_tol
    notes = []
    outputs = {e: out for e, out, err in results if out is not None}
    failed = tuple((e, err) for e, out, err in results if out is None)
    if cfg.measure_floor and outputs and cfg.lam != 0.0:
        e_min = min(outputs)
        ref = _operator(cfg, _refined(cfg.wave_cfg))(v * e_min)
        measured = norm(ref - outputs[e_min], primary_norm(cfg.operator))
        notes.append(f"measured solver floor {measured:.3e} at eps={e_min:g}")
        floor = max(floor, 10.0 * measured)

    rows = []
    for e in sorted(outputs, reverse=True):
        out = outputs[e]
        lead = out - v * e
        corr_res = lead - c2 * e**3
        for k in cfg.norm_kinds:
            a, b = norm(lead, k), norm(corr_res, k)
            rows.append(SweepRow(e, k.label(), a, b, bool(b <= floor or a <= floor)))

    pkind = primary_norm(cfg.operator).label()
    fits = {}
    for k in cfg.norm_kinds:
        lab = k.label()
        good = [r for r in rows if r.norm_kind == lab and not r.floor_limited]
        if len(good) >= 4:
            fl = fit_loglog([(r.eps, r.leading_residual) for r in good])
            fc = fit_loglog([(r.eps, r.corrected_residual) for r in good])
            fits[lab] = {"slope_leading": fl[0], "intercept_leading": fl[1], "r2_leading": fl[2],
                         "slope_corrected": fc[0], "intercept_corrected": fc[1], "r2_corrected": fc[2]}
    if len(outputs) < 4:
        raise RuntimeError(f"only {len(outputs)} rows survived; need 4 ({failed})")
    nan = float("nan")
    p = fits.get(pkind)
    if p is None:
        notes.append("floor-limited: fewer than 4 rows above the solver floor")
        warnings.warn("sweep is floor-limited; slopes undefined", FloorLimitedWarning, stacklevel=2)
    cnorm = norm(c2, primary_norm(cfg.operator))
    return ExpansionReport(
        operator=cfg.operator,
        rows=tuple(rows),
        slope_leading=p["slope_leading"] if p else nan,
        slope_corrected=p["slope_corrected"] if p else nan,
        r_squared=p["r2_corrected"] if p else nan,
        corrector_norm=cnorm,
        primary_norm=pkind,
        intercept_leading=p["intercept_leading"] if p else nan,
        intercept_corrected=p["intercept_corrected"] if p else nan,
        r_squared_leading=p["r2_leading"] if p else nan,
        floor=floor,
        fits=fits,
        failed_rows=failed,
        notes=tuple(notes),
    )


_CSV_FIELDS = ("eps", "norm_kind", "leading_residual", "corrected_residual", "floor_limited")
_SUMMARY_FIELDS = ("operator", "primary_norm", "slope_leading", "slope_corrected", "r_squared",
                   "corrector_norm", "intercept_leading", "intercept_corrected",
                   "r_squared_leading", "floor")


def _num(x):
    return None if isinstance(x, float) and math.isnan(x) else x


def report_write(report: ExpansionReport, path) -> tuple[Path, Path]:
    """Write ``<path>.csv`` (one row per eps and norm) and ``<path>.json`` (summary)."""
    if not report.rows:
        raise ValueError("report has no rows")
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    base.parent.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = base.with_suffix(".csv"), base.with_suffix(".json")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_FIELDS)
        for r in report.rows:
            w.writerow([repr(r.eps), r.norm_kind, repr(r.leading_residual),
                        repr(r.corrected_residual), int(r.floor_limited)])
    summary = {k: _num(getattr(report, k)) for k in _SUMMARY_FIELDS}
    summary["bands"] = report.bands()
    summary["ratios"] = report.ratios()
    summary["fits"] = report.fits
    summary["failed_rows"] = [list(f) for f in report.failed_rows]
    summary["notes"] = list(report.notes)
    json_path.write_text(json.dumps(summary, indent=2) + "\n")
    return csv_path, json_path


def report_read(path) -> ExpansionReport:
    base = Path(path)
    if base.suffix in (".csv", ".json"):
        base = base.with_suffix("")
    meta = json.loads(base.with_suffix(".json").read_text())
    rows = []
    with open(base.with_suffix(".csv"), newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(SweepRow(float(rec["eps"]), rec["norm_kind"], float(rec["leading_residual"]),
                                 float(rec["corrected_residual"]), bool(int(rec["floor_limited"]))))
    kw = {k: (float("nan") if meta[k] is None else meta[k]) for k in _SUMMARY_FIELDS}
    return ExpansionReport(rows=tuple(rows), fits=meta.get("fits", {}),
                           failed_rows=tuple(tuple(f) for f in meta.get("failed_rows", [])),
                           notes=tuple(meta.get("notes", [])), **kw)


__all__ = [
    "CORRECTED_BAND",
    "ExpansionReport",
    "FloorLimitedWarning",
    "LEADING_BAND",
    "OPERATORS",
    "SweepConfig",
    "SweepRow",
    "compute_corrector",
    "fit_loglog",
    "primary_norm",
    "report_read",
    "report_write",
    "sweep",
]
