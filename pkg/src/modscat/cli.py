"""Command-line entry point.

    modscat verify-ops --grid-n 1024 --grid-L 40
    modscat solve --profile reference --epsilon 0.1 --t1 10
    modscat scatter --direction full --profile reference --epsilon 0.05
    modscat corrector --which w2 --profile reference
    modscat sweep --operator wave_op --profile reference

Every run writes its data plus ``manifest.json`` into ``--out``.  The manifest's
``config`` block is itself a valid ``--config`` file.  Exit codes: 0 success,
1 validation error, 2 numerical-contract failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
import time
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .correctors import QuadConfig, corrector_mu2, corrector_nu2, corrector_w2
from .evolve import ConservationError, EvolveConfig, evolve_physical
from .expansion import OPERATORS, SweepConfig, report_write, sweep
from .grid import (
    GridSpec,
    NormKind,
    ProfileSpec,
    _json_default,
    grid_for_spread,
    norm,
    profile_extents,
    sample_profile,
    save_wavefunction,
    to_fourier,
)
from .kernels import BACKEND
from .linops import (
    R_decay_norms,
    apply_J,
    apply_R,
    apply_R_via_group,
    check_J_conjugation,
    check_mdf_identity,
    dilate,
    free_propagate,
    gn_constant,
    multiply_chirp,
)
from .scattering import (
    WaveOpConfig,
    extract_final_state,
    modified_wave_operator,
    save_scattering_profile,
    wave_operator_with_diagnostics,
)

log = logging.getLogger("modscat")

EXIT_OK, EXIT_USAGE, EXIT_CONTRACT = 0, 1, 2


class UsageError(Exception):
    pass


class ContractFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


# option name -> (default, type); None-valued flags are filled from the config file
COMMON = {"grid_n": (2048, int), "grid_L": (60.0, float), "out": ("modscat-out", str),
          "log_level": ("WARNING", str), "threads": (None, int)}
OPTIONS = {
    "verify-ops": {"profile": ("reference", str)},
    "solve": {"profile": (None, str), "lam": (1.0, float), "epsilon": (0.1, float),
              "t0": (0.0, float), "t1": (10.0, float), "scheme": ("yoshida4", str),
              "dt": (5e-3, float), "snapshots": (5, int), "conservation_tol": (1e-8, float)},
    "scatter": {"profile": (None, str), "lam": (1.0, float), "epsilon": (0.1, float),
                "direction": ("full", str), "T_minus": (1e6, float), "T_plus": (1e6, float),
                "dt": (5e-3, float), "log_step": (0.02, float), "richardson": (False, bool)},
    "corrector": {"profile": (None, str), "lam": (1.0, float), "which": ("w2", str),
                  "quad_nodes": (64, int), "tail_cut": (1e4, float), "tail_mode": ("subst", str)},
    "sweep": {"profile": (None, str), "lam": (1.0, float), "operator": ("wave_op", str),
              "epsilons": ("0.2,0.14,0.1,0.07,0.05", str), "T_minus": (1e6, float),
              "T_plus": (1e6, float)},
}


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="modscat", description="Modified scattering for 1D cubic NLS near the origin.")
    p.add_argument("--version", action="version", version=f"modscat {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with option values (flags override)")
        sp.add_argument("--grid-n", dest="grid_n", type=int)
        sp.add_argument("--grid-L", dest="grid_L", type=float)
        sp.add_argument("--out", "--output-dir", dest="out", help="output directory")
        sp.add_argument("--log-level", dest="log_level")
        sp.add_argument("--threads", type=int, help="worker threads (fallback: DS_THREADS)")

    def physics(sp, profile_help="profile, e.g. reference or gaussian:1,0.7071,0,0"):
        sp.add_argument("--profile", help=profile_help)
        sp.add_argument("--lambda", dest="lam", type=float)

    sp = sub.add_parser("verify-ops", help="operator identities and decay slopes (CSV)")
    common(sp)
    sp.add_argument("--profile")

    sp = sub.add_parser("solve", help="integrate the NLS and write snapshots")
    common(sp)
    physics(sp)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--t0", type=float)
    sp.add_argument("--t1", type=float)
    sp.add_argument("--scheme", choices=("strang2", "yoshida4"))
    sp.add_argument("--dt", type=float)
    sp.add_argument("--snapshots", type=int)
    sp.add_argument("--conservation-tol", dest="conservation_tol", type=float)

    sp = sub.add_parser("scatter", help="wave operator, its inverse, or the scattering map")
    common(sp)
    physics(sp)
    sp.add_argument("--epsilon", type=float)
    sp.add_argument("--direction", choices=("wave-op", "inverse", "full"))
    sp.add_argument("--T-minus", dest="T_minus", type=float)
    sp.add_argument("--T-plus", dest="T_plus", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--log-step", dest="log_step", type=float)
    sp.add_argument("--richardson", action="store_true", default=None)

    sp = sub.add_parser("corrector", help="first correctors w2, mu2, nu2")
    common(sp)
    physics(sp)
    sp.add_argument("--which", choices=("w2", "mu2", "nu2"))
    sp.add_argument("--quad-nodes", dest="quad_nodes", type=int)
    sp.add_argument("--tail-cut", dest="tail_cut", type=float)
    sp.add_argument("--tail-mode", dest="tail_mode", choices=("subst", "trunc"))

    sp = sub.add_parser("sweep", help="small-data expansion sweep with slope fits")
    common(sp)
    physics(sp)
    sp.add_argument("--operator", choices=OPERATORS)
    sp.add_argument("--epsilons", help="comma-separated, e.g. 0.2,0.14,0.1,0.07,0.05")
    sp.add_argument("--T-minus", dest="T_minus", type=float)
    sp.add_argument("--T-plus", dest="T_plus", type=float)
    return p


def _load_config(path: str | None, command: str) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    if isinstance(data.get(command), dict):
        data = data[command]
    elif "subcommand" in data and data["subcommand"] != command:
        raise UsageError(f"config is for {data['subcommand']!r}, not {command!r}")
    return {k.replace("-", "_"): v for k, v in data.items() if k != "subcommand"}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, config file and flags (in increasing priority)."""
    spec = {**COMMON, **OPTIONS[args.command]}
    cfg = _load_config(getattr(args, "config", None), args.command)
    unknown = set(cfg) - set(spec)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key, (default, typ) in spec.items():
        val = getattr(args, key, None)
        if val is None:
            val = cfg.get(key, default)
        if val is not None and typ is not str:
            try:
                val = typ(val)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key}: {val!r}") from exc
        out[key] = val
    if out["threads"] is None:
        env = os.environ.get("DS_THREADS", "")
        out["threads"] = int(env) if env.strip().isdigit() else 1
    if out["threads"] < 1:
        raise UsageError("threads must be >= 1")
    if "profile" in spec and not out.get("profile"):
        raise UsageError("--profile is required")
    return out


def _grid(opts) -> GridSpec:
    try:
        return GridSpec(opts["grid_n"], opts["grid_L"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _profile(opts) -> ProfileSpec:
    try:
        return ProfileSpec.parse(opts["profile"])
    except ValueError as exc:
        raise UsageError(f"bad profile {opts['profile']!r}: {exc}") from exc


def _outdir(opts) -> Path:
    d = Path(opts["out"])
    try:
        d.mkdir(parents=True, exist_ok=True)
        probe = d / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {d} is not writable: {exc}") from exc
    return d


def _write_manifest(outdir: Path, command: str, opts: dict, extra: dict, timings: dict):
    manifest = {
        "artifact": "modscat",
        "version": __version__,
        "backend": BACKEND,
        "command": ["modscat", command],
        "config": {"subcommand": command, **{k: v for k, v in opts.items() if k != "out"}},
        "grid": {"n": opts["grid_n"], "half_width": opts["grid_L"]},
        "timings_s": timings,
        "environment": {"python": platform.python_version(), "numpy": np.__version__,
                        "scipy": scipy.__version__},
        **extra,
    }
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_json_default) + "\n")


# --------------------------------------------------------------------------
# subcommands; each returns (extra manifest fields, contract ok)
# --------------------------------------------------------------------------

def _fit_grid(base: GridSpec, spec: ProfileSpec, t: float) -> GridSpec:
    """``base`` if it holds the free spread of ``spec`` up to ``|t|``, else a larger grid."""
    xe, ke = profile_extents(spec)
    need = grid_for_spread(xe, ke, abs(t), n_min=16)
    if base.half_width >= need.half_width and base.dx <= need.dx:
        return base
    return GridSpec(max(need.n, base.n), max(need.half_width, base.half_width))


def cmd_verify_ops(opts, outdir):
    base = _grid(opts)
    spec = _profile(opts)
    rows = []

    def add(op, t, g, value, bound, kind="residual"):
        ok = bool(value <= bound) if kind in ("residual", "constant") else bool(bound[0] <= value <= bound[1])
        rows.append({"operator": op, "t": t, "n": g.n, "L": g.half_width, "kind": kind,
                     "measured": value, "bound": bound if kind != "slope" else f"[{bound[0]},{bound[1]}]",
                     "pass": ok})

    w = sample_profile(spec, base)
    l2 = norm(w, NormKind.L2())
    sig = norm(w, NormKind.Sigma())
    for t in (1.0, 2.0):
        add("chirp_inverse", t, base,
            norm(multiply_chirp(multiply_chirp(w, t), -t) - w, NormKind.L2()), 1e-12 * l2)
    for t in (2.0, -3.0):
        add("free_group_inverse", t, base, norm(free_propagate(free_propagate(w, t), -t) - w,
                                                NormKind.L2()), 1e-12 * l2)
    add("dilate_unitarity", 4.0, base, abs(norm(dilate(w, 4.0), NormKind.L2()) - l2), 1e-8 * l2)
    for t in (1.0, 5.0, -5.0, 1e3):
        g = _fit_grid(base, spec, t)
        wg = sample_profile(spec, g)
        add("mdf_identity", t, g, check_mdf_identity(wg, t), 1e-8 * norm(wg, NormKind.L2()))
    for t in (0.5, 3.0, 10.0):
        g = _fit_grid(base, spec, t)
        wg = sample_profile(spec, g)
        s = norm(wg, NormKind.Sigma())
        add("J_conjugation", t, g, check_J_conjugation(wg, t), 1e-9 * s)
        add("J_factorized", t, g, norm(apply_J(wg, t) - apply_J(wg, t, factorized=True),
                                       NormKind.L2()), 1e-9 * s)
    g = _fit_grid(base, spec, 20.0)
    f = to_fourier(sample_profile(spec, g))
    add("R_definition", -20.0, g, norm(free_propagate(sample_profile(spec, g), -20.0)
                                       - multiply_chirp(dilate(f, -20.0), -20.0)
                                       - apply_R(f, -20.0), NormKind.L2()), 1e-9)
    add("R_two_routes", -20.0, g, norm(apply_R(f, -20.0) - apply_R_via_group(f, -20.0),
                                       NormKind.L2()), 1e-9)
    gn = 0.0
    for t in (1.0, 10.0, 100.0):
        g = _fit_grid(base, spec, t)
        gn = max(gn, gn_constant(free_propagate(sample_profile(spec, g), t), t))
    add("gagliardo_nirenberg_C", 100.0, g, gn, 2.0, kind="constant")
    ts = np.logspace(1, 4, 7)
    xe, ke = profile_extents(spec)
    # R(t) acts on a Fourier-side function; its x and xi extents swap roles
    meas = [R_decay_norms(spec, t, x_extent=ke, xi_extent=xe) for t in ts]
    lt = np.log(ts)
    for key, band in (("Linf", (-1.6, -1.4)), ("L2", (-1.1, -0.9)), ("J", (-1.1, -0.9)),
                      ("dx", (-np.inf, -0.9))):
        slope = float(np.polyfit(lt, np.log([m[key] for m in meas]), 1)[0])
        add(f"R_decay_{key}", float(ts[-1]), GridSpec(meas[-1]["n"], meas[-1]["L"]), slope,
            band, kind="slope")
    path = outdir / "verify_ops.csv"
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        for r in rows:
            wr.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in r.items()})
    sys.stdout.write(path.read_text())
    ok = all(r["pass"] for r in rows)
    return {"outputs": [path.name], "checks_failed": [r["operator"] for r in rows if not r["pass"]],
            "sigma_norm_input": sig}, ok


def cmd_solve(opts, outdir):
    grid = _grid(opts)
    spec = _profile(opts)
    try:
        cfg = EvolveConfig(dt_base=opts["dt"], order=opts["scheme"],
                           conservation_tol=opts["conservation_tol"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    u0 = sample_profile(spec, grid) * opts["epsilon"]
    k = max(opts["snapshots"], 2)
    times = list(np.linspace(opts["t0"], opts["t1"], k))
    snaps = []
    try:
        u1, diag = evolve_physical(u0, opts["t0"], opts["t1"], opts["lam"], cfg, snaps, times)
    except ConservationError as exc:
        log.error("%s", exc)
        return {"error": str(exc)}, False
    names = []
    traj = outdir / "trajectory.csv"
    l2_0 = norm(u0, NormKind.L2())
    with open(traj, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["index", "t", "L2", "Linf", "Linf_times_sqrt_1_plus_t2_quarter", "l2_drift"])
        for i, (t, u) in enumerate(snaps):
            name = f"snapshot_{i:03d}"
            save_wavefunction(u, outdir / name, {"t": t, "lambda": opts["lam"]})
            names.append(name)
            l2 = norm(u, NormKind.L2())
            li = norm(u, NormKind.Linf())
            wr.writerow([i, repr(float(t)), repr(l2), repr(li),
                         repr(li * (1 + t * t) ** 0.25), repr(abs(l2 - l2_0) / l2_0 if l2_0 else 0.0)])
    return {"outputs": ["trajectory.csv"] + names, "diagnostics": diag.to_dict()}, True


def _wave_cfg(opts) -> WaveOpConfig:
    try:
        ev = EvolveConfig(dt_base=opts.get("dt", 5e-3), log_step=opts.get("log_step", 0.02))
        return WaveOpConfig(T_minus=opts["T_minus"], T_plus=opts["T_plus"], evolve=ev)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_scatter(opts, outdir):
    grid = _grid(opts)
    spec = _profile(opts)
    wc = _wave_cfg(opts)
    lam = opts["lam"]
    u = sample_profile(spec, grid) * opts["epsilon"]
    extra = {}
    try:
        if opts["direction"] in ("wave-op", "full"):
            u0, d = wave_operator_with_diagnostics(u, lam, wc)
            save_wavefunction(u0, outdir / "u0", {"lambda": lam, "diagnostics": d})
            extra["wave_op"] = {"Sigma_u0": norm(u0, NormKind.Sigma()), **d}
            outputs = ["u0"]
        else:
            u0, outputs = u, []
        if opts["direction"] in ("inverse", "full"):
            sp = extract_final_state(u0, lam, wc.T_plus, wc.evolve, richardson=bool(opts["richardson"]))
            save_scattering_profile(sp, outdir / "scattering_profile", {"lambda": lam})
            extra["scattering"] = sp.summary()
            outputs.append("scattering_profile")
            ok = sp.converged
        else:
            ok = True
    except ConservationError as exc:
        log.error("%s", exc)
        return {"error": str(exc)}, False
    return {"outputs": outputs, **extra}, ok


def cmd_corrector(opts, outdir):
    grid = _grid(opts)
    spec = _profile(opts)
    try:
        q = QuadConfig(near_nodes=opts["quad_nodes"], tail_nodes=opts["quad_nodes"],
                       tail_cut=opts["tail_cut"], tail_subst=opts["tail_mode"] == "subst",
                       threads=opts["threads"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    v = sample_profile(spec, grid)
    fn = {"w2": corrector_w2, "mu2": corrector_mu2, "nu2": corrector_nu2}[opts["which"]]
    res = fn(v, opts["lam"], q)
    norms = res.norms()
    ref = norms["Sigma"] if opts["which"] == "w2" else norms["L2"]
    meta = {"which": opts["which"], "lambda": opts["lam"], "tail_estimate": res.tail_estimate,
            "integrand_decay_slope": res.integrand_decay_slope, "norms": norms,
            "diagnostics": res.diagnostics}
    save_wavefunction(res.field, outdir / opts["which"], meta)
    ok = res.tail_estimate <= 1e-6 * ref or ref == 0.0
    return {"outputs": [opts["which"]], **meta}, ok


def cmd_sweep(opts, outdir):
    grid = _grid(opts)
    spec = _profile(opts)
    try:
        eps = [float(e) for e in str(opts["epsilons"]).split(",") if e.strip()]
        cfg = SweepConfig(operator=opts["operator"], epsilons=tuple(eps), base_profile=spec,
                          lam=opts["lam"], grid=grid, wave_cfg=_wave_cfg(opts),
                          quad_cfg=QuadConfig(threads=opts["threads"]), threads=opts["threads"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rep = sweep(cfg)
    report_write(rep, outdir / "sweep")
    nan_none = lambda x: None if np.isnan(x) else x
    extra = {"outputs": ["sweep"], "slope_leading": nan_none(rep.slope_leading),
             "slope_corrected": nan_none(rep.slope_corrected), "bands": rep.bands(), "notes": list(rep.notes)}
    if rep.floor_limited():
        log.warning("sweep is floor-limited (residuals at solver tolerance); slopes undefined")
        return extra, True
    b = rep.bands()
    return extra, b["leading"] and b["corrected"]


COMMANDS = {"verify-ops": cmd_verify_ops, "solve": cmd_solve, "scatter": cmd_scatter,
            "corrector": cmd_corrector, "sweep": cmd_sweep}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = resolve(args)
        logging.basicConfig(level=getattr(logging, str(opts["log_level"]).upper(), logging.WARNING),
                            format="%(levelname)s %(name)s: %(message)s")
        outdir = _outdir(opts)
        t0 = time.perf_counter()
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            extra, ok = COMMANDS[args.command](opts, outdir)
        timings = {"total": time.perf_counter() - t0}
        extra["contract_ok"] = bool(ok)
        _write_manifest(outdir, args.command, opts, extra, timings)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"modscat: error: {exc}\n")
        return EXIT_USAGE
    if not ok:
        sys.stderr.write("modscat: numerical contract failed (see manifest.json)\n")
        return EXIT_CONTRACT
    return EXIT_OK


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
