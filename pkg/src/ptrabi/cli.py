"""Command-line front end.

Every subcommand writes one CSV or JSON file (``--out``, default inside
``$PTRABI_OUTPUT_DIR``) carrying the full parameter set as provenance.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from ptrabi import criticality, dynamics, spectra
from ptrabi.core import ModelKind, ModelParams, parse_q
from ptrabi.exceptions import NoCollapseError
from ptrabi.gfunction import (
    DEFAULT_TOL,
    gfunction_derivative,
    gfunction_values,
    pole_ladder,
    pole_spacing,
)
from ptrabi.io import output_dir, provenance, write_csv, write_json

log = logging.getLogger("ptrabi")


class UsageError(Exception):
    pass


def _g_range(text: str) -> np.ndarray:
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError:
        raise UsageError(f"--g-range expects lo:hi:steps, got {text!r}") from None
    if steps <= 0 or hi < lo:
        raise UsageError(f"empty coupling range {text!r}")
    return np.linspace(lo, hi, steps)


def _e_range(text: str) -> np.ndarray:
    try:
        lo, hi, steps = text.split(":")
        grid = np.linspace(float(lo), float(hi), int(steps))
    except ValueError:
        raise UsageError(f"--e-range expects lo:hi:steps, got {text!r}") from None
    if grid.size == 0:
        raise UsageError("empty energy range")
    return grid


def _params(args, g=None) -> ModelParams:
    kind = ModelKind.coerce(args.model)
    eps = 0.0 if kind is ModelKind.DTP else args.epsilon
    if kind is ModelKind.DTP and args.epsilon:
        raise UsageError("the dtp model takes no --epsilon")
    g = args.g if g is None else g
    if kind is not ModelKind.DTP and g >= 0.5:
        raise UsageError("btp/Hermitian couplings must satisfy g < 1/2 (collapse point)")
    return ModelParams(args.delta, eps, g, kind)


def _check_grid(args, grid):
    if ModelKind.coerce(args.model) is not ModelKind.DTP and np.any(grid >= 0.5):
        raise UsageError("btp/Hermitian couplings must satisfy g < 1/2 (collapse point)")


def _out_path(args, stem: str, suffix: str) -> Path:
    if args.out:
        return Path(args.out)
    name = f"{stem}_{args.model}_d{args.delta:g}"
    if getattr(args, "epsilon", 0):
        name += f"_e{args.epsilon:g}"
    if getattr(args, "q", None):
        name += "_q" + args.q.replace("/", "-")
    directory = output_dir()
    directory.mkdir(parents=True, exist_ok=True)
    return directory / f"{name}{suffix}"


def _parity_label(value) -> str:
    if value is None:
        return ""
    value = complex(value)
    labels = {1: "+1", -1: "-1", 1j: "+i", -1j: "-i"}
    return next(lbl for v, lbl in labels.items() if abs(value - v) < 1e-9)


def _base_meta(args, command, params: dict, tolerances: dict) -> dict:
    return provenance(command, params, tolerances)


# -- subcommands -------------------------------------------------------------

def cmd_spectrum(args) -> Path:
    grid = _g_range(args.g_range)
    _check_grid(args, grid)
    params = _params(args, g=0.0)
    sweep = spectra.sweep_spectrum(params, grid, args.q, args.levels, args.n_max)
    rows = []
    for row in sweep.points:
        for p in row:
            rows.append([p.g, p.level_index, p.energy.real, p.energy.imag, p.q,
                         _parity_label(p.pi_parity), p.pt_status.value, p.converged])
    meta = _base_meta(args, "spectrum",
                      {**params.as_dict(), "g_range": args.g_range, "q": args.q,
                       "levels": args.levels, "n_max": args.n_max},
                      {"real": spectra.TOL_REAL, "convergence": 1e-8})
    path = _out_path(args, "spectrum", ".csv")
    write_csv(path, ["g", "level_index", "re_E", "im_E", "q", "pi_parity", "pt_status",
                     "converged"], rows, meta)
    return path


def cmd_gscan(args) -> Path:
    params = _params(args)
    q = parse_q(args.q)
    meta = _base_meta(args, "gscan",
                      {**params.as_dict(), "q": args.q, "parity": args.parity,
                       "e_range": args.e_range, "window": args.window},
                      {"series": args.tol})
    path = _out_path(args, "gscan", ".csv")
    if args.window:
        try:
            re_lo, re_hi, im_lo, im_hi, n_re, n_im = args.window.split(":")
            re_axis = np.linspace(float(re_lo), float(re_hi), int(n_re))
            im_axis = np.linspace(float(im_lo), float(im_hi), int(n_im))
        except ValueError:
            raise UsageError("--window expects re_lo:re_hi:im_lo:im_hi:n_re:n_im") from None
        z = re_axis[None, :] + 1j * im_axis[:, None]
        values, near, _ = gfunction_values(params, q, z.ravel(), args.parity, tol=args.tol)
        rows = []
        for zz, v, flag in zip(z.ravel(), values, near):
            ln = np.log(abs(v) ** 2) if np.isfinite(v) and v != 0 else float("nan")
            rows.append([zz.real, zz.imag, ln, bool(flag)])
        write_csv(path, ["re_E", "im_E", "ln_abs_G2", "pole_flag"], rows, meta)
        return path
    energies = _e_range(args.e_range)
    values, near, converged = gfunction_values(params, q, energies, args.parity, tol=args.tol)
    n_poles = int(np.ceil((energies.max() + 1) / pole_spacing(params))) + 2
    poles = pole_ladder(params, q, n_poles).real_positions()
    header = ["E", "re_G", "im_G", "nearest_pole_distance", "pole_flag"]
    if args.derivative:
        header += ["re_dGdE", "im_dGdE"]
    rows = []
    for e, v, flag in zip(energies, values, near):
        row = [e, v.real, v.imag, float(np.min(np.abs(poles - e))), bool(flag)]
        if args.derivative:
            try:
                d = complex(gfunction_derivative(params, q, e, args.parity))
            except ArithmeticError:
                d = complex(np.nan, np.nan)
            row += [d.real, d.imag]
        rows.append(row)
    write_csv(path, header, rows, meta)
    return path


def _point_dict(p: criticality.CriticalPoint) -> dict:
    return {
        "kind": p.kind.value,
        "g": p.g,
        "energy": p.energy,
        "q": p.q,
        "levels": list(p.levels) if p.levels else None,
        "parity": _parity_label(p.parity) if p.parity is not None else None,
        "diagnostics": p.diagnostics,
    }


def _report(args, command, params: dict, points: list, tolerances=None, reason=None) -> dict:
    report = _base_meta(args, command, params, tolerances or {})
    report["status"] = "found" if points else "none found"
    if reason:
        report["reason"] = reason
    report["points"] = points
    return report


def cmd_critical(args) -> Path:
    kind = ModelKind.coerce(args.model)
    what = args.what
    suffix = ".csv" if what in ("aa", "fidelity", "cproduct") else ".json"
    path = _out_path(args, f"critical_{what}", suffix)
    base = {"kind": kind.value, "delta": args.delta, "epsilon": args.epsilon, "q": args.q}

    if what == "threshold":
        thr = criticality.pt_breaking_threshold(args.delta, args.epsilon)
        point = {"kind": "pt_breaking_threshold", "g": thr.g, "all_broken": thr.all_broken}
        write_json(path, _report(args, "critical threshold", base, [point]))
        return path

    if what == "collapse":
        try:
            eps = 0.0 if kind is ModelKind.DTP else args.epsilon
            g_c, e_c = criticality.collapse_point(ModelParams(args.delta, eps, 0.0, kind))
            points, reason = [{"kind": "collapse", "g": g_c, "energy": e_c}], None
        except NoCollapseError as exc:
            points, reason = [], str(exc)
        write_json(path, _report(args, "critical collapse", base, points, reason=reason))
        return path

    if what == "juddian":
        params = _params(args, g=0.0)
        pts = criticality.juddian_points(params, args.q, args.n)
        points = [{"kind": "juddian", "g": g, "energy": e, "q": args.q, "pole_line": args.n}
                  for g, e in pts]
        closed = criticality.juddian_closed_form(kind, args.delta)
        if args.n == 1 and parse_q(args.q) == parse_q("1/4") and closed is not None:
            for p in points:
                p["closed_form"] = {"g": closed[0], "energy": closed[1]}
        write_json(path, _report(args, "critical juddian", {**base, "n": args.n}, points,
                                 {"root": 1e-15}))
        return path

    if what == "ep":
        params = _params(args, g=0.0)
        g_range = None
        if args.g_range:
            grid = _g_range(args.g_range)
            g_range = (grid[0], grid[-1])
        levels = tuple(int(x) for x in args.levels.split(",")) if args.levels else None
        if kind is not ModelKind.DTP and levels is None:
            raise UsageError("btp exceptional points need --levels k,k+1")
        ep = criticality.find_ep(params, args.q, parity=args.parity, g_range=g_range,
                                 levels=levels, n_max=args.n_max)
        points = [_point_dict(ep)] if ep is not None else []
        write_json(path, _report(args, "critical ep", {**base, "g_range": args.g_range},
                                 points, {"G": 1e-8, "dG_dE": 1e-6}))
        return path

    grid = _g_range(args.g_range or "")
    _check_grid(args, grid)
    params = _params(args, g=0.0)
    meta = _base_meta(args, f"critical {what}",
                      {**params.as_dict(), "g_range": args.g_range, "q": args.q,
                       "level": args.level, "n_max": args.n_max}, {})

    if what == "aa":
        rows = []
        for g in grid:
            beta = np.sqrt(1 - 4 * g * g)
            for n in range(args.blocks):
                r = criticality.adiabatic_spectrum(params.with_g(g), args.q, n)
                rows.append([g, n, r.D_n, r.E_plus.real, r.E_plus.imag, r.E_minus.real,
                             r.E_minus.imag, (r.E_plus.real + 0.5) / beta,
                             (r.E_minus.real + 0.5) / beta])
        write_csv(path, ["g", "n", "D_n", "re_E_plus", "im_E_plus", "re_E_minus", "im_E_minus",
                         "scaled_E_plus", "scaled_E_minus"], rows, meta)
        return path

    reports = criticality.fidelity_sweep(params, args.q, args.level, grid, args.n_max)
    if what == "fidelity":
        rows = [[r.g, r.level, r.chi.real, r.chi.imag, r.c_product.real, r.c_product.imag,
                 r.ep_proximity, r.parity_switch] for r in reports]
        write_csv(path, ["g", "level", "re_chi", "im_chi", "re_cprod", "im_cprod",
                         "ep_proximity", "parity_switch"], rows, meta)
    else:
        rows = [[r.g, r.level, r.c_product.real, r.c_product.imag, abs(r.c_product)]
                for r in reports]
        write_csv(path, ["g", "level", "re_cprod", "im_cprod", "abs_cprod"], rows, meta)
    return path


def cmd_dynamics(args) -> Path:
    if not args.t_max > 0:
        raise UsageError("--t-max must be positive")
    if args.dt is not None and not args.dt > 0:
        raise UsageError("--dt must be positive")
    params = _params(args)
    trace = dynamics.evolve(params, args.t_max, args.dt, args.n_max, args.method)
    meta = _base_meta(args, "dynamics",
                      {**params.as_dict(), "t_max": args.t_max,
                       "dt": float(trace.times[1] - trace.times[0]), "n_max": args.n_max,
                       "method": trace.method},
                      {"step": dynamics.STEP_TOL, "amplification": dynamics.AMPLIFICATION_LIMIT})
    rows = zip(trace.times, trace.W, trace.n_avg, trace.log_norm)
    path = _out_path(args, "dynamics", ".csv")
    write_csv(path, ["t", "W", "n_avg", "log_norm"], rows, meta)
    return path


# -- parser ------------------------------------------------------------------

def _model_args(p, g=True):
    p.add_argument("--model", choices=["btp", "dtp", "hermitian"], default="btp")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.0)
    if g:
        p.add_argument("--g", type=float, default=0.0)
    p.add_argument("--q", default="1/4", choices=["1/4", "3/4"])
    p.add_argument("--out", default=None, help="output file (default: $PTRABI_OUTPUT_DIR)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptrabi", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="exact-diagonalization spectra over a g-range")
    _model_args(p, g=False)
    p.add_argument("--g-range", required=True, help="lo:hi:steps (inclusive)")
    p.add_argument("--levels", type=int, default=10)
    p.add_argument("--n-max", type=int, default=spectra.DEFAULT_N_MAX)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("gscan", help="G-function values on a real line or complex window")
    _model_args(p)
    p.add_argument("--e-range", default="-1:6:1401", help="lo:hi:steps")
    p.add_argument("--window", default=None, help="re_lo:re_hi:im_lo:im_hi:n_re:n_im")
    p.add_argument("--parity", default=None, choices=["+", "-"])
    p.add_argument("--derivative", action="store_true", help="add dG/dE columns")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.set_defaults(func=cmd_gscan)

    p = sub.add_parser("critical", help="special points and diagnostics")
    p.add_argument("what", choices=["ep", "juddian", "collapse", "threshold", "aa",
                                    "fidelity", "cproduct"])
    _model_args(p, g=False)
    p.add_argument("--g-range", default=None, help="lo:hi:steps")
    p.add_argument("--n", type=int, default=1, help="pole line for juddian")
    p.add_argument("--level", type=int, default=0, help="energy-ordered level (fidelity)")
    p.add_argument("--levels", default=None, help="level pair k,k+1 (btp ep)")
    p.add_argument("--blocks", type=int, default=4, help="number of AA blocks")
    p.add_argument("--parity", default=None, choices=["+", "-"])
    p.add_argument("--n-max", type=int, default=160)
    p.set_defaults(func=cmd_critical)

    p = sub.add_parser("dynamics", help="time evolution from the excited-qubit vacuum")
    _model_args(p)
    p.add_argument("--t-max", type=float, required=True)
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--n-max", type=int, default=dynamics.DEFAULT_N_MAX)
    p.add_argument("--method", choices=["auto", "spectral", "expm"], default="auto")
    p.set_defaults(func=cmd_dynamics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        path = args.func(args)
    except (UsageError, ValueError) as exc:
        parser.error(str(exc))
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
