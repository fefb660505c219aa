"""Command-line interface.

Subcommands cover the full pipeline: ``steady`` (equilibrium profiles),
``growth`` (spectrum at one operating point), ``neutral`` (curve trace),
``critical`` (most unstable point), ``table`` (critical points over a
parameter sweep) and ``modes`` (eigenmode field snapshots).

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 table completed with some failed rows.
"""
import argparse
import csv
import json
import math
import sys
import time
from multiprocessing import get_context

import numpy as np

from . import basic_state as _bs
from . import model as _model
from . import neutral as _neu
from . import patterns as _pat
from . import stability as _stab
from .exceptions import SolverError

_CONSISTENCY_TOL = 1e-6


class ConfigError(ValueError):
    pass


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


def _build_parser():
    p = argparse.ArgumentParser(
        prog="photostab",
        description="Linear stability of an illuminated algal suspension "
                    "heated or cooled from below.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--resolution", type=int, default=None,
                        help="override collocation point count")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("steady", help="solve the equilibrium state")
    common(sp)
    sp.set_defaults(func=cmd_steady)

    sp = sub.add_parser("growth", help="growth-rate spectrum at (k, Rab)")
    common(sp)
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--rab", type=float, default=None)
    sp.set_defaults(func=cmd_growth)

    sp = sub.add_parser("neutral", help="trace a neutral stability curve")
    common(sp)
    _k_flags(sp)
    sp.set_defaults(func=cmd_neutral)

    sp = sub.add_parser("critical", help="locate the critical point")
    common(sp)
    _k_flags(sp)
    sp.set_defaults(func=cmd_critical)

    sp = sub.add_parser("table", help="critical points over a (Gc, RaT) sweep")
    common(sp)
    _k_flags(sp)
    sp.add_argument("--jobs", type=int, default=1,
                    help="worker processes for sweep rows")
    sp.set_defaults(func=cmd_table)

    sp = sub.add_parser("modes", help="eigenmode field snapshots at (k, Rab)")
    common(sp)
    sp.add_argument("--k", type=float, required=True)
    sp.add_argument("--rab", type=float, default=None)
    sp.add_argument("--snapshots", type=int, default=1)
    sp.add_argument("--concat-fields", action="store_true",
                    help="single concatenated CSV instead of one per snapshot")
    sp.add_argument("--total-temperature", action="store_true",
                    help="also export conduction profile plus 0.1 * T1")
    sp.set_defaults(func=cmd_modes)
    return p


def _k_flags(sp):
    sp.add_argument("--k-min", type=float, default=None)
    sp.add_argument("--k-max", type=float, default=None)
    sp.add_argument("--k-samples", type=int, default=None)


def load_config(path):
    try:
        with open(path) as f:
            doc = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a JSON object")
    return doc


def params_from_config(doc, resolution=None):
    """Resolve a ModelParams from a config document.

    The taxis steepness may be given either directly (``beta``) or through
    the critical intensity (``Gc``); when both are present they must agree
    to 1e-6.
    """
    known = {"Sc", "Le", "Vc", "Gt", "kappa", "beta", "Gc", "RaT", "Rab",
             "N", "sweep", "kwindow"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "kappa" not in doc:
        raise ConfigError("config must set kappa")
    gt = float(doc.get("Gt", _model.DEFAULT_GT))
    beta = _resolve_beta(doc.get("beta"), doc.get("Gc"), gt)
    try:
        return _model.ModelParams(
            kappa=float(doc["kappa"]),
            beta=beta,
            Sc=float(doc.get("Sc", _model.DEFAULT_SC)),
            Le=float(doc.get("Le", _model.DEFAULT_LE)),
            Vc=float(doc.get("Vc", _model.DEFAULT_VC)),
            Gt=gt,
            RaT=float(doc.get("RaT", 0.0)),
            Rab=float(doc.get("Rab", 0.0)),
            N=int(resolution if resolution is not None else doc.get("N", 64)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_beta(beta, gc, gt):
    if beta is None and gc is None:
        raise ConfigError("config must set exactly one of beta or Gc")
    if beta is not None and gc is not None:
        implied = _model.critical_intensity(float(beta), gt)
        if abs(implied - float(gc)) > _CONSISTENCY_TOL:
            raise ConfigError(
                f"beta={beta} implies Gc={implied:.8f} but config says "
                f"Gc={gc}; they disagree by more than {_CONSISTENCY_TOL}"
            )
        return float(beta)
    if beta is not None:
        return float(beta)
    try:
        return _model.beta_for_critical_intensity(float(gc), gt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def k_window_from_config(doc, args):
    kw = doc.get("kwindow", [0.01, 10.0, 60])
    if not (isinstance(kw, (list, tuple)) and len(kw) == 3):
        raise ConfigError("kwindow must be [k_min, k_max, n_samples]")
    k_min = args.k_min if args.k_min is not None else float(kw[0])
    k_max = args.k_max if args.k_max is not None else float(kw[1])
    n = args.k_samples if args.k_samples is not None else int(kw[2])
    if not (0.0 < k_min < k_max):
        raise ConfigError(f"kwindow bounds must satisfy 0 < k_min < k_max, "
                          f"got ({k_min}, {k_max})")
    if n < 2:
        raise ConfigError(f"kwindow needs at least 2 samples, got {n}")
    return k_min, k_max, n


def _outdir(args):
    import os

    os.makedirs(args.out, exist_ok=True)
    return args.out


def _path(args, name):
    import os

    return os.path.join(_outdir(args), name)


def cmd_steady(args):
    doc = load_config(args.config)
    params = params_from_config(doc, args.resolution)
    state = _bs.solve_basic_state(params)
    _bs.write_profiles_csv(state, _path(args, "basic_state.csv"))
    report = {
        "residual": _bs.basic_state_residual(state, params),
        "cell_mass": float(np.trapz(state.ns, state.z)),
        "ns_max": float(np.max(state.ns)),
        "ns_max_z": float(state.z[int(np.argmax(state.ns))]),
        "Gc": params.Gc,
        "N": params.N,
    }
    with open(_path(args, "steady_report.json"), "w") as f:
        json.dump(report, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"basic state: residual {report['residual']:.6g}, "
          f"peak concentration {report['ns_max']:.6g} "
          f"at z = {report['ns_max_z']:.6g}")
    return 0


def cmd_growth(args):
    doc = load_config(args.config)
    params = params_from_config(doc, args.resolution)
    rab = float(args.rab) if args.rab is not None else params.Rab
    params = params.with_(Rab=rab)
    state = _bs.solve_basic_state(params)
    ops = _stab.assemble_operators(state, params, args.k)
    ev = _stab.leading_eigenvalues(ops, count=_stab.MAX_LEADING)
    _stab.write_spectrum_csv(_path(args, "spectrum.csv"), args.k, rab,
                             params.RaT, ev)
    lead = ev[0]
    print(f"gamma_max = {lead.real:.6g} {lead.imag:+.6g}i at "
          f"k = {args.k:.6g}, Rab = {rab:.6g}")
    return 0


def cmd_neutral(args):
    doc = load_config(args.config)
    params = params_from_config(doc, args.resolution)
    k_min, k_max, n = k_window_from_config(doc, args)
    state = _bs.solve_basic_state(params)
    curve = _neu.trace_neutral_curve(state, params, k_min, k_max, n)
    _neu.write_curve_csv(curve, _path(args, "neutral_curve.csv"))
    for k, msg in curve.failures:
        print(f"sample k = {k:.6g} failed: {msg}", file=sys.stderr)
    print(f"neutral curve: {len(curve)} points, "
          f"{len(curve.failures)} failed samples")
    return 0


def cmd_critical(args):
    doc = load_config(args.config)
    params = params_from_config(doc, args.resolution)
    k_min, k_max, n = k_window_from_config(doc, args)
    state = _bs.solve_basic_state(params)
    t0 = time.perf_counter()
    result = _neu.find_critical(state, params, (k_min, k_max), n)
    wall = time.perf_counter() - t0
    _neu.critical_to_json(result, _path(args, "critical.json"),
                          extra={"wall_time_s": round(wall, 3)})
    lam = "inf" if math.isinf(result.lambda_c) else f"{result.lambda_c:.6g}"
    kind = "oscillatory" if result.oscillatory else "stationary"
    print(f"critical: Rab_c = {result.Rab_c:.6g} at lambda_c = {lam} "
          f"({kind}, Im gamma = {result.im_gamma:.6g})")
    return 0


def _table_row(job):
    """One sweep row; returns (index, row-dict). Runs in worker processes."""
    idx, cfg, k_window, n_samples = job
    row = dict(cfg)
    try:
        params = _model.params_for_critical_intensity(
            cfg["Gc"], kappa=cfg["kappa"],
            Sc=cfg["Sc"], Le=cfg["Le"], Vc=cfg["Vc"], Gt=cfg["Gt"],
            RaT=cfg["RaT"], N=cfg["N"],
        )
        state = _bs.solve_basic_state(params)
        res = _neu.find_critical(state, params, k_window, n_samples)
        row.update(lambda_c=res.lambda_c, Rab_c=res.Rab_c,
                   im_gamma=res.im_gamma, error="")
    except Exception as exc:
        row.update(lambda_c=math.nan, Rab_c=math.nan, im_gamma=math.nan,
                   error=f"{type(exc).__name__}: {exc}")
    return idx, row


def cmd_table(args):
    doc = load_config(args.config)
    sweep = doc.get("sweep")
    if not isinstance(sweep, dict) or not sweep.get("RaT") or not sweep.get("Gc"):
        raise ConfigError(
            "table needs config sweep lists: {'sweep': {'Gc': [...], 'RaT': [...]}}"
        )
    base = params_from_config({k: v for k, v in doc.items() if k != "sweep"}
                              | {"Gc": sweep["Gc"][0]}, args.resolution)
    k_min, k_max, n = k_window_from_config(doc, args)
    jobs = []
    for gc in sweep["Gc"]:
        for rat in sweep["RaT"]:
            cfg = {"Gc": float(gc), "Vc": base.Vc, "kappa": base.kappa,
                   "RaT": float(rat), "Sc": base.Sc, "Le": base.Le,
                   "Gt": base.Gt, "N": base.N}
            jobs.append((len(jobs), cfg, (k_min, k_max), n))

    if args.jobs > 1:
        with get_context("spawn").Pool(args.jobs) as pool:
            results = pool.map(_table_row, jobs)
    else:
        results = [_table_row(j) for j in jobs]
    results.sort(key=lambda r: r[0])

    path = _path(args, "table.csv")
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["Gc", "Vc", "kappa", "RaT", "lambda_c", "Rab_c",
                    "im_gamma", "error"])
        for _, row in results:
            w.writerow([_fmt(row["Gc"]), _fmt(row["Vc"]), _fmt(row["kappa"]),
                        _fmt(row["RaT"]), _fmt(row["lambda_c"]),
                        _fmt(row["Rab_c"]), _fmt(row["im_gamma"]),
                        row["error"]])
    failed = sum(1 for _, row in results if row["error"])
    print(f"table: {len(results) - failed}/{len(results)} rows solved "
          f"-> {path}")
    return 4 if failed else 0


def cmd_modes(args):
    doc = load_config(args.config)
    params = params_from_config(doc, args.resolution)
    rab = float(args.rab) if args.rab is not None else params.Rab
    params = params.with_(Rab=rab)
    state = _bs.solve_basic_state(params)
    ops = _stab.assemble_operators(state, params, args.k)
    gamma = _stab.growth_rate(state, params, args.k, rab)
    mode = _stab.eigenmode(ops, gamma)

    oscillatory = abs(gamma.imag) > 1e-6
    n_snap = max(1, args.snapshots)
    if oscillatory and n_snap > 1:
        snaps = _pat.oscillation_snapshots(mode, args.k, n_snap)
    else:
        if n_snap > 1:
            print("warning: stationary mode; emitting a single snapshot",
                  file=sys.stderr)
        snaps = [_pat.mode_to_fields(mode, args.k)]
    paths = _pat.write_fields_csv(snaps, _path(args, "fields.csv"),
                                  concatenate=args.concat_fields)
    if args.total_temperature:
        totals = [_pat.with_total_temperature(s) for s in snaps]
        paths += _pat.write_fields_csv(totals, _path(args, "fields_total.csv"),
                                       concatenate=args.concat_fields)
    kind = "oscillatory" if oscillatory else "stationary"
    print(f"{kind} mode gamma = {gamma.real:.6g} {gamma.imag:+.6g}i; "
          f"wrote {len(paths)} file(s)")
    return 0


def _fmt(x):
    x = float(x)
    if math.isnan(x):
        return ""
    if math.isinf(x):
        return "inf"
    return format(x, ".17g")


if __name__ == "__main__":
    sys.exit(main())
