"""``nanopan`` command line: modes, sweep, fit, ple, purcell.

Exit status 0 on success, 1 for unreadable input or invalid configuration,
2 when a solver or fit fails.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigError, RunConfig
from .eigensolver import (
    EigenSolverError,
    Plane,
    build_domain,
    export_field_profile,
    mode_summary,
    mode_volume,
    omega_for_wavelength,
    overlap_factor,
    quality_factor,
    solve_modes,
    track_mode,
)
from .purcell import CavityParams, max_purcell, purcell_report, zpl_purcell
from .spectra import FitError, fit_exp_decay, fit_lorentzian, read_xy_csv, write_xy_csv
from .spinmodel import SteadyStateError, linewidth_report, ple_spectrum, tune_diffusion

log = logging.getLogger("nanopan")

EXIT_OK, EXIT_INPUT, EXIT_FAILURE = 0, 1, 2
SWEEP_COLUMNS = ("diameter_m", "m", "lambda_res_m", "Q", "Vmode_m3", "xi", "F_zpl")


class CommandFailed(RuntimeError):
    """Solver or fit failure; maps to exit status 2."""


def _clean(obj):
    """Make floats JSON-safe (non-finite -> None) and numpy scalars plain."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dump_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False, ensure_ascii=False) + "\n"


def _workers(cfg: RunConfig | None = None) -> int:
    env = os.environ.get("NANOPAN_WORKERS")
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"NANOPAN_WORKERS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("NANOPAN_WORKERS must be >= 1")
        return n
    if cfg is not None and cfg.data.get("sweep", {}).get("workers"):
        return cfg.data["sweep"]["workers"]
    return os.cpu_count() or 1


# ----------------------------------------------------------------------
# modes


def cmd_modes(args) -> int:
    cfg = RunConfig.load(args.config)
    sol = cfg.solver()
    orders = args.m if args.m is not None else sol["m"]
    guess = args.guess_nm * 1e-9 if args.guess_nm else sol["guess"]
    n_modes = args.n_modes or sol["n_modes"]
    g = cfg.geometry()
    dipoles = cfg.dipoles()
    records, profiles = [], []
    for m in orders:
        try:
            d = build_domain(g, sol["h"], m, sol["pad"], pml=sol["pml"])
            modes = solve_modes(d, omega_for_wavelength(guess), n_modes,
                                tol=sol["tol"], max_sweeps=sol["max_sweeps"])
        except (EigenSolverError, ValueError) as exc:
            log.error("m=%d: %s", m, exc)
            continue
        for k, mode in enumerate(modes):
            records.append(mode_summary(mode, dipoles))
            if args.field_dir:
                profiles.append((f"mode_m{m}_{k}_{args.plane}.csv",
                                 export_field_profile(mode, Plane(args.plane, args.z_offset_nm * 1e-9))))
    if not records:
        raise CommandFailed("no mode found for any azimuthal order")
    if args.field_dir:
        out = Path(args.field_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name, prof in profiles:
            with open(out / name, "w", newline="", encoding="utf-8") as fh:
                prof.to_csv(fh)
    _emit(dump_json(records), args.output)
    return EXIT_OK


# ----------------------------------------------------------------------
# sweep


SWEEP_WINDOW = 0.1
SWEEP_CANDIDATES = 6


def sweep_point(cfg: RunConfig, diameter_nm: float, m: int, guess: float):
    """Tracked resonance for one (diameter, m) plus its sweep row."""
    sol = cfg.solver()
    d_m = diameter_nm / 1e9
    dom = build_domain(cfg.geometry(d_m), sol["h"], m, sol["pad"], pml=sol["pml"])
    mode = track_mode(dom, omega_for_wavelength(guess), window=SWEEP_WINDOW,
                      n_candidates=SWEEP_CANDIDATES, tol=sol["tol"], max_sweeps=sol["max_sweeps"])
    dipoles = cfg.dipoles()
    q = quality_factor(mode)
    v = mode_volume(mode)
    xi = overlap_factor(mode, dipoles[0]) if dipoles else 1.0
    fmax = max_purcell(CavityParams(max(q, 1.0), v, mode.lambda_res, cfg.n_eff))
    row = {
        "diameter_m": d_m, "m": m, "lambda_res_m": mode.lambda_res, "Q": q,
        "Vmode_m3": v, "xi": xi,
        "F_zpl": zpl_purcell(fmax, xi, q, cfg.emitter().lambda_zpl, mode.lambda_res),
    }
    return mode, row


def _sweep_chain(task):
    """Follow one mode family along a list of diameters by continuation.

    Each step's search wavelength is the previous resonance scaled by the
    diameter ratio, so neighbouring resonances of other families are skipped.
    """
    cfg_dict, m, diameters, guess, d_guess = task
    cfg = RunConfig.from_dict(cfg_dict)
    rows, errors = [], []
    for dia in diameters:
        g = guess * dia / d_guess
        try:
            mode, row = sweep_point(cfg, dia, m, g)
        except (EigenSolverError, ValueError, ArithmeticError) as exc:
            errors.append((dia, m, f"{type(exc).__name__}: {exc}"))
            continue
        rows.append(row)
        guess, d_guess = mode.lambda_res, dia
    return rows, errors


def run_sweep(cfg: RunConfig, workers: int = 1) -> list[dict]:
    """Resonance of each swept order m at every diameter.

    Per m, two chains start at the diameter closest to the configured one
    (searched at the configured wavelength) and walk up and down in size.
    """
    dias = cfg.sweep_diameters_nm()
    d_ref = cfg.data["geometry"]["disk_diameter_nm"]
    i0 = min(range(len(dias)), key=lambda i: (abs(dias[i] - d_ref), i))
    guess = cfg.solver()["guess"]
    data = cfg.to_dict()
    tasks = []
    for m in cfg.sweep_orders():
        tasks.append((data, m, dias[i0:], guess, d_ref))
        if i0 > 0:
            tasks.append((data, m, dias[i0::-1], guess, d_ref))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
            results = list(ex.map(_sweep_chain, tasks))
    else:
        results = [_sweep_chain(t) for t in tasks]
    rows = {}
    for part, errors in results:
        for dia, m, err in errors:
            log.warning("diameter %.1f nm, m=%d failed: %s", dia, m, err)
        for r in part:
            rows[(r["diameter_m"], r["m"])] = r
    return [rows[k] for k in sorted(rows)]


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([r["m"] if c == "m" else repr(float(r[c])) for c in SWEEP_COLUMNS])
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = RunConfig.load(args.config)
    if "sweep" not in cfg.data:
        raise ConfigError("configuration has no [sweep] section")
    workers = args.workers or _workers(cfg)
    rows = run_sweep(cfg, workers)
    if not rows:
        raise CommandFailed("sweep produced no modes")
    _emit(sweep_csv(rows), args.output)
    return EXIT_OK


# ----------------------------------------------------------------------
# fit


def cmd_fit(args) -> int:
    try:
        data = read_xy_csv(args.file)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot parse {args.file}: {exc}") from exc
    try:
        if args.model == "expdecay":
            if not hasattr(data, "t"):
                raise ConfigError("expdecay needs a time_<unit>,counts file")
            res = fit_exp_decay(data, weighting=args.weighting)
        else:
            if hasattr(data, "t"):
                raise ConfigError("Lorentzian models need a wavelength or detuning axis")
            res = fit_lorentzian(data, 1 if args.model == "lorentzian1" else 2,
                                 weighting=args.weighting)
    except FitError as exc:
        raise CommandFailed(f"fit failed: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _emit(dump_json(res.to_dict()), args.output)
    if not res.converged:
        log.error("fit did not converge (status %s)", res.status)
        return EXIT_FAILURE
    return EXIT_OK


# ----------------------------------------------------------------------
# ple


def cmd_ple(args) -> int:
    cfg = RunConfig.load(args.config)
    p = cfg.spin_params()
    det = cfg.detunings()
    spin = cfg.data["spin"]
    mw_on = args.mw == "on"
    try:
        if spin.get("target_fwhm_hz") is not None:
            p = tune_diffusion(p, spin["target_fwhm_hz"], det)
        s = ple_spectrum(p, det, mw_on)
    except SteadyStateError as exc:
        raise CommandFailed(str(exc)) from exc
    report = {"mw": args.mw, "diffusion_sigma_Hz": p.diffusion_sigma,
              "peak_signal": float(s.counts.max())}
    try:
        report["fit"] = linewidth_report(s, spin.get("gamma_tl_hz"))
    except (FitError, ValueError) as exc:
        report["fit"] = {"status": "failed", "error": str(exc)}
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"ple_mw_{args.mw}.csv", "w", newline="", encoding="utf-8") as fh:
        write_xy_csv(s, fh)
    _emit(dump_json(report), args.output)
    return EXIT_OK


# ----------------------------------------------------------------------
# purcell


def cmd_purcell(args) -> int:
    try:
        rep = purcell_report(**_purcell_inputs(args))
    except (ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    _emit(dump_json(rep), args.output)
    return EXIT_OK


def _purcell_inputs(args) -> dict:
    kw = {}
    groups = 0
    if args.q is not None:
        if (args.vmode_um3 is None) == (args.vmode_norm is None):
            raise ConfigError("give exactly one of --vmode-um3, --vmode-norm with --q")
        lam = args.lambda_cav_nm * 1e-9
        if args.vmode_um3 is not None:
            cav = CavityParams(args.q, args.vmode_um3 * 1e-18, lam, args.neff)
        else:
            cav = CavityParams.from_normalized(args.q, args.vmode_norm, lam, args.neff)
        kw.update(cavity=cav, xi=args.xi,
                  lambda_zpl=None if args.lambda_zpl_nm is None else args.lambda_zpl_nm * 1e-9)
        groups += 1
    life = (args.tau0_ns, args.eta, args.tau_on_ns, args.tau_off_ns)
    if any(v is not None for v in life):
        if any(v is None for v in life):
            raise ConfigError("lifetime estimate needs --tau0-ns --eta --tau-on-ns --tau-off-ns")
        kw.update(tau0=args.tau0_ns * 1e-9, eta=args.eta,
                  tau_on=args.tau_on_ns * 1e-9, tau_off=args.tau_off_ns * 1e-9)
        groups += 1
    if (args.i_on is None) != (args.i_off is None):
        raise ConfigError("intensity estimate needs both --i-on and --i-off")
    if args.i_on is not None:
        kw.update(i_on=args.i_on, i_off=args.i_off)
        groups += 1
    if args.fwhm_mhz is not None:
        kw["fwhm"] = args.fwhm_mhz * 1e6
    if args.tau_linewidth_ns is not None:
        kw["tau_linewidth"] = args.tau_linewidth_ns * 1e-9
    if not groups:
        raise ConfigError("nothing to compute: supply a cavity, lifetime or intensity group")
    return kw


# ----------------------------------------------------------------------


def _emit(text: str, path):
    if path:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nanopan", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modes", help="solve for resonant modes")
    p.add_argument("config")
    p.add_argument("--m", type=int, nargs="+")
    p.add_argument("--guess-nm", type=float)
    p.add_argument("--n-modes", type=int)
    p.add_argument("--field-dir", help="write normalized field CSVs here")
    p.add_argument("--plane", choices=("rz", "top"), default="rz")
    p.add_argument("--z-offset-nm", type=float, default=10.0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("sweep", help="diameter sweep table")
    p.add_argument("config")
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit a two-column CSV")
    p.add_argument("file")
    p.add_argument("--model", choices=("lorentzian1", "lorentzian2", "expdecay"), required=True)
    p.add_argument("--weighting", choices=("none", "poisson"), default="none")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("ple", help="simulate an excitation scan")
    p.add_argument("config")
    p.add_argument("--mw", choices=("on", "off"), default="on")
    p.add_argument("--out-dir", default=".")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_ple)

    p = sub.add_parser("purcell", help="Purcell-factor report")
    p.add_argument("--q", type=float)
    p.add_argument("--vmode-um3", type=float)
    p.add_argument("--vmode-norm", type=float, help="volume in units of (lambda/n_eff)^3")
    p.add_argument("--lambda-cav-nm", type=float, default=861.0)
    p.add_argument("--neff", type=float, default=2.6)
    p.add_argument("--xi", type=float)
    p.add_argument("--lambda-zpl-nm", type=float)
    p.add_argument("--tau0-ns", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--tau-on-ns", type=float)
    p.add_argument("--tau-off-ns", type=float)
    p.add_argument("--i-on", type=float)
    p.add_argument("--i-off", type=float)
    p.add_argument("--fwhm-mhz", type=float)
    p.add_argument("--tau-linewidth-ns", type=float)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_purcell)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"nanopan: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CommandFailed as exc:
        print(f"nanopan: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE
