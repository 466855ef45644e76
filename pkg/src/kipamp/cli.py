"""Command-line entry point: ``kipamp <subcommand> --config FILE [options]``.

Every run writes its outputs plus ``manifest.json`` into ``--out-dir``.
Errors print one line ``ERR_<KIND>: message`` to stderr and exit with 2
(configuration/input), 3 (numerical failure) or 4 (no stable state).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import DeviceConfig, bundled_config_path, load_config
from .errors import ConfigError, KipampError, SpectrumError
from .io import now_iso, read_columns, verify_manifest, write_json, write_manifest, write_table
from .model import TWO_PI, hybridize, kerr_design, kinetic_inductance, NanowireGeometry
from .steady import (PumpConfig, classify, default_alpha_max, hysteresis,
                     parametric_threshold, pump_sweep, solve_steady, watt_to_dbm)


def _resolve_config(name):
    if name is None:
        raise ConfigError("--config is required for this subcommand")
    p = Path(name)
    if not p.exists() and p.suffix == "" and "/" not in name:
        p = bundled_config_path(name)
    return load_config(p)


def _pump_omega(cfg: DeviceConfig, args):
    if getattr(args, "pump_freq", None) is not None:
        return TWO_PI * args.pump_freq
    if getattr(args, "pump_offset", None) is not None:
        return 0.5 * (cfg.params.omega1 + cfg.params.omega2) + TWO_PI * args.pump_offset
    if cfg.pump_omega is None:
        raise ConfigError("no pump frequency: use --pump-freq/--pump-offset or [pump] in config")
    return cfg.pump_omega


def _pump(cfg: DeviceConfig, args) -> PumpConfig:
    w = _pump_omega(cfg, args)
    if getattr(args, "pump_off", False):
        return PumpConfig(w, 0.0)
    power = getattr(args, "pump_power", None)
    return cfg.pump(power_dBm=power, omega_p=w)


def _instrument_dbm(cfg, pump: PumpConfig):
    if pump.alpha_p == 0:
        return float("-inf")
    return float(watt_to_dbm(pump.P_pump)) + cfg.att_dB


def _offset_grid(cfg, args):
    h = hybridize(cfg.params)
    span = TWO_PI * args.span if args.span else 1.5 * h.splitting
    return np.linspace(-0.5 * span, 0.5 * span, args.points)


def _threshold(cfg, omega_p):
    th = parametric_threshold(cfg.params, omega_p, default_alpha_max(cfg.params), seeds=cfg.seeds)
    if th is None:
        raise SpectrumError("no parametric threshold at this pump frequency")
    return th


# ---------------------------------------------------------------------------
# subcommands: each returns a list of written paths


def cmd_hybridize(cfg, args, out):
    h = hybridize(cfg.params)
    hx = hybridize(cfg.params, exact=True) if cfg.params.g > 0 else h
    rows = [("minus", h.omega_minus / TWO_PI, h.kappa_minus / TWO_PI, hx.kappa_minus / TWO_PI),
            ("plus", h.omega_plus / TWO_PI, h.kappa_plus / TWO_PI, hx.kappa_plus / TWO_PI)]
    print(f"f_minus = {h.omega_minus / TWO_PI / 1e9:.6f} GHz  kappa_minus = "
          f"{h.kappa_minus / TWO_PI / 1e6:.4f} MHz")
    print(f"f_plus  = {h.omega_plus / TWO_PI / 1e9:.6f} GHz  kappa_plus  = "
          f"{h.kappa_plus / TWO_PI / 1e6:.4f} MHz")
    print(f"splitting = {h.splitting / TWO_PI / 1e6:.4f} MHz")
    return [write_table(out / "modes.csv", ["mode", "freq_Hz", "kappa_Hz", "kappa_exact_Hz"], rows,
                        args.format)]


def cmd_steady(cfg, args, out):
    pump = _pump(cfg, args)
    roots = solve_steady(cfg.params, pump, cfg.seeds)
    rows = []
    for i, s in enumerate(roots):
        rep = classify(cfg.params, pump, s)
        rows.append((i, s.n1, s.n2, s.alpha1.real, s.alpha1.imag, s.alpha2.real, s.alpha2.imag,
                     s.Delta1 / TWO_PI, s.Delta2 / TWO_PI, rep.stable, rep.margin / TWO_PI))
        print(f"root {i}: n1 = {s.n1:.6g}  n2 = {s.n2:.6g}  "
              f"{'stable' if rep.stable else 'unstable'} (margin {rep.margin / TWO_PI:.6g} Hz)")
    cols = ["branch", "n1", "n2", "alpha1_re", "alpha1_im", "alpha2_re", "alpha2_im", "Delta1_Hz",
            "Delta2_Hz", "stable", "margin_Hz"]
    return [write_table(out / "steady.csv", cols, rows, args.format)]


def _power_grid(cfg, args, default_start, default_stop):
    start = default_start if args.p_start is None else args.p_start
    stop = default_stop if args.p_stop is None else args.p_stop
    return np.linspace(start, stop, args.p_points)


def cmd_sweep(cfg, args, out):
    w = _pump_omega(cfg, args)
    p0 = cfg.pump_dBm if cfg.pump_dBm is not None else 0.0
    powers = _power_grid(cfg, args, p0 - 30.0, p0)
    alphas = [PumpConfig.from_dbm(w, p, cfg.att_dB).alpha_p for p in powers]
    rows = []
    res = {}
    for direction in ("up", "down"):
        branches = pump_sweep(cfg.params, w, alphas, direction, cfg.seeds,
                              stop_at_threshold=not args.keep_unstable)
        res[direction] = branches
        for b in branches:
            for pt in b.points:
                s = pt.state
                p_dbm = _instrument_dbm(cfg, PumpConfig(w, pt.alpha_p))
                rows.append((p_dbm, w / TWO_PI, b.branch_id, s.alpha1.real, s.alpha1.imag,
                             s.alpha2.real, s.alpha2.imag, s.n1, s.n2, pt.report.stable,
                             pt.report.margin / TWO_PI, direction, pt.flag))
    print(f"hysteresis: {'yes' if hysteresis(res['up'], res['down']) else 'no'}")
    cols = ["pump_power_dBm", "pump_freq_Hz", "branch_id", "re_a1", "im_a1", "re_a2", "im_a2",
            "n1", "n2", "stable", "margin_Hz", "direction", "flag"]
    return [write_table(out / "sweep.csv", cols, rows, args.format)]


def _best_gbp(cfg, state, reflection):
    from .response import measure_gbp

    found = []
    for side in ("+", "-"):
        try:
            found.append(measure_gbp(cfg.params, state, side, reflection=reflection))
        except SpectrumError:
            pass
    return max(found, key=lambda g: g.peak_gain_dB) if found else None


def cmd_gain(cfg, args, out):
    from .response import added_noise, select_state, spectrum_for_state

    pump = _pump(cfg, args)
    state, _ = select_state(cfg.params, pump, args.branch, cfg.seeds)
    g = _best_gbp(cfg, state, args.reflection) if pump.alpha_p != 0 else None
    if g is not None and not args.span:
        # the gain peak is far narrower than the mode splitting: zoom onto it
        offsets = g.peak_offset + np.linspace(-5 * g.fwhm, 5 * g.fwhm, args.points)
    else:
        offsets = _offset_grid(cfg, args)
    spec = spectrum_for_state(cfg.params, state, offsets, args.reflection)
    noise = [added_noise(cfg.params, state, w).n_added if np.abs(c) > 0 else float("nan")
             for w, c in zip(offsets, spec.c_S)]
    rows = zip(offsets / TWO_PI, spec.abs_freq / TWO_PI, spec.gain_signal_dB, spec.gain_idler_dB,
               noise)
    path = write_table(out / "spectrum.csv", ["offset_Hz", "abs_freq_Hz", "gain_signal_dB",
                                              "gain_idler_dB", "n_added_quanta"], rows, args.format)
    print(f"peak gain on grid = {spec.peak_gain_dB:.4f} dB")
    if g is not None:
        print(f"peak gain = {g.peak_gain_dB:.4f} dB at offset {g.peak_offset / TWO_PI:.9g} Hz")
        print(f"FWHM = {g.fwhm / TWO_PI:.6g} Hz  GBP = {g.gbp_measured / TWO_PI:.6g} Hz  "
              f"(theory {g.gbp_theory / TWO_PI:.6g} Hz)")
    elif pump.alpha_p != 0:
        print("FWHM/GBP unavailable: no resolvable gain peak")
    return [path]


def _pump_map_row(payload):
    from .response import pump_map

    params, w, alphas, offsets, reflection, seeds = payload
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return pump_map(params, [w], alphas, offsets, reflection, seeds)


def cmd_pump_map(cfg, args, out):
    w0 = _pump_omega(cfg, args)
    fspan = TWO_PI * args.freq_span
    freqs = w0 + np.linspace(-0.5 * fspan, 0.5 * fspan, args.freq_points)
    p0 = cfg.pump_dBm if cfg.pump_dBm is not None else 0.0
    powers = _power_grid(cfg, args, p0 - 10.0, p0)
    alphas = np.array([PumpConfig.from_dbm(w0, p, cfg.att_dB).alpha_p for p in powers])
    offsets = _offset_grid(cfg, args)
    jobs = [(cfg.params, w, alphas, offsets, args.reflection, cfg.seeds) for w in freqs]
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as ex:
            maps = list(ex.map(_pump_map_row, jobs))
    else:
        maps = [_pump_map_row(j) for j in jobs]
    rows = []
    for w, m in zip(freqs, maps):
        for j, p in enumerate(powers):
            for k, off in enumerate(offsets):
                rows.append((w / TWO_PI, p, off / TWO_PI, m.gain_signal_dB[0, j, k],
                             m.gain_idler_dB[0, j, k], m.stable[0, j]))
    n_ok = sum(int(m.stable.sum()) for m in maps)
    print(f"stable cells: {n_ok} of {len(freqs) * len(powers)}")
    cols = ["pump_freq_Hz", "pump_power_dBm", "offset_Hz", "gain_dB", "gain_idler_dB", "stable"]
    return [write_table(out / "pump_map.csv", cols, rows, args.format)]


def cmd_gbp(cfg, args, out):
    from .response import amplitude_for_gain, measure_gbp

    w = _pump_omega(cfg, args)
    th = _threshold(cfg, w)
    rows = []
    for target in args.gains:
        alpha, state = amplitude_for_gain(cfg.params, w, target, th.alpha_p, seeds=cfg.seeds)
        p_dbm = float(watt_to_dbm(PumpConfig(w, alpha).P_pump)) + cfg.att_dB
        for side in ("-", "+"):
            g = measure_gbp(cfg.params, state, side)
            rows.append((target, p_dbm, side, g.peak_gain_dB, g.peak_offset / TWO_PI,
                         g.fwhm / TWO_PI, g.gbp_measured / TWO_PI, g.gbp_theory / TWO_PI))
            print(f"{target:5.1f} dB target, side {side}: G = {g.peak_gain_dB:.3f} dB  "
                  f"GBP = {g.gbp_measured / TWO_PI / 1e6:.4f} MHz  "
                  f"(theory {g.gbp_theory / TWO_PI / 1e6:.4f} MHz)")
    cols = ["target_gain_dB", "pump_power_dBm", "side", "peak_gain_dB", "peak_offset_Hz",
            "fwhm_Hz", "gbp_Hz", "gbp_theory_Hz"]
    return [write_table(out / "gbp.csv", cols, rows, args.format)]


def cmd_compress(cfg, args, out):
    from .response import amplitude_for_gain, find_peak
    from .timedomain import compression_sweep

    w = _pump_omega(cfg, args)
    th = _threshold(cfg, w)
    alpha, state = amplitude_for_gain(cfg.params, w, args.gain, th.alpha_p, side=args.side,
                                      seeds=cfg.seeds)
    peak = find_peak(cfg.params, state, args.side)
    powers = np.linspace(args.s_start, args.s_stop, args.s_points)
    res = compression_sweep(cfg.params, PumpConfig(w, alpha), peak.offset, powers, state=state)
    rows = zip(res.P_in_dBm, res.gain_dB, res.settled)
    path = write_table(out / "compression.csv", ["P_in_dBm", "gain_dB", "settled_flag"], rows,
                       args.format)
    print(f"plateau gain = {res.plateau_dB:.3f} dB")
    print("P_1dB = absent (no compression in range)" if res.P_1dB is None
          else f"P_1dB = {res.P_1dB:.3f} dBm (on chip)")
    summary = write_json(out / "compression_summary.json",
                         {"plateau_dB": res.plateau_dB, "P_1dB_dBm": res.P_1dB,
                          "signal_offset_Hz": peak.offset / TWO_PI,
                          "pump_power_dBm": _instrument_dbm(cfg, PumpConfig(w, alpha))})
    return [path, summary]


def cmd_simulate(cfg, args, out):
    from scipy.constants import hbar

    from .steady import dbm_to_watt
    from .timedomain import ToneDrive, demodulate, integrate

    pump = _pump(cfg, args)
    delta = TWO_PI * args.delta
    A_s = float(np.sqrt(dbm_to_watt(args.signal_power) / (hbar * (pump.omega_p + delta))))
    drive = ToneDrive(pump.omega_p, pump.alpha_p, A_s, delta)
    tr = integrate(cfg.params, drive, args.duration)
    # analyse the last whole-period window
    per = 32
    n_per = max(1, min(args.window_periods, (len(tr.t) - 1) // per))
    sl = slice(len(tr.t) - n_per * per - 1, len(tr.t))
    dem = demodulate(tr.t[sl], delta, tr.a_out[sl])
    summary = {"settled": tr.settled, "signal_gain_dB": 20 * np.log10(abs(dem[1]) / A_s),
               "idler_gain_dB": 20 * np.log10(max(abs(dem[-1]), 1e-300) / A_s),
               "tones": {str(k): v for k, v in dem.amplitudes.items()},
               "residual_power": dem.residual_power, "total_power": dem.total_power}
    print(f"signal gain = {summary['signal_gain_dB']:.4f} dB  idler gain = "
          f"{summary['idler_gain_dB']:.4f} dB  settled = {tr.settled}")
    paths = [write_json(out / "simulate.json", summary)]
    if args.dump_trace:
        rows = zip(tr.t, tr.alpha1.real, tr.alpha1.imag, tr.alpha2.real, tr.alpha2.imag)
        paths.append(write_table(out / "trace.csv", ["t_s", "alpha1_re", "alpha1_im", "alpha2_re",
                                                     "alpha2_im"], rows, "csv"))
    return paths


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_fit_resonance(cfg, args, out):
    from .fitting import ReflectionTrace, fit_resonance

    if args.mag_only:
        cols = read_columns(args.trace, ["freq_Hz", "mag_dB"])
        trace = ReflectionTrace.from_mag_db(cols["freq_Hz"], cols["mag_dB"])
    else:
        cols = read_columns(args.trace, ["freq_Hz", "re_S11", "im_S11"])
        trace = ReflectionTrace(cols["freq_Hz"], cols["re_S11"] + 1j * cols["im_S11"])
    if args.window:
        lo, hi = args.window
        m = (trace.freq >= lo) & (trace.freq <= hi)
        trace = ReflectionTrace(trace.freq[m], trace.s11[m], trace.mag_only)
    fit = fit_resonance(trace)
    report = {"f0_Hz": fit.f0, "kappa_e_Hz": fit.kappa_e, "kappa_i_Hz": fit.kappa_i,
              "background": fit.background, "delay_s": fit.delay, "f_ref_Hz": fit.f_ref,
              "residual_norm": fit.residual_norm, "stderr": fit.stderr, "ci95": fit.ci95,
              "magnitude_only": trace.mag_only, "ambiguous_coupling": fit.ambiguous,
              "per_mode_window": list(args.window) if args.window else None,
              "input_sha256": _digest(args.trace)}
    if fit.alternative is not None:
        report["alternative"] = {"kappa_e_Hz": fit.alternative.kappa_e,
                                 "kappa_i_Hz": fit.alternative.kappa_i}
    print(f"f0 = {fit.f0:.9g} Hz  kappa_e = {fit.kappa_e:.6g} Hz  kappa_i = {fit.kappa_i:.6g} Hz")
    if fit.ambiguous:
        print("magnitude-only data: kappa_e and kappa_i may be swapped (both reported)")
    return [write_json(out / "resonance_fit.json", report)]


def cmd_fit_kerr(cfg, args, out):
    from .fitting import fit_kerr

    cols = read_columns(args.points, ["n", "shift_Hz"])
    fit = fit_kerr(np.column_stack([cols["n"], cols["shift_Hz"]]))
    print(f"K = {fit.K:.6g} Hz/photon +- {fit.stderr:.3g} (95% CI +- {fit.ci95:.3g})")
    return [write_json(out / "kerr_fit.json", {"K_Hz": fit.K, "stderr_Hz": fit.stderr,
                                               "ci95_Hz": fit.ci95, "intercept": 0.0,
                                               "n_points": len(fit.n),
                                               "input_sha256": _digest(args.points)})]


def cmd_fit_gain(cfg, args, out):
    from .fitting import MeasuredSpectrum, fit_gain_model

    if not args.spectrum or len(args.spectrum) != len(args.pump_powers or []):
        raise ConfigError("give one --pump-power per --spectrum")
    w = _pump_omega(cfg, args)
    spectra = []
    for path, p in zip(args.spectrum, args.pump_powers):
        cols = read_columns(path, ["offset_Hz"])
        key = "gain_signal_dB" if "gain_signal_dB" in cols else "gain_dB"
        if key not in cols:
            raise ConfigError(f"{path}: needs a gain_signal_dB or gain_dB column")
        spectra.append(MeasuredSpectrum(TWO_PI * cols["offset_Hz"], cols[key], w, p))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = fit_gain_model(spectra, cfg.params, args.free, att_dB=cfg.att_dB,
                             reflection=args.reflection, n_starts=args.starts, seed=args.seed)
    p = fit.params
    report = {"K_Hz": p.K0 / TWO_PI, "g_Hz": p.g / TWO_PI, "f1_Hz": p.omega1 / TWO_PI,
              "f2_Hz": p.omega2 / TWO_PI, "ATT_dB": fit.att_dB, "reflection": fit.reflection,
              "convention_costs": fit.comparison, "rms_residual_dB": fit.residual_per_curve,
              "free": list(args.free), "inputs_sha256": [_digest(s) for s in args.spectrum]}
    print(f"K = {report['K_Hz']:.6g} Hz  g = {report['g_Hz']:.6g} Hz  ATT = {fit.att_dB:.4f} dB  "
          f"convention = {fit.reflection}")
    return [write_json(out / "gain_fit.json", report)]


def cmd_design(cfg, args, out):
    mat = cfg.material
    geom = cfg.geometry
    if mat is None:
        raise ConfigError("design needs a [material] section")
    vals = {k: getattr(args, k) for k in ("length", "width", "thickness")}
    if geom is None and any(v is None for v in vals.values()):
        raise ConfigError("design needs a [geometry] section or --length/--width/--thickness")
    if geom is not None:
        vals = {k: getattr(geom, k) if v is None else v for k, v in vals.items()}
    geom = NanowireGeometry(**vals)
    L_K = kinetic_inductance(geom, mat)
    report = {"material": mat.name, "length_m": geom.length, "width_m": geom.width,
              "thickness_m": geom.thickness, "squares": geom.squares, "L_K_H": L_K}
    L_T = args.L_T if args.L_T is not None else cfg.L_T
    if L_T is not None and mat.rho and mat.Delta0 and mat.N0:
        omega = 0.5 * (cfg.params.omega1 + cfg.params.omega2)
        d = kerr_design(geom, mat, omega, L_T)
        report.update({"K_design": d.K, "participation": d.participation,
                       "scaling_figure": d.scaling_figure})
    print(f"L_K = {L_K * 1e9:.6g} nH ({geom.squares:.6g} squares)")
    return [write_json(out / "design.json", report)]


COMMANDS = {
    "hybridize": cmd_hybridize, "steady": cmd_steady, "sweep": cmd_sweep, "gain": cmd_gain,
    "pump-map": cmd_pump_map, "gbp": cmd_gbp, "compress": cmd_compress, "simulate": cmd_simulate,
    "fit-resonance": cmd_fit_resonance, "fit-kerr": cmd_fit_kerr, "fit-gain": cmd_fit_gain,
    "design": cmd_design,
}
NEEDS_CONFIG = set(COMMANDS) - {"fit-resonance", "fit-kerr"}


def _add_pump(p):
    p.add_argument("--pump-power", type=float, help="instrument pump power (dBm)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--pump-freq", type=float, help="pump frequency (Hz)")
    g.add_argument("--pump-offset", type=float, help="pump offset from the mode centre (Hz)")


def _add_grid(p, points=2001):
    p.add_argument("--span", type=float, help="offset span (Hz); default 1.5x the splitting")
    p.add_argument("--points", type=int, default=points)


def _add_powers(p, n=31):
    p.add_argument("--p-start", type=float, help="first instrument pump power (dBm)")
    p.add_argument("--p-stop", type=float, help="last instrument pump power (dBm)")
    p.add_argument("--p-points", type=int, default=n)


def build_parser():
    parser = argparse.ArgumentParser(prog="kipamp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kipamp {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file, or a bundled name (nbtin, nbn)")
    common.add_argument("--out-dir", default=".", help="directory for outputs and manifest")
    common.add_argument("--seed", type=int, help="override the solver's random-seed policy")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--verify", action="store_true",
                        help="check the manifest in --out-dir instead of running")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("hybridize", parents=[common], help="hybridized mode table")
    p = sub.add_parser("steady", parents=[common], help="all steady states at one pump setting")
    _add_pump(p)
    p = sub.add_parser("sweep", parents=[common], help="up/down pump-power continuation")
    _add_pump(p)
    _add_powers(p)
    p.add_argument("--keep-unstable", action="store_true")
    p = sub.add_parser("gain", parents=[common], help="signal/idler gain spectrum")
    _add_pump(p)
    _add_grid(p)
    p.add_argument("--pump-off", action="store_true")
    p.add_argument("--branch", type=int)
    p.add_argument("--reflection", choices=("physical", "bare"), default="physical")
    p = sub.add_parser("pump-map", parents=[common], help="gain over pump frequency and power")
    _add_pump(p)
    _add_grid(p, points=201)
    _add_powers(p, n=11)
    p.add_argument("--freq-span", type=float, default=2e6, help="pump frequency span (Hz)")
    p.add_argument("--freq-points", type=int, default=11)
    p.add_argument("--reflection", choices=("physical", "bare"), default="physical")
    p = sub.add_parser("gbp", parents=[common], help="gain-bandwidth product at target gains")
    _add_pump(p)
    p.add_argument("--gains", type=float, nargs="+", default=[20.0, 30.0, 40.0])
    p = sub.add_parser("compress", parents=[common], help="time-domain 1-dB compression")
    _add_pump(p)
    p.add_argument("--gain", type=float, default=20.0, help="small-signal gain to tune to (dB)")
    p.add_argument("--side", choices=("+", "-"), default="-")
    p.add_argument("--s-start", type=float, default=-150.0, help="first on-chip signal power (dBm)")
    p.add_argument("--s-stop", type=float, default=-80.0)
    p.add_argument("--s-points", type=int, default=36)
    p = sub.add_parser("simulate", parents=[common], help="two-tone time-domain integration")
    _add_pump(p)
    p.add_argument("--pump-off", action="store_true")
    p.add_argument("--signal-power", type=float, default=-140.0, help="on-chip signal power (dBm)")
    p.add_argument("--delta", type=float, required=False, default=1e6,
                   help="signal offset from the pump (Hz)")
    p.add_argument("--duration", type=float, default=20e-6, help="integration time (s)")
    p.add_argument("--window-periods", type=int, default=50)
    p.add_argument("--dump-trace", action="store_true")
    p = sub.add_parser("fit-resonance", parents=[common], help="single-port S11 fit")
    p.add_argument("--trace", required=True)
    p.add_argument("--mag-only", action="store_true")
    p.add_argument("--window", type=float, nargs=2, metavar=("F_LO", "F_HI"))
    p = sub.add_parser("fit-kerr", parents=[common], help="Kerr slope from (n, shift) points")
    p.add_argument("--points", required=True)
    p = sub.add_parser("fit-gain", parents=[common], help="fit the gain model to spectra")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--pump-freq", type=float, help="pump frequency (Hz)")
    g.add_argument("--pump-offset", type=float, help="pump offset from the mode centre (Hz)")
    p.add_argument("--spectrum", action="append", help="spectrum CSV (repeatable)")
    p.add_argument("--pump-power", type=float, action="append", dest="pump_powers",
                   help="instrument pump power for the matching --spectrum (repeatable)")
    p.add_argument("--free", nargs="+", default=["K0"])
    p.add_argument("--reflection", choices=("physical", "bare", "both"), default="both")
    p.add_argument("--starts", type=int, default=8)
    p = sub.add_parser("design", parents=[common], help="nanowire kinetic inductance")
    p.add_argument("--length", type=float)
    p.add_argument("--width", type=float)
    p.add_argument("--thickness", type=float)
    p.add_argument("--L-T", dest="L_T", type=float, help="total inductance (H)")
    sub.add_parser("verify", parents=[common], help="check output digests against the manifest")
    return parser


def _run_verify(out):
    problems = verify_manifest(out)
    if problems:
        raise ConfigError("manifest check failed: " + "; ".join(problems))
    print("manifest OK")
    return 0


def run(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out_dir)
    if args.command == "verify" or args.verify:
        return _run_verify(out)
    started = now_iso()
    cfg = _resolve_config(args.config) if (args.command in NEEDS_CONFIG or args.config) else None
    if cfg is not None and args.seed is not None:
        cfg.seeds = dataclasses.replace(cfg.seeds, rng_seed=args.seed)
    out.mkdir(parents=True, exist_ok=True)
    outputs = COMMANDS[args.command](cfg, args, out)
    write_manifest(out, args.command, argv, None if cfg is None else cfg.path,
                   None if cfg is None else cfg.digest, args.seed, started, outputs)
    return 0


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        return run(argv)
    except KipampError as exc:
        print(f"{exc.code}: {' '.join(str(exc).split())}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"ERR_INPUT: {' '.join(str(exc).split())}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
