"""Acceptance gate: one test per criterion, each reporting a single PASS/FAIL line."""

import time

import mpmath
import numpy as np
from scipy.constants import hbar

from kipamp.config import bundled_config_path, load_config
from kipamp.fitting import fit_attenuation, fit_kerr
from kipamp.model import TWO_PI, DeviceParams, hybridize
from kipamp.response import (added_noise, amplitude_for_gain, find_peak, measure_gbp,
                             scattering_rows)
from kipamp.steady import (PumpConfig, classify, default_alpha_max, lowest_threshold_pump,
                           parametric_threshold, solve_steady, watt_to_dbm)
from kipamp.timedomain import classify_td, compression_sweep, small_signal_gain_td

from conftest import ACCEPTANCE_LINES, MHZ, small_device

W0 = TWO_PI * 5e9


def report(tag, ok, detail):
    line = f"CRITERION {tag}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def lossless_pair(K0=-TWO_PI * 1e3):
    return DeviceParams(W0 - MHZ, W0 + MHZ, 0.5 * MHZ, 0.0, 0.0, 0.0, 4 * MHZ, K0)


def bundled(name):
    return load_config(bundled_config_path(name))


def threshold_at(params, omega_p):
    th = parametric_threshold(params, omega_p, default_alpha_max(params))
    assert th is not None, "no threshold at the configured pump frequency"
    return th


# 1 hybridization


def test_criterion_1_hybridization():
    t0 = time.perf_counter()
    got = {}
    for name in ("nbtin", "nbn"):
        h = hybridize(bundled(name).params)
        got[name] = (h.omega_minus / TWO_PI, h.omega_plus / TWO_PI)
    dt = time.perf_counter() - t0
    want = {"nbtin": (10.178e9, 10.577e9), "nbn": (7.707e9, 7.970e9)}
    err = max(abs(g / w - 1) for n in want for g, w in zip(got[n], want[n]))
    ok = err < 1e-12 and dt < 1.0
    report("1", ok, f"max relative error {err:.1e}, {dt:.3f} s")


# 2 gain-bandwidth product


def test_criterion_2a_gbp_converges_to_theory():
    t0 = time.perf_counter()
    # symmetric lossless pair in dimensionless units, g >> kappa
    p = DeviceParams(1000.0, 1000.0, 1.0, 0.0, 1.0, 0.0, 20.0, -1e-3)
    opt = lowest_threshold_pump(p)
    ratios = []
    for gain in (30.0, 35.0, 40.0):
        _, s = amplitude_for_gain(p, opt.omega_p, gain, opt.threshold.alpha_p)
        for side in "+-":
            g = measure_gbp(p, s, side)
            if g.peak_gain_dB >= 30.0:
                ratios.append(g.gbp_measured / g.gbp_theory)
    dt = time.perf_counter() - t0
    worst = max(abs(r - 1) for r in ratios)
    ok = len(ratios) >= 3 and worst <= 0.10 and dt < 30.0
    report("2a", ok, f"{len(ratios)} peaks >= 30 dB, sqrt(G)*FWHM / theory in "
                     f"[{min(ratios):.3f}, {max(ratios):.3f}], {dt:.1f} s")


def test_criterion_2b_bundled_gbp_targets():
    t0 = time.perf_counter()
    targets = {"nbtin": 3.3e6, "nbn": 6.9e6}
    got = {}
    for name, target in targets.items():
        cfg = bundled(name)
        th = threshold_at(cfg.params, cfg.pump_omega)
        _, s = amplitude_for_gain(cfg.params, cfg.pump_omega, 40.0, th.alpha_p)
        best = max((measure_gbp(cfg.params, s, side) for side in "+-"),
                   key=lambda g: g.peak_gain_dB)
        got[name] = best.gbp_measured / TWO_PI
    dt = time.perf_counter() - t0
    errs = {n: got[n] / targets[n] - 1 for n in targets}
    ok = all(abs(e) <= 0.25 for e in errs.values()) and dt < 30.0
    report("2b", ok, ", ".join(f"{n} {got[n] / 1e6:.2f} MHz vs {targets[n] / 1e6:.1f} MHz "
                               f"({errs[n]:+.0%})" for n in targets) + f", {dt:.1f} s")


# 3 gain magnitude with attenuation as the only free parameter


def test_criterion_3_gain_magnitude_and_pump_ordering():
    instrument = {"nbtin": -23.0, "nbn": -36.1}
    onchip_th, lines, ok = {}, [], True
    for name, p_inst in instrument.items():
        cfg = bundled(name)
        th = threshold_at(cfg.params, cfg.pump_omega)
        fit = fit_attenuation(cfg.params, cfg.pump_omega, p_inst, 40.0, th.alpha_p)
        below = abs(fit.alpha_p) < abs(th.alpha_p)
        ok &= fit.peak_gain_dB >= 38.0 and below
        onchip_th[name] = float(watt_to_dbm(hbar * cfg.pump_omega * abs(th.alpha_p) ** 2))
        lines.append(f"{name} ATT {fit.att_dB:.2f} dB, peak {fit.peak_gain_dB:.2f} dB at "
                     f"{abs(fit.alpha_p) / abs(th.alpha_p):.4f} of threshold")
    gap = onchip_th["nbtin"] - onchip_th["nbn"]
    ok &= gap >= 10.0
    report("3", ok, "; ".join(lines) + f"; on-chip threshold NbN {gap:.1f} dB below NbTiN")


# 4 time-domain versus linear response


def test_criterion_4_time_domain_matches_linear_response():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    p = small_device()
    opt = lowest_threshold_pump(p)
    errs, gains = [], []
    while len(errs) < 10:
        target = rng.uniform(5.0, 35.0)
        side = rng.choice(["+", "-"])
        wp = opt.omega_p - rng.uniform(0.0, 0.3) * MHZ
        th = parametric_threshold(p, wp, default_alpha_max(p))
        if th is None:
            continue
        try:
            a, s = amplitude_for_gain(p, wp, target, th.alpha_p, side=side)
        except ValueError:
            continue
        d = find_peak(p, s, side).offset
        td = small_signal_gain_td(p, PumpConfig(wp, a), d, state=s)
        lin = 20 * np.log10(abs(scattering_rows(p, s, [d])[0][0]))
        errs.append(abs(td.gain_signal_dB - lin))
        gains.append(lin)
    dt = time.perf_counter() - t0
    ok = max(errs) <= 0.1 and dt < 300.0
    report("4", ok, f"10 points at {min(gains):.1f}..{max(gains):.1f} dB, max |dG| "
                    f"{max(errs):.1e} dB, {dt:.0f} s")


# 5 symplectic and generalized unitarity identities


def _random_state(rng, lossy):
    while True:
        k1 = rng.uniform(0.1, 2.0)
        ki1, ki2 = (rng.uniform(0.0, 1.0), rng.uniform(0.01, 1.0)) if lossy else (0.0, 0.0)
        det = rng.uniform(-4.0, 4.0)
        p = DeviceParams(W0 - 0.5 * det * MHZ, W0 + 0.5 * det * MHZ, k1 * MHZ, ki1 * MHZ, 0.0,
                         ki2 * MHZ, rng.uniform(0.5, 8.0) * MHZ,
                         -TWO_PI * rng.uniform(100.0, 3000.0))
        pump = PumpConfig(W0 + rng.uniform(-4.0, 4.0) * MHZ, rng.uniform(0.0, 4e5))
        stable = [s for s in solve_steady(p, pump) if classify(p, pump, s).stable]
        if stable:
            return p, stable[0]


def test_criterion_5_symplectic_suite():
    rng = np.random.default_rng(7)
    w = np.linspace(-12, 12, 100) * MHZ
    worst_lossless = worst_lossy = 0.0
    for _ in range(200):
        p, s = _random_state(rng, lossy=False)
        c_S, c_I, _ = scattering_rows(p, s, w)
        g2 = np.abs(c_S) ** 2
        worst_lossless = max(worst_lossless,
                             float(np.max(np.abs(g2 - np.abs(c_I) ** 2 - 1) / np.maximum(g2, 1))))
    for _ in range(200):
        p, s = _random_state(rng, lossy=True)
        c_S, c_I, c_loss = scattering_rows(p, s, w)
        g2 = np.abs(c_S) ** 2
        total = (g2 - np.abs(c_I) ** 2 + np.abs(c_loss[:, 0]) ** 2 - np.abs(c_loss[:, 1]) ** 2
                 + np.abs(c_loss[:, 2]) ** 2 - np.abs(c_loss[:, 3]) ** 2)
        worst_lossy = max(worst_lossy, float(np.max(np.abs(total - 1) / np.maximum(g2, 1))))
    ok = worst_lossless <= 1e-8 and worst_lossy <= 1e-8
    report("5", ok, f"200x100 lossless defect {worst_lossless:.1e}, "
                    f"200x100 lossy defect {worst_lossy:.1e} (relative to max(G, 1))")


# 6 eigenvalue stability versus time-domain kicks


def test_criterion_6_stability_consistency():
    rng = np.random.default_rng(99)
    p = small_device()
    a_ref = abs(lowest_threshold_pump(p).threshold.alpha_p)
    agree, roots_checked, misses = 0, 0, []
    for i in range(50):
        pump = PumpConfig(W0 + rng.uniform(-3.0, 3.0) * MHZ, rng.uniform(0.0, 1.5) * a_ref)
        ok = True
        for s in solve_steady(p, pump):
            eig = "stable" if classify(p, pump, s).stable else "unstable"
            td = classify_td(p, pump, s, rng=np.random.default_rng(i)).verdict
            roots_checked += 1
            if td != eig:
                ok = False
                misses.append(f"#{i} {eig}/{td}")
        agree += ok
    report("6", agree == 50, f"{agree}/50 settings agree over {roots_checked} roots"
                             + (f"; mismatches {', '.join(misses)}" if misses else ""))


# 7 Kerr fit round trip


def test_criterion_7_kerr_round_trip():
    rng = np.random.default_rng(11)
    parts, ok = [], True
    for K, n_lo in ((-0.01, 1e4), (-0.21, 1e3)):
        within = covered = 0
        for _ in range(100):
            n = np.geomspace(n_lo, 1e3 * n_lo, 50)
            shift = K * n * (1 + 0.1 * rng.normal(size=n.size))
            fit = fit_kerr(np.c_[n, shift])
            within += abs(fit.K / K - 1) <= 0.05
            covered += fit.contains(K)
        ok &= within == 100 and covered >= 90
        parts.append(f"K={K} Hz: {within}/100 within 5%, CI coverage {covered}/100")
    report("7", ok, "; ".join(parts))


# 8 compression


def test_criterion_8_compression_behaviour():
    p = small_device()
    opt = lowest_threshold_pump(p)
    grid = np.arange(-195.0, -119.0, 3.0)

    def sweep(shift):
        wp = opt.omega_p + shift
        th = parametric_threshold(p, wp, default_alpha_max(p))
        a, s = amplitude_for_gain(p, wp, 20.0, th.alpha_p, side="-")
        d = find_peak(p, s, "-").offset
        return abs(a), compression_sweep(p, PumpConfig(wp, a), d, grid, state=s)

    a0, base = sweep(0.0)
    flat = abs(base.plateau_dB - 20.0) <= 0.1
    # after the plateau the gain must only fall
    start = int(np.argmax(np.abs(base.gain_dB - base.plateau_dB) > 0.1))
    expansion = float(np.max(base.gain_dB) - base.plateau_dB)
    monotone = bool(np.all(np.diff(base.gain_dB[start:]) < 0))
    past_max = bool(np.all(np.diff(base.gain_dB[int(np.argmax(base.gain_dB)):]) < 0))
    a1, moved = sweep(-0.1 * MHZ)
    upward = (a1 > a0 and base.P_1dB is not None and moved.P_1dB is not None
              and moved.P_1dB > base.P_1dB)
    ok = flat and monotone and upward and base.settled.all() and moved.settled.all()
    report("8", ok, f"plateau {base.plateau_dB:.2f} dB, gain expansion {expansion:.2f} dB before "
                    f"compression (monotone after plateau: {monotone}, after maximum: "
                    f"{past_max}), P1dB {base.P_1dB:.1f} -> {moved.P_1dB:.1f} dBm with pump "
                    f"x{a1 / a0:.3f}")


# 9 added noise


def test_criterion_9_added_noise():
    p = lossless_pair()
    opt = lowest_threshold_pump(p)
    devs = []
    for gain in (30.0, 35.0, 40.0):
        _, s = amplitude_for_gain(p, opt.omega_p, gain, opt.threshold.alpha_p)
        for side in "+-":
            pk = find_peak(p, s, side)
            if pk.gain_dB >= 30.0:
                devs.append(abs(added_noise(p, s, pk.offset).n_added / 0.5 - 1))
    cfg = bundled("nbtin")
    th = threshold_at(cfg.params, cfg.pump_omega)
    _, s = amplitude_for_gain(cfg.params, cfg.pump_omega, 40.0, th.alpha_p)
    pk = max((find_peak(cfg.params, s, side) for side in "+-"), key=lambda g: g.gain_dB)
    lossy = added_noise(cfg.params, s, pk.offset).n_added
    ok = len(devs) >= 3 and max(devs) <= 0.01 and lossy > 0.5
    report("9", ok, f"lossless max deviation from 0.5 is {max(devs):.1e} over {len(devs)} peaks; "
                    f"NbTiN with losses {lossy:.3f} quanta at 40 dB")


# 10 single-resonator bistability against the cubic


def cubic_oracle(p, pump):
    """Photon numbers from n [(d + K n)^2 + kappa^2/4] = kappa_e |a_p|^2 in 50-digit arithmetic."""
    mpmath.mp.dps = 50
    d = mpmath.mpf(p.omega1) - mpmath.mpf(pump.omega_p)
    K, k = mpmath.mpf(p.K0), mpmath.mpf(p.kappa1)
    rhs = mpmath.mpf(p.kappa_e1) * mpmath.mpf(abs(pump.alpha_p)) ** 2
    roots = mpmath.polyroots([K * K, 2 * d * K, d * d + k * k / 4, -rhs], maxsteps=200,
                             extraprec=200)
    n = sorted(float(mpmath.re(r)) for r in roots
               if abs(mpmath.im(r)) < mpmath.mpf(10) ** -30 * (1 + abs(r)) and mpmath.re(r) > 0)
    a1 = [complex(np.sqrt(p.kappa_e1) * pump.alpha_p / (1j * (float(d) + p.K0 * x) + p.kappa1 / 2))
          for x in n]
    return np.array(n), np.array(a1)


def test_criterion_10_bistability_against_cubic():
    K0 = -TWO_PI * 1e3
    pump = PumpConfig(W0, 8e4)
    count_ok, worst, three = 0, 0.0, 0
    for det in np.linspace(-1.0, 4.0, 100) * MHZ:
        p = DeviceParams(W0 + det, W0 + 50 * MHZ, 0.6 * MHZ, 0.4 * MHZ, 0.5 * MHZ, 0.5 * MHZ,
                         0.0, K0)
        n_ref, a_ref = cubic_oracle(p, pump)
        roots = sorted(solve_steady(p, pump), key=lambda r: r.n1)
        three += len(n_ref) == 3
        if len(roots) != len(n_ref):
            continue
        count_ok += 1
        a = np.array([r.alpha1 for r in roots])
        n = np.array([r.n1 for r in roots])
        worst = max(worst, float(np.max(np.abs(n / n_ref - 1))),
                    float(np.max(np.abs(a - a_ref) / np.abs(a_ref))))
    ok = count_ok == 100 and worst <= 1e-9 and three > 0
    report("10", ok, f"root count matches at {count_ok}/100 detunings ({three} bistable), "
                     f"max relative root error {worst:.1e}")
