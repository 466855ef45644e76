"""Time-domain gain versus signal power at a 20 dB operating point, for several pump retunings.

Runs on a small fast device by default; ``--device nbtin|nbn`` uses a bundled
configuration (slower: narrow lines need long settling).
"""

import argparse

import numpy as np

from kipamp.config import bundled_config_path, load_config
from kipamp.io import write_table
from kipamp.model import TWO_PI, DeviceParams
from kipamp.response import amplitude_for_gain, find_peak
from kipamp.steady import (PumpConfig, default_alpha_max, lowest_threshold_pump,
                           parametric_threshold)
from kipamp.timedomain import compression_sweep

MHZ = TWO_PI * 1e6


def small_device():
    w0 = TWO_PI * 5e9
    return DeviceParams(w0 - MHZ, w0 + MHZ, 0.5 * MHZ, 0.1 * MHZ, 0.05 * MHZ, 0.1 * MHZ, 4 * MHZ,
                        -TWO_PI * 1e3)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--device", default="small", choices=("small", "nbtin", "nbn"))
    ap.add_argument("--gain", type=float, default=20.0)
    ap.add_argument("--shifts-MHz", type=float, nargs="+", default=[0.0, -0.05, -0.1, -0.2])
    ap.add_argument("--p-start", type=float, default=-195.0)
    ap.add_argument("--p-stop", type=float, default=-120.0)
    ap.add_argument("--p-step", type=float, default=3.0)
    ap.add_argument("--out", default="compression.csv")
    args = ap.parse_args()
    if args.device == "small":
        p = small_device()
        w0 = lowest_threshold_pump(p).omega_p
    else:
        cfg = load_config(bundled_config_path(args.device))
        p, w0 = cfg.params, cfg.pump_omega
    grid = np.arange(args.p_start, args.p_stop + 1e-9, args.p_step)
    rows = []
    for sh in args.shifts_MHz:
        wp = w0 + sh * MHZ
        th = parametric_threshold(p, wp, default_alpha_max(p))
        if th is None:
            print(f"shift {sh:+.3f} MHz: no threshold, skipped")
            continue
        a, s = amplitude_for_gain(p, wp, args.gain, th.alpha_p, side="-")
        d = find_peak(p, s, "-").offset
        r = compression_sweep(p, PumpConfig(wp, a), d, grid, state=s)
        p1 = "none" if r.P_1dB is None else f"{r.P_1dB:.2f} dBm"
        print(f"shift {sh:+.3f} MHz  |alpha_p| = {abs(a):.6g}  plateau {r.plateau_dB:.2f} dB  "
              f"max {r.gain_dB.max():.2f} dB  P1dB {p1}")
        rows += [(sh, abs(a), pin, g, f) for pin, g, f in zip(r.P_in_dBm, r.gain_dB, r.settled)]
    write_table(args.out, ["pump_shift_MHz", "alpha_p", "P_in_dBm", "gain_dB", "settled"],
                np.array(rows, dtype=float), "csv")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
