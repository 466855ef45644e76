"""Parametric threshold versus pump frequency, and the lowest-threshold pump."""

import argparse

import numpy as np
from scipy.constants import hbar

from kipamp.config import bundled_config_path, load_config
from kipamp.io import write_table
from kipamp.model import TWO_PI
from kipamp.steady import default_alpha_max, lowest_threshold_pump, parametric_threshold, watt_to_dbm


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--device", default="nbn", choices=("nbtin", "nbn"))
    ap.add_argument("--span-MHz", type=float, default=10.0)
    ap.add_argument("--points", type=int, default=41)
    ap.add_argument("--out", default="threshold_scan.csv")
    args = ap.parse_args()
    cfg = load_config(bundled_config_path(args.device))
    p = cfg.params
    centre = 0.5 * (p.omega1 + p.omega2)
    opt = lowest_threshold_pump(p)
    a_max = default_alpha_max(p)
    rows = []
    for off in np.linspace(-0.5, 0.5, args.points) * args.span_MHz * 1e6:
        wp = centre + TWO_PI * off
        th = parametric_threshold(p, wp, a_max)
        p_dbm = np.nan if th is None else float(watt_to_dbm(hbar * wp * abs(th.alpha_p) ** 2))
        rows.append((off, p_dbm))
    write_table(args.out, ["pump_offset_Hz", "threshold_onchip_dBm"], rows, "csv")
    p_opt = float(watt_to_dbm(hbar * opt.omega_p * abs(opt.threshold.alpha_p) ** 2))
    print(f"lowest threshold {p_opt:.3f} dBm on chip at offset "
          f"{(opt.omega_p - centre) / TWO_PI / 1e6:+.4f} MHz; wrote {args.out}")


if __name__ == "__main__":
    main()
