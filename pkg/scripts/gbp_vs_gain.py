"""Gain-bandwidth product versus peak gain for a bundled device or a symmetric lossless pair.

Usage: python scripts/gbp_vs_gain.py [--device nbtin|nbn|symmetric] [--out gbp.csv]
"""

import argparse

import numpy as np

from kipamp.config import bundled_config_path, load_config
from kipamp.io import write_table
from kipamp.model import TWO_PI, DeviceParams
from kipamp.response import amplitude_for_gain, measure_gbp
from kipamp.steady import default_alpha_max, lowest_threshold_pump, parametric_threshold


def device(name):
    if name == "symmetric":
        # dimensionless units, g >> kappa
        p = DeviceParams(1000.0, 1000.0, 1.0, 0.0, 1.0, 0.0, 20.0, -1e-3)
        opt = lowest_threshold_pump(p)
        return p, opt.omega_p, opt.threshold.alpha_p, 1.0
    cfg = load_config(bundled_config_path(name))
    th = parametric_threshold(cfg.params, cfg.pump_omega, default_alpha_max(cfg.params))
    return cfg.params, cfg.pump_omega, th.alpha_p, TWO_PI * 1e6


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--device", default="nbtin", choices=("nbtin", "nbn", "symmetric"))
    ap.add_argument("--gains", type=float, nargs="+", default=[10, 15, 20, 25, 30, 35, 40])
    ap.add_argument("--out", default="gbp_vs_gain.csv")
    args = ap.parse_args()
    p, wp, a_th, unit = device(args.device)
    rows = []
    for target in args.gains:
        _, s = amplitude_for_gain(p, wp, target, a_th)
        for side in "+-":
            g = measure_gbp(p, s, side)
            rows.append((target, side == "+", g.peak_gain_dB, g.fwhm / unit, g.gbp_measured / unit,
                         g.gbp_theory / unit))
            print(f"{target:5.1f} dB {side}: G = {g.peak_gain_dB:6.2f} dB  "
                  f"GBP = {g.gbp_measured / unit:.4g}  theory {g.gbp_theory / unit:.4g}")
    write_table(args.out, ["target_dB", "upper_side", "peak_gain_dB", "fwhm", "gbp", "gbp_theory"],
                np.array(rows, dtype=float), "csv")
    unit_name = "MHz" if unit != 1.0 else "kappa units"
    print(f"rates in {unit_name}; wrote {args.out}")


if __name__ == "__main__":
    main()
