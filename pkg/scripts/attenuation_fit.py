"""Fit the pump-line attenuation of each bundled device to a reported peak gain.

The attenuation is the only free parameter: the on-chip pump giving the
target gain below threshold fixes it. Also prints the on-chip thresholds.
"""

import argparse

from scipy.constants import hbar

from kipamp.config import bundled_config_path, load_config
from kipamp.fitting import fit_attenuation
from kipamp.steady import default_alpha_max, parametric_threshold, watt_to_dbm

REPORTED = {"nbtin": -23.0, "nbn": -36.1}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gain", type=float, default=40.0, help="reported peak gain (dB)")
    args = ap.parse_args()
    for name, p_inst in REPORTED.items():
        cfg = load_config(bundled_config_path(name))
        th = parametric_threshold(cfg.params, cfg.pump_omega, default_alpha_max(cfg.params))
        fit = fit_attenuation(cfg.params, cfg.pump_omega, p_inst, args.gain, th.alpha_p)
        p_th = float(watt_to_dbm(hbar * cfg.pump_omega * abs(th.alpha_p) ** 2))
        print(f"{name:6s} instrument {p_inst:6.1f} dBm -> on-chip {fit.onchip_dBm:8.3f} dBm, "
              f"ATT = {fit.att_dB:8.3f} dB, threshold {p_th:8.3f} dBm on chip, "
              f"peak {fit.peak_gain_dB:.3f} dB")


if __name__ == "__main__":
    main()
