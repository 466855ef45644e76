"""Regenerate the bundled noiseless reflection trace used by the CLI tests."""

from pathlib import Path

import numpy as np

from kipamp.fitting import s11_model
from kipamp.io import write_table

TRUE = dict(f0=10.178e9, kappa_e=1.2e6, kappa_i=0.8e6, background=0.8 * np.exp(0.3j),
            delay=2e-9, f_ref=10.178e9)


def main():
    f = np.linspace(TRUE["f0"] - 10e6, TRUE["f0"] + 10e6, 801)
    s = s11_model(f, **TRUE)
    out = Path(__file__).resolve().parents[1] / "src" / "kipamp" / "data" / "synthetic_trace.csv"
    write_table(out, ["freq_Hz", "re_S11", "im_S11"], np.column_stack([f, s.real, s.imag]), "csv")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
