import csv
import json
from pathlib import Path

import numpy as np
import pytest

from kipamp.cli import main
from kipamp.config import bundled_config_path

TRACE = Path(__file__).resolve().parents[1] / "src" / "kipamp" / "data" / "synthetic_trace.csv"

LOSSLESS = """\
[resonator1]
f_Hz = 5.0e9
kappa_e_Hz = 1.0e6
kappa_i_Hz = 0

[resonator2]
f_Hz = 5.002e9
kappa_e_Hz = 0
kappa_i_Hz = 0

[coupling]
g_Hz = {g}

[kerr]
K_Hz = -1000

[pump]
offset_Hz = 0
power_dBm = -120
"""


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    cols = {}
    for k in rows[0]:
        try:
            cols[k] = np.array([float(r[k]) for r in rows])
        except ValueError:
            cols[k] = [r[k] for r in rows]
    return cols


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def lossless_cfg(tmp_path):
    def make(g=1e6):
        p = tmp_path / f"lossless_{g:g}.cfg"
        p.write_text(LOSSLESS.format(g=g))
        return p
    return make


@pytest.mark.parametrize("name,fm,fp", [("nbtin", 10.178e9, 10.577e9), ("nbn", 7.707e9, 7.970e9)])
def test_hybridize_bundled(capsys, tmp_path, name, fm, fp):
    code, _, _ = run(capsys, "hybridize", "--config", name, "--out-dir", tmp_path)
    assert code == 0
    modes = read_csv(tmp_path / "modes.csv")
    assert modes["freq_Hz"] == pytest.approx([fm, fp], rel=1e-14)


def test_hybridize_without_coupling_echoes_bare(capsys, tmp_path, lossless_cfg):
    code, _, _ = run(capsys, "hybridize", "--config", lossless_cfg(0), "--out-dir", tmp_path)
    assert code == 0
    assert read_csv(tmp_path / "modes.csv")["freq_Hz"] == pytest.approx([5.0e9, 5.002e9], rel=1e-15)


def test_unknown_key_reports_line(capsys, tmp_path):
    text = bundled_config_path("nbn").read_text().replace("K_Hz = -0.21", "K_Hz = -0.21\nKerr = 1")
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text)
    line = text.splitlines().index("Kerr = 1") + 1
    code, _, err = run(capsys, "hybridize", "--config", cfg, "--out-dir", tmp_path)
    assert code == 2
    assert err.startswith("ERR_CONFIG:") and f"line {line}" in err and "'Kerr'" in err
    assert len(err.strip().splitlines()) == 1


def test_missing_config_is_a_config_error(capsys, tmp_path):
    code, _, err = run(capsys, "gain", "--config", tmp_path / "absent.cfg", "--out-dir", tmp_path)
    assert code == 2 and err.startswith("ERR_CONFIG:")


def test_above_threshold_exits_4_with_margin(capsys, tmp_path):
    code, _, err = run(capsys, "gain", "--config", "nbtin", "--pump-power", -22.0,
                       "--out-dir", tmp_path)
    assert code == 4
    assert err.startswith("ERR_ABOVE_THRESHOLD:") and "margin" in err


def test_numerical_failure_exits_3(capsys, tmp_path):
    pts = tmp_path / "kerr.csv"
    pts.write_text("n,shift_Hz\n5,1\n5,1\n5,1\n")
    code, _, err = run(capsys, "fit-kerr", "--points", pts, "--out-dir", tmp_path)
    assert code == 3 and err.startswith("ERR_FIT:")


def test_gain_csv_is_byte_identical(capsys, tmp_path):
    outs = []
    for d in ("a", "b"):
        code, _, _ = run(capsys, "gain", "--config", "nbn", "--points", 201, "--seed", 7,
                         "--out-dir", tmp_path / d)
        assert code == 0
        outs.append((tmp_path / d / "spectrum.csv").read_bytes())
    assert outs[0] == outs[1]


def test_verify_detects_edited_output(capsys, tmp_path):
    run(capsys, "hybridize", "--config", "nbtin", "--out-dir", tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert any(Path(o["path"]).name == "modes.csv" for o in manifest["outputs"])
    assert run(capsys, "verify", "--out-dir", tmp_path)[0] == 0
    f = tmp_path / "modes.csv"
    f.write_text(f.read_text().replace("minus", "minuz"))
    code, _, err = run(capsys, "hybridize", "--verify", "--out-dir", tmp_path)
    assert code == 2 and "modes.csv" in err


def test_manifest_digest_tracks_config_content(capsys, tmp_path, lossless_cfg):
    digests = []
    for g in (1e6, 1e6, 2e6):
        run(capsys, "hybridize", "--config", lossless_cfg(g), "--out-dir", tmp_path / f"{g:g}")
        digests.append(json.loads((tmp_path / f"{g:g}" / "manifest.json").read_text())
                       ["config_sha256"])
    assert digests[0] == digests[1] != digests[2]


def test_design_sheet_inductance(capsys, tmp_path):
    code, out, _ = run(capsys, "design", "--config", "nbn", "--out-dir", tmp_path)
    assert code == 0
    rep = json.loads((tmp_path / "design.json").read_text())
    assert rep["L_K_H"] == pytest.approx(103e-9 * 200e-6 / 100e-9, rel=1e-12)
    assert "L_K =" in out


def test_fit_resonance_recovers_bundled_trace(capsys, tmp_path):
    code, _, _ = run(capsys, "fit-resonance", "--trace", TRACE, "--out-dir", tmp_path)
    assert code == 0
    rep = json.loads((tmp_path / "resonance_fit.json").read_text())
    assert rep["f0_Hz"] == pytest.approx(10.178e9, rel=1e-12)
    assert rep["kappa_e_Hz"] == pytest.approx(1.2e6, rel=1e-4)
    assert rep["kappa_i_Hz"] == pytest.approx(0.8e6, rel=1e-4)


def test_pump_off_is_unity_gain_for_lossless_device(capsys, tmp_path, lossless_cfg):
    code, out, _ = run(capsys, "gain", "--config", lossless_cfg(), "--pump-off",
                       "--out-dir", tmp_path)
    assert code == 0
    g = read_csv(tmp_path / "spectrum.csv")["gain_signal_dB"]
    assert np.max(np.abs(g)) < 1e-9


def test_peak_gain_rises_with_pump_until_threshold(capsys, tmp_path):
    gains = []
    for pw in np.arange(-23.6, -22.0, 0.2):
        code, out, _ = run(capsys, "gain", "--config", "nbtin", "--pump-power", round(pw, 2),
                           "--points", 51, "--out-dir", tmp_path / f"{pw:.1f}")
        if code != 0:
            assert code == 4
            break
        line = next(s for s in out.splitlines() if s.startswith("peak gain ="))
        gains.append(float(line.split()[3]))
    else:
        pytest.fail("threshold never reached")
    assert len(gains) >= 3
    assert np.all(np.diff(gains) > 0)


def test_gain_output_round_trips_through_fit_gain(capsys, tmp_path):
    powers = (-36.6, -36.3, -36.1)
    for pw in powers:
        code, _, _ = run(capsys, "gain", "--config", "nbn", "--pump-power", pw, "--points", 121,
                         "--out-dir", tmp_path / str(pw))
        assert code == 0
    text = bundled_config_path("nbn").read_text().replace("K_Hz = -0.21", "K_Hz = -0.25")
    start = tmp_path / "start.cfg"
    start.write_text(text)
    argv = ["fit-gain", "--config", start, "--free", "K0", "--reflection", "physical",
            "--starts", 1, "--out-dir", tmp_path / "fit"]
    for pw in powers:
        argv += ["--spectrum", tmp_path / str(pw) / "spectrum.csv", "--pump-power", pw]
    code, _, err = run(capsys, *argv)
    assert code == 0, err
    rep = json.loads((tmp_path / "fit" / "gain_fit.json").read_text())
    assert rep["K_Hz"] == pytest.approx(-0.21, rel=1e-4)


@pytest.mark.slow
def test_compress_reports_plateau_near_20_db(capsys, tmp_path):
    code, out, _ = run(capsys, "compress", "--config", "nbn", "--s-points", 12,
                       "--out-dir", tmp_path)
    assert code == 0
    plateau = float(next(s for s in out.splitlines() if s.startswith("plateau")).split()[3])
    assert plateau == pytest.approx(20.0, abs=0.05)
    assert "P_1dB" in out
