"""INI-style device configuration files.

Frequencies and rates are given in Hz, powers in dBm. Example::

    [resonator1]
    kappa_e_Hz = 1.40e6
    kappa_i_Hz = 0.91e6

    [resonator2]
    kappa_e_Hz = 0.64e6
    kappa_i_Hz = 0.65e6

    [coupling]
    g_Hz = 185e6
    f_minus_Hz = 10.178e9
    f_plus_Hz = 10.577e9

    [kerr]
    K_Hz = -0.01

    [pump]
    offset_Hz = -2.68e6
    power_dBm = -23
    ATT_dB = 19

Bare frequencies may be given directly as ``f_Hz`` in the resonator sections
instead of ``f_minus_Hz``/``f_plus_Hz``. The Kerr coefficient must carry an
explicit sign.
"""

from __future__ import annotations

import configparser
import hashlib
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from scipy.constants import electron_volt

from .errors import ConfigError, InfeasibleSplitError
from .model import TWO_PI, DeviceParams, FilmMaterial, NanowireGeometry, bare_from_hybridized
from .steady import PumpConfig, SeedPolicy

SCHEMA = {
    "resonator1": {"f_Hz", "kappa_e_Hz", "kappa_i_Hz"},
    "resonator2": {"f_Hz", "kappa_e_Hz", "kappa_i_Hz"},
    "coupling": {"g_Hz", "f_minus_Hz", "f_plus_Hz", "lower"},
    "kerr": {"K_Hz"},
    "pump": {"f_Hz", "offset_Hz", "power_dBm", "ATT_dB"},
    "material": {"name", "L_sq_nH", "rho_Ohm_m", "Delta0_meV", "N0_per_J_m3", "L0_H", "I_star_A"},
    "geometry": {"length_m", "width_m", "thickness_m", "L_T_H"},
    "solver": {"n_random", "ladder", "rng_seed", "max_iter", "tol_abs", "dedup_tol"},
}
REQUIRED = {"resonator1": {"kappa_e_Hz", "kappa_i_Hz"}, "resonator2": {"kappa_e_Hz", "kappa_i_Hz"},
            "coupling": {"g_Hz"}, "kerr": {"K_Hz"}}

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


@dataclass
class DeviceConfig:
    params: DeviceParams
    pump_omega: Optional[float] = None
    pump_dBm: Optional[float] = None
    att_dB: float = 0.0
    material: Optional[FilmMaterial] = None
    geometry: Optional[NanowireGeometry] = None
    L_T: Optional[float] = None
    seeds: SeedPolicy = field(default_factory=SeedPolicy)
    path: Optional[str] = None
    digest: str = ""

    def pump(self, power_dBm=None, omega_p=None) -> PumpConfig:
        """On-chip pump for an instrument power (dBm); defaults come from [pump]."""
        w = self.pump_omega if omega_p is None else omega_p
        p = self.pump_dBm if power_dBm is None else power_dBm
        if w is None:
            raise ConfigError("no pump frequency: set [pump] f_Hz or offset_Hz")
        if p is None:
            raise ConfigError("no pump power: set [pump] power_dBm")
        return PumpConfig.from_dbm(w, p, self.att_dB)


def _line_numbers(text):
    where, section = {}, None
    for i, line in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), i)
            continue
        m = _KEY.match(line)
        if m and section is not None:
            where[(section, m.group(1).strip())] = i
    return where


def _number(cp, where, section, key, signed=False):
    raw = cp[section][key].strip()
    line = where.get((section, key), "?")
    if signed and not re.match(r"^[+-]", raw) and float_or_none(raw) != 0.0:
        raise ConfigError(f"line {line}: [{section}] {key} needs an explicit sign (+ or -)")
    value = float_or_none(raw)
    if value is None:
        raise ConfigError(f"line {line}: [{section}] {key} = {raw!r} is not a number")
    return value


def float_or_none(s):
    try:
        return float(s)
    except ValueError:
        return None


def parse_config(text: str, path: Optional[str] = None) -> DeviceConfig:
    where = _line_numbers(text)
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=path or "<config>")
    except configparser.Error as exc:
        raise ConfigError(" ".join(str(exc).split())) from exc
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"line {where.get((section, None), '?')}: unknown section [{section}]")
        for key in cp[section]:
            if key not in SCHEMA[section]:
                raise ConfigError(f"line {where.get((section, key), '?')}: unknown key "
                                  f"{key!r} in [{section}]")
    for section, keys in REQUIRED.items():
        if section not in cp:
            raise ConfigError(f"missing section [{section}]")
        missing = keys - set(cp[section])
        if missing:
            raise ConfigError(f"line {where.get((section, None), '?')}: [{section}] is missing "
                              f"{sorted(missing)}")

    def num(section, key, default=None, signed=False):
        if section in cp and key in cp[section]:
            return _number(cp, where, section, key, signed)
        return default

    g = num("coupling", "g_Hz")
    f1, f2 = num("resonator1", "f_Hz"), num("resonator2", "f_Hz")
    fm, fp = num("coupling", "f_minus_Hz"), num("coupling", "f_plus_Hz")
    if (fm is None) != (fp is None):
        raise ConfigError("[coupling] needs both f_minus_Hz and f_plus_Hz")
    if fm is not None:
        if f1 is not None or f2 is not None:
            raise ConfigError("give either bare f_Hz or hybridized f_minus_Hz/f_plus_Hz, not both")
        lower = cp["coupling"].get("lower", "1").strip()
        if lower not in ("1", "2"):
            raise ConfigError(f"line {where.get(('coupling', 'lower'), '?')}: lower must be 1 or 2")
        try:
            w1, w2 = bare_from_hybridized(TWO_PI * fm, TWO_PI * fp, TWO_PI * g, lower=lower)
        except InfeasibleSplitError as exc:
            raise ConfigError(str(exc)) from exc
    elif f1 is None or f2 is None:
        raise ConfigError("resonator frequencies missing: set f_Hz in both resonator sections "
                          "or f_minus_Hz/f_plus_Hz in [coupling]")
    else:
        w1, w2 = TWO_PI * f1, TWO_PI * f2
    try:
        params = DeviceParams(
            w1, w2, TWO_PI * num("resonator1", "kappa_e_Hz"), TWO_PI * num("resonator1", "kappa_i_Hz"),
            TWO_PI * num("resonator2", "kappa_e_Hz"), TWO_PI * num("resonator2", "kappa_i_Hz"),
            TWO_PI * g, TWO_PI * num("kerr", "K_Hz", signed=True))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    pump_f, offset = num("pump", "f_Hz"), num("pump", "offset_Hz")
    if pump_f is not None and offset is not None:
        raise ConfigError("[pump] takes f_Hz or offset_Hz, not both")
    pump_omega = None
    if pump_f is not None:
        pump_omega = TWO_PI * pump_f
    elif offset is not None:
        pump_omega = 0.5 * (params.omega1 + params.omega2) + TWO_PI * offset

    material = None
    if "material" in cp:
        m = cp["material"]
        delta = num("material", "Delta0_meV")
        l_sq = num("material", "L_sq_nH")
        try:
            material = FilmMaterial(
                rho=num("material", "rho_Ohm_m"),
                Delta0=None if delta is None else delta * 1e-3 * electron_volt,
                N0=num("material", "N0_per_J_m3"), L_sq=None if l_sq is None else l_sq * 1e-9,
                L0=num("material", "L0_H"), I_star=num("material", "I_star_A"),
                name=m.get("name", "").strip())
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    geometry = None
    if "geometry" in cp and any(k in cp["geometry"] for k in ("length_m", "width_m", "thickness_m")):
        try:
            geometry = NanowireGeometry(num("geometry", "length_m"), num("geometry", "width_m"),
                                        num("geometry", "thickness_m"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[geometry] needs positive length_m, width_m, thickness_m ({exc})")

    seeds = SeedPolicy()
    if "solver" in cp:
        kw = {}
        for key, cast in (("n_random", int), ("ladder", int), ("rng_seed", int), ("max_iter", int),
                          ("tol_abs", float), ("dedup_tol", float)):
            v = num("solver", key)
            if v is not None:
                kw[key] = cast(v)
        seeds = SeedPolicy(**kw)

    return DeviceConfig(params=params, pump_omega=pump_omega, pump_dBm=num("pump", "power_dBm"),
                        att_dB=num("pump", "ATT_dB", 0.0), material=material, geometry=geometry,
                        L_T=num("geometry", "L_T_H"), seeds=seeds, path=path,
                        digest=hashlib.sha256(text.encode()).hexdigest())


def load_config(path) -> DeviceConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


def bundled_config_path(name: str) -> Path:
    """Path of a configuration shipped with the package (``nbtin`` or ``nbn``)."""
    p = Path(__file__).parent / "data" / f"{name.lower()}.cfg"
    if not p.exists():
        raise ConfigError(f"no bundled config named {name!r}")
    return p
