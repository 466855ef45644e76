"""Device parameters, hybridized-mode algebra and thin-film design formulas.

All frequencies and rates are angular (rad/s). Conversion from Hz happens at
the boundaries (``DeviceParams.from_hz``, the config loader and the CLI).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.constants import hbar

from .errors import InfeasibleSplitError

TWO_PI = 2.0 * np.pi

# Sheet kinetic inductances of 10 nm films, H per square.
SHEET_INDUCTANCE = {"NbN": 103e-9, "NbTiN": 31e-9}


@dataclass(frozen=True)
class DeviceParams:
    """Two coupled Kerr resonators.

    Parameters
    ----------
    omega1, omega2 : float
        Bare resonator frequencies (rad/s).
    kappa_e1, kappa_i1, kappa_e2, kappa_i2 : float
        External and intrinsic damping rates (rad/s).
    g : float
        Coherent coupling rate (rad/s).
    K0 : float
        Self-Kerr coefficient (rad/s per photon). Negative for kinetic
        inductance films.
    """

    omega1: float
    omega2: float
    kappa_e1: float
    kappa_i1: float
    kappa_e2: float
    kappa_i2: float
    g: float
    K0: float = 0.0

    def __post_init__(self):
        for name in ("kappa_e1", "kappa_i1", "kappa_e2", "kappa_i2", "g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.omega1 <= 0 or self.omega2 <= 0:
            raise ValueError("bare frequencies must be positive")
        # kappa_j = 0 is accepted: lossless idealisations are needed for the
        # symplectic checks. Time-domain integration refuses them.

    @property
    def kappa1(self) -> float:
        return self.kappa_e1 + self.kappa_i1

    @property
    def kappa2(self) -> float:
        return self.kappa_e2 + self.kappa_i2

    @classmethod
    def from_hz(cls, f1, f2, kappa_e1, kappa_i1, kappa_e2, kappa_i2, g, K=0.0):
        """Build from ordinary frequencies (Hz); every argument is multiplied by 2*pi."""
        return cls(*(TWO_PI * float(v) for v in
                     (f1, f2, kappa_e1, kappa_i1, kappa_e2, kappa_i2, g, K)))

    def replace(self, **changes) -> "DeviceParams":
        return replace(self, **changes)

    def swapped(self) -> "DeviceParams":
        """Exchange the roles of the two resonators."""
        return DeviceParams(self.omega2, self.omega1, self.kappa_e2, self.kappa_i2,
                            self.kappa_e1, self.kappa_i1, self.g, self.K0)


@dataclass(frozen=True)
class HybridizedModes:
    omega_minus: float
    omega_plus: float
    kappa_minus: float
    kappa_plus: float

    @property
    def splitting(self) -> float:
        return self.omega_plus - self.omega_minus

    @property
    def center(self) -> float:
        return 0.5 * (self.omega_plus + self.omega_minus)


@dataclass(frozen=True)
class NanowireGeometry:
    length: float
    width: float
    thickness: float

    def __post_init__(self):
        for name in ("length", "width", "thickness"):
            if not getattr(self, name) > 0:
                raise ValueError(f"nanowire {name} must be > 0")

    @property
    def area(self) -> float:
        return self.width * self.thickness

    @property
    def squares(self) -> float:
        return self.length / self.width


@dataclass(frozen=True)
class FilmMaterial:
    """Superconducting film constants; any subset may be left unset.

    ``Delta0`` is in joules and ``N0`` in J^-1 m^-3.
    """

    rho: Optional[float] = None
    Delta0: Optional[float] = None
    N0: Optional[float] = None
    L_sq: Optional[float] = None
    L0: Optional[float] = None
    I_star: Optional[float] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        for key in ("rho", "Delta0", "N0", "L_sq", "L0", "I_star"):
            value = getattr(self, key)
            if value is not None and not value > 0:
                raise ValueError(f"material constant {key} must be > 0")


def hybridized_frequencies(omega1, omega2, g):
    """Normal-mode frequencies ``(omega_minus, omega_plus)`` of two coupled modes."""
    if np.any(np.asarray(g) < 0):
        raise ValueError("g must be >= 0")
    mean = 0.5 * (omega1 + omega2)
    half = 0.5 * np.hypot(2.0 * g, omega1 - omega2)
    lo, hi = mean - half, mean + half
    # uncoupled modes are echoed exactly rather than through mean +- half
    uncoupled = np.asarray(g) == 0
    if np.any(uncoupled):
        lo = np.where(uncoupled, np.minimum(omega1, omega2), lo)
        hi = np.where(uncoupled, np.maximum(omega1, omega2), hi)
        if np.ndim(lo) == 0:
            lo, hi = float(lo), float(hi)
    return lo, hi


def coupling_from_split(omega_minus, omega_plus, bare_detuning=0.0):
    """Invert the anticrossing: g from the observed splitting and the bare detuning."""
    split = omega_plus - omega_minus
    if split < 0:
        raise ValueError("omega_plus must be >= omega_minus")
    excess = split * split - bare_detuning * bare_detuning
    if excess < 0:
        raise InfeasibleSplitError(
            f"observed split {split:.6g} rad/s is smaller than the bare detuning "
            f"{abs(bare_detuning):.6g} rad/s")
    return 0.5 * np.sqrt(excess)


def bare_from_hybridized(omega_minus, omega_plus, g, lower="1"):
    """Bare frequencies ``(omega1, omega2)`` that hybridize to the given pair.

    ``lower`` names the resonator that sits below the other one.
    """
    split = omega_plus - omega_minus
    if 2.0 * g > split:
        raise InfeasibleSplitError(
            f"2g = {2 * g:.6g} rad/s exceeds the observed split {split:.6g} rad/s")
    detuning = np.sqrt(split * split - 4.0 * g * g)
    center = 0.5 * (omega_plus + omega_minus)
    low, high = center - 0.5 * detuning, center + 0.5 * detuning
    return (low, high) if lower == "1" else (high, low)


def hybridized_linewidths(params: DeviceParams, exact=False):
    """Total linewidths ``(kappa_minus, kappa_plus)`` of the normal modes.

    The closed form is a weak-dissipation approximation (g >> |kappa1 - kappa2|).
    With ``exact=True`` the linewidths are read off the eigenvalues of the
    non-Hermitian 2x2 mode matrix instead.
    """
    if exact:
        _, kappas = _nonhermitian_modes(params)
        return kappas[0], kappas[1]
    k_sum = params.kappa1 + params.kappa2
    detuning = params.omega1 - params.omega2
    if params.g == 0:
        if detuning != 0:
            raise ValueError("g = 0 with detuned resonators: modes are not hybridized")
        return 0.5 * k_sum, 0.5 * k_sum
    x = detuning / params.g
    bracket = x / (2.0 * np.sqrt(4.0 + x * x))
    return 0.5 * k_sum * (1.0 - bracket), 0.5 * k_sum * (1.0 + bracket)


def _nonhermitian_modes(params):
    m = np.array([[-1j * params.omega1 - 0.5 * params.kappa1, -1j * params.g],
                  [-1j * params.g, -1j * params.omega2 - 0.5 * params.kappa2]])
    lam = np.linalg.eigvals(m)
    omegas = -lam.imag
    order = np.argsort(omegas)
    return omegas[order], -2.0 * lam.real[order]


def hybridize(params: DeviceParams, exact=False) -> HybridizedModes:
    w_minus, w_plus = hybridized_frequencies(params.omega1, params.omega2, params.g)
    if params.g == 0 and params.omega1 != params.omega2:
        # Uncoupled: each "hybrid" is simply one of the bare modes.
        lo, hi = sorted([(params.omega1, params.kappa1), (params.omega2, params.kappa2)])
        return HybridizedModes(w_minus, w_plus, lo[1], hi[1])
    k_minus, k_plus = hybridized_linewidths(params, exact=exact)
    return HybridizedModes(w_minus, w_plus, k_minus, k_plus)


def photon_number(P_in, omega, kappa_e, kappa, detuning=0.0):
    """Steady-state occupation of a linear one-port resonator driven with power ``P_in`` (W)."""
    if np.any(np.asarray(P_in) < 0):
        raise ValueError("P_in must be >= 0")
    if kappa <= 0 or omega <= 0:
        raise ValueError("kappa and omega must be positive")
    flux = np.asarray(P_in) / (hbar * omega)
    return kappa_e / ((0.5 * kappa) ** 2 + np.asarray(detuning) ** 2) * flux


def sheet_inductance(material: FilmMaterial, thickness):
    """BCS sheet kinetic inductance hbar*rho/(pi*Delta0*t), H per square."""
    if material.rho is None or material.Delta0 is None:
        raise ValueError("sheet inductance needs rho and Delta0")
    return hbar * material.rho / (np.pi * material.Delta0 * thickness)


def kinetic_inductance(geom: NanowireGeometry, material: FilmMaterial):
    """Kinetic inductance of a nanowire (H).

    Uses the BCS dirty-limit expression when ``rho`` and ``Delta0`` are known,
    otherwise falls back to the sheet value ``L_sq * l / w``.
    """
    if material.rho is not None and material.Delta0 is not None:
        return hbar * material.rho * geom.length / (
            np.pi * material.Delta0 * geom.width * geom.thickness)
    if material.L_sq is not None:
        return material.L_sq * geom.squares
    raise ValueError("missing material constants: need (rho, Delta0) or L_sq")


@dataclass(frozen=True)
class KerrDesign:
    K: float
    L_K: float
    participation: float
    scaling_figure: float


def kerr_design(geom: NanowireGeometry, material: FilmMaterial, omega, L_T) -> KerrDesign:
    """Design-formula Kerr coefficient of a nanowire resonator.

    ``scaling_figure`` is omega^2 A^-3 (L_K/L_T)^2, useful only as a relative
    figure of merit between designs.
    """
    if material.rho is None or material.Delta0 is None or material.N0 is None:
        raise ValueError("kerr_design needs rho, Delta0 and N0")
    if omega <= 0 or L_T <= 0:
        raise ValueError("omega and L_T must be positive")
    rho, d0, n0 = material.rho, material.Delta0, material.N0
    prefactor = 3.0 * hbar ** 3 * rho ** 2 / (4.0 * n0 * d0 ** 4 * np.pi ** 2)
    K = prefactor * omega * geom.length / (geom.width * L_T ** 2 * geom.thickness ** 3)
    L_K = kinetic_inductance(geom, material)
    participation = L_K / L_T
    scaling = omega ** 2 * geom.area ** -3 * participation ** 2
    return KerrDesign(K=K, L_K=L_K, participation=participation, scaling_figure=scaling)


def inductance_vs_current(I, material: FilmMaterial):
    """Current-dependent kinetic inductance L0 * (1 + (I / I_star)^2)."""
    if material.L0 is None or material.I_star is None:
        raise ValueError("inductance_vs_current needs L0 and I_star")
    return material.L0 * (1.0 + (np.asarray(I) / material.I_star) ** 2)
