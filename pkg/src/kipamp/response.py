"""Linear response around a pumped steady state: gain, pump maps, GBP, added noise.

Offsets ``omega`` are measured from the pump (rotating frame); a signal at
``omega_p + omega`` is paired with the idler at ``omega_p - omega``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NoStableStateError, SingularError, SpectrumError
from .model import DeviceParams, hybridized_linewidths
from .peaks import half_max_width
from .steady import (DriftMatrix, PumpConfig, SeedPolicy, SteadyState, drift_matrix,
                     physical_state, solve_steady, stability)

WEAK_PORT_WARN = 0.2
_COND_LIMIT = 1e14


@dataclass(frozen=True)
class Susceptibility:
    omega: float
    G_matrix: np.ndarray
    condition: float


@dataclass(frozen=True)
class ScatteringRow:
    c_S: complex
    c_I: complex
    c_loss: np.ndarray


@dataclass
class GainSpectrum:
    offsets: np.ndarray
    c_S: np.ndarray
    c_I: np.ndarray
    gain_signal_dB: np.ndarray
    gain_idler_dB: np.ndarray
    omega_p: float
    params: DeviceParams
    state: SteadyState
    reflection: str = "physical"

    @property
    def abs_freq(self):
        return self.omega_p + self.offsets

    @property
    def peak_gain_dB(self) -> float:
        return float(np.max(self.gain_signal_dB))

    @property
    def peak_offsets(self):
        """Offsets of the largest signal gain on the negative and positive sides."""
        out = []
        for mask in (self.offsets < 0, self.offsets > 0):
            if np.any(mask):
                idx = np.flatnonzero(mask)[np.argmax(self.gain_signal_dB[mask])]
                out.append(float(self.offsets[idx]))
            else:
                out.append(float("nan"))
        return tuple(out)


@dataclass(frozen=True)
class NoiseBudget:
    omega: float
    n_added: float
    contributions: dict


def _check_weak_port(params: DeviceParams):
    if params.kappa_e1 > 0 and params.kappa_e2 / params.kappa_e1 > WEAK_PORT_WARN:
        warnings.warn(
            f"kappa_e2/kappa_e1 = {params.kappa_e2 / params.kappa_e1:.2f} > {WEAK_PORT_WARN}: "
            "dropping the second port drive is questionable", RuntimeWarning, stacklevel=3)


def susceptibility(drift: DriftMatrix, omega: float) -> Susceptibility:
    """(-i omega I - Gamma)^-1 at a single offset."""
    m = -1j * omega * np.eye(4) - drift.entries
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise SingularError(f"-i w I - Gamma is singular at offset {omega:.6g} rad/s")
    return Susceptibility(omega=float(omega), G_matrix=np.linalg.inv(m), condition=float(cond))


def _first_rows(drift: DriftMatrix, omegas):
    """First row of the susceptibility for every offset, shape (N, 4)."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    m = -1j * omegas[:, None, None] * np.eye(4)[None] - drift.entries[None]
    # row 0 of M^-1 solves M^T x = e0
    e0 = np.zeros((len(omegas), 4, 1), dtype=complex)
    e0[:, 0, 0] = 1.0
    try:
        rows = np.linalg.solve(np.swapaxes(m, 1, 2), e0)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularError("susceptibility is singular on the offset grid") from exc
    if not np.all(np.isfinite(rows)):
        raise SingularError("susceptibility is singular on the offset grid")
    return rows


def _rows_to_coefficients(params: DeviceParams, rows, reflection="physical"):
    ke1 = params.kappa_e1
    direct = 1.0 if reflection == "physical" else 0.0
    if reflection not in ("physical", "bare"):
        raise ValueError("reflection must be 'physical' or 'bare'")
    c_S = ke1 * rows[:, 0] - direct
    c_I = ke1 * rows[:, 1]
    rt = np.sqrt(ke1) * np.sqrt(np.array([params.kappa_i1, params.kappa_i1,
                                          params.kappa_i2, params.kappa_i2]))
    c_loss = rows * rt[None, :]
    return c_S, c_I, c_loss


def scattering_row(params: DeviceParams, state: SteadyState, omega: float,
                   reflection="physical") -> ScatteringRow:
    """Output coefficients at offset ``omega`` for the port-1 reflected field.

    ``reflection="bare"`` drops the direct -1 reflection term.
    """
    pump = PumpConfig(state.omega_p, 0.0)
    drift = drift_matrix(params, pump, state)
    chi = susceptibility(drift, omega)
    c_S, c_I, c_loss = _rows_to_coefficients(params, chi.G_matrix[0:1], reflection)
    return ScatteringRow(complex(c_S[0]), complex(c_I[0]), c_loss[0])


def scattering_rows(params: DeviceParams, state: SteadyState, omegas, reflection="physical"):
    """Vectorized :func:`scattering_row`: arrays ``(c_S, c_I, c_loss)``."""
    drift = drift_matrix(params, PumpConfig(state.omega_p, 0.0), state)
    return _rows_to_coefficients(params, _first_rows(drift, omegas), reflection)


def _db(x):
    with np.errstate(divide="ignore"):
        return 20.0 * np.log10(np.abs(x))


def spectrum_for_state(params: DeviceParams, state: SteadyState, omega_grid,
                       reflection="physical") -> GainSpectrum:
    offsets = np.asarray(omega_grid, dtype=float)
    c_S, c_I, _ = scattering_rows(params, state, offsets, reflection)
    return GainSpectrum(offsets=offsets, c_S=c_S, c_I=c_I, gain_signal_dB=_db(c_S),
                        gain_idler_dB=_db(c_I), omega_p=state.omega_p, params=params,
                        state=state, reflection=reflection)


def select_state(params: DeviceParams, pump: PumpConfig, branch: Optional[int] = None,
                 seeds: SeedPolicy = SeedPolicy()):
    """Steady state used for gain: the up-ramp branch, or root ``branch`` of solve_steady."""
    if branch is None:
        return physical_state(params, pump, seeds=seeds)
    roots = solve_steady(params, pump, seeds)
    if not 0 <= branch < len(roots):
        raise ValueError(f"branch {branch} out of range (found {len(roots)} roots)")
    rep = stability(drift_matrix(params, pump, roots[branch]))
    if not rep.stable:
        raise NoStableStateError(f"branch {branch} is unstable (margin {rep.margin:.4g} rad/s)",
                                 margin=rep.margin)
    return roots[branch], rep


def gain_spectrum(params: DeviceParams, pump: PumpConfig, omega_grid, branch=None,
                  reflection="physical", seeds: SeedPolicy = SeedPolicy()) -> GainSpectrum:
    """Signal and idler power gain over a grid of pump offsets (rad/s)."""
    _check_weak_port(params)
    state, _ = select_state(params, pump, branch, seeds)
    return spectrum_for_state(params, state, omega_grid, reflection)


@dataclass
class PumpMap:
    pump_freqs: np.ndarray
    pump_alphas: np.ndarray
    offsets: np.ndarray
    gain_signal_dB: np.ndarray  # (n_freq, n_power, n_offset)
    gain_idler_dB: np.ndarray
    stable: np.ndarray  # (n_freq, n_power)


def pump_map(params: DeviceParams, pump_freq_grid, pump_alpha_grid, offset_grid,
             reflection="physical", seeds: SeedPolicy = SeedPolicy()) -> PumpMap:
    """Stable-branch gain over a (pump frequency, pump amplitude) grid.

    Each pump frequency is ramped up the amplitude grid; once the followed
    state is lost or unstable the remaining cells of that row are flagged and
    filled with NaN.
    """
    from .steady import _continue_to, classify

    freqs = np.asarray(pump_freq_grid, dtype=float)
    alphas = np.asarray(pump_alpha_grid)
    offsets = np.asarray(offset_grid, dtype=float)
    if np.any(np.diff(freqs) <= 0) or np.any(np.diff(np.abs(alphas)) <= 0):
        raise ValueError("pump grids must be strictly increasing")
    shape = (len(freqs), len(alphas), len(offsets))
    gs = np.full(shape, np.nan)
    gi = np.full(shape, np.nan)
    ok = np.zeros(shape[:2], dtype=bool)
    for i, wp in enumerate(freqs):
        try:
            state, rep = physical_state(params, PumpConfig(wp, alphas[0]), seeds=seeds)
        except NoStableStateError:
            continue
        a_prev = alphas[0]
        for j, a in enumerate(alphas):
            if j > 0:
                new = _continue_to(params, wp, state, a_prev, a)
                if new is None:
                    break
                rep = classify(params, PumpConfig(wp, a), new)
                state, a_prev = new, a
            if not rep.stable:
                break
            spec = spectrum_for_state(params, state, offsets, reflection)
            gs[i, j], gi[i, j] = spec.gain_signal_dB, spec.gain_idler_dB
            ok[i, j] = True
    return PumpMap(freqs, alphas, offsets, gs, gi, ok)


@dataclass(frozen=True)
class GBPResult:
    fwhm: float
    gbp_measured: float
    gbp_theory: float
    peak_gain_dB: float
    peak_offset: float


def gbp(spectrum: GainSpectrum, side="+") -> GBPResult:
    """Gain-bandwidth product of the signal peak on one side of the pump.

    FWHM is taken on the linear power gain. ``gbp_theory`` is
    kappa_+ kappa_- / (kappa_+ + kappa_-) from the closed-form linewidths.
    All quantities in rad/s.
    """
    mask = spectrum.offsets > 0 if side == "+" else spectrum.offsets < 0
    if not np.any(mask):
        raise SpectrumError(f"no offsets on the {side} side of the pump")
    x = spectrum.offsets[mask]
    g_lin = np.abs(spectrum.c_S[mask]) ** 2
    fwhm, peak_x, peak_val = half_max_width(x, g_lin)
    k_minus, k_plus = hybridized_linewidths(spectrum.params)
    theory = k_plus * k_minus / (k_plus + k_minus)
    return GBPResult(fwhm=fwhm, gbp_measured=float(np.sqrt(peak_val) * fwhm),
                     gbp_theory=float(theory), peak_gain_dB=float(10 * np.log10(peak_val)),
                     peak_offset=float(peak_x))


def added_noise(params: DeviceParams, state: SteadyState, omega: float, nbar_e=0.0,
                nbar_i=(0.0, 0.0)) -> NoiseBudget:
    """Input-referred added noise (quanta) at offset ``omega``.

    Output noise is |c_S|^2 (n_e + 1/2) + |c_I|^2 (n_e + 1/2)
    + sum_k |c_loss,k|^2 (n_i,k + 1/2); dividing by |c_S|^2 and removing the
    amplified input vacuum leaves the added part.
    """
    nbar_i = tuple(nbar_i)
    if nbar_e < 0 or min(nbar_i) < 0:
        raise ValueError("bath occupancies must be >= 0")
    row = scattering_row(params, state, omega)
    gs = abs(row.c_S) ** 2
    if gs == 0:
        raise SpectrumError("no signal transmission at this offset (|c_S| = 0)")
    occ = np.array([nbar_i[0], nbar_i[0], nbar_i[1], nbar_i[1]]) + 0.5
    idler = abs(row.c_I) ** 2 * (nbar_e + 0.5) / gs
    losses = np.abs(row.c_loss) ** 2 * occ / gs
    contributions = {"idler": float(idler), "loss1": float(losses[0] + losses[1]),
                     "loss2": float(losses[2] + losses[3])}
    return NoiseBudget(omega=float(omega), n_added=float(idler + losses.sum()),
                       contributions=contributions)


@dataclass(frozen=True)
class GainPeak:
    offset: float
    gain_dB: float


def find_peak(params: DeviceParams, state: SteadyState, side="+", n_coarse=20001,
              reflection="physical") -> GainPeak:
    """Locate the signal-gain maximum on one side of the pump to high precision.

    A coarse scan over 1.5x the hybrid half-splitting is refined with a
    bounded scalar search, so peaks narrower than the coarse grid are still
    resolved.
    """
    from scipy.optimize import minimize_scalar

    half = 0.5 * np.hypot(2.0 * params.g, params.omega1 - params.omega2)
    reach = 1.5 * half + 2.0 * (params.kappa1 + params.kappa2)
    reach += abs(0.5 * (params.omega1 + params.omega2) - state.omega_p)
    sign = 1.0 if side == "+" else -1.0
    grid = sign * np.linspace(reach / n_coarse, reach, n_coarse)
    grid = np.sort(grid)
    c_S, _, _ = scattering_rows(params, state, grid, reflection)
    g = np.abs(c_S)
    i = int(np.argmax(g))
    step = grid[1] - grid[0]
    lo, hi = grid[i] - 1.5 * step, grid[i] + 1.5 * step

    def neg(w):
        return -abs(scattering_rows(params, state, [w], reflection)[0][0])

    res = minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-9 * step})
    best_w, best_g = (res.x, -res.fun) if -res.fun >= g[i] else (grid[i], g[i])
    return GainPeak(offset=float(best_w), gain_dB=float(20 * np.log10(best_g)))


def measure_gbp(params: DeviceParams, state: SteadyState, side="+", n_points=4001,
                reflection="physical") -> GBPResult:
    """GBP of the peak on ``side``, sampled on a grid adapted to its width."""
    peak = find_peak(params, state, side, reflection=reflection)
    amp = 10 ** (peak.gain_dB / 20)
    half = 2.0 * max(params.kappa1, params.kappa2) / max(amp, 1.0)
    for _ in range(12):
        grid = peak.offset + np.linspace(-half, half, n_points)
        spec = spectrum_for_state(params, state, grid, reflection)
        try:
            return gbp(spec, side="+" if np.all(grid > 0) else
                       ("-" if np.all(grid < 0) else _raise_straddle()))
        except SpectrumError:
            half *= 2.0
    raise SpectrumError("could not bracket the half-maximum around the gain peak")


def _raise_straddle():
    raise SpectrumError("gain peak window reaches across the pump")


def peak_gain(params: DeviceParams, state: SteadyState, side=None, reflection="physical"):
    """Largest signal gain (dB) on ``side`` ("+", "-") or on either side if None."""
    sides = ("+", "-") if side is None else (side,)
    return max(find_peak(params, state, s, reflection=reflection).gain_dB for s in sides)


def amplitude_for_gain(params: DeviceParams, omega_p, target_dB, alpha_threshold, side=None,
                       rtol=1e-10, seeds: SeedPolicy = SeedPolicy()):
    """Pump amplitude below ``alpha_threshold`` whose peak signal gain equals ``target_dB``.

    Returns ``(alpha_p, state)``. Peak gain rises monotonically towards the
    threshold, so a bracketing root search on |alpha_p| is used.
    """
    from scipy.optimize import brentq

    phase = alpha_threshold / abs(alpha_threshold)
    a_top = abs(alpha_threshold)
    cache = {}

    def f(a):
        state, _ = physical_state(params, PumpConfig(omega_p, a * phase), seeds=seeds)
        cache[a] = state
        return peak_gain(params, state, side) - target_dB

    lo, hi = 1e-3 * a_top, a_top * (1.0 - 1e-9)
    if f(lo) > 0:
        raise ValueError(f"gain already exceeds {target_dB} dB at the weakest pump tried")
    if f(hi) < 0:
        raise ValueError(f"{target_dB} dB is not reached below the threshold")
    a = brentq(f, lo, hi, rtol=rtol, xtol=1e-14 * a_top)
    if a not in cache:
        f(a)
    return a * phase, cache[a]
