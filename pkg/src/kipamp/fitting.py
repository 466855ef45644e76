"""Parameter extraction from reflection traces, Kerr shifts and gain spectra."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats
from scipy.constants import hbar
from scipy.optimize import least_squares

from .errors import ConvergenceError, FitError, NoStableStateError, SingularError, SpectrumError
from .model import TWO_PI, DeviceParams
from .peaks import half_max_width, one_db_point
from .response import GainSpectrum, amplitude_for_gain, gain_spectrum
from .steady import PumpConfig, SeedPolicy, watt_to_dbm

# --------------------------------------------------------------------------
# single-port resonance


@dataclass(frozen=True)
class ReflectionTrace:
    """Reflection samples versus frequency (Hz).

    ``s11`` is complex, or a linear magnitude when ``mag_only`` is set.
    """

    freq: np.ndarray
    s11: np.ndarray
    mag_only: bool = False
    power_dBm: Optional[float] = None

    def __post_init__(self):
        f = np.asarray(self.freq, dtype=float)
        if f.ndim != 1 or f.shape != np.shape(self.s11):
            raise ValueError("freq and s11 must be 1-D arrays of equal length")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequency grid must be strictly increasing")

    @classmethod
    def from_mag_db(cls, freq, mag_db, power_dBm=None):
        return cls(np.asarray(freq, float), 10 ** (np.asarray(mag_db, float) / 20), True, power_dBm)


@dataclass
class ResonanceFit:
    """Single-port resonance parameters, all in Hz.

    ``background`` is the complex scale B and ``delay`` the phase slope tau
    (s) of ``B exp(2 pi i tau (f - f_ref))``. ``stderr`` maps parameter names to standard
    errors and ``ci95`` to 95% half-widths.
    """

    f0: float
    kappa_e: float
    kappa_i: float
    background: complex
    delay: float
    residual_norm: float
    stderr: dict = field(default_factory=dict)
    ci95: dict = field(default_factory=dict)
    ambiguous: bool = False
    alternative: Optional["ResonanceFit"] = None
    f_ref: float = 0.0

    @property
    def kappa(self):
        return self.kappa_e + self.kappa_i

    def model(self, freq):
        return s11_model(freq, self.f0, self.kappa_e, self.kappa_i, self.background, self.delay,
                         self.f_ref)


def s11_model(freq, f0, kappa_e, kappa_i, background=1.0, delay=0.0, f_ref=0.0):
    """B exp(2 pi i tau (f - f_ref)) (kappa_e / (kappa/2 + i (f - f0)) - 1), rates in Hz."""
    f = np.asarray(freq, dtype=float)
    core = kappa_e / (0.5 * (kappa_e + kappa_i) + 1j * (f - f0)) - 1.0
    return background * np.exp(TWO_PI * 1j * delay * (f - f_ref)) * core


def _edge_fraction(n):
    return max(3, n // 10)


def _initial_guess(f, s):
    m = np.abs(s)
    e = _edge_fraction(len(f))
    level = 0.5 * (np.mean(m[:e]) + np.mean(m[-e:]))
    if level == 0:
        raise FitError("trace is identically zero")
    depth = 1.0 - (m / level) ** 2
    i = int(np.argmin(m))
    if depth[i] < 1e-4 or i < 2 or i > len(f) - 3:
        raise FitError("no resonance dip found")
    try:
        kappa, f0, peak = half_max_width(f, depth)
    except SpectrumError as exc:
        raise FitError(f"resonance dip not resolved: {exc}") from exc
    # 1 - |S/B|^2 = ke ki / ((k/2)^2 + d^2) = 4 r (1 - r) at resonance, r = ke / k
    r_under = 0.5 * (1.0 - np.sqrt(max(1.0 - min(peak, 1.0), 0.0)))
    return f0, kappa, level, (r_under, 1.0 - r_under)


def _delay_guess(f, s):
    e = _edge_fraction(len(f))
    slopes = []
    for sl in (slice(0, e), slice(len(f) - e, len(f))):
        ph = np.unwrap(np.angle(s[sl]))
        slopes.append(np.polyfit(f[sl], ph, 1)[0])
    return float(np.mean(slopes)) / TWO_PI


def _stderr(res, n_data, names, scales):
    dof = max(n_data - len(names), 1)
    s2 = 2.0 * res.cost / dof
    try:
        cov = np.linalg.pinv(res.jac.T @ res.jac) * s2
    except np.linalg.LinAlgError:
        return {n: np.nan for n in names}, {n: np.nan for n in names}
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None)) * scales
    q = stats.t.ppf(0.975, dof)
    return dict(zip(names, se.tolist())), dict(zip(names, (q * se).tolist()))


def _fit_complex(f, s, guess_r, f0, kappa, level, delay):
    fc, scale = f0, kappa
    far = int(np.argmax(np.abs(f - f0)))

    def unpack(x):
        return (fc + x[0] * scale, x[1] * scale, x[2] * scale, complex(x[3], x[4]) * level,
                x[5] / scale)

    def resid(x):
        f0_, ke, ki, b, tau = unpack(x)
        r = s11_model(f, f0_, ke, ki, b, tau, fc) - s
        return np.concatenate([r.real, r.imag]) / level

    # background phase from the far edge with the delay removed
    core_edge = s11_model(f[far], f0, guess_r * kappa, (1 - guess_r) * kappa, 1.0, delay, fc)
    b0 = s[far] / core_edge / level
    x0 = np.array([0.0, guess_r, 1 - guess_r, b0.real, b0.imag, delay * scale])
    lb = [-np.inf, 0.0, 0.0, -np.inf, -np.inf, -np.inf]
    res = least_squares(resid, x0, bounds=(lb, np.inf), method="trf", x_scale="jac",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
    f0_, ke, ki, b, tau = unpack(res.x)
    se, ci = _stderr(res, 2 * len(f), ["f0", "kappa_e", "kappa_i", "re_B", "im_B", "delay"],
                     np.array([scale, scale, scale, level, level, 1 / scale]))
    return ResonanceFit(f0_, ke, ki, b, tau, float(np.linalg.norm(res.fun) * level), se, ci,
                        f_ref=fc)


def _fit_magnitude(f, m, guess_r, f0, kappa, level):
    fc, scale = f0, kappa

    def unpack(x):
        return fc + x[0] * scale, x[1] * scale, x[2] * scale, x[3] * level

    def resid(x):
        f0_, ke, ki, b = unpack(x)
        return (np.abs(s11_model(f, f0_, ke, ki, b)) - m) / level

    x0 = np.array([0.0, guess_r, 1 - guess_r, 1.0])
    res = least_squares(resid, x0, bounds=([-np.inf, 0, 0, 0], np.inf), method="trf",
                        x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
    f0_, ke, ki, b = unpack(res.x)
    se, ci = _stderr(res, len(f), ["f0", "kappa_e", "kappa_i", "B"],
                     np.array([scale, scale, scale, level]))
    return ResonanceFit(f0_, ke, ki, complex(b), 0.0, float(np.linalg.norm(res.fun) * level), se, ci)


def fit_resonance(trace: ReflectionTrace) -> ResonanceFit:
    """Fit the single-port reflection model with a complex scale and cable delay.

    Complex traces resolve over- versus under-coupling from the phase. A
    magnitude-only trace cannot: swapping kappa_e and kappa_i leaves |S11|
    unchanged, so the result is flagged ``ambiguous`` and the swapped solution
    is attached as ``alternative``.
    """
    f = np.asarray(trace.freq, dtype=float)
    s = np.asarray(trace.s11)
    f0, kappa, level, rs = _initial_guess(f, s)
    span = f[-1] - f[0]
    if span < 5 * kappa:
        raise FitError(f"trace spans {span / kappa:.2g} linewidths; at least 5 are needed")
    per_width = kappa / np.median(np.diff(f))
    if per_width < 30:
        warnings.warn(f"only {per_width:.0f} points per linewidth (30 recommended)",
                      RuntimeWarning, stacklevel=2)
    if trace.mag_only:
        fit = min((_fit_magnitude(f, np.abs(s), r, f0, kappa, level) for r in rs),
                  key=lambda q: q.residual_norm)
        alt = ResonanceFit(fit.f0, fit.kappa_i, fit.kappa_e, fit.background, 0.0,
                           fit.residual_norm, dict(fit.stderr), dict(fit.ci95), True)
        alt.stderr["kappa_e"], alt.stderr["kappa_i"] = fit.stderr["kappa_i"], fit.stderr["kappa_e"]
        alt.ci95["kappa_e"], alt.ci95["kappa_i"] = fit.ci95["kappa_i"], fit.ci95["kappa_e"]
        fit.ambiguous, fit.alternative = True, alt
        return fit
    delay = _delay_guess(f, s)
    return min((_fit_complex(f, s, r, f0, kappa, level, delay) for r in rs),
               key=lambda q: q.residual_norm)


# --------------------------------------------------------------------------
# Kerr coefficient


@dataclass(frozen=True)
class KerrFit:
    """Slope of frequency shift versus photon number, through the origin.

    ``K`` is in the units of the supplied shifts per photon. ``ci95`` is the
    half-width of the 95% confidence interval.
    """

    K: float
    stderr: float
    ci95: float
    n: np.ndarray = field(repr=False)
    shift: np.ndarray = field(repr=False)
    intercept: float = 0.0

    def contains(self, value) -> bool:
        return abs(value - self.K) <= self.ci95


def fit_kerr(points, sigma=None) -> KerrFit:
    """Weighted least-squares line ``shift = K n`` through the origin.

    ``points`` is a sequence of ``(n, shift)`` pairs. Without ``sigma`` the
    shift errors are taken proportional to ``n`` (relative scatter), which
    makes K the mean of the per-point ratios.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 3:
        raise FitError("fit_kerr needs at least 3 (n, shift) points")
    n, d = arr[:, 0], arr[:, 1]
    if np.any(n <= 0):
        raise FitError("photon numbers must be positive")
    if np.ptp(n) == 0:
        raise FitError("all photon numbers are equal: slope is degenerate")
    sig = n if sigma is None else np.broadcast_to(np.asarray(sigma, float), n.shape)
    w = 1.0 / sig ** 2
    K = float(np.sum(w * n * d) / np.sum(w * n * n))
    dof = len(n) - 1
    chi2 = float(np.sum(w * (d - K * n) ** 2))
    if sigma is None:
        se = np.sqrt(chi2 / dof / np.sum(w * n * n))
    else:
        se = np.sqrt(1.0 / np.sum(w * n * n))
    q = stats.t.ppf(0.975, dof) if sigma is None else stats.norm.ppf(0.975)
    return KerrFit(K=K, stderr=float(se), ci95=float(q * se), n=n, shift=d)


# --------------------------------------------------------------------------
# spectrum figures


def extract_fwhm(spectrum, gain_db=None, side=None):
    """FWHM of the dominant gain peak on the linear power scale.

    Accepts a :class:`GainSpectrum` (optionally restricted to one ``side`` of
    the pump) or an ``(x, gain_db)`` pair.
    """
    if isinstance(spectrum, GainSpectrum):
        x, g = spectrum.offsets, spectrum.gain_signal_dB
        if side is not None:
            mask = x > 0 if side == "+" else x < 0
            x, g = x[mask], g[mask]
    else:
        x, g = np.asarray(spectrum, dtype=float), np.asarray(gain_db, dtype=float)
    if np.max(g) - np.min(g) < 3.0:
        raise SpectrumError("no peak at least 3 dB above the baseline")
    return half_max_width(x, 10 ** (g / 10.0))[0]


def extract_p1db(p_dbm, gain_db, **kw):
    """Input-referred 1-dB compression point (dBm); raises if the gain never compresses."""
    p1, _ = one_db_point(p_dbm, gain_db, **kw)
    if p1 is None:
        raise SpectrumError("gain does not compress by 1 dB within the power range")
    return p1


# --------------------------------------------------------------------------
# gain-model fits


@dataclass(frozen=True)
class MeasuredSpectrum:
    """Measured signal gain at offsets (rad/s) from a pump of given instrument power (dBm)."""

    offsets: np.ndarray
    gain_dB: np.ndarray
    omega_p: float
    pump_dBm: float


FREE_PARAMS = ("K0", "g", "alpha_scale", "att_dB", "omega1", "omega2")


@dataclass
class GainFit:
    params: DeviceParams
    att_dB: float
    reflection: str
    residual_per_curve: list
    cost: float
    overlays: list = field(repr=False)
    comparison: dict = field(default_factory=dict)
    nfev: int = 0


class _GainProblem:
    def __init__(self, spectra, params, att_dB, free, reflection, seeds):
        self.spectra, self.p0, self.att0 = spectra, params, att_dB
        self.free, self.reflection, self.seeds = list(free), reflection, seeds
        k = params.kappa1
        self.k = k
        reach = abs(params.omega1 - params.omega2) + 2 * params.g
        self.bounds = {"K0": (0.2, 5.0), "g": (0.5, 2.0), "alpha_scale": (-30.0, 30.0),
                       "att_dB": (-30.0, 30.0),
                       "omega1": (-reach / k, reach / k), "omega2": (-reach / k, reach / k)}

    def unpack(self, x):
        p, att = self.p0, self.att0
        ch = {}
        for name, v in zip(self.free, x):
            if name == "K0":
                ch["K0"] = p.K0 * v
            elif name == "g":
                ch["g"] = p.g * v
            elif name in ("att_dB", "alpha_scale"):
                att = self.att0 + v
            else:
                ch[name] = getattr(p, name) + v * self.k
        return p.replace(**ch), att

    def x0(self):
        return np.array([1.0 if n in ("K0", "g") else 0.0 for n in self.free])

    def predict(self, params, att):
        out = []
        for m in self.spectra:
            pump = PumpConfig.from_dbm(m.omega_p, m.pump_dBm, att)
            spec = gain_spectrum(params, pump, m.offsets, reflection=self.reflection,
                                 seeds=self.seeds)
            out.append(spec.gain_signal_dB)
        return out

    def residual(self, x):
        params, att = self.unpack(x)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                pred = self.predict(params, att)
        except NoStableStateError as exc:
            # beyond threshold: the penalty grows with the negative stability
            # margin so the search is pushed back below threshold
            depth = 1.0 if exc.margin is None else 1.0 + abs(exc.margin) / self.k
            return np.concatenate([np.full(len(m.gain_dB), 1e3 * depth) for m in self.spectra])
        except (ConvergenceError, SingularError, np.linalg.LinAlgError):
            return np.concatenate([np.full(len(m.gain_dB), 1e3) for m in self.spectra])
        return np.concatenate([p - m.gain_dB for p, m in zip(pred, self.spectra)])


def _below_threshold(problem: _GainProblem, x, lb, ub, max_steps=60):
    """Weaken the pump strength of a start point until every curve has a stable state.

    Least squares started above threshold only sees the penalty plateau, so
    the start is walked down in K0 (or up in attenuation) first.
    """
    x = np.array(x, dtype=float)
    for _ in range(max_steps):
        if np.all(problem.residual(x) < 1e3):
            return x
        for i, name in enumerate(problem.free):
            if name == "K0":
                x[i] *= 0.97
            elif name in ("att_dB", "alpha_scale"):
                x[i] += 0.25
        x = np.clip(x, lb, ub)
    return x


def _fit_one(problem: _GainProblem, n_starts, rng):
    lb = np.array([problem.bounds[n][0] for n in problem.free])
    ub = np.array([problem.bounds[n][1] for n in problem.free])
    starts = [problem.x0()]
    for _ in range(n_starts - 1):
        jitter = np.array([rng.uniform(0.8, 1.25) if n in ("K0", "g") else rng.uniform(-1, 1)
                           for n in problem.free])
        x = np.where([n in ("K0", "g") for n in problem.free], jitter, problem.x0() + jitter)
        starts.append(np.clip(x, lb, ub))
    best = None
    for x0 in starts:
        x0 = _below_threshold(problem, x0, lb, ub)
        res = least_squares(problem.residual, x0, bounds=(lb, ub), method="trf",
                            diff_step=1e-7, xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=400)
        if best is None or res.cost < best.cost:
            best = res
    return best


def fit_gain_model(spectra: Sequence[MeasuredSpectrum], params_init: DeviceParams, free_params,
                   att_dB=0.0, reflection="physical", n_starts=8, seed=0,
                   seeds: SeedPolicy = SeedPolicy()) -> GainFit:
    """Least-squares fit of the response model to measured gain curves.

    ``free_params`` is a subset of ``K0, g, alpha_scale, att_dB, omega1,
    omega2``. ``alpha_scale`` and ``att_dB`` are the same degree of freedom
    (a dB shift of the on-chip pump), and the gain depends on K0 and pump
    power only through their product, so at most one of ``K0``,
    ``att_dB``/``alpha_scale`` may be free.

    ``reflection="both"`` fits each convention and keeps the one with the
    smaller residual; the two costs are reported in ``comparison``.
    """
    free = list(dict.fromkeys(free_params))
    unknown = set(free) - set(FREE_PARAMS)
    if unknown:
        raise ValueError(f"unknown free parameters: {sorted(unknown)}")
    scale_like = {"att_dB", "alpha_scale"} & set(free)
    if len(scale_like) == 2:
        raise ValueError("alpha_scale and att_dB are the same parameter; free only one")
    if scale_like and "K0" in free:
        raise ValueError("K0 and the pump scale are degenerate (gain depends on K0*P only)")
    if not free:
        raise ValueError("no free parameters")
    if not spectra:
        raise ValueError("no spectra to fit")
    conventions = ("physical", "bare") if reflection == "both" else (reflection,)
    results = {}
    for conv in conventions:
        problem = _GainProblem(spectra, params_init, att_dB, free, conv, seeds)
        res = _fit_one(problem, n_starts, np.random.default_rng(seed))
        results[conv] = (problem, res)
    conv = min(results, key=lambda c: results[c][1].cost)
    problem, res = results[conv]
    if not res.success:
        raise FitError(f"gain fit did not converge: {res.message}")
    lb = np.array([problem.bounds[n][0] for n in free])
    ub = np.array([problem.bounds[n][1] for n in free])
    at_bound = [n for n, v, lo, hi in zip(free, res.x, lb, ub)
                if np.isclose(v, lo, rtol=0, atol=1e-9 * max(1, abs(lo)))
                or np.isclose(v, hi, rtol=0, atol=1e-9 * max(1, abs(hi)))]
    if at_bound:
        raise FitError(f"parameters at their bounds: {at_bound}")
    params, att = problem.unpack(res.x)
    try:
        overlays = problem.predict(params, att)
    except (NoStableStateError, ConvergenceError, SingularError) as exc:
        raise FitError(f"best fit has no valid prediction: {exc}") from exc
    per_curve = [float(np.sqrt(np.mean((o - m.gain_dB) ** 2))) for o, m in zip(overlays, spectra)]
    return GainFit(params=params, att_dB=float(att), reflection=conv, residual_per_curve=per_curve,
                   cost=float(res.cost), overlays=overlays,
                   comparison={c: float(r.cost) for c, (_, r) in results.items()},
                   nfev=int(res.nfev))


@dataclass(frozen=True)
class AttenuationFit:
    att_dB: float
    onchip_dBm: float
    alpha_p: complex
    peak_gain_dB: float


def fit_attenuation(params: DeviceParams, omega_p, instrument_dBm, target_gain_dB,
                    alpha_threshold, side=None, seeds: SeedPolicy = SeedPolicy()) -> AttenuationFit:
    """Line attenuation that maps an instrument pump power onto a reported peak gain.

    The single free parameter is solved exactly: the on-chip pump giving
    ``target_gain_dB`` below ``alpha_threshold`` fixes the attenuation.
    """
    from .response import peak_gain

    alpha, state = amplitude_for_gain(params, omega_p, target_gain_dB, alpha_threshold, side,
                                      seeds=seeds)
    onchip = float(watt_to_dbm(hbar * omega_p * abs(alpha) ** 2))
    return AttenuationFit(att_dB=float(instrument_dBm - onchip), onchip_dBm=onchip, alpha_p=alpha,
                          peak_gain_dB=peak_gain(params, state, side))
