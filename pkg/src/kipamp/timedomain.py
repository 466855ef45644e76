"""Classical two-tone integration of the coupled-Kerr equations of motion.

Used as an independent check of the linear-response gain and as the
saturation model. The integration runs in the frame rotating at the pump,
in the same dimensionless units as the steady-state solver (kappa1 = 1,
cubic coefficient +-1).

Two integrators are available: a compiled Dormand-Prince 5(4) pair
(``method="dopri"``, default) and scipy's ``solve_ivp(method="RK45")``, which
implements the same embedded pair but is much slower for the long traces
needed at high gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.constants import hbar
from scipy.integrate import solve_ivp

from .errors import BlowUpError, CommensurabilityError, NotSettledError
from .model import DeviceParams
from .peaks import one_db_point
from .steady import PumpConfig, SteadyState, _Scaled, dbm_to_watt

try:
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None


@dataclass(frozen=True)
class ToneDrive:
    """Pump at zero rotating-frame frequency plus a signal offset by ``delta`` (rad/s)."""

    omega_p: float
    A_p: complex = 0.0
    A_s: complex = 0.0
    delta: float = 0.0

    @property
    def pump(self) -> PumpConfig:
        return PumpConfig(self.omega_p, self.A_p)

    def signal_power(self) -> float:
        return hbar * (self.omega_p + self.delta) * abs(self.A_s) ** 2


@dataclass
class TimeTrace:
    t: np.ndarray
    alpha1: np.ndarray
    alpha2: np.ndarray
    a_out: np.ndarray
    drive: ToneDrive
    settled: bool = False
    n_steps: int = 0

    @property
    def final_state(self):
        return self.alpha1[-1], self.alpha2[-1]


@dataclass
class DemodResult:
    amplitudes: dict
    residual_power: float
    total_power: float

    def __getitem__(self, harmonic):
        return self.amplitudes[harmonic]


# --------------------------------------------------------------------------
# Dormand-Prince 5(4)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, 0] = 1 / 5
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


def _rhs_py(t, y, p):
    d1, d2, h1, h2, gn, kn, dpr, dpi, dsr, dsi, delta = p
    a1, a2 = y[0], y[1]
    sig = complex(dsr, dsi) * np.exp(-1j * delta * t)
    f1 = (-(1j * d1 + h1) * a1 - 1j * gn * a2 - 1j * kn * (a1.real ** 2 + a1.imag ** 2) * a1
          + complex(dpr, dpi) + sig)
    f2 = -(1j * d2 + h2) * a2 - 1j * gn * a1 - 1j * kn * (a2.real ** 2 + a2.imag ** 2) * a2
    return np.array([f1, f2])


def _dopri_py(y0, t_out, p, rtol, atol, bound, max_steps, A, C, E):
    """Adaptive DP5(4) hitting every time in ``t_out`` exactly.

    Returns (samples, status, n_steps); status 0 ok, 1 bound exceeded,
    2 step budget exhausted.
    """
    n_out = t_out.shape[0]
    out = np.zeros((n_out, 2), dtype=np.complex128)
    y = y0.copy()
    t = t_out[0]
    out[0] = y
    k = np.zeros((7, 2), dtype=np.complex128)
    k[0] = _rhs(t, y, p)
    h = (t_out[1] - t_out[0]) if n_out > 1 else 1.0
    steps = 0
    for i in range(1, n_out):
        target = t_out[i]
        while t < target:
            clipped = False
            hh = h
            if t + hh >= target:
                hh = target - t
                clipped = True
            for s in range(1, 7):
                ys = y.copy()
                for j in range(s):
                    ys += hh * A[s, j] * k[j]
                k[s] = _rhs(t + C[s] * hh, ys, p)
            ynew = y + hh * (A[6, 0] * k[0] + A[6, 2] * k[2] + A[6, 3] * k[3]
                             + A[6, 4] * k[4] + A[6, 5] * k[5])
            err = np.zeros(2, dtype=np.complex128)
            for j in range(7):
                err += hh * E[j] * k[j]
            acc = 0.0
            for c in range(2):
                sc = atol + rtol * max(abs(y[c]), abs(ynew[c]))
                acc += (err[c].real / sc) ** 2 + (err[c].imag / sc) ** 2
            en = math.sqrt(acc / 4.0)
            steps += 1
            if steps > max_steps:
                out[i:] = y
                return out, 2, steps
            if en <= 1.0:
                t = target if clipped else t + hh
                y = ynew
                k[0] = k[6]
                if abs(y[0]) > bound or abs(y[1]) > bound:
                    out[i:] = y
                    return out, 1, steps
                fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
                if not clipped or fac < 1.0:
                    h = hh * fac
            else:
                h = hh * max(0.2, 0.9 * en ** -0.2)
        out[i] = y
    return out, 0, steps


if njit is not None:
    _rhs = njit(cache=True)(_rhs_py)
    _dopri = njit(cache=True)(_dopri_py)
else:  # pragma: no cover
    _rhs = _rhs_py
    _dopri = _dopri_py


# --------------------------------------------------------------------------


def _problem(params: DeviceParams, drive: ToneDrive, y0=None):
    if params.kappa1 <= 0:
        raise ValueError("time-domain integration needs kappa1 > 0")
    if params.kappa2 <= 0 and params.g <= 0:
        raise ValueError("resonator 2 has no decay channel (kappa2 = g = 0)")
    sc = _Scaled(params, PumpConfig(drive.omega_p, drive.A_p))
    if params.K0 == 0 and drive.A_p == 0:
        # no natural amplitude: scale by the signal drive or the initial state
        s = abs(np.sqrt(params.kappa_e1) * drive.A_s) / sc.k
        if y0 is not None:
            s = max(s, float(np.max(np.abs(y0))))
        sc.s = s if s > 0 else 1.0
    rt = np.sqrt(params.kappa_e1) / (sc.k * sc.s)
    dp = rt * drive.A_p
    ds = rt * drive.A_s
    p = np.array([sc.d1, sc.d2, sc.h1, sc.h2, sc.gn, sc.kn,
                  complex(dp).real, complex(dp).imag, complex(ds).real, complex(ds).imag,
                  drive.delta / sc.k])
    return sc, p


def _sample_step(params: DeviceParams, drive: ToneDrive, samples_per_period):
    if drive.delta != 0:
        return 2 * np.pi / abs(drive.delta) / samples_per_period
    fastest = max(params.kappa1, params.kappa2, params.g, abs(params.omega1 - drive.omega_p),
                  abs(params.omega2 - drive.omega_p))
    return 2 * np.pi / fastest / samples_per_period


def integrate(params: DeviceParams, drive: ToneDrive, t_end, tol=1e-10, y0=None, t0=0.0,
              samples_per_period=32, method="dopri", bound=1e6, max_steps=50_000_000,
              settle_tol=1e-8, require_settled=False) -> TimeTrace:
    """Integrate the driven equations of motion from ``t0`` to ``t_end`` (s).

    ``y0`` holds the initial complex amplitudes (sqrt photons); vacuum by
    default. Samples are uniform with ``samples_per_period`` points per
    signal period. ``settled`` reports whether the last signal period repeats
    the one before it to ``settle_tol`` (relative).

    Raises :class:`BlowUpError` when the amplitude exceeds ``bound`` times the
    natural amplitude scale, and :class:`NotSettledError` for an unsettled
    trace if ``require_settled``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    sc, p = _problem(params, drive, y0)
    dt = _sample_step(params, drive, samples_per_period)
    n = max(int(round((t_end - t0) / dt)), 1)
    t_phys = t0 + dt * np.arange(n + 1)
    tau = t_phys * sc.k
    y_init = np.zeros(2, dtype=np.complex128) if y0 is None else np.asarray(y0, dtype=np.complex128) / sc.s
    scale = max(1.0, float(np.max(np.abs(y_init))), abs(complex(p[6], p[7])) / max(p[2], 1e-12))
    if method == "dopri":
        ys, status, steps = _dopri(y_init, tau, p, tol, tol * 1e-3, bound * scale, max_steps,
                                   _A, _C, _E)
    elif method == "scipy":
        sol = solve_ivp(lambda t, y: _rhs_py(t, y, p), (tau[0], tau[-1]), y_init, method="RK45",
                        t_eval=tau, rtol=tol, atol=tol * 1e-3)
        ys, steps = sol.y.T, int(sol.nfev // 6)
        status = 0 if sol.success else 2
        if np.max(np.abs(ys)) > bound * scale:
            status = 1
    else:
        raise ValueError("method must be 'dopri' or 'scipy'")
    if status == 1:
        raise BlowUpError("amplitude diverged: operating point is beyond threshold")
    if status == 2:
        raise NotSettledError("integration step budget exhausted")
    a1, a2 = ys[:, 0] * sc.s, ys[:, 1] * sc.s
    a_out = (np.sqrt(params.kappa_e1) * a1
             - (drive.A_p + drive.A_s * np.exp(-1j * drive.delta * t_phys)))
    trace = TimeTrace(t=t_phys, alpha1=a1, alpha2=a2, a_out=a_out, drive=drive, n_steps=steps)
    per = samples_per_period
    if len(t_phys) > 2 * per:
        last, prev = ys[-per:], ys[-2 * per:-per]
        ref = max(float(np.max(np.abs(last))), 1e-300)
        trace.settled = bool(np.max(np.abs(last - prev)) < settle_tol * ref)
    if require_settled and not trace.settled:
        raise NotSettledError(f"trace has not settled by t = {t_phys[-1]:.4g} s")
    return trace


def demodulate(trace, delta, x=None, harmonics=3) -> DemodResult:
    """Complex amplitudes of the components ``exp(-i k delta t)``, ``|k| <= harmonics``.

    ``trace`` is a :class:`TimeTrace` (its output record is analysed) or a
    time array together with samples ``x``. The samples must cover an
    integer number of signal periods; the final sample, if it closes the
    window, is dropped.
    """
    if isinstance(trace, TimeTrace):
        t, x = trace.t, trace.a_out
    else:
        t = np.asarray(trace, dtype=float)
        x = np.asarray(x)
    if delta == 0:
        raise ValueError("delta must be non-zero")
    dt = t[1] - t[0]
    slack = 1e-9 * abs(dt) + 64 * np.finfo(float).eps * float(np.max(np.abs(t)))
    if np.max(np.abs(np.diff(t) - dt)) > slack:
        raise CommensurabilityError("samples are not uniformly spaced")
    period = 2 * np.pi / abs(delta)
    for n in (len(t) - 1, len(t)):
        cycles = n * dt / period
        if abs(cycles - round(cycles)) <= 1e-6 and round(cycles) >= 1:
            break
    else:
        raise CommensurabilityError(
            f"window of {len(t)} samples does not hold an integer number of periods")
    tt, xx = t[:n], x[:n]
    amps = {}
    for k in range(-harmonics, harmonics + 1):
        amps[k] = complex(np.mean(xx * np.exp(1j * k * delta * tt)))
    total = float(np.mean(np.abs(xx) ** 2))
    resid = total - sum(abs(a) ** 2 for a in amps.values())
    return DemodResult(amplitudes=amps, residual_power=resid, total_power=total)


@dataclass
class TDGain:
    gain_signal_dB: float
    gain_idler_dB: float
    c_S: complex
    c_I: complex
    t_total: float
    settled: bool
    final_state: tuple = field(repr=False, default=(0j, 0j))
    t_end: float = 0.0
    error_estimate: float = 0.0  # a priori bound on |c_S| error from the step tolerance


def _chunk_periods(params, delta):
    kmin = min(k for k in (params.kappa1, params.kappa2) if k > 0)
    period = 2 * np.pi / abs(delta)
    return max(50, int(math.ceil(20.0 / kmin / period)))


def settle_and_demodulate(params: DeviceParams, drive: ToneDrive, y0=None, t0=0.0, tol=1e-10,
                          settle_tol=1e-8, max_chunks=400, samples_per_period=32, method="dopri"):
    """Integrate in whole-period chunks until the +-delta output tones stop changing.

    Each chunk spans ``max(50 periods, 20/min(kappa))``. The change between
    successive chunks is extrapolated geometrically to estimate the distance to
    the periodic steady state. Returns ``(demod, trace, settled, t_total)``.
    """
    periods = _chunk_periods(params, drive.delta)
    T = periods * 2 * np.pi / abs(drive.delta)
    # the drive repeats every chunk, so each chunk restarts the clock at t0;
    # this keeps the sample grid exact however long the run
    y, elapsed = y0, 0.0
    prev_v = None
    prev_diff = None
    ref = abs(drive.A_s) if drive.A_s != 0 else max(abs(drive.A_p), 1e-300)
    for _ in range(max_chunks):
        tr = integrate(params, drive, t0 + T, tol=tol, y0=y, t0=t0,
                       samples_per_period=samples_per_period, method=method)
        dem = demodulate(tr, drive.delta)
        v = np.array([dem[1], dem[-1], dem[0]]) / ref
        y = tr.final_state
        elapsed += tr.t[-1] - t0
        if prev_v is not None:
            diff = float(np.max(np.abs(v - prev_v)))
            scale = max(1.0, float(np.max(np.abs(v[:2]))))
            est = diff
            if prev_diff is not None and prev_diff > 0:
                r = diff / prev_diff
                est = diff * r / (1.0 - r) if r < 1.0 else np.inf
            if diff < settle_tol * scale or (est < settle_tol * scale and diff < 1e-3 * scale):
                return dem, tr, True, elapsed
            prev_diff = diff
        prev_v = v
    return dem, tr, False, elapsed


def small_signal_gain_td(params: DeviceParams, pump: PumpConfig, delta, A_s=None,
                         state: Optional[SteadyState] = None, tol=1e-10, settle_tol=1e-8,
                         max_chunks=400, method="dopri") -> TDGain:
    """Signal and idler gain at offset ``delta`` from a time-domain simulation.

    The integration starts from ``state`` (the pumped steady state, if given)
    or from vacuum, with a weak signal of amplitude ``A_s`` switched on at t=0.
    """
    if A_s is None:
        A_s = 1e-5 * abs(pump.alpha_p) if pump.alpha_p != 0 else 1.0
    drive = ToneDrive(pump.omega_p, pump.alpha_p, A_s, delta)
    y0 = None if state is None else (state.alpha1, state.alpha2)
    dem, tr, settled, t_total = settle_and_demodulate(
        params, drive, y0=y0, tol=tol, settle_tol=settle_tol, max_chunks=max_chunks, method=method)
    if not settled:
        raise NotSettledError(f"signal response did not settle within {t_total:.3g} s")
    c_S = dem[1] / A_s
    c_I = dem[-1] / np.conj(A_s)
    # step control is relative to the pump-dominated state, so the signal tone
    # inherits tol times the output-to-signal amplitude ratio
    out_scale = np.sqrt(params.kappa_e1) * np.max(np.abs(tr.alpha1)) + abs(pump.alpha_p)
    err = 10.0 * tol * out_scale / abs(A_s)
    with np.errstate(divide="ignore"):
        gs = 20 * np.log10(abs(c_S))
        gi = 20 * np.log10(abs(c_I))
    return TDGain(gain_signal_dB=float(gs), gain_idler_dB=float(gi), c_S=complex(c_S),
                  c_I=complex(c_I), t_total=t_total, settled=settled,
                  final_state=tr.final_state, t_end=float(tr.t[-1]), error_estimate=float(err))


@dataclass
class CompressionResult:
    P_in_dBm: np.ndarray
    gain_dB: np.ndarray
    settled: np.ndarray
    P_1dB: Optional[float]
    plateau_dB: float


def compression_sweep(params: DeviceParams, pump: PumpConfig, delta, power_grid_dBm: Sequence[float],
                      state: Optional[SteadyState] = None, tol=1e-9, settle_tol=1e-7,
                      max_chunks=400, method="dopri") -> CompressionResult:
    """Large-signal gain versus on-chip signal power (dBm) and the 1-dB point.

    Each power point continues from the final state of the previous one.
    """
    powers = np.asarray(power_grid_dBm, dtype=float)
    if np.any(np.diff(powers) <= 0):
        raise ValueError("power grid must be increasing")
    y = None if state is None else (state.alpha1, state.alpha2)
    gains, flags = [], []
    for p_dbm in powers:
        A_s = float(np.sqrt(dbm_to_watt(p_dbm) / (hbar * (pump.omega_p + delta))))
        drive = ToneDrive(pump.omega_p, pump.alpha_p, A_s, delta)
        dem, tr, settled, _ = settle_and_demodulate(params, drive, y0=y, tol=tol,
                                                    settle_tol=settle_tol, max_chunks=max_chunks,
                                                    method=method)
        y = tr.final_state
        gains.append(20 * np.log10(abs(dem[1] / A_s)))
        flags.append(settled)
    gains = np.array(gains)
    p1, plateau = one_db_point(powers, gains)
    return CompressionResult(P_in_dBm=powers, gain_dB=gains, settled=np.array(flags),
                             P_1dB=p1, plateau_dB=plateau)


@dataclass(frozen=True)
class TDStability:
    verdict: str  # "stable", "unstable" or "ambiguous"
    growth: float  # final / initial deviation


def classify_td(params: DeviceParams, pump: PumpConfig, state: SteadyState, rel_kick=1e-6,
                duration=400.0, rng=None, tol=1e-11) -> TDStability:
    """Stability of a steady state by kicking it and watching the deviation.

    The state is displaced by ``rel_kick`` (relative, random direction) and
    integrated for ``duration / kappa1``. A deviation that shrinks marks a
    stable point; growth by more than 100x (or divergence) an unstable one.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    a0 = np.array([state.alpha1, state.alpha2])
    ref = max(float(np.linalg.norm(a0)), 1e-300)
    kick = rng.normal(size=2) + 1j * rng.normal(size=2)
    kick *= rel_kick * ref / np.linalg.norm(kick)
    drive = ToneDrive(pump.omega_p, pump.alpha_p)
    try:
        tr = integrate(params, drive, duration / params.kappa1, tol=tol, y0=a0 + kick,
                       samples_per_period=8)
    except BlowUpError:
        return TDStability("unstable", np.inf)
    dev = np.hypot(np.abs(tr.alpha1 - a0[0]), np.abs(tr.alpha2 - a0[1]))
    growth = float(dev[-1] / np.linalg.norm(kick))
    if growth > 100.0:
        return TDStability("unstable", growth)
    if growth < 1.0:
        return TDStability("stable", growth)
    return TDStability("ambiguous", growth)
