"""Classical steady states of the pumped coupled-Kerr system and their stability.

Equations of motion in the frame rotating at the pump frequency (noise dropped,
weak second port neglected)::

    0 = (i D1 + k1/2) a1 + i g a2 + i K0 |a1|^2 a1 - sqrt(ke1) a_p
    0 = (i D2 + k2/2) a2 + i g a1 + i K0 |a2|^2 a2

with bare detunings ``Dj = omega_j - omega_p``. Internally everything is
rescaled so that kappa1 = 1 and the cubic coefficient is +-1, which keeps the
Newton Jacobian well conditioned at 10 GHz carriers and 1e8 photons.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.constants import hbar

from .errors import ConvergenceError, NoStableStateError
from .model import DeviceParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PumpConfig:
    """Classical pump tone. ``alpha_p`` is in sqrt(photons/s) and may be complex."""

    omega_p: float
    alpha_p: complex = 0.0

    def __post_init__(self):
        if not self.omega_p > 0:
            raise ValueError("omega_p must be positive")

    @property
    def P_pump(self) -> float:
        return hbar * self.omega_p * abs(self.alpha_p) ** 2

    @classmethod
    def from_power(cls, omega_p, power_W):
        if power_W < 0:
            raise ValueError("pump power must be >= 0")
        return cls(omega_p, float(np.sqrt(power_W / (hbar * omega_p))))

    @classmethod
    def from_dbm(cls, omega_p, power_dBm, att_dB=0.0):
        """Pump from an instrument power in dBm and a line attenuation in dB."""
        return cls.from_power(omega_p, dbm_to_watt(power_dBm - att_dB))

    def with_alpha(self, alpha_p) -> "PumpConfig":
        return PumpConfig(self.omega_p, alpha_p)


def dbm_to_watt(p_dbm):
    return 1e-3 * 10.0 ** (np.asarray(p_dbm) / 10.0)


def watt_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w) / 1e-3)


@dataclass(frozen=True)
class SteadyState:
    alpha1: complex
    alpha2: complex
    n1: float
    n2: float
    K_eff1: complex
    K_eff2: complex
    Delta1: float
    Delta2: float
    omega_p: float
    residual_norm: float = 0.0

    @classmethod
    def build(cls, alpha1, alpha2, params: DeviceParams, pump: PumpConfig, residual_norm=0.0):
        alpha1, alpha2 = complex(alpha1), complex(alpha2)
        n1, n2 = abs(alpha1) ** 2, abs(alpha2) ** 2
        return cls(
            alpha1=alpha1, alpha2=alpha2, n1=n1, n2=n2,
            K_eff1=params.K0 * alpha1 ** 2, K_eff2=params.K0 * alpha2 ** 2,
            Delta1=params.omega1 - pump.omega_p + 2.0 * params.K0 * n1,
            Delta2=params.omega2 - pump.omega_p + 2.0 * params.K0 * n2,
            omega_p=pump.omega_p, residual_norm=residual_norm,
        )

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2])


@dataclass(frozen=True)
class DriftMatrix:
    entries: np.ndarray
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_real_eig: float

    @property
    def margin(self) -> float:
        return -self.max_real_eig


@dataclass(frozen=True)
class SeedPolicy:
    """Multi-start settings for :func:`solve_steady`."""

    n_random: int = 16
    ladder: int = 12
    rng_seed: int = 0
    max_iter: int = 200
    tol_abs: float = 1e-12
    dedup_tol: float = 1e-6


# --------------------------------------------------------------------------
# normalized problem


class _Scaled:
    """Dimensionless form of the steady-state problem."""

    def __init__(self, params: DeviceParams, pump: PumpConfig):
        d1 = params.omega1 - pump.omega_p
        d2 = params.omega2 - pump.omega_p
        k = params.kappa1
        if k <= 0:
            k = max(params.kappa2, params.g, abs(d1), abs(d2)) or 1.0
        drive = np.sqrt(params.kappa_e1) * pump.alpha_p
        if params.K0 != 0:
            s = np.sqrt(k / abs(params.K0))
        else:
            s = abs(drive) / k or 1.0
        self.k, self.s = k, s
        self.d1, self.d2 = d1 / k, d2 / k
        self.h1, self.h2 = 0.5 * params.kappa1 / k, 0.5 * params.kappa2 / k
        self.gn = params.g / k
        self.kn = params.K0 * s * s / k
        self.drive = complex(drive / (k * s))

    def unpack(self, x):
        return complex(x[0], x[1]), complex(x[2], x[3])

    def residual(self, x):
        a1, a2 = self.unpack(x)
        f1 = ((1j * self.d1 + self.h1) * a1 + 1j * self.gn * a2
              + 1j * self.kn * abs(a1) ** 2 * a1 - self.drive)
        f2 = ((1j * self.d2 + self.h2) * a2 + 1j * self.gn * a1
              + 1j * self.kn * abs(a2) ** 2 * a2)
        return np.array([f1.real, f1.imag, f2.real, f2.imag])

    def jacobian(self, x):
        a1, a2 = self.unpack(x)
        # dF/dz and dF/dz* for each complex unknown; d/dx = A + B, d/dy = i (A - B)
        A11 = 1j * self.d1 + self.h1 + 2j * self.kn * abs(a1) ** 2
        B11 = 1j * self.kn * a1 * a1
        A22 = 1j * self.d2 + self.h2 + 2j * self.kn * abs(a2) ** 2
        B22 = 1j * self.kn * a2 * a2
        A12 = A21 = 1j * self.gn
        cols = [
            (A11 + B11, A21),
            (1j * (A11 - B11), 1j * A21),
            (A12, A22 + B22),
            (1j * A12, 1j * (A22 - B22)),
        ]
        J = np.empty((4, 4))
        for c, (df1, df2) in enumerate(cols):
            J[:, c] = (df1.real, df1.imag, df2.real, df2.imag)
        return J

    def linear_solution(self, shift1=0.0, shift2=0.0):
        m = np.array([[1j * (self.d1 + shift1) + self.h1, 1j * self.gn],
                      [1j * self.gn, 1j * (self.d2 + shift2) + self.h2]])
        try:
            a = np.linalg.solve(m, np.array([self.drive, 0.0]))
        except np.linalg.LinAlgError:
            return None
        return np.array([a[0].real, a[0].imag, a[1].real, a[1].imag])

    def reduced_photon_numbers(self, mode):
        """Photon numbers of ``mode`` with the other mode eliminated as a linear one.

        The reduced single-mode equation ``(c + i kn n) a = b`` gives the cubic
        ``kn^2 n^3 + 2 Im(c) kn n^2 + |c|^2 n - |b|^2 = 0``, whose positive
        roots include the narrow-basin middle branch of a bistable mode.
        """
        z1, z2 = 1j * self.d1 + self.h1, 1j * self.d2 + self.h2
        if z1 == 0 or z2 == 0:
            return []
        if mode == 1:
            c, b = z1 + self.gn ** 2 / z2, self.drive
        else:
            c, b = z2 + self.gn ** 2 / z1, -1j * self.gn * self.drive / z1
        r = np.roots([self.kn ** 2, 2 * c.imag * self.kn, abs(c) ** 2, -abs(b) ** 2])
        return [x.real for x in r if abs(x.imag) <= 1e-6 * abs(x) and x.real > 0]

    def tolerance(self, tol_abs):
        return tol_abs * (1.0 + abs(self.drive))

    def to_state(self, x, params, pump):
        a1, a2 = self.unpack(x)
        res = float(np.linalg.norm(self.residual(x)))
        return SteadyState.build(a1 * self.s, a2 * self.s, params, pump, residual_norm=res)

    def from_state(self, state: SteadyState):
        a1, a2 = state.alpha1 / self.s, state.alpha2 / self.s
        return np.array([a1.real, a1.imag, a2.real, a2.imag])


def _newton(problem: _Scaled, x0, max_iter=200, tol_abs=1e-12):
    """Damped Newton with backtracking on the residual norm."""
    x = np.array(x0, dtype=float)
    f = problem.residual(x)
    fn = np.linalg.norm(f)
    tol = problem.tolerance(tol_abs)
    loose = problem.tolerance(1e-9)
    for _ in range(max_iter):
        if fn <= tol:
            return x, True, fn
        try:
            step = np.linalg.solve(problem.jacobian(x), -f)
        except np.linalg.LinAlgError:
            return x, False, fn
        lam = 1.0
        while True:
            xt = x + lam * step
            ft = problem.residual(xt)
            ftn = np.linalg.norm(ft)
            if ftn < (1.0 - 1e-4 * lam) * fn or lam < 1e-10:
                break
            lam *= 0.5
        if lam < 1e-10 and ftn >= fn:
            # stalled at roundoff level: accept if the residual is already tiny
            return x, fn <= loose, fn
        small_step = np.linalg.norm(lam * step) <= 1e-15 * (1.0 + np.linalg.norm(x))
        x, f, fn = xt, ft, ftn
        if small_step:
            return x, fn <= loose, fn
    return x, fn <= tol, fn


def residual(state, params: DeviceParams, pump: PumpConfig):
    """Real and imaginary parts of both steady-state equations, physical units.

    ``state`` is a :class:`SteadyState` or a pair of complex amplitudes.
    """
    if isinstance(state, SteadyState):
        a1, a2 = state.alpha1, state.alpha2
    else:
        a1, a2 = (complex(v) for v in state)
    d1 = params.omega1 - pump.omega_p
    d2 = params.omega2 - pump.omega_p
    f1 = ((1j * d1 + 0.5 * params.kappa1) * a1 + 1j * params.g * a2
          + 1j * params.K0 * abs(a1) ** 2 * a1 - np.sqrt(params.kappa_e1) * pump.alpha_p)
    f2 = ((1j * d2 + 0.5 * params.kappa2) * a2 + 1j * params.g * a1
          + 1j * params.K0 * abs(a2) ** 2 * a2)
    return np.array([f1.real, f1.imag, f2.real, f2.imag])


def normalized_residual_norm(state, params, pump):
    """Residual norm in solver units, and the drive magnitude in the same units."""
    problem = _Scaled(params, pump)
    return float(np.linalg.norm(problem.residual(problem.from_state(state)))), abs(problem.drive)


def _seeds(problem: _Scaled, policy: SeedPolicy):
    seeds = []
    lin = problem.linear_solution()
    if lin is not None:
        seeds += [lin, 0.5 * lin, 2.0 * lin]
    if problem.kn == 0:
        return seeds or [np.zeros(4)]
    # characteristic photon number (solver units) at which Kerr shifts matter
    n_c = max(abs(problem.d1), abs(problem.d2), problem.gn, problem.h1, problem.h2,
              abs(problem.drive) ** (2.0 / 3.0))
    for n in np.geomspace(1e-3 * n_c, 3.0 * n_c, policy.ladder) if policy.ladder else []:
        shift = problem.kn * n
        for s1, s2 in ((shift, shift), (shift, 0.0), (0.0, shift)):
            x = problem.linear_solution(s1, s2)
            if x is not None:
                seeds.append(x)
    for n in problem.reduced_photon_numbers(1):
        x = problem.linear_solution(problem.kn * n, 0.0)
        if x is not None:
            seeds.append(x)
    for n in problem.reduced_photon_numbers(2):
        x = problem.linear_solution(0.0, problem.kn * n)
        if x is not None:
            seeds.append(x)
    rng = np.random.default_rng(policy.rng_seed)
    # random phases are taken relative to the drive so the seed set rotates with it
    ref = np.exp(1j * np.angle(problem.drive))
    for _ in range(policy.n_random):
        mag = np.sqrt(n_c * 10.0 ** rng.uniform(-2.0, 0.7, size=2))
        ph = rng.uniform(0, 2 * np.pi, size=2)
        a = mag * np.exp(1j * ph) * ref
        seeds.append(np.array([a[0].real, a[0].imag, a[1].real, a[1].imag]))
    seeds.append(np.zeros(4))
    return seeds


def solve_steady(params: DeviceParams, pump: PumpConfig,
                 seeds: SeedPolicy = SeedPolicy()) -> List[SteadyState]:
    """All distinct steady states reachable from the multi-start seed set.

    Roots are returned sorted by (n1, n2). Raises :class:`ConvergenceError`
    if not a single seed converged.
    """
    problem = _Scaled(params, pump)
    roots: List[np.ndarray] = []
    best = np.inf
    for x0 in _seeds(problem, seeds):
        x, ok, fn = _newton(problem, x0, seeds.max_iter, seeds.tol_abs)
        best = min(best, fn)
        if not ok:
            continue
        a = np.array([complex(x[0], x[1]), complex(x[2], x[3])])
        if any(np.linalg.norm(a - r) / (1.0 + np.linalg.norm(r)) < seeds.dedup_tol for r in roots):
            continue
        roots.append(a)
    if not roots:
        raise ConvergenceError(
            f"no Newton seed converged (best residual {best:.3g} in solver units)",
            partial={"best_residual": best})
    states = [problem.to_state(np.array([r[0].real, r[0].imag, r[1].real, r[1].imag]), params, pump)
              for r in roots]
    states.sort(key=lambda s: (s.n1, s.n2))
    return states


def refine(params: DeviceParams, pump: PumpConfig, guess: SteadyState,
           max_iter=200, tol_abs=1e-12) -> Optional[SteadyState]:
    """Newton-polish ``guess`` for a (possibly different) pump; None on failure."""
    problem = _Scaled(params, pump)
    x, ok, _ = _newton(problem, problem.from_state(guess), max_iter, tol_abs)
    return problem.to_state(x, params, pump) if ok else None


# --------------------------------------------------------------------------
# linearization


def drift_matrix(params: DeviceParams, pump: PumpConfig, state: SteadyState) -> DriftMatrix:
    """Linearized drift matrix over (da1, da1^+, da2, da2^+)."""
    d1 = params.omega1 - pump.omega_p + 2.0 * params.K0 * state.n1
    d2 = params.omega2 - pump.omega_p + 2.0 * params.K0 * state.n2
    K1, K2 = params.K0 * state.alpha1 ** 2, params.K0 * state.alpha2 ** 2
    h1, h2, g = 0.5 * params.kappa1, 0.5 * params.kappa2, params.g
    m = np.array([
        [-1j * d1 - h1, -1j * K1, -1j * g, 0],
        [1j * np.conj(K1), 1j * d1 - h1, 0, 1j * g],
        [-1j * g, 0, -1j * d2 - h2, -1j * K2],
        [0, 1j * g, 1j * np.conj(K2), 1j * d2 - h2],
    ], dtype=complex)
    return DriftMatrix(entries=m, eigenvalues=np.linalg.eigvals(m))


def stability(drift: DriftMatrix) -> StabilityReport:
    """Stable iff every eigenvalue has a strictly negative real part.

    Real parts within roundoff of zero are snapped to zero (marginal, hence
    unstable).
    """
    max_re = float(np.max(drift.eigenvalues.real))
    scale = np.linalg.norm(drift.entries, ord=2)
    if abs(max_re) <= 1e-12 * scale:
        max_re = 0.0
    return StabilityReport(stable=max_re < 0, max_real_eig=max_re)


def classify(params, pump, state) -> StabilityReport:
    return stability(drift_matrix(params, pump, state))


# --------------------------------------------------------------------------
# continuation


@dataclass
class SweepPoint:
    alpha_p: complex
    state: SteadyState
    report: StabilityReport
    flag: str = ""  # "", "turning", "threshold"


@dataclass
class SweepBranch:
    branch_id: int
    direction: str
    points: List[SweepPoint] = field(default_factory=list)

    @property
    def turning_points(self):
        return [p for p in self.points if p.flag == "turning"]


def _jumped(prev: SteadyState, new: SteadyState, ratio, problem: _Scaled, limit=0.25):
    """True when ``new`` is not the continuous continuation of ``prev``."""
    pred = problem.from_state(prev) * abs(ratio)
    got = problem.from_state(new)
    return np.linalg.norm(got - pred) > limit * (np.linalg.norm(pred) + 1.0)


def _continue_to(params, omega_p, prev: SteadyState, a_from, a_to, min_frac=1e-7, max_depth=30):
    """Track ``prev`` from pump ``a_from`` to ``a_to``, subdividing the step on trouble.

    Returns the tracked state or None when the branch ends (fold).
    """
    if a_from == a_to:
        return prev
    pump = PumpConfig(omega_p, a_to)
    problem = _Scaled(params, pump)
    new = refine(params, pump, prev)
    ratio = a_to / a_from if a_from != 0 else 1.0
    if new is not None and not _jumped(prev, new, ratio if a_from != 0 else 1.0, problem):
        return new
    if max_depth == 0 or abs(a_to - a_from) <= min_frac * max(abs(a_to), abs(a_from)):
        return None
    mid = 0.5 * (a_from + a_to)
    half = _continue_to(params, omega_p, prev, a_from, mid, min_frac, max_depth - 1)
    if half is None:
        return None
    return _continue_to(params, omega_p, half, mid, a_to, min_frac, max_depth - 1)


def _nearest_stable(params, pump, ref: SteadyState, exclude: Optional[SteadyState], seeds):
    roots = solve_steady(params, pump, seeds)
    cands = []
    for r in roots:
        if exclude is not None and abs(r.alpha1 - exclude.alpha1) + abs(r.alpha2 - exclude.alpha2) \
                <= 1e-6 * (1.0 + abs(exclude.alpha1) + abs(exclude.alpha2)):
            continue
        rep = classify(params, pump, r)
        if rep.stable:
            cands.append((abs(r.alpha1 - ref.alpha1) + abs(r.alpha2 - ref.alpha2), r, rep))
    if not cands:
        return None, None
    cands.sort(key=lambda c: c[0])
    return cands[0][1], cands[0][2]


def pump_sweep(params: DeviceParams, omega_p, alpha_grid: Sequence[complex], direction="up",
               seeds: SeedPolicy = SeedPolicy(), stop_at_threshold=True) -> List[SweepBranch]:
    """Natural-parameter continuation of the steady state over a pump grid.

    ``direction="up"`` starts from the smallest-amplitude stable root at the
    first grid point and walks the grid in order; ``"down"`` walks it in
    reverse starting from the largest-amplitude stable root. A fold ends the
    current branch (its last point is flagged ``"turning"``) and a new branch
    starts on the nearest stable root. With ``stop_at_threshold`` the sweep ends
    when the followed state loses stability, the last stable point being
    flagged ``"threshold"``.
    """
    grid = list(alpha_grid)
    if len(grid) < 1:
        raise ValueError("empty pump grid")
    mags = np.abs(grid)
    if not (np.all(np.diff(mags) >= 0) or np.all(np.diff(mags) <= 0)):
        raise ValueError("pump grid must be monotone")
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    if direction == "down":
        grid = grid[::-1]

    pump0 = PumpConfig(omega_p, grid[0])
    roots = solve_steady(params, pump0, seeds)
    reports = [classify(params, pump0, r) for r in roots]
    order = range(len(roots)) if direction == "up" else range(len(roots) - 1, -1, -1)
    start = next((i for i in order if reports[i].stable), None)
    if start is None:
        start = 0 if direction == "up" else len(roots) - 1
    branch_id = 0
    branch = SweepBranch(branch_id, direction, [SweepPoint(grid[0], roots[start], reports[start])])
    branches = [branch]
    state = roots[start]
    for a_prev, a in zip(grid[:-1], grid[1:]):
        pump = PumpConfig(omega_p, a)
        new = _continue_to(params, omega_p, state, a_prev, a)
        if new is None:
            branch.points[-1].flag = "turning"
            new, rep = _nearest_stable(params, pump, state, None, seeds)
            if new is None:
                log.warning("continuation stalled at alpha_p=%s: no stable root", a)
                break
            branch_id += 1
            branch = SweepBranch(branch_id, direction)
            branches.append(branch)
        else:
            rep = classify(params, pump, new)
        if stop_at_threshold and branch.points and branch.points[-1].report.stable and not rep.stable:
            branch.points[-1].flag = "threshold"
            break
        branch.points.append(SweepPoint(a, new, rep))
        state = new
    return branches


def hysteresis(up: List[SweepBranch], down: List[SweepBranch], rtol=1e-3) -> bool:
    """True if the up and down sweeps disagree at some shared grid point."""
    def table(branches):
        return {complex(p.alpha_p): p.state for b in branches for p in b.points}
    tu, td = table(up), table(down)
    for a in set(tu) & set(td):
        su, sd = tu[a], td[a]
        scale = 1.0 + abs(su.alpha1) + abs(su.alpha2)
        if abs(su.alpha1 - sd.alpha1) + abs(su.alpha2 - sd.alpha2) > rtol * scale:
            return True
    return False


def physical_state(params: DeviceParams, pump: PumpConfig, n_steps=60, start_frac=1e-4,
                   seeds: SeedPolicy = SeedPolicy(), require_stable_path=True):
    """Steady state reached by ramping the pump up from vacuum.

    Returns ``(state, report)``. Raises :class:`NoStableStateError` if the
    followed state is unstable at the target (or anywhere on the way when
    ``require_stable_path``).
    """
    if pump.alpha_p == 0:
        state = solve_steady(params, pump, seeds)[0]
        rep = classify(params, pump, state)
        if not rep.stable:
            raise NoStableStateError("vacuum state is not stable", margin=rep.margin)
        return state, rep
    fracs = np.geomspace(start_frac, 1.0, n_steps)
    alphas = pump.alpha_p * fracs
    first = PumpConfig(pump.omega_p, alphas[0])
    problem = _Scaled(params, first)
    x, ok, _ = _newton(problem, problem.linear_solution() if problem.linear_solution() is not None
                       else np.zeros(4))
    if not ok:
        state = solve_steady(params, first, seeds)[0]
    else:
        state = problem.to_state(x, params, first)
    rep = classify(params, first, state)
    worst = rep
    for a_prev, a in zip(alphas[:-1], alphas[1:]):
        p = PumpConfig(pump.omega_p, a)
        new = _continue_to(params, pump.omega_p, state, a_prev, a)
        if new is None:
            new, rep = _nearest_stable(params, p, state, None, seeds)
            if new is None:
                raise NoStableStateError(
                    f"no stable state after fold at alpha_p={abs(a):.6g}", margin=None)
        else:
            rep = classify(params, p, new)
        if require_stable_path and not rep.stable:
            raise NoStableStateError(
                f"pumped state loses stability at alpha_p={abs(a):.6g} "
                f"(stability margin {rep.margin:.4g} rad/s)", margin=rep.margin)
        worst = rep if rep.margin < worst.margin else worst
        state = new
    if not rep.stable:
        raise NoStableStateError(
            f"pumped state is unstable (stability margin {rep.margin:.4g} rad/s)", margin=rep.margin)
    return state, rep


@dataclass(frozen=True)
class Threshold:
    alpha_p: complex
    state_below: SteadyState
    margin_below: float


def parametric_threshold(params: DeviceParams, omega_p, alpha_max, n_steps=200,
                         start_frac=1e-4, rtol=1e-10, seeds: SeedPolicy = SeedPolicy()):
    """Pump amplitude at which the branch connected to vacuum first loses stability.

    Returns None if the branch stays stable up to ``alpha_max``.
    """
    alphas = alpha_max * np.geomspace(start_frac, 1.0, n_steps)
    pump = PumpConfig(omega_p, alphas[0])
    state, rep = physical_state(params, pump, n_steps=10, seeds=seeds)
    a_lo = alphas[0]
    for a in alphas[1:]:
        new = _continue_to(params, omega_p, state, a_lo, a)
        if new is None:
            new, _ = _nearest_stable(params, PumpConfig(omega_p, a), state, None, seeds)
            if new is None:
                return Threshold(a_lo, state, classify(params, PumpConfig(omega_p, a_lo), state).margin)
        if not classify(params, PumpConfig(omega_p, a), new).stable:
            a_hi = a
            break
        state, a_lo = new, a
    else:
        return None
    # bisection on |alpha_p| tracking the stable side
    while abs(a_hi - a_lo) > rtol * abs(a_hi):
        mid = 0.5 * (a_lo + a_hi)
        new = _continue_to(params, omega_p, state, a_lo, mid)
        if new is None:
            a_hi = mid
            continue
        if classify(params, PumpConfig(omega_p, mid), new).stable:
            state, a_lo = new, mid
        else:
            a_hi = mid
    rep = classify(params, PumpConfig(omega_p, a_lo), state)
    return Threshold(a_lo, state, rep.margin)


def default_alpha_max(params: DeviceParams):
    """Pump amplitude generous enough for the Kerr shift to span the mode splitting."""
    if params.K0 == 0:
        raise ValueError("a threshold needs K0 != 0")
    reach = abs(params.omega1 - params.omega2) + 2.0 * params.g + params.kappa1 + params.kappa2
    n_scale = reach / abs(params.K0)
    return 30.0 * np.sqrt(n_scale * params.kappa1 ** 2 / max(params.kappa_e1, 1e-300))


@dataclass(frozen=True)
class PumpOptimum:
    omega_p: float
    threshold: Threshold
    scanned: np.ndarray = field(repr=False)
    thresholds: np.ndarray = field(repr=False)


def lowest_threshold_pump(params: DeviceParams, span=None, n_scan=24, alpha_max=None,
                          rel_tol=1e-4, n_steps=120, seeds: SeedPolicy = SeedPolicy()):
    """Pump frequency with the smallest parametric threshold.

    Scans ``center +- span`` (default: half the hybrid splitting), then refines.
    The threshold usually drops towards a frequency beyond which the pumped
    branch never loses stability; in that case the edge is located by
    bisection and the point just inside it is returned.
    """
    from .model import hybridized_frequencies

    w_minus, w_plus = hybridized_frequencies(params.omega1, params.omega2, params.g)
    center = 0.5 * (w_minus + w_plus)
    span = 0.5 * (w_plus - w_minus) if span is None else span
    a_max = default_alpha_max(params) if alpha_max is None else alpha_max

    def thr(wp):
        t = parametric_threshold(params, wp, a_max, n_steps=n_steps, seeds=seeds)
        return t, (abs(t.alpha_p) if t is not None else np.inf)

    grid = np.linspace(center - span, center + span, n_scan)
    found = [thr(w) for w in grid]
    vals = np.array([f[1] for f in found])
    if not np.any(np.isfinite(vals)):
        raise NoStableStateError("no parametric threshold found in the scanned pump range",
                                 margin=None)
    i = int(np.argmin(vals))
    best_w, (best_t, best_v) = grid[i], found[i]
    tol = rel_tol * span
    for j in (i - 1, i + 1):
        if not 0 <= j < len(grid):
            continue
        lo, hi = grid[i], grid[j]
        if np.isfinite(vals[j]):
            # interior minimum: golden-section on the bracket
            from scipy.optimize import minimize_scalar

            a, b = sorted((grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]))
            # no threshold counts as one far above alpha_max; inf would poison the parabola steps
            res = minimize_scalar(lambda w: min(thr(w)[1], 2.0 * a_max), bounds=(a, b),
                                  method="bounded",
                                  options={"xatol": tol})
            t, v = thr(res.x)
            if v < best_v:
                best_w, best_t, best_v = res.x, t, v
            continue
        t_lo, v_lo = best_t, best_v
        while abs(hi - lo) > tol:
            mid = 0.5 * (lo + hi)
            t, v = thr(mid)
            if np.isfinite(v):
                lo, t_lo, v_lo = mid, t, v
            else:
                hi = mid
        if v_lo < best_v:
            best_w, best_t, best_v = lo, t_lo, v_lo
    return PumpOptimum(omega_p=float(best_w), threshold=best_t, scanned=grid, thresholds=vals)
