"""Half-maximum width of a sampled peak, shared by ``response`` and ``fitting``."""

import numpy as np

from .errors import SpectrumError


def _crossing(x0, x1, y0, y1, level):
    return x0 + (level - y0) * (x1 - x0) / (y1 - y0)


def _vertex(x, y):
    """Refined maximum from three samples around a discrete peak.

    A parabola is fitted to ``1/y``, which is exact for a Lorentzian line;
    non-positive samples fall back to a parabola in ``y``.
    """
    u = x - x[1]
    if np.all(y > 0):
        c = np.polyfit(u, 1.0 / y, 2)
        if c[0] > 0:
            dx = -c[1] / (2 * c[0])
            if abs(dx) <= abs(u[2] - u[0]) / 2:
                return x[1] + dx, max(1.0 / np.polyval(c, dx), y[1])
        return x[1], y[1]
    c = np.polyfit(u, y, 2)
    if c[0] < 0:
        dx = -c[1] / (2 * c[0])
        if abs(dx) <= abs(u[2] - u[0]) / 2:
            return x[1] + dx, max(np.polyval(c, dx), y[1])
    return x[1], y[1]


def half_max_width(x, y, baseline=0.0):
    """FWHM of the highest peak in ``y`` (linear units) by linear interpolation.

    The peak height is refined from the three samples around the maximum so
    a coarse grid does not bias the half level, which is
    ``baseline + (peak - baseline) / 2``. Returns ``(fwhm, peak_x, peak_y)``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or len(x) < 3:
        raise SpectrumError("need matching 1-D arrays with at least 3 samples")
    if np.any(np.diff(x) <= 0):
        raise SpectrumError("x must be strictly increasing")
    i = int(np.argmax(y))
    if i == 0 or i == len(x) - 1:
        raise SpectrumError("peak clipped by the grid edge")
    peak_x, peak = _vertex(x[i - 1:i + 2], y[i - 1:i + 2])
    level = baseline + 0.5 * (peak - baseline)
    left = i
    while left > 0 and y[left - 1] > level:
        left -= 1
    right = i
    while right < len(x) - 1 and y[right + 1] > level:
        right += 1
    if left == 0 or right == len(x) - 1:
        raise SpectrumError("half-maximum level not bracketed by the grid")
    xl = _crossing(x[left - 1], x[left], y[left - 1], y[left], level)
    xr = _crossing(x[right], x[right + 1], y[right], y[right + 1], level)
    return xr - xl, float(peak_x), float(peak)


def one_db_point(p_dbm, gain_db, plateau_span_db=10.0, flat_tol_db=0.1, drop_db=1.0):
    """Input power where the gain first falls ``drop_db`` below its small-signal plateau.

    The plateau is the gain at the lowest power; the gain must vary by less
    than ``flat_tol_db`` over the first ``plateau_span_db`` of input power. Returns
    ``(p_1db, plateau)``; ``p_1db`` is None when the gain never compresses.
    """
    p = np.asarray(p_dbm, dtype=float)
    g = np.asarray(gain_db, dtype=float)
    if p.shape != g.shape or len(p) < 3 or np.any(np.diff(p) <= 0):
        raise SpectrumError("need an increasing power grid with matching gains")
    head = p <= p[0] + plateau_span_db
    if head.sum() < 2:
        raise SpectrumError("no plateau: fewer than two points in the first decade of power")
    if np.ptp(g[head]) >= flat_tol_db:
        raise SpectrumError(
            f"no plateau: gain varies by {np.ptp(g[head]):.3g} dB over the first decade")
    plateau = float(g[0])
    level = plateau - drop_db
    below = np.flatnonzero(g <= level)
    if below.size == 0:
        return None, plateau
    i = below[0]
    return float(_crossing(p[i - 1], p[i], g[i - 1], g[i], level)), plateau
