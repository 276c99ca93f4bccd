"""Coincidence histograms, normalized g2, the Cauchy-Schwarz test and decay fits.

Delays are ``t_as - t_s`` in integer ps. A histogram with ``n_bins`` bins of
width ``bin_width_ps`` starting at ``t_min_ps`` covers
``[t_min, t_min + n_bins * bin_width)``; bin ``k`` is
``[t_min + k*dt, t_min + (k+1)*dt)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import least_squares

from .errors import ConvergenceError, ValidationError
from .timetag import Channel, TimeTagStream

PS = 1e-12
_DELAY_LIMIT = 2**62


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_width_ps: int
    t_min_ps: int
    counts: np.ndarray
    n_s: int
    n_as: int
    duration_ps: int

    def __post_init__(self):
        if self.bin_width_ps <= 0:
            raise ValidationError("bin_width_ps must be > 0")
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1:
            raise ValidationError("histogram needs at least one bin")
        if np.any(counts < 0):
            raise ValidationError("histogram counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def n_bins(self) -> int:
        return int(self.counts.size)

    @property
    def edges_ps(self) -> np.ndarray:
        return self.t_min_ps + self.bin_width_ps * np.arange(self.n_bins + 1, dtype=np.int64)

    @property
    def centers_ps(self) -> np.ndarray:
        return self.t_min_ps + self.bin_width_ps * (np.arange(self.n_bins) + 0.5)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return (self.bin_width_ps == other.bin_width_ps and self.t_min_ps == other.t_min_ps
                and np.array_equal(self.counts, other.counts) and self.n_s == other.n_s
                and self.n_as == other.n_as and self.duration_ps == other.duration_ps)


@dataclass(frozen=True, eq=False)
class G2Curve:
    taus_ps: np.ndarray
    g2: np.ndarray
    raw: Histogram
    normalization: float  # expected uncorrelated counts per bin

    @property
    def sigma(self) -> np.ndarray:
        """Poisson standard error of each bin for uncorrelated light (g2 = 1)."""
        return np.full(self.g2.shape, 1 / math.sqrt(self.normalization))


@dataclass(frozen=True)
class ExpFitResult:
    y0: float
    A: float
    tau_ps: float
    residual_rms: float
    fit_range: tuple[int, int]
    weighting: str
    converged: bool
    iterations: int

    @property
    def tau_co_ps(self) -> float:
        return self.tau_ps

    @property
    def linewidth_hz(self) -> float:
        return linewidth_from_tau(self.tau_ps)

    def model(self, x_ps) -> np.ndarray:
        return self.y0 + self.A * np.exp(-np.asarray(x_ps, dtype=float) / self.tau_ps)


# --- histogramming -----------------------------------------------------------

def _check_window(bin_width_ps: int, t_min_ps: int, n_bins: int) -> int:
    if bin_width_ps <= 0:
        raise ValidationError(f"bin_width_ps must be > 0, got {bin_width_ps}")
    if n_bins < 1:
        raise ValidationError(f"n_bins must be >= 1, got {n_bins}")
    t_max = int(t_min_ps) + int(n_bins) * int(bin_width_ps)
    if abs(int(t_min_ps)) >= _DELAY_LIMIT or abs(t_max) >= _DELAY_LIMIT:
        raise ValidationError("coincidence window exceeds the representable delay range")
    return t_max


@numba.njit(cache=True)
def _sweep(t_start, t_stop, t_min, t_max):
    n = t_start.size
    lo = np.empty(n, dtype=np.int64)
    hi = np.empty(n, dtype=np.int64)
    a = 0
    b = 0
    m = t_stop.size
    for i in range(n):
        left = t_start[i] + t_min
        right = t_start[i] + t_max
        while a < m and t_stop[a] < left:
            a += 1
        if b < a:
            b = a
        while b < m and t_stop[b] < right:
            b += 1
        lo[i] = a
        hi[i] = b
    return lo, hi


def _window_pairs(t_start: np.ndarray, t_stop: np.ndarray, t_min: int, t_max: int):
    """Index ranges [lo_i, hi_i) of ``t_stop`` inside ``t_start[i] + [t_min, t_max)``.

    Both inputs must be sorted; the window edges only move forward, so one
    pass over each array suffices.
    """
    return _sweep(t_start, t_stop, np.int64(t_min), np.int64(t_max))


def _delays(t_start, t_stop, lo, hi) -> np.ndarray:
    n = hi - lo
    total = int(n.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = np.repeat(np.arange(t_start.size), n)
    # position of each pair inside its window
    offsets = np.arange(total) - np.repeat(np.cumsum(n) - n, n)
    j = np.repeat(lo, n) + offsets
    return t_stop[j] - t_start[starts]


def histogram_delays(t_start, t_stop, bin_width_ps: int, t_min_ps: int, n_bins: int,
                     exclude_self: bool = False) -> np.ndarray:
    """Bin counts of all ``t_stop[j] - t_start[i]`` delays in the window.

    With ``exclude_self`` the two arrays must be the same stream and the
    ``i == j`` pairs are dropped.
    """
    t_max = _check_window(bin_width_ps, t_min_ps, n_bins)
    t_start = np.asarray(t_start, dtype=np.int64)
    t_stop = np.asarray(t_stop, dtype=np.int64)
    counts = np.zeros(n_bins, dtype=np.int64)
    if t_start.size == 0 or t_stop.size == 0:
        return counts
    lo, hi = _window_pairs(t_start, t_stop, int(t_min_ps), t_max)
    if n_bins == 1:
        counts[0] = int(np.sum(hi - lo))
    else:
        d = _delays(t_start, t_stop, lo, hi)
        counts += np.bincount((d - t_min_ps) // bin_width_ps, minlength=n_bins)[:n_bins]
    if exclude_self and t_min_ps <= 0 < t_max:
        counts[(0 - t_min_ps) // bin_width_ps] -= t_start.size
    return counts


def coincidence_histogram(s: TimeTagStream, as_: TimeTagStream, bin_width_ps: int,
                          t_min_ps: int = 0, n_bins: int = 206) -> Histogram:
    """Histogram of anti-Stokes minus Stokes delays.

    Stokes tags are taken from ``s`` and anti-Stokes tags from ``as_``, so a
    single merged stream may be passed as both arguments.
    """
    if s.duration_ps != as_.duration_ps:
        raise ValidationError("streams have different durations")
    ts = s.channel_times(Channel.STOKES)
    tas = as_.channel_times(Channel.ANTI_STOKES)
    counts = histogram_delays(ts, tas, bin_width_ps, t_min_ps, n_bins)
    return Histogram(int(bin_width_ps), int(t_min_ps), counts, int(ts.size), int(tas.size),
                     s.duration_ps)


def _g2_from_counts(h: Histogram, normalization: float) -> G2Curve:
    g2 = h.counts / normalization
    return G2Curve(h.centers_ps, g2, h, float(normalization))


def normalize_g2(h: Histogram) -> G2Curve:
    """counts / (R_s * R_as * dt * T), with R = n / T."""
    if h.n_s <= 0 or h.n_as <= 0:
        raise ValidationError(
            f"cannot normalize: singles counts n_s={h.n_s}, n_as={h.n_as} (need both > 0)")
    if h.duration_ps <= 0:
        raise ValidationError("cannot normalize: zero duration")
    norm = h.n_s * h.n_as * h.bin_width_ps / h.duration_ps
    return _g2_from_counts(h, norm)


def autocorrelation(s: TimeTagStream, bin_width_ps: int, t_min_ps: int = 0,
                    n_bins: int = 206) -> G2Curve:
    """Normalized g2 of a stream against itself, self-pairs excluded.

    All tags of ``s`` are used regardless of channel. Ordered pairs of distinct
    tags are counted, so the uncorrelated expectation per bin is
    ``n (n - 1) dt / T``.
    """
    t = s.times
    n = int(t.size)
    counts = histogram_delays(t, t, bin_width_ps, t_min_ps, n_bins, exclude_self=True)
    h = Histogram(int(bin_width_ps), int(t_min_ps), counts, n, n, s.duration_ps)
    norm = n * (n - 1) * bin_width_ps / s.duration_ps
    if norm <= 0:
        raise ValidationError(f"cannot normalize autocorrelation of {n} tag(s)")
    return _g2_from_counts(h, norm)


def g2_max(c: G2Curve) -> tuple[float, float]:
    """Largest g2 value and its bin center; ties go to the smaller delay."""
    k = int(np.argmax(c.g2))
    return float(c.g2[k]), float(c.taus_ps[k])


def cauchy_schwarz_factor(g2sas_max: float, g2ss0: float = 2.0, g2asas0: float = 2.0) -> float:
    """g2_sas^2 / (g2_ss(0) g2_asas(0)); a value above 1 certifies nonclassical light."""
    if g2sas_max <= 0 or g2ss0 <= 0 or g2asas0 <= 0:
        raise ValidationError("Cauchy-Schwarz inputs must be positive")
    return g2sas_max**2 / (g2ss0 * g2asas0)


def linewidth_from_tau(tau_co_ps: float) -> float:
    """Biphoton linewidth 1 / (2 pi tau_co) in Hz."""
    if tau_co_ps <= 0:
        raise ValidationError("tau_co_ps must be > 0")
    return 1.0 / (2 * math.pi * tau_co_ps * PS)


# --- exponential fit ---------------------------------------------------------

def fit_exponential(data: Histogram | G2Curve, fit_start: int | str = "auto",
                    weighting: str = "none", tail_fraction: float = 0.2,
                    max_nfev: int = 10_000) -> ExpFitResult:
    """Fit ``y0 + A exp(-x / tau)`` to the decaying side of a histogram or g2 curve.

    ``y0`` is not a fit parameter: it is the mean of the trailing
    ``tail_fraction`` of bins. ``A`` and ``tau`` come from least squares on the
    bins from ``fit_start`` (default: the peak bin) to the end, restarted from
    three ``tau`` guesses. ``weighting`` is ``"none"`` or ``"poisson"``.
    """
    if isinstance(data, G2Curve):
        y = np.asarray(data.g2, dtype=float)
        h = data.raw
    else:
        y = np.asarray(data.counts, dtype=float)
        h = data
    x = h.centers_ps
    n = y.size
    if weighting not in ("none", "poisson"):
        raise ValidationError(f"unknown weighting {weighting!r}")

    start = int(np.argmax(y)) if fit_start == "auto" else int(fit_start)
    if not 0 <= start < n:
        raise ValidationError(f"fit_start {start} outside 0..{n - 1}")
    if n - start < 4:
        raise ValidationError(f"need at least 4 bins in the fit range, have {n - start}")
    xs, ys = x[start:], y[start:]
    if not np.any(ys > 0):
        raise ValidationError("fit range contains no counts")

    n_tail = max(1, math.ceil(tail_fraction * n))
    y0 = float(np.mean(y[-n_tail:]))
    if weighting == "poisson":
        w = 1 / np.sqrt(np.maximum(ys, 1.0))
    else:
        w = np.ones_like(ys)

    def resid(p):
        return w * (y0 + p[0] * np.exp(-xs / p[1]) - ys)

    dt = h.bin_width_ps
    window = n * dt
    tau_lo = dt * 1e-3
    best = None
    for tau0 in (dt, window / 10, window / 3):
        a0 = max(ys[0] - y0, 1e-12) * math.exp(min(xs[0] / tau0, 700))
        try:
            r = least_squares(resid, x0=[a0, tau0], bounds=([0.0, tau_lo], [np.inf, np.inf]),
                              x_scale="jac", xtol=1e-10, ftol=1e-12, gtol=1e-12,
                              max_nfev=max_nfev)
        except (ValueError, FloatingPointError):
            continue
        if best is None or r.cost < best.cost:
            best = r
    if best is None:
        raise ConvergenceError("every fit start failed")
    A, tau = (float(v) for v in best.x)
    rms = float(np.sqrt(np.mean((y0 + A * np.exp(-xs / tau) - ys) ** 2)))
    if best.status <= 0:
        raise ConvergenceError(f"exponential fit did not converge: {best.message}",
                               best=(y0, A, tau), residual=rms)
    return ExpFitResult(y0=y0, A=A, tau_ps=tau, residual_rms=rms, fit_range=(start, n),
                        weighting=weighting, converged=True, iterations=int(best.nfev))
