"""Monte Carlo escape statistics for cross-checking the spectral results.

Initial points are uniform on X_0 and come from a Philox stream keyed by
the 64-bit seed, so point ``i`` is the same whatever the batch layout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import StatisticsError, ValidationError
from .holes import OpenSystem
from .intervals import IntervalSet
from .spectral import StepDensity
from .ulam import Partition

MIN_SURVIVORS = 100
Z95 = 1.959963984540054


@dataclass(frozen=True)
class SurvivalCurve:
    counts: np.ndarray
    N: int
    seed: int

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["j", "count"])
            for j, c in enumerate(self.counts):
                w.writerow([j, int(c)])


def uniform_points(region: IntervalSet, N: int, seed: int) -> np.ndarray:
    """N i.i.d. uniform points on a finite union of intervals."""
    if not region:
        raise ValidationError("cannot sample an empty set")
    u = np.random.Generator(np.random.Philox(int(seed))).random(int(N))
    lengths = region.hi - region.lo
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    t = u * cum[-1]
    j = np.clip(np.searchsorted(cum, t, side="right") - 1, 0, len(region) - 1)
    return np.minimum(region.lo[j] + (t - cum[j]), region.hi[j])


def _orbits(sys: OpenSystem, N: int, n_max: int, seed: int, record: int, backend):
    if N < 1:
        raise ValidationError("N must be >= 1")
    x = uniform_points(sys.x0, N, seed)
    return kernels.simulate_orbits(sys.map, sys.hole, x, n_max, record, backend=backend)


def simulate(sys: OpenSystem, N: int, n_max: int, seed: int = 0, backend=None) -> SurvivalCurve:
    """Survivor counts s_j = #{x : x, T x, ..., T^j x all in X_0}, j = 0..n_max."""
    tau, _ = _orbits(sys, N, n_max, seed, -1, backend)
    hist = np.bincount(np.minimum(tau, n_max + 1), minlength=n_max + 2)
    # counts[j] = #{tau > j}
    counts = N - np.cumsum(hist)[: n_max + 1]
    return SurvivalCurve(counts.astype(np.int64), int(N), int(seed))


def default_window(curve: SurvivalCurve) -> tuple:
    c = curve.counts
    half = np.flatnonzero(c <= 0.5 * curve.N)
    enough = np.flatnonzero(c >= MIN_SURVIVORS)
    if enough.size == 0:
        raise StatisticsError("fewer than 100 survivors at every step")
    j_lo = int(half[0]) if half.size else 0
    j_hi = int(enough[-1])
    if j_hi - j_lo < 2:
        j_lo = max(0, j_hi - 2)
    return j_lo, j_hi


def escape_rate_fit(curve: SurvivalCurve, window: Optional[tuple] = None) -> tuple:
    """Generalized least-squares slope of log s_j over the window.

    Survivor counts are a binomial thinning chain, so log s_j is a random
    walk whose step j has variance ~ (1 - rho) / (rho s_j).  The GLS slope
    under that covariance is the s_j-weighted mean of the increments
    d_j = log(s_{j+1} / s_j); the scale is estimated from the weighted
    residual variance.  Returns ``(rho_hat, ci95)`` (delta method).
    """
    j_lo, j_hi = window if window is not None else default_window(curve)
    c = curve.counts
    if j_hi >= c.size or c[j_hi] < MIN_SURVIVORS:
        raise StatisticsError(f"need >= {MIN_SURVIVORS} survivors at j = {j_hi}")
    if j_hi - j_lo < 1:
        raise StatisticsError("fit window needs at least two points")
    s = c[j_lo:j_hi + 1].astype(float)
    d = np.diff(np.log(s))
    w = s[:-1]
    slope = float(w @ d) / float(w.sum())
    rho_hat = math.exp(slope)
    if d.size > 1:
        sigma2 = float(w @ (d - slope) ** 2) / (d.size - 1)
        se = math.sqrt(sigma2 / float(w.sum()))
    else:
        se = 0.0
    return rho_hat, Z95 * se * rho_hat


def empirical_accim(sys: OpenSystem, N: int, n: int, part: Partition, seed: int = 0,
                    backend=None) -> StepDensity:
    """Histogram of T^n x over points with x, ..., T^{n-1} x in X_0.

    This samples the normalized pushforward L^n 1 / |L^n 1|, which lives on
    T(X_0) (holes included) just like the left-eigenvector density h_k.
    """
    _, pos = _orbits(sys, N, n, seed, n, backend)
    alive = pos[np.isfinite(pos)]
    if alive.size == 0:
        raise StatisticsError("no survivors at the requested time")
    counts = np.bincount(part.locate(alive), minlength=part.k).astype(float)
    return StepDensity(part, counts / counts.sum() / part.lengths)


def write_histogram_csv(dens: StepDensity, path) -> None:
    e = dens.partition.edges
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_left", "x_right", "h_value"])
        for i, v in enumerate(dens.values):
            w.writerow([f"{e[i]:.17g}", f"{e[i + 1]:.17g}", f"{v:.17g}"])
