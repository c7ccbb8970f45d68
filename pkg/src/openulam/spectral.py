"""Leading eigen-triple of an Ulam matrix and the objects built from it.

Vector conventions (``P`` acts on density coefficients from the right):

* ``left`` is the density coefficient vector ``p`` with
  ``sum(p * m(I_j)) = 1``; it gives the step density ``h_k``.
* ``right`` is the right eigenvector ``psi`` scaled to ``sum(psi) = 1``.
  Its entries are the masses ``mu_k(I_j)``; the measure has density
  ``psi_j / m(I_j)`` on cell ``j``.  On uniform partitions this is the
  usual ``mu_k(E) = sum psi_j m(I_j ∩ E)`` up to a constant, and on any
  partition it makes ``mu_k(L_k phi) = rho_k mu_k(phi)`` exact.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import DegenerateSolutionError, NonConvergenceError
from .holes import OpenSystem, enlarge_hole
from .ulam import Partition, TransitionMatrix, build_closed, build_open

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 1_000_000


@dataclass
class SpectralSolution:
    rho: float
    left: np.ndarray
    right: np.ndarray
    gap: float
    iterations: int
    residuals: tuple
    rho_left: float
    rho_right: float
    tol: float
    partition: Optional[Partition] = None
    flags: list = field(default_factory=list)

    @property
    def multiplicity_suspected(self) -> bool:
        return "multiplicity_suspected" in self.flags

    def summary(self) -> dict:
        return {
            "rho": self.rho,
            "rho_left": self.rho_left,
            "rho_right": self.rho_right,
            "gap": self.gap,
            "iterations": self.iterations,
            "residuals": {"left": self.residuals[0], "right": self.residuals[1]},
            "flags": list(self.flags),
        }


def _rate(hist: np.ndarray) -> float:
    h = hist[np.isfinite(hist) & (hist > 0)]
    if h.size < 3:
        return 0.0
    r = h[1:] / h[:-1]
    return float(np.clip(np.median(r[-4:]), 0.0, 1.0))


def leading_triple(P: TransitionMatrix, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   seed: Optional[int] = None, backend=None) -> SpectralSolution:
    """Power iteration for the Perron root and both non-negative eigenvectors.

    The start vector is all ones, or ``1 + U[0, 0.1)`` noise when a seed
    is given.  Each side iterates until its l1 residual is below
    ``tol / 4``; the reported ``rho`` is the bilinear quotient
    ``p P psi / p psi``, which is accurate to second order.
    """
    m = P.matrix
    n = P.dim
    if seed is None:
        start = np.ones(n)
    else:
        start = 1.0 + 0.1 * np.random.Generator(np.random.Philox(seed)).random(n)
    args = (m.indptr, m.indices, m.data)
    inner = tol / 4
    xl, rl, itl, resl, histl = kernels.power_iterate(*args, start, inner, max_iter, True, backend=backend)
    xr, rr, itr, resr, histr = kernels.power_iterate(*args, start, inner, max_iter, False, backend=backend)
    if rl == 0.0 or rr == 0.0:
        raise DegenerateSolutionError("matrix is nilpotent on the start vector (rho = 0)")
    if resl > inner or resr > inner:
        raise NonConvergenceError(
            f"power iteration did not converge in {max_iter} steps "
            f"(left residual {resl:.3g}, right residual {resr:.3g})",
            resl, resr, max(itl, itr))
    xl = np.maximum(xl, 0.0)
    xr = np.maximum(xr, 0.0)
    pl = xl @ m
    pr = m @ xr
    denom = float(xl @ xr)
    rho = float(xl @ pr) / denom if denom > 0 else float(rr)
    res_l = float(np.abs(pl - rho * xl).sum() / xl.sum())
    res_r = float(np.abs(pr - rho * xr).sum() / xr.sum())
    flags = []
    if abs(rl - rr) > 10 * tol:
        flags.append("multiplicity_suspected")
        warnings.warn(f"left/right Perron estimates disagree: {rl!r} vs {rr!r}", RuntimeWarning)
    lengths = P.partition.lengths
    left = xl / float(xl @ lengths)
    right = xr / xr.sum()
    left.flags.writeable = False
    right.flags.writeable = False
    gap = max(_rate(histl), _rate(histr))
    return SpectralSolution(rho, left, right, gap, max(itl, itr), (res_l, res_r), float(rl), float(rr),
                            tol, P.partition, flags)


def solve(sys: OpenSystem, part: Partition, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
          seed=None, backend=None):
    """Build the open matrix for ``sys`` and return ``(P, solution)``."""
    P = build_open(sys, part, backend=backend)
    return P, leading_triple(P, tol, max_iter, seed, backend=backend)


# ---------------------------------------------------------------------------
# densities and measures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepDensity:
    partition: Partition
    values: np.ndarray

    def __call__(self, x):
        return self.values[self.partition.locate(x)]

    def mass(self) -> float:
        return float(self.values @ self.partition.lengths)

    def l1_distance(self, other: "StepDensity") -> float:
        return step_l1_distance(self, other)

    def restricted(self, region) -> "StepDensity":
        """Density times the indicator of ``region``, renormalized (cellwise overlap weights)."""
        w = cell_overlaps(self.partition, region)
        vals = self.values * w / self.partition.lengths
        return StepDensity(self.partition, vals / float(vals @ self.partition.lengths))


@dataclass(frozen=True)
class CellMeasure:
    """Measure with constant density ``weights[j]`` on cell ``j``."""

    partition: Partition
    weights: np.ndarray

    @property
    def masses(self) -> np.ndarray:
        return self.weights * self.partition.lengths

    def total(self) -> float:
        return float(self.masses.sum())

    def cdf(self, x):
        """mu([a, x]); piecewise linear and non-decreasing."""
        e = self.partition.edges
        x = np.asarray(x, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self.masses)])
        j = self.partition.locate(x)
        inside = np.clip(x, e[0], e[-1]) - e[j]
        return cum[j] + self.weights[j] * inside

    def cdf_at_edges(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.masses)])

    def of(self, region) -> float:
        """mu(region) for an IntervalSet."""
        return float(self.weights @ cell_overlaps(self.partition, region))


def cell_overlaps(part: Partition, region) -> np.ndarray:
    """m(I_j ∩ region) for every cell."""
    e = part.edges
    out = np.zeros(part.k)
    for lo, hi in region:
        i0 = max(int(np.searchsorted(e, lo, side="right")) - 1, 0)
        i1 = min(int(np.searchsorted(e, hi, side="left")), part.k)
        for i in range(i0, i1):
            out[i] += max(0.0, min(hi, e[i + 1]) - max(lo, e[i]))
    return out


def density_from_left(sol: SpectralSolution, part: Optional[Partition] = None) -> StepDensity:
    part = part or sol.partition
    p = np.asarray(sol.left, dtype=float)
    mass = float(p @ part.lengths)
    if not mass > 0:
        raise DegenerateSolutionError("left eigenvector is identically zero")
    return StepDensity(part, p / mass)


def measure_from_right(sol: SpectralSolution, part: Optional[Partition] = None) -> CellMeasure:
    part = part or sol.partition
    psi = np.asarray(sol.right, dtype=float)
    total = psi.sum()
    if not total > 0:
        raise DegenerateSolutionError("right eigenvector is identically zero")
    return CellMeasure(part, psi / total / part.lengths)


def survivor_measure(sol: SpectralSolution, part: Optional[Partition] = None) -> CellMeasure:
    """lambda_k = h_k mu_k: cell masses proportional to p_j psi_j."""
    part = part or sol.partition
    mass = np.asarray(sol.left) * np.asarray(sol.right)
    total = mass.sum()
    if not total > 0:
        raise DegenerateSolutionError("left and right eigenvectors have disjoint support")
    return CellMeasure(part, mass / total / part.lengths)


def verify_quasi_conformal(P: TransitionMatrix, sol: SpectralSolution, trials: int = 100, seed: int = 0) -> float:
    """Max over random step functions phi of |mu(L phi) - rho mu(phi)| / mu(|phi|)."""
    rng = np.random.Generator(np.random.Philox(seed))
    psi = np.asarray(sol.right)
    worst = 0.0
    for _ in range(trials):
        phi = rng.random(P.dim)
        lphi = P.matrix.T @ phi
        num = abs(float(lphi @ psi) - sol.rho * float(phi @ psi))
        worst = max(worst, num / max(float(np.abs(phi) @ psi), 1e-300))
    return worst


def step_l1_distance(a: StepDensity, b: StepDensity) -> float:
    """Exact L1 distance between step densities on possibly different partitions."""
    e = np.union1d(a.partition.edges, b.partition.edges)
    mid = 0.5 * (e[:-1] + e[1:])
    return float(np.sum(np.abs(a(mid) - b(mid)) * np.diff(e)))


def cdf_sup_distance(a: CellMeasure, b: CellMeasure) -> float:
    """Exact sup |F_a - F_b|; both cdfs are linear between the merged edges."""
    e = np.union1d(a.partition.edges, b.partition.edges)
    return float(np.max(np.abs(a.cdf(e) - b.cdf(e))))


# ---------------------------------------------------------------------------
# hole enlargement
# ---------------------------------------------------------------------------


def enlargement_consistency(sys: OpenSystem, part: Partition, m: int, tol: float = DEFAULT_TOL,
                            max_iter: int = DEFAULT_MAX_ITER, backend=None) -> dict:
    """Compare the discretized (T_0) and (T_m) systems on a common partition.

    The partition is refined by the endpoints of both holes first.  Reports
    the escape-rate difference, and the L1 distance between the closed
    matrix applied m times to h(T_m) and h(T_0), both normalized.
    """
    big = enlarge_hole(sys, m)
    pts = np.concatenate([sys.hole.endpoints(), big.hole.endpoints()])
    part = part.refined(pts)
    P0 = build_open(sys, part, backend=backend)
    part = P0.partition
    Pm = build_open(big, part, backend=backend)
    s0 = leading_triple(P0, tol, max_iter, backend=backend)
    sm = leading_triple(Pm, tol, max_iter, backend=backend)
    Phat = build_closed(sys.map, part, backend=backend)
    v = np.asarray(sm.left, dtype=float)
    for _ in range(m):
        v = Phat.matrix.T @ v
    pushed = StepDensity(part, v / float(v @ part.lengths))
    h0 = density_from_left(s0)
    mu0, mum = measure_from_right(s0), measure_from_right(sm)
    return {
        "m": m,
        "k": part.k,
        "rho_T0": s0.rho,
        "rho_Tm": sm.rho,
        "rho_difference": abs(s0.rho - sm.rho),
        "pushforward_l1": step_l1_distance(pushed, h0),
        "mu_cdf_sup_difference": cdf_sup_distance(mu0, mum),
        "hole_measure_T0": sys.hole.measure(),
        "hole_measure_Tm": big.hole.measure(),
        "flags": sorted(set(s0.flags) | set(sm.flags)),
    }


def implied_eta_range(rho: float, alpha_bound: float) -> Optional[tuple]:
    """Admissible convergence exponents eta < log(rho/b)/(-log b) for b in (alpha, rho).

    Returns ``(0, sup_eta)`` or None when no certified bound is available.
    """
    if not (math.isfinite(alpha_bound) and 0 < alpha_bound < rho < 1):
        return None
    bs = np.linspace(alpha_bound, rho, 2001)[1:-1]
    eta = np.log(rho / bs) / -np.log(bs)
    return 0.0, float(eta.max())
