"""Open systems: survivor sets, hole enlargement and admissibility checks.

The admissibility diagnostics only cover the computable special cases:
full-branched maps (where the bad-interval count vanishes) and piecewise
linear maps with enough full branches (where it is at most ``c_u``).
Anything else gets verdict ``unknown``; inadmissibility is never claimed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NotApplicableError, ResourceError, ValidationError
from .intervals import MERGE_TOL, Interval, IntervalSet
from .maps import PiecewiseMap, lorenz, power

COMPONENT_CAP = 1_000_000
RHO_GRID = 10_000

CERTIFIED = "ulam_admissible_certified"
VIA_CRITERION = "admissible_via_criterion"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class OpenSystem:
    """A map together with a closed hole.

    Points where the map is undefined or whose image leaves the domain are
    added to the hole, so ``X_0`` is always forward-defined.
    """

    map: PiecewiseMap
    hole: IntervalSet = field(default_factory=IntervalSet)

    def __post_init__(self):
        h = self.hole if isinstance(self.hole, IntervalSet) else IntervalSet(self.hole)
        d = IntervalSet.single(*self.map.domain)
        if h.measure() - h.intersect(d).measure() > MERGE_TOL:
            raise ValidationError("hole must lie inside the map domain")
        h = h.intersect(d).union(self.map.escape_set())
        object.__setattr__(self, "hole", h)
        if self.x0.measure() <= 0.0:
            raise ValidationError("X_0 = I minus the hole is empty")

    @property
    def domain(self) -> Interval:
        return self.map.domain

    @property
    def x0(self) -> IntervalSet:
        return self.hole.complement(self.map.domain)

    @property
    def is_closed(self) -> bool:
        return self.hole.measure() == 0.0


def _preimage(tmap: PiecewiseMap, target: IntervalSet) -> IntervalSet:
    """T^{-1}(target) as a canonical interval set."""
    los, his = [], []
    for b in tmap.branches:
        if not target:
            break
        r0, r1 = b.range
        lo = np.maximum(target.lo, r0)
        hi = np.minimum(target.hi, r1)
        keep = hi >= lo
        if not np.any(keep):
            continue
        lo, hi = lo[keep], hi[keep]
        xa, xb = b.inverse(lo), b.inverse(hi)
        los.append(np.minimum(xa, xb))
        his.append(np.maximum(xa, xb))
    if not los:
        return IntervalSet()
    return IntervalSet.from_arrays(np.concatenate(los), np.concatenate(his))


def survivor_set(sys: OpenSystem, n: int, cap: int = COMPONENT_CAP) -> IntervalSet:
    """X_n: points whose first n + 1 iterates avoid the hole."""
    if n < 0:
        raise ValidationError("survivor_set requires n >= 0")
    x0 = sys.x0
    xn = x0
    for _ in range(n):
        xn = x0.intersect(_preimage(sys.map, xn))
        if len(xn) > cap:
            raise ResourceError(f"survivor set has {len(xn)} components (cap {cap})")
    return xn


def enlarge_hole(sys: OpenSystem, m: int) -> OpenSystem:
    """The system with hole H_m = I minus X_m."""
    xm = survivor_set(sys, m)
    return OpenSystem(sys.map, xm.complement(sys.domain))


def power_system(sys: OpenSystem, n: int) -> OpenSystem:
    """(T^n, H_{n-1}): the n-th iterate with the correspondingly enlarged hole."""
    if n == 1:
        return sys
    hole = survivor_set(sys, n - 1).complement(sys.domain)
    return OpenSystem(power(sys.map, n), hole)


# ---------------------------------------------------------------------------
# branch classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BranchClasses:
    hole: tuple       # Z_h, branch indices
    full: tuple       # Z_f
    partial: tuple    # Z_u
    c_u: int
    labels: tuple     # "h" / "f" / "u" per branch, in domain order


def classify_branches(sys: OpenSystem) -> BranchClasses:
    d0, d1 = sys.domain
    labels = []
    tol = 1e-12
    for b in sys.map.branches:
        dom = IntervalSet.single(*b.domain)
        inside = dom.intersect(sys.hole).measure()
        if dom.measure() - inside <= MERGE_TOL:
            labels.append("h")
        elif inside <= MERGE_TOL and b.range.lo <= d0 + tol and b.range.hi >= d1 - tol:
            labels.append("f")
        else:
            labels.append("u")
    run = best = 0
    for lab in labels:
        if lab == "u":
            run += 1
            best = max(best, run)
        elif lab == "f":
            run = 0
    idx = lambda t: tuple(i for i, lab in enumerate(labels) if lab == t)  # noqa: E731
    return BranchClasses(idx("h"), idx("f"), idx("u"), best, tuple(labels))


# ---------------------------------------------------------------------------
# rho_0 and alpha bounds
# ---------------------------------------------------------------------------


def full_branch_sum(sys: OpenSystem, x, classes: Optional[BranchClasses] = None) -> np.ndarray:
    """Sum over full branches of 1/|T'(y)| with T(y) = x (a lower bound for L1)."""
    classes = classes or classify_branches(sys)
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape)
    for i in classes.full:
        b = sys.map.branches[i]
        y = b.inverse(x)
        with np.errstate(divide="ignore"):
            d = np.abs(b._safe_derivative(y))
        total += np.where(np.isfinite(d), 1.0 / d, 0.0)
    return total


def rho_lower_bound(sys: OpenSystem, grid_n: int = RHO_GRID) -> float:
    """Certified lower bound rho_0 for the escape rate of a system with full branches.

    Minimizes the full-branch inverse-derivative sum over a uniform grid
    plus all branch-image endpoints inside the domain, then subtracts
    grid spacing times a sampled Lipschitz estimate of the summand.
    """
    classes = classify_branches(sys)
    if not classes.full:
        raise NotApplicableError("rho_lower_bound needs at least one full branch")
    d0, d1 = sys.domain
    grid = np.linspace(d0, d1, grid_n)
    ends = np.array([v for b in sys.map.branches for v in b.range if d0 <= v <= d1])
    s = full_branch_sum(sys, grid, classes)
    lip = float(np.max(np.abs(np.diff(s)) / np.diff(grid))) if grid_n > 1 else 0.0
    lo = min(float(s.min()), float(full_branch_sum(sys, ends, classes).min()) if ends.size else math.inf)
    return lo - (grid[1] - grid[0]) * lip


def inverse_derivative_sup(sys: OpenSystem) -> float:
    """||DT^{-1}||_inf over X_0 (branches in the hole are ignored)."""
    worst = 0.0
    x0 = sys.x0
    for b in sys.map.branches:
        live = x0.intersect(IntervalSet.single(*b.domain))
        for lo, hi in live:
            inf_d, _ = b.derivative_bounds(Interval(lo, hi))
            worst = max(worst, 1.0 / inf_d)
    return worst


def alpha_upper_bound(sys: OpenSystem, epsilon: float) -> float:
    """Upper bound on alpha_epsilon.

    Full-branched systems: (2 + eps) * sup over full branches of 1/|T'|.
    Piecewise linear systems with partial branches: ||DT^{-1}|| (3 + eps + c_u).
    Returns inf when neither case applies.
    """
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    classes = classify_branches(sys)
    if not classes.partial:
        if not classes.full:
            return math.inf
        return (2.0 + epsilon) * max(1.0 / sys.map.branches[i].derivative_bounds()[0]
                                     for i in classes.full)
    linear = all(sys.map.branches[i].is_linear for i in classes.full + classes.partial)
    if linear and classes.full:
        return inverse_derivative_sup(sys) * (3.0 + epsilon + classes.c_u)
    return math.inf


@dataclass
class AdmissibilityReport:
    labels: tuple
    z_h: tuple
    z_f: tuple
    z_u: tuple
    c_u: int
    theta: float
    rho_lower: float
    alpha_upper: float
    epsilon: float
    verdict: str
    criterion_used: str
    power: int = 1
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def num(v):
            return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v

        return {
            "verdict": self.verdict,
            "criterion_used": self.criterion_used,
            "epsilon": self.epsilon,
            "power": self.power,
            "rho_lower": num(self.rho_lower),
            "alpha_upper": num(self.alpha_upper),
            "theta": num(self.theta),
            "c_u": self.c_u,
            "branch_classes": {"Z_h": list(self.z_h), "Z_f": list(self.z_f), "Z_u": list(self.z_u)},
            "branches": list(self.labels),
            **{k: num(v) for k, v in self.extra.items()},
        }


def admissibility_report(sys: OpenSystem, epsilon: float, power_n: int = 1) -> AdmissibilityReport:
    """Run the computable admissibility checks on ``sys`` (or on its ``power_n``-th iterate)."""
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    target = power_system(sys, power_n) if power_n > 1 else sys
    classes = classify_branches(target)
    theta = inverse_derivative_sup(target)
    rho0 = rho_lower_bound(target) if classes.full else -math.inf
    alpha = alpha_upper_bound(target, epsilon)
    if not classes.full:
        crit = "none"
    elif not classes.partial:
        crit = "full_branch"
    elif math.isfinite(alpha):
        crit = "many_full_branches"
    else:
        crit = "none"
    verdict = CERTIFIED if crit != "none" and rho0 > alpha else UNKNOWN
    return AdmissibilityReport(classes.labels, classes.hole, classes.full, classes.partial,
                               classes.c_u, theta, rho0, alpha, epsilon, verdict, crit, power_n)


# ---------------------------------------------------------------------------
# Lorenz family
# ---------------------------------------------------------------------------


def lorenz_escape_point(c: float, alpha: float) -> float:
    """x_{c,alpha} = (2/c)^(1/alpha): the positive point mapped to 1."""
    return (2.0 / c) ** (1.0 / alpha)


def lorenz_system(c: float, alpha: float) -> OpenSystem:
    """Lorenz map on [-1, 1]; for c > 2 the hole is +-(x_{c,alpha}, 1]."""
    return OpenSystem(lorenz(c, alpha))


def lorenz_inner_fixed_point(c: float, alpha: float, tol: float = 1e-12):
    """The repelling fixed point y in (0, 1] of c x^alpha - 1 = x.

    Returns ``(y, |T'(y)|)``.  The bracket is [0, min(1, x*)] where x* is
    the maximizer of the concave residual, so the smaller root is found
    when two fixed points lie inside the domain.
    """
    c, alpha = float(c), float(alpha)

    def f(x):
        return c * x ** alpha - 1.0 - x

    xstar = min(1.0, (alpha * c) ** (1.0 / (1.0 - alpha)))
    top = f(xstar)
    if top < 0.0:
        raise NotApplicableError(f"c x^alpha - 1 = x has no root in (0, 1] for c={c}, alpha={alpha}")
    if xstar == 1.0 and abs(top) <= tol:
        y = 1.0
    else:
        lo, hi = 0.0, xstar
        while hi - lo > tol * 1e-2:
            mid = 0.5 * (lo + hi)
            if f(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        y = 0.5 * (lo + hi)
    return y, c * alpha * y ** (alpha - 1.0)


def _piece(b, lo: float, hi: float):
    from .maps import CallableBranch, ComposedBranch, LinearBranch, PowerBranch

    if isinstance(b, LinearBranch):
        return LinearBranch((lo, hi), b.slope, b.intercept)
    if isinstance(b, PowerBranch):
        return PowerBranch((lo, hi), b.offset, b.coeff, b.exponent)
    if isinstance(b, ComposedBranch):
        return ComposedBranch((lo, hi), b.inner, b.outer)
    return CallableBranch((lo, hi), b.forward, b.derivative)


def restrict(tmap: PiecewiseMap, within: Interval, cuts=()) -> PiecewiseMap:
    """The map with every branch cut down to ``within`` and split at ``cuts``."""
    cuts = sorted(float(c) for c in cuts)
    out = []
    for b in tmap.branches:
        lo, hi = max(b.domain.lo, within[0]), min(b.domain.hi, within[1])
        if not hi > lo:
            continue
        pts = [lo] + [c for c in cuts if lo < c < hi] + [hi]
        out.extend(_piece(b, u, v) for u, v in zip(pts, pts[1:]))
    return PiecewiseMap(tuple(out), Interval(*within), tmap.family,
                        dict(tmap.params, restricted=[float(within[0]), float(within[1])]))


def lorenz_admissibility(c: float, alpha: float, epsilon: float = 0.1) -> AdmissibilityReport:
    """Check sup |T'|^{-1} < inf L1 on the repeller interval [-y, y].

    The left side is 1/|T'(y)|; the right side is rho_lower_bound of the map
    restricted to [-y, y], where both branches are full.
    """
    y, dy = lorenz_inner_fixed_point(c, alpha)
    full = lorenz(c, alpha)
    neg, pos = full.branches
    # split where each branch leaves [-y, y] so the escaping pieces are their own branches
    cuts = [neg.inverse(y), pos.inverse(-y)]
    sub = OpenSystem(restrict(full, Interval(-y, y), cuts))
    classes = classify_branches(sub)
    rho0 = rho_lower_bound(sub) if classes.full else -math.inf
    lhs = 1.0 / dy
    verdict = VIA_CRITERION if classes.full and lhs < rho0 else UNKNOWN
    alpha_b = alpha_upper_bound(sub, epsilon)
    return AdmissibilityReport(classes.labels, classes.hole, classes.full, classes.partial,
                               classes.c_u, lhs, rho0, alpha_b, epsilon, verdict, "lorenz_repeller",
                               extra={"inner_fixed_point": y, "derivative_at_fixed_point": dy,
                                      "sup_inverse_derivative": lhs})
