"""Piecewise monotone interval maps.

A :class:`PiecewiseMap` is an ordered tuple of monotone branches over a
monotonicity partition of the domain.  Branch images may leave the
domain (Lorenz maps with ``c > 2``, the Bahsoun map); points sent
outside are treated as escaped by :class:`openulam.holes.OpenSystem`.

All branch methods are vectorized over numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BranchRangeError, DomainError, ResourceError, ValidationError
from .intervals import Interval, IntervalSet

BISECT_WIDTH = 1e-13
NEWTON_STEPS = 5
SINGULAR_X = 1e-300
DERIV_SAMPLES = 10_000
BRANCH_CAP = 100_000

# kernel table codes
KIND_LINEAR = 0
KIND_POWER = 1


class Branch:
    """One monotone C^1 piece of a map.

    Subclasses provide ``forward`` and ``derivative``; ``inverse`` defaults
    to bracketed bisection followed by Newton polishing.
    """

    domain: Interval

    def __init__(self, domain):
        lo, hi = float(domain[0]), float(domain[1])
        if not lo < hi:
            raise ValidationError(f"branch domain must be non-degenerate, got [{lo}, {hi}]")
        self.domain = Interval(lo, hi)
        ya, yb = float(self.forward(np.array([lo]))[0]), float(self.forward(np.array([hi]))[0])
        if ya == yb:
            raise ValidationError("branch is not strictly monotone")
        self.increasing = yb > ya
        self.range = Interval(min(ya, yb), max(ya, yb))

    # -- interface -------------------------------------------------------
    def forward(self, x):
        raise NotImplementedError

    def derivative(self, x):
        raise NotImplementedError

    is_linear = False

    def table_row(self) -> Optional[tuple]:
        """(kind, a, b, c) for the compiled evaluator, or None."""
        return None

    # -- shared ----------------------------------------------------------
    def __call__(self, x):
        return self.forward(x)

    def _check_range(self, y: np.ndarray, tol: float) -> np.ndarray:
        r0, r1 = self.range
        slack = tol * np.maximum(1.0, np.abs(y))
        bad = (y < r0 - slack) | (y > r1 + slack)
        if np.any(bad):
            raise BranchRangeError(
                f"value {y[bad][0]!r} outside branch range [{r0}, {r1}]")
        return np.clip(y, r0, r1)

    def inverse(self, y, tol: float = 1e-12):
        """Preimage of ``y`` inside the branch domain."""
        scalar = np.ndim(y) == 0
        y = self._check_range(np.atleast_1d(np.asarray(y, dtype=float)), tol)
        x = self._inverse(y)
        return float(x[0]) if scalar else x

    def _inverse(self, y: np.ndarray) -> np.ndarray:
        lo = np.full(y.shape, self.domain.lo)
        hi = np.full(y.shape, self.domain.hi)
        sgn = 1.0 if self.increasing else -1.0
        while np.any(hi - lo > BISECT_WIDTH):
            mid = 0.5 * (lo + hi)
            above = sgn * (self.forward(mid) - y) > 0
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        x = 0.5 * (lo + hi)
        a, b = self.domain
        for _ in range(NEWTON_STEPS):
            with np.errstate(divide="ignore", invalid="ignore"):
                interior = np.abs(x) > SINGULAR_X
                d = np.where(interior, self._safe_derivative(x), np.inf)
                step = (self.forward(x) - y) / d
            step = np.where(np.isfinite(step), step, 0.0)
            if not np.any(step):
                break
            x = np.clip(x - step, np.maximum(a, lo - BISECT_WIDTH), np.minimum(b, hi + BISECT_WIDTH))
        x = np.where(y == self.range.lo, a if self.increasing else b, x)
        x = np.where(y == self.range.hi, b if self.increasing else a, x)
        return x

    def _safe_derivative(self, x):
        return self.derivative(x)

    def derivative_bounds(self, within: Optional[Interval] = None, samples: int = DERIV_SAMPLES):
        """(inf |T'|, sup |T'|) by dense sampling plus endpoints."""
        a, b = within if within is not None else self.domain
        xs = np.linspace(a, b, samples)
        xs = xs[np.abs(xs) > SINGULAR_X] if self.singular_at_zero else xs
        d = np.abs(self.derivative(xs))
        lo, hi = float(d.min()), float(d.max())
        if self.singular_at_zero and (a <= 0.0 <= b):
            hi = math.inf
        return lo, hi

    singular_at_zero = False

    def __repr__(self):
        return f"{type(self).__name__}(domain={tuple(self.domain)}, range={tuple(self.range)})"


class LinearBranch(Branch):
    """y = slope * x + intercept."""

    is_linear = True

    def __init__(self, domain, slope: float, intercept: float):
        self.slope = float(slope)
        self.intercept = float(intercept)
        if self.slope == 0.0:
            raise ValidationError("linear branch slope must be non-zero")
        super().__init__(domain)

    def forward(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept

    def derivative(self, x):
        return np.full(np.shape(x), self.slope)

    def _inverse(self, y):
        x = (y - self.intercept) / self.slope
        return np.clip(x, self.domain.lo, self.domain.hi)

    def derivative_bounds(self, within=None, samples=DERIV_SAMPLES):
        s = abs(self.slope)
        return s, s

    def table_row(self):
        return (KIND_LINEAR, self.slope, self.intercept, 0.0)


class PowerBranch(Branch):
    """y = offset + coeff * |x|**exponent on a domain of one sign.

    The Lorenz family uses this with ``exponent < 1``; the derivative is
    singular at ``x = 0`` and queries there are rejected.
    """

    def __init__(self, domain, offset: float, coeff: float, exponent: float):
        self.offset = float(offset)
        self.coeff = float(coeff)
        self.exponent = float(exponent)
        lo, hi = float(domain[0]), float(domain[1])
        if lo < 0.0 < hi:
            raise ValidationError("power branch domain must not straddle 0")
        self.xsign = 1.0 if lo >= 0.0 else -1.0
        self.singular_at_zero = self.exponent < 1.0
        super().__init__(domain)

    def forward(self, x):
        x = np.asarray(x, dtype=float)
        return self.offset + self.coeff * np.abs(x) ** self.exponent

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.singular_at_zero and np.any(np.abs(x) < SINGULAR_X):
            raise DomainError("derivative is singular at x = 0")
        return self._safe_derivative(x)

    def _safe_derivative(self, x):
        with np.errstate(divide="ignore"):
            return self.xsign * self.coeff * self.exponent * np.abs(x) ** (self.exponent - 1.0)

    def _inverse(self, y):
        u = np.maximum((y - self.offset) / self.coeff, 0.0)
        x = self.xsign * u ** (1.0 / self.exponent)
        return np.clip(x, self.domain.lo, self.domain.hi)

    def table_row(self):
        return (KIND_POWER, self.offset, self.coeff, self.exponent)


class CallableBranch(Branch):
    """Branch from user-supplied vectorized ``forward`` and ``derivative``."""

    def __init__(self, domain, forward: Callable, derivative: Callable):
        self._f = forward
        self._df = derivative
        super().__init__(domain)

    def forward(self, x):
        return np.asarray(self._f(np.asarray(x, dtype=float)), dtype=float)

    def derivative(self, x):
        return np.asarray(self._df(np.asarray(x, dtype=float)), dtype=float)


class ComposedBranch(Branch):
    """``outer(inner(x))`` restricted to a sub-domain of ``inner``."""

    def __init__(self, domain, inner: Branch, outer: Branch):
        self.inner = inner
        self.outer = outer
        self.singular_at_zero = inner.singular_at_zero
        super().__init__(domain)

    def forward(self, x):
        return self.outer.forward(self.inner.forward(x))

    def derivative(self, x):
        u = self.inner.forward(x)
        return self.outer.derivative(u) * self.inner.derivative(x)

    def _safe_derivative(self, x):
        u = self.inner.forward(x)
        return self.outer._safe_derivative(u) * self.inner._safe_derivative(x)

    def _inverse(self, y):
        u = self.outer._inverse(y)
        u = np.clip(u, self.inner.range.lo, self.inner.range.hi)
        return np.clip(self.inner._inverse(u), self.domain.lo, self.domain.hi)


def compose(inner: Branch, outer: Branch) -> Optional[Branch]:
    """Branch of ``outer ∘ inner`` or None when the overlap is degenerate."""
    lo = max(inner.range.lo, outer.domain.lo)
    hi = min(inner.range.hi, outer.domain.hi)
    if not hi > lo:
        return None
    a, b = inner.inverse(np.array([lo, hi]))
    a, b = min(a, b), max(a, b)
    if not b > a:
        return None
    if isinstance(inner, LinearBranch) and isinstance(outer, LinearBranch):
        return LinearBranch((a, b), outer.slope * inner.slope,
                            outer.slope * inner.intercept + outer.intercept)
    return ComposedBranch((a, b), inner, outer)


@dataclass(frozen=True)
class PiecewiseMap:
    """Ordered monotone branches over (part of) ``domain``.

    Parts of ``domain`` not covered by any branch are points where the map
    is undefined; they only arise from :func:`power` when an intermediate
    iterate leaves the domain.
    """

    branches: tuple
    domain: Interval = Interval(0.0, 1.0)
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        brs = tuple(sorted(self.branches, key=lambda b: b.domain.lo))
        object.__setattr__(self, "branches", brs)
        object.__setattr__(self, "domain", Interval(float(self.domain[0]), float(self.domain[1])))
        if not brs:
            raise ValidationError("a map needs at least one branch")
        d0, d1 = self.domain
        tol = 1e-12
        for b in brs:
            if b.domain.lo < d0 - tol or b.domain.hi > d1 + tol:
                raise ValidationError(f"branch {b} not inside map domain {tuple(self.domain)}")
        for left, right in zip(brs, brs[1:]):
            if right.domain.lo < left.domain.hi - tol:
                raise ValidationError("branch domains overlap")
        object.__setattr__(self, "_los", np.array([b.domain.lo for b in brs]))
        object.__setattr__(self, "_his", np.array([b.domain.hi for b in brs]))

    def __len__(self):
        return len(self.branches)

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([self._los, self._his]))

    def covered(self) -> IntervalSet:
        return IntervalSet.from_arrays(self._los, self._his)

    def gaps(self) -> IntervalSet:
        return self.covered().complement(self.domain)

    def escape_set(self) -> IntervalSet:
        """Closure of the points whose image is undefined or leaves the domain."""
        d0, d1 = self.domain
        lo, hi = [], []
        for b in self.branches:
            for a, c in ((b.range.lo, min(b.range.hi, d0)), (max(b.range.lo, d1), b.range.hi)):
                if c > a:
                    x = b.inverse(np.array([a, c]))
                    lo.append(x.min())
                    hi.append(x.max())
        out = IntervalSet.from_arrays(np.array(lo), np.array(hi))
        return out.union(self.gaps())

    def branch_index(self, x) -> np.ndarray:
        """Index of the branch containing each x (left branch at ties); -1 if none."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._his, x, side="left")
        safe = np.minimum(idx, len(self.branches) - 1)
        ok = (idx < len(self.branches)) & (self._los[safe] <= x)
        return np.where(ok, safe, -1)

    def evaluate(self, x):
        """T(x).  Raises DomainError where the map is undefined."""
        scalar = np.ndim(x) == 0
        y = self.evaluate_array(np.atleast_1d(x))
        if np.any(np.isnan(y)):
            raise DomainError(f"point outside map domain: {np.atleast_1d(x)[np.isnan(y)][0]!r}")
        return float(y[0]) if scalar else y

    def evaluate_array(self, x) -> np.ndarray:
        """Vectorized T(x) with NaN where the map is undefined."""
        x = np.asarray(x, dtype=float)
        idx = self.branch_index(x)
        y = np.full(x.shape, np.nan)
        for k in np.unique(idx[idx >= 0]):
            sel = idx == k
            y[sel] = self.branches[k].forward(x[sel])
        return y

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        idx = self.branch_index(x)
        if np.any(idx < 0):
            raise DomainError("point outside map domain")
        d = np.empty(x.shape)
        for k in np.unique(idx):
            sel = idx == k
            d[sel] = self.branches[k].derivative(x[sel])
        return d

    def inverse_derivative_sup(self) -> float:
        """||DT^{-1}||_inf estimate: 1 / min over branches of inf |T'|."""
        return 1.0 / min(b.derivative_bounds()[0] for b in self.branches)

    def kernel_table(self) -> Optional[np.ndarray]:
        """Branch table ``[lo, hi, kind, a, b, c]`` for compiled evaluation."""
        rows = []
        for b in self.branches:
            r = b.table_row()
            if r is None:
                return None
            rows.append((b.domain.lo, b.domain.hi) + r)
        return np.array(rows, dtype=float)


# -- powers -----------------------------------------------------------------

def power(tmap: PiecewiseMap, n: int, cap: int = BRANCH_CAP) -> PiecewiseMap:
    """Explicit piecewise representation of the n-th iterate."""
    if n < 1:
        raise ValidationError("power requires n >= 1")
    if len(tmap) ** n > cap:
        raise ResourceError(f"{len(tmap)}**{n} branches exceeds cap {cap}")
    if n == 1:
        return tmap
    tail = power(tmap, n - 1, cap)
    pieces = []
    for first in tmap.branches:
        for rest in tail.branches:
            c = compose(first, rest)
            if c is not None:
                pieces.append(c)
    params = dict(tmap.params, power=n * tmap.params.get("power", 1))
    return PiecewiseMap(tuple(pieces), tmap.domain, tmap.family, params)


# -- families ---------------------------------------------------------------

def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def _check_expanding(m: PiecewiseMap) -> PiecewiseMap:
    floor = min(b.derivative_bounds()[0] for b in m.branches)
    _require(floor > 1.0, f"map is not uniformly expanding (inf |T'| = {floor})")
    return m


def beta_shift(beta: float) -> PiecewiseMap:
    """x -> beta * x mod 1 with ceil(beta) branches, the last one truncated."""
    beta = float(beta)
    _require(beta > 1.0, "beta_shift requires beta > 1")
    nfull = int(math.floor(beta))
    edges = [j / beta for j in range(nfull + 1)]
    if edges[-1] < 1.0:
        edges.append(1.0)
    else:
        edges[-1] = 1.0
    branches = [LinearBranch((edges[j], edges[j + 1]), beta, -float(j)) for j in range(len(edges) - 1)]
    return PiecewiseMap(tuple(branches), Interval(0.0, 1.0), "beta_shift", {"beta": beta})


def doubling() -> PiecewiseMap:
    return beta_shift(2.0)


def tripling() -> PiecewiseMap:
    return beta_shift(3.0)


def piecewise_linear(breakpoints: Sequence[float], images: Sequence[Sequence[float]]) -> PiecewiseMap:
    """Linear branch on each [b_i, b_{i+1}] with end values ``images[i]``."""
    b = [float(v) for v in breakpoints]
    _require(len(b) >= 2 and all(x < y for x, y in zip(b, b[1:])), "breakpoints must increase")
    _require(len(images) == len(b) - 1, "need one (left, right) image pair per branch")
    branches = []
    for (x0, x1), (y0, y1) in zip(zip(b, b[1:]), images):
        s = (float(y1) - float(y0)) / (x1 - x0)
        _require(abs(s) > 1.0, f"slope {s} on [{x0}, {x1}] is not expanding")
        branches.append(LinearBranch((x0, x1), s, float(y0) - s * x0))
    params = {"breakpoints": b, "images": [[float(u), float(v)] for u, v in images]}
    return PiecewiseMap(tuple(branches), Interval(b[0], b[-1]), "piecewise_linear", params)


def lorenz(c: float, alpha: float) -> PiecewiseMap:
    """T(x) = c x^alpha - 1 for x > 0, 1 - c |x|^alpha for x < 0 on [-1, 1]."""
    c, alpha = float(c), float(alpha)
    _require(c > 0.0, "lorenz requires c > 0")
    _require(0.0 < alpha < 1.0, "lorenz requires 0 < alpha < 1")
    neg = PowerBranch((-1.0, 0.0), 1.0, -c, alpha)
    pos = PowerBranch((0.0, 1.0), -1.0, c, alpha)
    return PiecewiseMap((neg, pos), Interval(-1.0, 1.0), "lorenz", {"c": c, "alpha": alpha})


def large_hole_tent(delta: float) -> PiecewiseMap:
    """Four slope +-2/delta branches on [0, delta] and [1 - delta, 1]; the
    middle [delta, 1 - delta] is meant to be the hole."""
    d = float(delta)
    _require(0.0 < d < 0.5, "large_hole_tent requires 0 < delta < 1/2")
    s = 2.0 / d
    br = (
        LinearBranch((0.0, d / 2), s, 0.0),
        LinearBranch((d / 2, d), -s, 1.0 + s * d / 2),
        LinearBranch((1 - d, 1 - d / 2), s, -s * (1 - d)),
        LinearBranch((1 - d / 2, 1.0), -s, 1.0 + s * (1 - d / 2)),
    )
    return _check_expanding(PiecewiseMap(br, Interval(0.0, 1.0), "large_hole_tent", {"delta": d}))


def large_hole_tent_hole(delta: float) -> IntervalSet:
    return IntervalSet.single(float(delta), 1.0 - float(delta))


def bahsoun() -> PiecewiseMap:
    """2.08 x on [0, 1/2), 2 - 2x on [1/2, 1].

    The first piece is split at 1/2.08 so that the part mapped above 1
    is its own branch.
    """
    cut = 1.0 / 2.08
    br = (
        LinearBranch((0.0, cut), 2.08, 0.0),
        LinearBranch((cut, 0.5), 2.08, 0.0),
        LinearBranch((0.5, 1.0), -2.0, 2.0),
    )
    return _check_expanding(PiecewiseMap(br, Interval(0.0, 1.0), "bahsoun", {}))


FAMILIES = {
    "beta_shift": beta_shift,
    "doubling": doubling,
    "tripling": tripling,
    "piecewise_linear": piecewise_linear,
    "lorenz": lorenz,
    "large_hole_tent": large_hole_tent,
    "bahsoun": bahsoun,
}


def make_map(family: str, params: Optional[dict] = None) -> PiecewiseMap:
    """Build a family member from a name and keyword parameters."""
    try:
        ctor = FAMILIES[family]
    except KeyError:
        raise ValidationError(f"unknown map family {family!r}; choose from {sorted(FAMILIES)}") from None
    try:
        return ctor(**(params or {}))
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {family}: {exc}") from None
