"""Ulam discretization of open and closed transfer operators.

Entry (i, j) of the open matrix is ``m(I_i ∩ X_0 ∩ T^{-1} I_j) / m(I_j)``;
the closed matrix uses the full domain instead of ``X_0``.  Preimages are
taken branch by branch through exact branch inverses, so no quadrature
is involved.  Matrices act on density coefficient vectors from the
right: if ``p`` represents a step function then ``p @ P`` represents its
projected transfer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np
import scipy.sparse as sp

from . import kernels
from .errors import BranchRangeError, NumericalError, ValidationError
from .holes import OpenSystem
from .intervals import Interval, IntervalSet
from .maps import PiecewiseMap

SNAP_TOL = 1e-12
DROP_TOL = 1e-16


@dataclass(frozen=True)
class Partition:
    """Contiguous bins covering an interval, stored by their edges."""

    edges: np.ndarray
    kind: str = "explicit"

    def __post_init__(self):
        e = np.array(self.edges, dtype=float)
        if e.ndim != 1 or e.size < 2:
            raise ValidationError("a partition needs at least two edges")
        if not np.all(np.diff(e) > 0):
            raise ValidationError("partition edges must be strictly increasing")
        e.flags.writeable = False
        object.__setattr__(self, "edges", e)

    @classmethod
    def uniform(cls, domain, k: int) -> "Partition":
        k = int(k)
        if k < 1:
            raise ValidationError("k must be >= 1")
        lo, hi = float(domain[0]), float(domain[1])
        e = lo + (hi - lo) * np.arange(k + 1) / k
        e[-1] = hi
        return cls(e, f"uniform({k})")

    @classmethod
    def explicit(cls, edges: Iterable[float]) -> "Partition":
        return cls(np.asarray(list(edges), dtype=float), "explicit")

    @property
    def k(self) -> int:
        return self.edges.size - 1

    def __len__(self):
        return self.k

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def mesh(self) -> float:
        return float(self.lengths.max())

    @property
    def domain(self) -> Interval:
        return Interval(float(self.edges[0]), float(self.edges[-1]))

    @property
    def is_uniform(self) -> bool:
        ln = self.lengths
        return bool(np.all(np.abs(ln - ln.mean()) <= 1e-12 * ln.mean()))

    def cell(self, i: int) -> Interval:
        return Interval(float(self.edges[i]), float(self.edges[i + 1]))

    def locate(self, x) -> np.ndarray:
        """Cell index containing x (right-closed at the last edge)."""
        idx = np.searchsorted(self.edges, x, side="right") - 1
        return np.clip(idx, 0, self.k - 1)

    def snapped(self, points, tol: float = SNAP_TOL) -> "Partition":
        """Move interior edges lying within ``tol`` of a point onto it."""
        pts = np.unique(np.asarray(points, dtype=float))
        if pts.size == 0:
            return self
        e = self.edges.copy()
        j = np.clip(np.searchsorted(pts, e), 1, max(pts.size - 1, 1))
        cand = np.stack([pts[np.minimum(j - 1, pts.size - 1)], pts[np.minimum(j, pts.size - 1)]])
        near = cand[np.argmin(np.abs(cand - e), axis=0), np.arange(e.size)]
        move = np.abs(near - e) <= tol
        move[[0, -1]] = False
        if not np.any(move):
            return self
        e[move] = near[move]
        if not np.all(np.diff(e) > 0):
            return self
        return Partition(e, self.kind)

    def refined(self, points, tol: float = SNAP_TOL) -> "Partition":
        """Insert ``points`` as edges (snapping to existing edges within ``tol``)."""
        base = self.snapped(points, tol)
        pts = np.asarray(points, dtype=float)
        lo, hi = base.domain
        pts = pts[(pts > lo) & (pts < hi)]
        e = np.unique(np.concatenate([base.edges, pts]))
        keep = np.concatenate([[True], np.diff(e) > tol])
        keep[-1] = True
        e = e[keep]
        if e.size == base.edges.size:
            return base
        return Partition(e, "explicit")

    def to_dict(self) -> dict:
        if self.kind.startswith("uniform("):
            return {"kind": "uniform", "k": self.k}
        return {"kind": "explicit", "edges": [float(v) for v in self.edges]}


@dataclass(frozen=True)
class TransitionMatrix:
    """Sparse non-negative Ulam matrix with its (possibly snapped) partition."""

    matrix: sp.csr_matrix
    row_kind: str
    partition: Partition

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def entries(self):
        """Row-major sorted (i, j, value) triplets."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return coo.row[order], coo.col[order], coo.data[order]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def row_sums(self) -> np.ndarray:
        return row_sums(self)

    def write_coo(self, path) -> None:
        """``dim nnz row_kind`` header, then one ``i j value`` line per entry."""
        rows, cols, vals = self.entries()
        with open(path, "w") as fh:
            fh.write(f"{self.dim} {self.nnz} {self.row_kind}\n")
            for i, j, v in zip(rows, cols, vals):
                fh.write(f"{i} {j} {v:.17g}\n")

    @classmethod
    def read_coo(cls, path, partition: Optional[Partition] = None) -> "TransitionMatrix":
        with open(path) as fh:
            dim, nnz, kind = fh.readline().split()
            dim, nnz = int(dim), int(nnz)
            data = np.loadtxt(fh, ndmin=2) if nnz else np.empty((0, 3))
        m = sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(dim, dim))
        if partition is None:
            partition = Partition.uniform((0.0, 1.0), dim)
        return cls(m, kind, partition)

    def write_row_sums(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "x_left", "x_right", "row_sum"])
            e = self.partition.edges
            for i, s in enumerate(self.row_sums()):
                w.writerow([i, f"{e[i]:.17g}", f"{e[i + 1]:.17g}", f"{s:.17g}"])


def row_sums(P: TransitionMatrix) -> np.ndarray:
    return np.asarray(P.matrix.sum(axis=1)).ravel()


def _branch_triplets(branch, live: IntervalSet, src: Partition, dst: Partition, backend):
    e = dst.edges
    r0, r1 = max(branch.range.lo, e[0]), min(branch.range.hi, e[-1])
    if not r1 > r0:
        return None
    dlo, dhi = branch.domain
    live = live.intersect(IntervalSet.single(dlo, dhi))
    if not live:
        return None
    a = int(np.searchsorted(e, r0, side="right"))
    b = int(np.searchsorted(e, r1, side="left"))
    targets = np.concatenate([[r0], e[a:b], [r1]])
    first = int(np.clip(a - 1, 0, dst.k - 1))
    cols = first + np.arange(targets.size - 1)
    try:
        pre = branch.inverse(targets)
    except BranchRangeError as exc:
        raise NumericalError(f"inverse failed on branch {branch}: {exc}") from exc
    if not branch.increasing:
        pre, cols = pre[::-1].copy(), cols[::-1].copy()
    if not np.all(np.diff(pre) >= 0):
        raise NumericalError(f"non-monotone preimages on branch {branch}")
    return kernels.ulam_sweep(src.edges, live.lo, live.hi, pre, cols, backend=backend)


def _assemble(tmap: PiecewiseMap, live: IntervalSet, part: Partition, kind: str, backend) -> TransitionMatrix:
    d = tmap.domain
    if abs(part.edges[0] - d.lo) > SNAP_TOL or abs(part.edges[-1] - d.hi) > SNAP_TOL:
        raise ValidationError(f"partition {part.domain} does not cover map domain {tuple(d)}")
    snaps = np.concatenate([live.endpoints(), tmap.breakpoints])
    part = part.snapped(snaps)
    rows, cols, lens = [], [], []
    for br in tmap.branches:
        out = _branch_triplets(br, live, part, part, backend)
        if out is None:
            continue
        rows.append(out[0])
        cols.append(out[1])
        lens.append(out[2])
    k = part.k
    if rows:
        r, c, ln = np.concatenate(rows), np.concatenate(cols), np.concatenate(lens)
        vals = ln / part.lengths[c]
    else:
        r = c = np.empty(0, int)
        vals = np.empty(0)
    m = sp.coo_matrix((vals, (r, c)), shape=(k, k)).tocsr()
    m.sum_duplicates()
    m.data[m.data < DROP_TOL] = 0.0
    m.eliminate_zeros()
    m.sort_indices()
    return TransitionMatrix(m, kind, part)


def build_open(sys: OpenSystem, part: Partition, backend=None) -> TransitionMatrix:
    """Open Ulam matrix P_k over ``part``."""
    return _assemble(sys.map, sys.x0, part, "open", backend)


def build_closed(tmap: PiecewiseMap, part: Partition, backend=None) -> TransitionMatrix:
    """Closed Ulam matrix (X_0 replaced by the whole domain)."""
    return _assemble(tmap, IntervalSet.single(*tmap.domain), part, "closed", backend)
