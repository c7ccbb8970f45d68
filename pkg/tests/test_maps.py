import math

import numpy as np
import pytest

from openulam import BranchRangeError, DomainError, ValidationError
from openulam.maps import (bahsoun, beta_shift, doubling, large_hole_tent, lorenz, make_map, piecewise_linear,
                           power, tripling)


def test_beta_shift_structure():
    m = beta_shift(5.9)
    assert len(m.branches) == 6
    full = [b for b in m.branches if b.range.lo <= 1e-12 and b.range.hi >= 1 - 1e-12]
    assert len(full) == 5
    assert m.branches[-1].range.hi == pytest.approx(0.9, abs=1e-12)
    assert m.evaluate(0.5) == pytest.approx(0.95, abs=1e-14)


def test_lorenz_evaluate():
    c, a = 2.05, 0.6
    m = lorenz(c, a)
    x = 0.37
    assert m.evaluate(x) == pytest.approx(c * x ** a - 1, abs=1e-15)
    assert m.evaluate(-x) == pytest.approx(1 - c * x ** a, abs=1e-15)
    xe = (2 / c) ** (1 / a)
    assert m.evaluate(xe) == pytest.approx(1.0, abs=1e-14)
    assert m.evaluate(1.0) == pytest.approx(c - 1, abs=1e-14)
    assert m.evaluate(-1.0) == pytest.approx(1 - c, abs=1e-14)
    assert len(m.branches) == 2


def test_evaluate_outside_domain():
    with pytest.raises(DomainError):
        doubling().evaluate(1.5)


def test_branch_inverse_examples():
    b = beta_shift(5.9).branches[0]
    assert b.inverse(0.5) == pytest.approx(0.5 / 5.9, abs=1e-15)
    pos = lorenz(2.0, 0.5).branches[1]
    assert pos.inverse(0.0) == pytest.approx(0.25, abs=1e-14)
    with pytest.raises(BranchRangeError):
        b.inverse(1.5)


@pytest.mark.parametrize("tmap", [beta_shift(5.9), lorenz(2.05, 0.6), lorenz(1.9, 0.8), bahsoun(),
                                  large_hole_tent(0.1), power(bahsoun(), 2), tripling()],
                         ids=["beta", "lorenz>2", "lorenz<2", "bahsoun", "tent", "bahsoun^2", "tripling"])
def test_inverse_roundtrip(tmap, rng):
    for b in tmap.branches:
        x = rng.uniform(b.domain.lo, b.domain.hi, 200)
        y = b(x)
        assert np.max(np.abs(b.inverse(y) - x)) <= 1e-11
        ends = b(np.array([b.domain.lo, b.domain.hi]))
        assert b.inverse(ends[0]) == pytest.approx(b.domain.lo, abs=1e-12)
        assert b.inverse(ends[1]) == pytest.approx(b.domain.hi, abs=1e-12)


def test_power_identity_and_doubling():
    m = doubling()
    assert power(m, 1) is m or power(m, 1).branches == m.branches
    m2 = power(m, 2)
    assert len(m2.branches) == 4
    assert all(b.is_linear and abs(b.slope) == pytest.approx(4.0) for b in m2.branches)


@pytest.mark.parametrize("tmap,n", [(bahsoun(), 2), (beta_shift(5.9), 2), (lorenz(1.9, 0.8), 3), (tripling(), 3)])
def test_power_agrees_with_iteration(tmap, n, rng):
    lo, hi = tmap.domain
    x = rng.uniform(lo, hi, 2000)
    pn = power(tmap, n)
    y = x.copy()
    ok = np.ones_like(x, bool)
    for _ in range(n):
        y = tmap.evaluate_array(y)
        ok &= np.isfinite(y) & (y >= lo) & (y <= hi)
    z = pn.evaluate_array(x)
    # stay away from branch cuts where the two evaluations may pick different sides
    far = np.min(np.abs(x[:, None] - pn.breakpoints[None, :]), axis=1) > 1e-9
    sel = ok & far & np.isfinite(z)
    assert sel.sum() > 1000
    assert np.max(np.abs(z[sel] - y[sel])) <= 1e-9


def test_large_hole_tent_branches():
    m = large_hole_tent(0.1)
    doms = [tuple(round(v, 12) for v in b.domain) for b in m.branches]
    assert doms == [(0.0, 0.05), (0.05, 0.1), (0.9, 0.95), (0.95, 1.0)]
    assert all(abs(b.slope) == pytest.approx(20.0) for b in m.branches)


def test_bahsoun_slopes():
    m = bahsoun()
    assert sorted({round(abs(b.slope), 12) for b in m.branches}) == [2.0, 2.08]
    assert m.escape_set().measure() == pytest.approx(0.5 - 1 / 2.08, abs=1e-15)


def test_expansion_and_inverse_sup():
    assert beta_shift(5.9).inverse_derivative_sup() == pytest.approx(1 / 5.9)
    assert lorenz(2.05, 0.6).inverse_derivative_sup() < 1


def test_piecewise_linear_validation():
    m = piecewise_linear([0, 0.5, 1], [(0, 1), (1, 0)])
    assert m.evaluate(0.75) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        piecewise_linear([0, 0.5, 1], [(0, 0.4), (1, 0)])


def test_make_map_errors():
    with pytest.raises(ValidationError):
        make_map("nope")
    with pytest.raises(ValidationError):
        make_map("beta_shift", {"gamma": 2})
    with pytest.raises(ValidationError):
        beta_shift(0.9)


def test_breakpoints_branch_index():
    m = beta_shift(5.9)
    assert m.branch_index(np.array([0.0, 0.5]))[0] == 0
    assert np.all(np.diff(m.breakpoints) > 0)
    assert math.isclose(m.breakpoints[1], 1 / 5.9)
