import math

import numpy as np
import pytest

from openulam import IntervalSet, OpenSystem, Partition, StatisticsError, ValidationError, solve
from openulam import kernels
from openulam.holes import lorenz_system
from openulam.maps import beta_shift, doubling, tripling
from openulam.oracle import (SurvivalCurve, default_window, empirical_accim, escape_rate_fit, simulate,
                             uniform_points, write_histogram_csv)
from openulam.spectral import density_from_left, step_l1_distance

from conftest import MARKOV_HOLE


def test_closed_no_escape():
    c = simulate(OpenSystem(doubling()), 10000, 30, seed=1)
    assert np.all(c.counts == 10000)


def test_middle_third_binomial_ratios(middle_third):
    c = simulate(middle_third, 1_000_000, 20, seed=3)
    assert c.counts[0] == 1_000_000
    for j in range(1, 20):
        n = c.counts[j - 1]
        sigma = math.sqrt(n * (2 / 3) * (1 / 3))
        assert abs(c.counts[j] - n * 2 / 3) <= 3.5 * sigma


def test_beta_fit_near_exact(beta_markov):
    c = simulate(beta_markov, 1_000_000, 200, seed=0)
    rho, ci = escape_rate_fit(c)
    assert abs(rho - MARKOV_HOLE) <= 3 * ci
    assert rho == pytest.approx(0.8475, abs=2e-3)


def test_fit_exact_inputs():
    j = np.arange(30)
    geo = SurvivalCurve(np.round(1e15 * (2 / 3) ** j).astype(np.int64), 10 ** 15, 0)
    rho, ci = escape_rate_fit(geo, (0, 29))
    assert rho == pytest.approx(2 / 3, abs=1e-12)
    assert ci <= 1e-10
    flat = SurvivalCurve(np.full(50, 5000, np.int64), 5000, 0)
    assert escape_rate_fit(flat, (0, 49)) == (1.0, 0.0)


def test_fit_needs_survivors():
    c = SurvivalCurve(np.array([1000, 500, 250, 120, 60, 30], np.int64), 1000, 0)
    with pytest.raises(StatisticsError):
        escape_rate_fit(c, (1, 5))
    with pytest.raises(StatisticsError):
        escape_rate_fit(SurvivalCurve(np.array([50, 20, 5], np.int64), 50, 0))


def test_default_window():
    j = np.arange(60)
    c = SurvivalCurve(np.floor(1e6 * 0.8 ** j).astype(np.int64), 10 ** 6, 0)
    lo, hi = default_window(c)
    assert c.counts[lo] <= 5e5 and c.counts[lo - 1] > 5e5
    assert c.counts[hi] >= 100 and c.counts[hi + 1] < 100


def test_seed_determinism(beta_nonmarkov):
    a = simulate(beta_nonmarkov, 50000, 60, seed=11)
    b = simulate(beta_nonmarkov, 50000, 60, seed=11)
    c = simulate(beta_nonmarkov, 50000, 60, seed=12)
    assert np.array_equal(a.counts, b.counts)
    assert not np.array_equal(a.counts, c.counts)
    assert np.all(np.diff(a.counts) <= 0)


def test_points_independent_of_batch_size():
    region = IntervalSet([(0, 0.2), (0.5, 1.0)])
    big = uniform_points(region, 1000, 5)
    small = uniform_points(region, 100, 5)
    assert np.array_equal(big[:100], small)
    assert region.contains(big).all()
    with pytest.raises(ValidationError):
        simulate(OpenSystem(doubling()), 0, 10)


def test_backends_identical_for_linear_maps(beta_nonmarkov):
    from openulam._jit import HAVE_NUMBA

    if not HAVE_NUMBA:
        pytest.skip("numba not installed")
    a = simulate(beta_nonmarkov, 100000, 100, seed=2, backend="numpy")
    b = simulate(beta_nonmarkov, 100000, 100, seed=2, backend="numba")
    assert np.array_equal(a.counts, b.counts)


def test_backends_agree_statistically_for_lorenz():
    from openulam._jit import HAVE_NUMBA

    if not HAVE_NUMBA:
        pytest.skip("numba not installed")
    s = lorenz_system(2.05, 0.7)
    a = simulate(s, 200000, 200, seed=4, backend="numpy")
    b = simulate(s, 200000, 200, seed=4, backend="numba")
    # one-ulp differences in pow only matter after chaotic amplification
    assert np.array_equal(a.counts[:3], b.counts[:3])
    ra, ca = escape_rate_fit(a)
    rb, cb = escape_rate_fit(b)
    assert abs(ra - rb) <= 3 * math.hypot(ca, cb)


def test_lorenz_rate_matches_spectral():
    s = lorenz_system(2.01, 0.65)
    rho_hat, ci = escape_rate_fit(simulate(s, 1_000_000, 400, seed=9))
    _, fine = solve(s, Partition.uniform(s.domain, 10000))
    _, coarse = solve(s, Partition.uniform(s.domain, 5000))
    disc = abs(fine.rho - coarse.rho)
    assert abs(rho_hat - fine.rho) <= 3 * ci + disc


@pytest.mark.parametrize("N", [40000])
def test_calibration_markov(middle_third, beta_markov, N):
    """|rho_hat - rho| <= 3 ci95 in at least 95 of 100 seeded replications."""
    for sys_, rho, n_max in [(middle_third, 2 / 3, 40), (beta_markov, MARKOV_HOLE, 120)]:
        hits = 0
        for seed in range(100):
            r, ci = escape_rate_fit(simulate(sys_, N, n_max, seed=1000 + seed))
            hits += abs(r - rho) <= 3 * ci
        assert hits >= 95


def _multinomial_ok(hist, probs, part, m):
    counts = hist.values * part.lengths * m
    sd = np.sqrt(m * probs * (1 - probs))
    return np.all(np.abs(counts - m * probs) <= 3.5 * sd + 1e-9)


def test_accim_closed_doubling_uniform():
    part = Partition.uniform((0, 1), 16)
    s = OpenSystem(doubling())
    h = empirical_accim(s, 100000, 20, part, seed=1)
    assert h.mass() == pytest.approx(1.0)
    assert _multinomial_ok(h, np.full(16, 1 / 16), part, 100000)


def test_accim_beta_constant(beta_markov):
    """L^n 1 stays constant (on X_0 and on the hole it maps onto)."""
    part = Partition.uniform((0, 1), 59)
    N = 2_000_000
    h = empirical_accim(beta_markov, N, 30, part, seed=2)
    m = int(simulate(beta_markov, N, 29, seed=2).counts[29])
    assert m >= 10000
    probs = np.full(59, 1 / 59)
    assert _multinomial_ok(h, probs, part, m)


def test_accim_middle_third_uniform(middle_third):
    part = Partition.uniform((0, 1), 6)
    N = 5_000_000
    h = empirical_accim(middle_third, N, 25, part, seed=3)
    m = int(simulate(middle_third, N, 24, seed=3).counts[24])
    probs = np.full(6, 1 / 6)
    assert m > 100
    assert _multinomial_ok(h, probs, part, m)


def test_accim_l1_decreases_with_N(beta_markov):
    part = Partition.uniform((0, 1), 59)
    _, sol = solve(beta_markov, part)
    ref = density_from_left(sol)
    d = [step_l1_distance(empirical_accim(beta_markov, N, 30, part, seed=0), ref) for N in (10 ** 4, 10 ** 5, 10 ** 6)]
    assert d[0] > d[1] > d[2]


def test_accim_needs_survivors(middle_third):
    with pytest.raises(StatisticsError):
        empirical_accim(middle_third, 10, 60, Partition.uniform((0, 1), 3))


def test_csv_outputs(tmp_path, middle_third):
    c = simulate(middle_third, 1000, 5, seed=0)
    c.write_csv(tmp_path / "s.csv")
    rows = np.loadtxt(tmp_path / "s.csv", delimiter=",", skiprows=1)
    assert rows.shape == (6, 2) and rows[0, 1] == 1000
    h = empirical_accim(middle_third, 1000, 2, Partition.uniform((0, 1), 9), seed=0)
    write_histogram_csv(h, tmp_path / "h.csv")
    assert open(tmp_path / "h.csv").readline().strip() == "x_left,x_right,h_value"
