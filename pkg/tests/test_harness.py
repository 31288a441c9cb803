import math

import numpy as np
import pytest

from gwsubtree import offspring as off
from gwsubtree.errors import DegenerateSampleError, InfeasibleSizeError
from gwsubtree.harness import (bootstrap_interval, heavy_tail_experiment, loglog_slope, map_replicates,
                               mc_moments, mu_n_convergence, normality_of_sample, normality_test,
                               sample_stats, truncation_decay, variance_scan, within_band)
from gwsubtree.oracle import enumerate_trees, exact_moments
from gwsubtree.patterns import CHERRY, EDGE, PATH3, SINGLE, Pattern
from gwsubtree.rng import SeededRng

from conftest import FIXTURE_DISTS


# -- statistics ----------------------------------------------------------------


def test_sample_stats_normal_reference():
    x = np.random.default_rng(0).normal(2.0, 3.0, 200_000)
    st = sample_stats(x)
    assert st.mean == pytest.approx(2.0, abs=4 * st.mean_se)
    assert st.variance == pytest.approx(9.0, abs=4 * st.variance_se)
    # for normal data Var(s^2) = 2 sigma^4 / (R - 1)
    assert st.variance_se == pytest.approx(9.0 * math.sqrt(2 / (x.size - 1)), rel=0.02)
    with pytest.raises(ValueError):
        sample_stats([1.0])


def test_within_band_and_slope():
    assert within_band(1.0, 1.2, 0.1, 0.5)
    assert not within_band(1.0, 1.4, 0.1, 0.5)
    assert loglog_slope([1, 10, 100], [1, 0.1, 0.01]) == pytest.approx(-1.0)
    assert math.isnan(loglog_slope([1, 10], [0, 0]))


def test_bootstrap_interval_brackets_variance():
    x = np.random.default_rng(1).exponential(size=3000)
    lo, hi = bootstrap_interval(x, np.random.default_rng(2))
    assert lo < x.var(ddof=1) < hi


def _draw(gen):
    return float(gen.random())


def test_map_replicates_order_and_streams():
    draw = _draw
    one = map_replicates(draw, SeededRng(9), 37, workers=1)
    four = map_replicates(draw, SeededRng(9), 37, workers=4)
    assert one == four
    assert one[5] == SeededRng(9).child(5).generator().random()


# -- moments -----------------------------------------------------------------


def test_single_node_moments(geom, poisson):
    for dist in (geom, poisson):
        rep = mc_moments(dist, SINGLE, 57, 100, SeededRng(1))
        assert rep.mean == 57 and rep.variance == 0 and rep.var_over_n == 0 and rep.mu_n == 1


def test_mc_moments_preconditions(geom, binary):
    with pytest.raises(ValueError):
        mc_moments(geom, CHERRY, 10, 99, 0)
    with pytest.raises(InfeasibleSizeError):
        mc_moments(binary, CHERRY, 4, 100, 0)


@pytest.mark.parametrize("name,pat,n", [("poisson", CHERRY, 8), ("ternary", "((())())", 8),
                                        ("binary", "((()())())", 7)])
def test_small_n_agreement_with_oracle(name, pat, n):
    dist = FIXTURE_DISTS[name]
    rep = mc_moments(dist, pat, n, 100_000, SeededRng(44), workers=4)
    ex = exact_moments(dist, pat, n)
    assert abs(rep.mean - ex.mean) < 4 * rep.mean_se
    assert abs(rep.variance - ex.variance) < 4 * rep.variance_se


def test_reports_independent_of_worker_count(geom):
    reports = [mc_moments(geom, CHERRY, 60, 400, SeededRng(5), workers=w) for w in (1, 2, 4, 8)]
    assert all(r == reports[0] for r in reports)
    trunc = [truncation_decay(geom, CHERRY, 60, [1, 5, 20], 200, SeededRng(6), workers=w) for w in (1, 3)]
    assert trunc[0] == trunc[1]


def test_references_attached(geom):
    rep = mc_moments(geom, CHERRY, 30, 100, SeededRng(2), references=True)
    assert rep.mu == pytest.approx(1.0) and rep.theta == pytest.approx(5.0)


# -- convergence and variance ------------------------------------------------------


def test_single_node_gap_zero(geom):
    rep = mu_n_convergence(geom, SINGLE, [10, 40, 160], 100, SeededRng(3))
    assert all(r.gap == 0 for r in rep.rows)


def test_edge_root_toll_tends_to_three(geom):
    rep = mu_n_convergence(geom, EDGE, [50, 800], 10_000, SeededRng(4), workers=4)
    assert rep.theta == pytest.approx(3.0)
    last = rep.rows[-1]
    assert abs(last.mu_n - 3.0) < 4 * last.mu_n_se + 3 * 2 / last.n


def test_convergence_preconditions(geom):
    with pytest.raises(ValueError):
        mu_n_convergence(geom, CHERRY, [200, 50], 100, 0)
    with pytest.raises(ValueError):
        mu_n_convergence(off.heavy_tail(3), CHERRY, [50], 100, 0, theta=math.inf)


def test_single_node_variance_scan(poisson):
    scan = variance_scan(poisson, SINGLE, [20, 80], 100, SeededRng(7))
    assert all(r.var_over_n == 0 for r in scan.rows)


def test_path_variance_bounded(geom):
    scan = variance_scan(geom, PATH3, [250, 1000], 4000, SeededRng(8), workers=4)
    a, b = scan.rows
    # Var N = Var w_1 tends to the variance of the size-biased root degree, E xi^3 - (E xi^2)^2 = 4
    assert abs(a.variance - b.variance) < 4 * max(a.variance_se, b.variance_se)
    assert abs(b.variance - 4) < 4 * b.variance_se + 0.05


@pytest.mark.slow
@pytest.mark.parametrize("name", ["geom", "poisson"])
def test_linear_variance_sanity_band(name):
    dist = FIXTURE_DISTS[name]
    for shape in (t for m in range(1, 5) for t in enumerate_trees(m)):
        pat = Pattern(shape)
        small = mc_moments(dist, pat, 500, 500, SeededRng(9), workers=4)
        large = mc_moments(dist, pat, 2000, 500, SeededRng(9), workers=4)
        assert large.var_over_n <= 10 * small.var_over_n, pat


# -- normality ---------------------------------------------------------------------


def test_normality_self_test_on_gaussian_vector():
    x = np.random.default_rng(11).standard_normal(10_000)
    rep = normality_of_sample(x)
    assert 0 <= rep.ks < 0.02
    assert abs(rep.skewness) < 0.1 and abs(rep.excess_kurtosis) < 0.2
    assert not rep.degenerate_scale


def test_normality_flags_non_growing_scale():
    x = np.random.default_rng(12).standard_normal(5000)
    assert normality_of_sample(x, n=1000).degenerate_scale
    assert not normality_of_sample(x, n=10).degenerate_scale


def test_normality_degenerate_sample(binary):
    with pytest.raises(DegenerateSampleError):
        normality_test(binary, CHERRY, 3, 2000, SeededRng(1))
    with pytest.raises(DegenerateSampleError):
        normality_of_sample(np.ones(10))


def test_normality_preconditions(geom):
    with pytest.raises(ValueError):
        normality_test(geom, CHERRY, 100, 1999, 0)
    with pytest.raises(ValueError):
        normality_test(geom, CHERRY, 100, 2000, 0, standardization="gamma")


def test_normality_oracle_center(geom):
    rep = normality_test(geom, CHERRY, 200, 2000, SeededRng(13), standardization="oracle")
    assert rep.center == 200.0
    assert 0 <= rep.ks <= 1


# -- truncation ----------------------------------------------------------------


def test_truncation_rows(geom):
    n = 120
    rep = truncation_decay(geom, CHERRY, n, [1, 5, 121, 500], 300, SeededRng(14))
    full = mc_moments(geom, CHERRY, n, 300, SeededRng(14))
    assert rep.rows[0].var_over_n == full.var_over_n and rep.rows[0].mean == full.mean
    assert rep.rows[2].mean == 0 and rep.rows[2].var_over_n == 0
    assert rep.rows[3].mean == 0 and rep.rows[3].var_over_n == 0


def test_truncation_preconditions(geom):
    with pytest.raises(ValueError):
        truncation_decay(geom, CHERRY, 100, [5, 20], 100, 0)
    with pytest.raises(ValueError):
        truncation_decay(geom, CHERRY, 100, [1, 20, 5], 100, 0)


# -- heavy tails -------------------------------------------------------------------


def test_heavy_tail_identity_small():
    rep = heavy_tail_experiment(1, [101, 400], 150, SeededRng(15))
    assert rep.identity_holds is True
    assert rep.pattern == "((()))"
    assert [r.n for r in rep.rows] == [101, 400]
    for r in rep.rows:
        assert r.ci_low <= r.var_over_n <= r.ci_high


def test_heavy_tail_example_two_shape():
    rep = heavy_tail_experiment(2, [200, 400], 100, SeededRng(16))
    assert rep.identity_holds is None and rep.pattern == "(()()())"
    assert len(rep.growth_factors) == 1


def test_heavy_tail_preconditions():
    with pytest.raises(ValueError):
        heavy_tail_experiment(3, [100], 100, 0)
    with pytest.raises(InfeasibleSizeError):
        heavy_tail_experiment(1, [2], 100, 0)


def test_truncation_matches_exact_enumeration(geom):
    from gwsubtree.oracle import exact_conditioned_law
    from gwsubtree.patterns import tail_sums

    n, starts = 12, [1, 4, 8]
    law = exact_conditioned_law(geom, n)
    vals = np.array([tail_sums(CHERRY, t, starts) for t in law.trees], dtype=np.float64)
    mean = law.probs @ vals
    exact = law.probs @ (vals - mean) ** 2 / n
    rep = truncation_decay(geom, CHERRY, n, starts, 20_000, SeededRng(5))
    for row, v in zip(rep.rows, exact):
        assert abs(row.var_over_n - v) < 4 * row.var_over_n_se


def test_cherry_mean_against_exact_finite_n(geom):
    # E N = (n-1)(n-2)/(n+1) = n - 4 + 6/(n+1) for the cherry under the geometric law
    n = 1000
    rep = mc_moments(geom, CHERRY, n, 10_000, SeededRng(2024))
    assert abs(rep.mean - (n - 1) * (n - 2) / (n + 1)) < 4 * rep.mean_se
