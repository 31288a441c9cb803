import math

import numpy as np
import pytest

from gwsubtree.degeneracy import (DegeneracyCertificate, count_fringe_occurrences, degeneracy_summary,
                                  find_certificate, fit_linear_decomposition, fit_on_trees,
                                  variance_lower_bound, verify_certificate)
from gwsubtree.oracle import enumerate_trees
from gwsubtree.patterns import CHERRY, EDGE, PATH3, SINGLE, Pattern, path_pattern, toll_count
from gwsubtree.rng import SeededRng
from gwsubtree.sampler import sample_conditioned_many
from gwsubtree.trees import parse_tree

from conftest import FIXTURE_DISTS, random_trees

PATTERNS_UP_TO_5 = [Pattern(t) for m in range(1, 6) for t in enumerate_trees(m)]


# -- certificates --------------------------------------------------------------


def test_cherry_certificate(geom):
    cert = find_certificate(geom, CHERRY, 3)
    assert cert.tau1.serialize() == "((()))" and cert.tau2.serialize() == "(()())"
    assert cert.size == 3 and cert.delta == -1
    assert cert.p1 == pytest.approx(2.0 ** -5) and cert.p2 == pytest.approx(2.0 ** -5)
    assert cert.coefficient == pytest.approx(1 / 64)
    assert verify_certificate(geom, CHERRY, cert).valid


@pytest.mark.parametrize("length", [1, 2, 3, 4, 5])
def test_paths_have_no_certificate(geom, length):
    assert find_certificate(geom, path_pattern(length), 8) is None


def test_cherry_under_binary_law_skips_zero_weight_pair(binary):
    # ((())) has weight zero, and every full binary tree has (n - 1) / 2 cherries
    assert find_certificate(binary, CHERRY, 11) is None
    fit = fit_linear_decomposition(binary, CHERRY, 11)
    assert fit.exact


def test_search_bound(geom):
    with pytest.raises(ValueError):
        find_certificate(geom, CHERRY, 13)
    with pytest.raises(ValueError):
        fit_linear_decomposition(geom, CHERRY, 13)


@pytest.mark.parametrize("name", sorted(FIXTURE_DISTS))
def test_certificate_soundness(name):
    dist = FIXTURE_DISTS[name]
    for pat in PATTERNS_UP_TO_5:
        cert = find_certificate(dist, pat, 8)
        if cert is None:
            continue
        check = verify_certificate(dist, pat, cert)
        assert check.valid, (pat, check)


def test_verification_catches_broken_certificates(geom):
    cert = find_certificate(geom, CHERRY, 3)
    swapped_delta = DegeneracyCertificate(cert.tau1, cert.tau2, cert.p1, cert.p2, 1)
    assert not verify_certificate(geom, CHERRY, swapped_delta).distinct_counts
    other_size = DegeneracyCertificate(cert.tau1, parse_tree("(()()())"), cert.p1, cert.p2, -1)
    assert not verify_certificate(geom, CHERRY, other_size).valid
    deep = DegeneracyCertificate(parse_tree("(((())))"), parse_tree("((()()))"), 1.0, 1.0, 0)
    check = verify_certificate(geom, "((()()))", deep)
    assert check.equal_cut and not check.distinct_counts


@pytest.mark.parametrize("name", sorted(FIXTURE_DISTS))
def test_certificate_contradicts_decomposition(name):
    dist = FIXTURE_DISTS[name]
    checked = 0
    for pat in PATTERNS_UP_TO_5:
        cert = find_certificate(dist, pat, 8)
        if cert is None:
            continue
        regs = [Pattern(t) for t in pat.fringe_patterns if len(t) > 1]
        if all(toll_count(r, cert.tau1) == toll_count(r, cert.tau2) for r in regs):
            fit = fit_on_trees(pat, [cert.tau1, cert.tau2])
            assert fit.residual >= abs(cert.delta) / 2 - 1e-9
            checked += 1
    if name in ("poisson", "ternary"):
        assert checked >= 2


def test_lower_bound_examples(geom):
    cert = find_certificate(geom, CHERRY, 3)
    assert variance_lower_bound(geom, CHERRY, cert, 1000) == pytest.approx(1000 / 64)
    assert variance_lower_bound(geom, CHERRY, cert, 0) == 0
    q = 0.01
    sym = DegeneracyCertificate(cert.tau1, cert.tau2, q, q, 1)
    assert variance_lower_bound(geom, CHERRY, sym, 500) == pytest.approx(q / 2 * 500)


# -- fringe occurrences ------------------------------------------------------------


def test_fringe_occurrence_examples():
    t = parse_tree("((())(()()))")
    assert count_fringe_occurrences(t, parse_tree("()")) == int((t.degrees == 0).sum())
    assert count_fringe_occurrences(parse_tree("(()())"), parse_tree("(()())")) == 1
    assert count_fringe_occurrences(t, parse_tree("(()()()())")) == 0


def test_fringe_occurrences_partition_by_size(geom):
    for tree in random_trees(geom, 60, seed=5, sizes=(9, 30, 80)):
        for s in range(1, 6):
            total = sum(count_fringe_occurrences(tree, tau) for tau in enumerate_trees(s))
            assert total == int((tree.fringe_sizes == s).sum())


@pytest.mark.slow
def test_fringe_pair_density(geom):
    cert = find_certificate(geom, CHERRY, 3)
    n, reps = 1000, 10_000
    trees = sample_conditioned_many(geom, n, reps, SeededRng(77))
    counts = np.array([count_fringe_occurrences(t, cert.tau1) + count_fringe_occurrences(t, cert.tau2)
                       for t in trees], dtype=np.float64)
    se = counts.std(ddof=1) / math.sqrt(reps)
    assert abs(counts.mean() - (cert.p1 + cert.p2) * n) < 4 * se


# -- decomposition -----------------------------------------------------------------


def test_path3_decomposition(geom):
    fit = fit_linear_decomposition(geom, PATH3, 8)
    assert fit.exact
    assert all(v == pytest.approx(m - 1, abs=1e-9) for m, v in fit.g.items())
    assert fit.nonzero_alphas.keys() == {EDGE}
    assert fit.alphas[EDGE] == pytest.approx(-1.0, abs=1e-9)


def test_single_node_decomposition(poisson):
    fit = fit_linear_decomposition(poisson, SINGLE, 7)
    assert fit.exact and fit.alphas == {}
    assert all(v == pytest.approx(m, abs=1e-9) for m, v in fit.g.items())


def test_cherry_is_not_degenerate(geom):
    fit = fit_linear_decomposition(geom, CHERRY, 4)
    assert fit.residual > 1e-3 and not fit.exact
    assert "not a proof" in fit.caveat


def test_summary_shape(geom):
    s = degeneracy_summary(geom, CHERRY, 5)
    assert s["certificate"]["tau1"] == "((()))" and s["lower_bound_coefficient"] == pytest.approx(1 / 64)
    assert s["searched_up_to"] == 5 and set(s["decomposition"]) >= {"g", "alphas", "residual"}
    none = degeneracy_summary(geom, PATH3, 6)
    assert none["certificate"] is None and none["lower_bound_coefficient"] is None
