import itertools
import math

import numpy as np
import pytest
from scipy import stats

from gwsubtree import offspring as off
from gwsubtree.errors import InfeasibleSizeError
from gwsubtree.oracle import enumerate_trees, exact_conditioned_law
from gwsubtree.rng import SeededRng, as_generator
from gwsubtree.sampler import (conditioned_degree_sequences, rotate_to_lukasiewicz, sample_conditioned,
                               sample_conditioned_many, sample_gw, sample_kesten, valid_rotations)
from gwsubtree.trees import is_lukasiewicz

from conftest import FIXTURE_DISTS


# -- cycle lemma -------------------------------------------------------------


@pytest.mark.parametrize("n", range(1, 11))
def test_cycle_lemma_exhaustive(n):
    support = range(4) if n <= 9 else range(3)
    seqs = np.array([s for s in itertools.product(support, repeat=n) if sum(s) == n - 1], dtype=np.int64)
    valid = np.zeros(len(seqs), dtype=int)
    for r in range(n):
        walk = np.cumsum(np.roll(seqs, -r, axis=1) - 1, axis=1)
        valid += (walk[:, -1] == -1) & (walk[:, :-1] >= 0).all(axis=1)
    assert (valid == 1).all()
    rotated = rotate_to_lukasiewicz(seqs)
    assert all(is_lukasiewicz(row) for row in rotated[:: max(1, len(rotated) // 500)])
    walk = np.cumsum(rotated - 1, axis=1)
    assert (walk[:, -1] == -1).all() and (walk[:, :-1] >= 0).all()


def test_valid_rotations_single():
    assert valid_rotations([0, 2, 0]) == [1]
    assert rotate_to_lukasiewicz(np.array([0, 0, 2])).tolist() == [2, 0, 0]


# -- unconditioned ---------------------------------------------------------


class _ZeroFirst:
    """Offspring law stand-in whose first draw is always 0."""

    def sample(self, rng, size):
        return np.zeros(size, dtype=np.int64)


def test_sample_gw_immediate_extinction():
    t = sample_gw(_ZeroFirst(), 1, cap=1)
    assert t.serialize() == "()"


def test_sample_gw_cap_marker(geom):
    big = off.table({0: 0.5, 2: 0.5})
    results = [sample_gw(big, SeededRng(3).child(i), cap=5) for i in range(200)]
    assert any(r is None for r in results)
    assert all(r is None or len(r) <= 5 for r in results)
    with pytest.raises(ValueError):
        sample_gw(geom, 1, cap=0)


def test_sample_gw_deterministic(geom):
    a = sample_gw(geom, SeededRng(42), cap=10**6)
    b = sample_gw(geom, SeededRng(42), cap=10**6)
    assert a.serialize() == b.serialize()


@pytest.mark.slow
def test_sample_gw_size_three_frequency(geom):
    draws = 1_000_000
    gen = as_generator(SeededRng(17))
    hits = sum(1 for _ in range(draws) if (t := sample_gw(geom, gen, cap=10**6)) is not None and len(t) == 3)
    p = off.size_probability(geom, 3)
    assert abs(hits / draws - p) < 4 * math.sqrt(p * (1 - p) / draws)


# -- conditioned -----------------------------------------------------------


def test_conditioned_single_node(geom):
    assert sample_conditioned(geom, 1, 0).serialize() == "()"


def test_conditioned_exact_size(geom, poisson):
    for dist in (geom, poisson, off.heavy_tail(3)):
        for n in (3, 7, 33, 500):
            assert len(sample_conditioned(dist, n, SeededRng(n))) == n


def test_conditioned_infeasible(binary):
    with pytest.raises(InfeasibleSizeError):
        sample_conditioned(binary, 4, 0)
    # no node of degree one, so no tree on two nodes
    with pytest.raises(InfeasibleSizeError):
        sample_conditioned(off.heavy_tail(3), 2, 0)


def test_conditioned_geometric_uniform_n4(geom):
    trees = sample_conditioned_many(geom, 4, 100_000, SeededRng(8))
    keys = [t.serialize() for t in trees]
    shapes = [t.serialize() for t in enumerate_trees(4)]
    counts = np.array([keys.count(s) for s in shapes])
    assert counts.sum() == 100_000
    assert stats.chisquare(counts).pvalue > 1e-3


@pytest.mark.parametrize("name", sorted(FIXTURE_DISTS))
@pytest.mark.parametrize("method", ["iid", "counts"])
def test_conditioned_exact_law_small_n(name, method):
    dist = FIXTURE_DISTS[name]
    span = off.validate(dist).span
    for n in range(2, 7):
        if (n - 1) % span:
            continue
        law = exact_conditioned_law(dist, n)
        if len(law) < 2:
            continue
        seqs = conditioned_degree_sequences(dist, n, 200_000, SeededRng(n, 1), method=method)
        index = {row.tobytes(): i for i, row in enumerate(law.sequences.astype(np.int64))}
        counts = np.zeros(len(index))
        keys, freq = np.unique(seqs, axis=0, return_counts=True)
        for row, c in zip(keys, freq):
            counts[index[row.astype(np.int64).tobytes()]] += c
        assert counts.sum() == 200_000
        assert stats.chisquare(counts, law.probs * 200_000).pvalue > 1e-3, (name, method, n)


def test_conditioned_large_n_heavy_tail_mean_degree():
    dist = off.heavy_tail(3)
    seqs = conditioned_degree_sequences(dist, 20001, 5, SeededRng(1))
    assert (seqs.sum(axis=1) == 20000).all()
    assert all(is_lukasiewicz(s) for s in seqs)


def test_conditioned_deterministic(poisson):
    a = sample_conditioned(poisson, 300, SeededRng(5, 2))
    b = sample_conditioned(poisson, 300, SeededRng(5, 2))
    c = sample_conditioned(poisson, 300, SeededRng(5, 3))
    assert a.serialize() == b.serialize()
    assert a.serialize() != c.serialize()


def test_unknown_method(geom):
    with pytest.raises(ValueError):
        conditioned_degree_sequences(geom, 5, 1, 0, method="mcmc")


# -- Kesten ----------------------------------------------------------------


def test_kesten_depth_zero(geom):
    assert all(sample_kesten(geom, 0, SeededRng(1).child(i)).serialize() == "()" for i in range(20))


def test_kesten_depth_bound(poisson):
    for i in range(50):
        t = sample_kesten(poisson, 4, SeededRng(2).child(i))
        assert t.height == 4
        assert t.level_width(4) >= 1


def test_kesten_root_degree_is_size_biased(geom):
    draws = 100_000
    gen = as_generator(SeededRng(21))
    deg = np.array([sample_kesten(geom, 1, gen).root_degree for _ in range(draws)])
    kmax = 8
    obs = np.bincount(np.minimum(deg, kmax), minlength=kmax + 1)[1:]
    k = np.arange(1, kmax)
    p = np.concatenate([k * 2.0 ** -(k + 1), [(kmax + 1) * 2.0 ** -kmax]])
    assert stats.chisquare(obs, p * draws).pvalue > 1e-3


def test_kesten_cut_density_path(geom):
    # P(That^(2) = T) = w_2(T) P(T^(2) = T); for the 3-node path w_2 = 1 and P = p(1)^2
    draws = 100_000
    gen = as_generator(SeededRng(22))
    hits = sum(sample_kesten(geom, 2, gen).serialize() == "((()))" for _ in range(draws))
    target = 1 * geom.pmf(1) ** 2
    assert abs(hits / draws - target) < 4 * math.sqrt(target * (1 - target) / draws)


def test_rng_streams():
    a = SeededRng(7).child(1).generator().random(3)
    b = SeededRng(7).child(1).generator().random(3)
    c = SeededRng(7).child(2).generator().random(3)
    assert (a == b).all() and not (a == c).all()
    with pytest.raises(ValueError):
        SeededRng(-1)
    with pytest.raises(TypeError):
        as_generator("seed")
