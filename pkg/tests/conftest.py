import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gwsubtree import offspring
from gwsubtree.rng import SeededRng
from gwsubtree.sampler import sample_conditioned_many
from gwsubtree.trees import OrderedTree

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

FIXTURE_DISTS = {
    "geom": offspring.geometric_half(),
    "poisson": offspring.poisson_unit(),
    "binary": offspring.table({0: 0.5, 2: 0.5}),
    "ternary": offspring.table({0: 0.5, 1: 0.25, 3: 0.25}),
}


@pytest.fixture(scope="session")
def geom():
    return FIXTURE_DISTS["geom"]


@pytest.fixture(scope="session")
def poisson():
    return FIXTURE_DISTS["poisson"]


@pytest.fixture(scope="session")
def binary():
    return FIXTURE_DISTS["binary"]


def random_trees(dist, count, seed, sizes=(1, 2, 5, 9, 17, 40, 120)):
    """A deterministic mix of conditioned trees over several sizes."""
    out: list[OrderedTree] = []
    base = SeededRng(seed)
    span = offspring.validate(dist).span
    sizes = [n for n in sizes if (n - 1) % span == 0]
    per = -(-count // len(sizes))
    for n in sizes:
        out.extend(sample_conditioned_many(dist, n, per, base.child(n)))
    return out[:count]


def lukasiewicz_strategy(max_size=30):
    """Hypothesis strategy producing valid preorder outdegree sequences."""
    from hypothesis import strategies as st

    @st.composite
    def build(draw):
        n = draw(st.integers(1, max_size))
        degrees = draw(st.lists(st.integers(0, 4), min_size=n, max_size=n))
        seq = np.array(degrees, dtype=np.int64)
        # force sum n - 1 by trimming or padding the largest entries, then rotate
        excess = int(seq.sum()) - (n - 1)
        i = 0
        while excess > 0:
            take = min(seq[i % n], excess)
            seq[i % n] -= take
            excess -= take
            i += 1
        if excess < 0:
            seq[0] += -excess
        from gwsubtree.sampler import rotate_to_lukasiewicz
        return OrderedTree(rotate_to_lukasiewicz(seq))

    return build()


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
