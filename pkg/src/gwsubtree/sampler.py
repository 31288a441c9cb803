"""Random Galton-Watson trees: unconditioned, size-conditioned, and Kesten cuts.

Conditioned trees use the cycle lemma.  A sequence of n iid offspring values
summing to n - 1 has exactly one cyclic rotation that is a valid preorder
outdegree sequence, and rotating a uniformly arranged sequence yields the
exact law of the tree conditioned on n nodes.  The sequence itself comes from
rejection sampling, either directly on iid draws (small n) or on the vector of
value counts drawn as a multinomial (large n).
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .offspring import (OffspringDistribution, require_feasible, require_valid,
                        size_biased, size_probability)
from .rng import as_generator
from .trees import OrderedTree

DEFAULT_CAP = 10**7
_IID_MAX_N = 32
_MAX_CELLS = 1 << 22


# -- cycle lemma ---------------------------------------------------------


def rotate_to_lukasiewicz(seq: np.ndarray) -> np.ndarray:
    """Rotate sequences (1-D, or rows of a 2-D array) summing to n - 1 into
    the unique valid preorder outdegree rotation."""
    seq = np.asarray(seq, dtype=np.int64)
    if seq.ndim == 1:
        walk = np.cumsum(seq - 1)
        start = (int(np.argmin(walk)) + 1) % seq.size
        return np.concatenate([seq[start:], seq[:start]])
    n = seq.shape[1]
    walk = np.cumsum(seq - 1, axis=1)
    start = (np.argmin(walk, axis=1) + 1) % n
    idx = (start[:, None] + np.arange(n)) % n
    return np.take_along_axis(seq, idx, axis=1)


def valid_rotations(seq) -> list[int]:
    """All shifts r such that seq[r:] + seq[:r] is a valid preorder sequence."""
    seq = np.asarray(seq, dtype=np.int64)
    out = []
    for r in range(seq.size):
        walk = np.cumsum(np.roll(seq, -r) - 1)
        if walk[-1] == -1 and (walk[:-1] >= 0).all():
            out.append(r)
    return out


# -- unconditioned trees ---------------------------------------------------


def sample_gw(dist: OffspringDistribution, rng, cap: int = DEFAULT_CAP) -> OrderedTree | None:
    """A Galton-Watson tree, or ``None`` if it has more than ``cap`` nodes.

    The preorder outdegrees of a GW tree are iid offspring draws read until
    the walk of partial sums of (d - 1) first reaches -1.
    """
    if cap < 1:
        raise ValueError("cap must be at least 1")
    gen = as_generator(rng)
    chunks = []
    level = 0
    drawn = 0
    chunk = 16
    while drawn < cap:
        take = min(chunk, cap - drawn)
        d = dist.sample(gen, take)
        walk = level + np.cumsum(d - 1)
        hit = np.flatnonzero(walk == -1)
        if hit.size:
            chunks.append(d[:hit[0] + 1])
            return OrderedTree(np.concatenate(chunks), check=False)
        chunks.append(d)
        level = int(walk[-1])
        drawn += take
        chunk *= 2
    return None


def sample_gw_truncated(dist: OffspringDistribution, gen: np.random.Generator, depth: int) -> np.ndarray:
    """Preorder outdegrees of the cut T^(depth) of a fresh GW tree."""
    levels = []
    width = 1
    for _ in range(depth):
        d = dist.sample(gen, width) if width else np.zeros(0, dtype=np.int64)
        levels.append(d)
        width = int(d.sum())
    levels.append(np.zeros(width, dtype=np.int64))
    return _levels_to_preorder(levels)


def _levels_to_preorder(levels: list[np.ndarray]) -> np.ndarray:
    out = []
    ptr = [0] * len(levels)
    stack = [(0, 1)]  # (level, remaining nodes to visit at this level under the current parent)
    while stack:
        lev, rem = stack.pop()
        if rem == 0:
            continue
        stack.append((lev, rem - 1))
        deg = int(levels[lev][ptr[lev]])
        ptr[lev] += 1
        out.append(deg)
        if deg:
            stack.append((lev + 1, deg))
    return np.array(out, dtype=np.int64)


# -- Kesten tree -----------------------------------------------------------


def sample_kesten(dist: OffspringDistribution, depth: int, rng) -> OrderedTree:
    """The cut at ``depth`` of the size-biased (Kesten) tree.

    Spine nodes draw a size-biased number of children; one of them, chosen
    uniformly, continues the spine and the others root independent GW trees.
    """
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    require_valid(dist)
    gen = as_generator(rng)
    biased = size_biased(dist)
    parts: list[np.ndarray] = []

    def spine(level):
        if level == depth:
            parts.append(np.zeros(1, dtype=np.int64))
            return
        k = int(biased.sample(gen, 1)[0])
        special = int(gen.integers(k))
        parts.append(np.array([k], dtype=np.int64))
        for i in range(k):
            if i == special:
                spine(level + 1)
            else:
                parts.append(sample_gw_truncated(dist, gen, depth - level - 1))

    spine(0)
    return OrderedTree(np.concatenate(parts), check=False)


# -- conditioned trees -----------------------------------------------------


@lru_cache(maxsize=256)
def _acceptance(dist: OffspringDistribution, n: int) -> float:
    """P(S_n = n - 1), used only to size rejection batches."""
    if n <= 4096:
        return n * size_probability(dist, n)
    sigma = math.sqrt(max(dist.variance, 1e-12))
    return dist.span / (sigma * math.sqrt(2 * math.pi * n))


@lru_cache(maxsize=64)
def _count_plan(dist: OffspringDistribution, n: int):
    """Bins for the multinomial route: values 0..K-1 individually, one bin for
    [K, n-1] and one overflow bin for values >= n (which always reject)."""
    if dist.kind == "table":
        k_cut = min(int(dist.max_support) + 1, n)
    else:
        k_cut = 1
        while k_cut < n and n * dist.tail_mass(k_cut) > 0.5:
            k_cut += 1
    pmf = dist.pmf_array(n - 1)
    head = pmf[:k_cut]
    mid = pmf[k_cut:n]
    over = dist.tail_mass(n) if dist.kind != "table" else float(sum(q for s, q in zip(dist.support, dist.probs) if s >= n))
    pvals = np.concatenate([head, [mid.sum(), over]])
    pvals = np.clip(pvals, 0.0, None)
    pvals /= pvals.sum()
    mid_cdf = np.cumsum(mid) / mid.sum() if mid.size and mid.sum() > 0 else None
    return k_cut, pvals, mid_cdf


def conditioned_degree_sequences(dist: OffspringDistribution, n: int, count: int, rng,
                                 method: str | None = None) -> np.ndarray:
    """``count`` valid preorder outdegree sequences of conditioned trees, shape (count, n)."""
    require_feasible(dist, n)
    gen = as_generator(rng)
    if n == 1:
        return np.zeros((count, 1), dtype=np.int64)
    if method is None:
        method = "iid" if n <= _IID_MAX_N else "counts"
    if method == "iid":
        raw = _iid_rejection(dist, n, count, gen)
    elif method == "counts":
        raw = _count_rejection(dist, n, count, gen)
    else:
        raise ValueError(f"unknown method {method!r}")
    return rotate_to_lukasiewicz(raw)


def _iid_rejection(dist, n, count, gen):
    acc = max(_acceptance(dist, n), 1e-12)
    got = []
    have = 0
    while have < count:
        rows = int(min(max(math.ceil(1.2 * (count - have) / acc), 16), max(_MAX_CELLS // n, 1)))
        draws = dist.sample(gen, rows * n).reshape(rows, n)
        ok = draws.sum(axis=1) == n - 1
        got.append(draws[ok][:count - have])
        have += got[-1].shape[0]
    return np.concatenate(got)


def _count_rejection(dist, n, count, gen):
    k_cut, pvals, mid_cdf = _count_plan(dist, n)
    acc = max(_acceptance(dist, n), 1e-12)
    values = np.arange(k_cut, dtype=np.int64)
    out = np.empty((count, n), dtype=np.int64)
    have = 0
    while have < count:
        rows = int(min(max(math.ceil(1.2 * (count - have) / acc), 4), max(_MAX_CELLS // (k_cut + 2), 1)))
        counts = gen.multinomial(n, pvals, size=rows)
        head_sum = counts[:, :k_cut] @ values
        n_mid = counts[:, k_cut]
        ok = counts[:, k_cut + 1] == 0
        mid_vals = None
        starts = None
        total = head_sum
        if n_mid.any():
            m = int(n_mid.sum())
            mid_vals = k_cut + np.searchsorted(mid_cdf, gen.random(m), side="right")
            mid_vals = np.minimum(mid_vals, n - 1)
            row_of = np.repeat(np.arange(rows), n_mid)
            total = head_sum + np.bincount(row_of, weights=mid_vals, minlength=rows).astype(np.int64)
            starts = np.concatenate([[0], np.cumsum(n_mid)[:-1]])
        ok &= total == n - 1
        for r in np.flatnonzero(ok):
            if have == count:
                break
            seq = np.repeat(values, counts[r, :k_cut])
            if n_mid[r]:
                seq = np.concatenate([seq, mid_vals[starts[r]:starts[r] + n_mid[r]]])
            gen.shuffle(seq)
            out[have] = seq
            have += 1
    return out


def sample_conditioned(dist: OffspringDistribution, n: int, rng) -> OrderedTree:
    """A GW tree conditioned to have exactly ``n`` nodes."""
    seq = conditioned_degree_sequences(dist, n, 1, rng)[0]
    return OrderedTree(seq, check=False)


def sample_conditioned_many(dist: OffspringDistribution, n: int, count: int, rng,
                            method: str | None = None) -> list[OrderedTree]:
    seqs = conditioned_degree_sequences(dist, n, count, rng, method=method)
    return [OrderedTree(s, check=False) for s in seqs]
