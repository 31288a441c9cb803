"""Certificates that the variance constant is positive, and the linear
decomposition that characterizes degenerate patterns.

A certificate is a pair of trees with positive probability, the same size,
the same cut at depth M - 1 and different pattern counts.  Swapping fringe
copies of one for the other moves the count without changing anything the
rest of the tree can see, which forces variance of order n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import batch_counts
from .offspring import OffspringDistribution, require_valid
from .oracle import sequence_weights, enumerate_degree_sequences, tree_weight
from .patterns import (BRUTE_FORCE_MAX_PATTERN, BRUTE_FORCE_MAX_TREE, Pattern, as_pattern,
                       brute_force_count, subtree_count)
from .trees import OrderedTree

MAX_SEARCH_SIZE = 12
EXACT_FIT_TOL = 1e-9


@dataclass(frozen=True)
class DegeneracyCertificate:
    tau1: OrderedTree
    tau2: OrderedTree
    p1: float
    p2: float
    delta: int

    @property
    def size(self) -> int:
        return len(self.tau1)

    @property
    def coefficient(self) -> float:
        """Variance lower-bound slope delta^2 p1 p2 / (p1 + p2)."""
        return self.delta**2 * self.p1 * self.p2 / (self.p1 + self.p2)

    def as_dict(self) -> dict:
        return {"tau1": str(self.tau1), "tau2": str(self.tau2), "size": self.size,
                "p1": self.p1, "p2": self.p2, "delta": self.delta}


@dataclass(frozen=True)
class CertificateCheck:
    positive_probability: bool
    equal_size: bool
    equal_cut: bool
    distinct_counts: bool

    @property
    def valid(self) -> bool:
        return self.positive_probability and self.equal_size and self.equal_cut and self.distinct_counts


def _size_block(dist: OffspringDistribution, s: int):
    """Positive-weight trees of size s: sequences, weights."""
    seqs = enumerate_degree_sequences(s)
    w = sequence_weights(dist, seqs)
    keep = w > 0
    return seqs[keep], w[keep]


def _counts(seqs: np.ndarray, pat: Pattern) -> tuple[np.ndarray, np.ndarray]:
    root, total, over = batch_counts(seqs, *pat._arrays)
    if over:
        raise OverflowError("pattern counts exceed 64 bits")
    return root, total


def _first_pair(keys: list[bytes], values: np.ndarray) -> tuple[int, int] | None:
    """Lexicographically first (i, j), i < j, with equal keys and different values."""
    groups: dict[bytes, list[int]] = {}
    for i, k in enumerate(keys):
        groups.setdefault(k, []).append(i)
    best = None
    for members in groups.values():
        vals = values[members]
        # next position in the group holding a different value
        nxt = np.full(len(members), -1)
        for pos in range(len(members) - 2, -1, -1):
            nxt[pos] = pos + 1 if vals[pos + 1] != vals[pos] else nxt[pos + 1]
        hits = np.flatnonzero(nxt >= 0)
        if hits.size:
            pos = int(hits[0])
            pair = (members[pos], members[int(nxt[pos])])
            if best is None or pair < best:
                best = pair
    return best


def find_certificate(dist: OffspringDistribution, pat, size_bound: int = 8) -> DegeneracyCertificate | None:
    """Scan sizes upward, trees in enumeration order, pairs lexicographically."""
    if size_bound > MAX_SEARCH_SIZE:
        raise ValueError(f"size bound must be at most {MAX_SEARCH_SIZE}")
    require_valid(dist)
    pat = as_pattern(pat)
    if pat.height == 0:
        return None
    for s in range(1, size_bound + 1):
        seqs, w = _size_block(dist, s)
        if seqs.shape[0] < 2:
            continue
        _, totals = _counts(seqs, pat)
        keys = [OrderedTree(row, check=False).cut_at_depth(pat.height - 1).key() for row in seqs]
        pair = _first_pair(keys, totals)
        if pair is not None:
            i, j = pair
            return DegeneracyCertificate(OrderedTree(seqs[i], check=False), OrderedTree(seqs[j], check=False),
                                         float(w[i]), float(w[j]), int(totals[i]) - int(totals[j]))
    return None


def verify_certificate(dist: OffspringDistribution, pat, cert: DegeneracyCertificate) -> CertificateCheck:
    """Re-derive every condition from scratch, counting by explicit embeddings
    whenever the trees are small enough."""
    pat = as_pattern(pat)
    small = len(cert.tau1) <= BRUTE_FORCE_MAX_TREE and len(pat.shape) <= BRUTE_FORCE_MAX_PATTERN
    count = (lambda t: brute_force_count(pat, t, anchored=False)) if small else (lambda t: subtree_count(pat, t))
    n1, n2 = count(cert.tau1), count(cert.tau2)
    depth = max(pat.height - 1, 0)
    return CertificateCheck(
        positive_probability=tree_weight(dist, cert.tau1) > 0 and tree_weight(dist, cert.tau2) > 0,
        equal_size=len(cert.tau1) == len(cert.tau2),
        equal_cut=pat.height >= 1 and cert.tau1.cut_at_depth(depth) == cert.tau2.cut_at_depth(depth),
        distinct_counts=n1 != n2 and n1 - n2 == cert.delta,
    )


def variance_lower_bound(dist: OffspringDistribution, pat, cert: DegeneracyCertificate, n: int) -> float:
    """Asymptotic lower bound delta^2 p1 p2 / (p1 + p2) * n on Var N_t(T_n)."""
    return cert.coefficient * n


def count_fringe_occurrences(tree: OrderedTree, tau: OrderedTree) -> int:
    """Number of nodes whose fringe subtree has the shape ``tau``."""
    k = len(tau)
    cand = np.flatnonzero(tree.fringe_sizes == k)
    if cand.size == 0:
        return 0
    windows = tree.degrees[cand[:, None] + np.arange(k)]
    return int(np.count_nonzero((windows == tau.degrees).all(axis=1)))


@dataclass(frozen=True)
class LinearDecomposition:
    """Least-squares fit N_t(T) ~ g(|T|) + sum_i alpha_i n_{t_i}(T)."""

    g: dict[int, float]
    alphas: dict[str, float]
    residual: float
    rank_deficient: bool
    size_bound: int
    trees_used: int
    caveat: str = field(default="")

    @property
    def exact(self) -> bool:
        return self.residual <= EXACT_FIT_TOL

    @property
    def nonzero_alphas(self) -> dict[str, float]:
        return {k: v for k, v in self.alphas.items() if abs(v) > EXACT_FIT_TOL}

    def as_dict(self) -> dict:
        return {"g": {str(k): v for k, v in self.g.items()}, "alphas": self.alphas,
                "residual": self.residual, "exact": self.exact, "rank_deficient": self.rank_deficient,
                "size_bound": self.size_bound, "trees_used": self.trees_used, "caveat": self.caveat}


def _fit(pat: Pattern, blocks: list[np.ndarray], size_bound: int) -> LinearDecomposition:
    """Least squares over the trees in ``blocks`` (one int8 array per size)."""
    regressors = [Pattern(t) for t in pat.fringe_patterns if len(t) > 1]
    blocks = [b for b in blocks if b.shape[0]]
    sizes = np.concatenate([np.full(b.shape[0], b.shape[1]) for b in blocks]) if blocks else np.zeros(0, int)
    observed = sorted(set(sizes.tolist()))
    design = [(sizes == s).astype(np.float64) for s in observed]
    design += [np.concatenate([_counts(b, reg)[0] for b in blocks]).astype(np.float64) for reg in regressors]
    y = np.concatenate([_counts(b, pat)[1] for b in blocks]).astype(np.float64) if blocks else np.zeros(0)
    if not y.size:
        return LinearDecomposition({}, {str(r): 0.0 for r in regressors}, 0.0, False, size_bound, 0)
    X = np.column_stack(design)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    residual = float(np.max(np.abs(X @ coef - y)))
    g = {s: float(c) for s, c in zip(observed, coef[:len(observed)])}
    alphas = {str(r): float(c) for r, c in zip(regressors, coef[len(observed):])}
    caveat = (f"fit uses only trees with at most {size_bound} nodes; an exact fit is evidence of "
              f"degeneracy, not a proof")
    return LinearDecomposition(g, alphas, residual, bool(rank < X.shape[1]), size_bound, int(y.size), caveat)


def fit_linear_decomposition(dist: OffspringDistribution, pat, size_bound: int = 8) -> LinearDecomposition:
    """Fit on every positive-probability tree with at most ``size_bound`` nodes.

    Regressors are one indicator per observed size and the toll of each
    distinct fringe subtree of the pattern other than the single node, whose
    toll is constant and is absorbed by the size function.  Rank-deficient
    designs get the minimum-norm solution and are flagged.
    """
    if size_bound > MAX_SEARCH_SIZE:
        raise ValueError(f"size bound must be at most {MAX_SEARCH_SIZE}")
    require_valid(dist)
    pat = as_pattern(pat)
    return _fit(pat, [_size_block(dist, s)[0] for s in range(1, size_bound + 1)], size_bound)


def fit_on_trees(pat, trees: list[OrderedTree]) -> LinearDecomposition:
    """The same fit restricted to an explicit tree set."""
    pat = as_pattern(pat)
    by_size: dict[int, list[np.ndarray]] = {}
    for t in trees:
        by_size.setdefault(len(t), []).append(t.degrees.astype(np.int8))
    blocks = [np.array(by_size[s]) for s in sorted(by_size)]
    return _fit(pat, blocks, max(by_size, default=0))


def degeneracy_summary(dist: OffspringDistribution, pat, size_bound: int = 8) -> dict:
    cert = find_certificate(dist, pat, size_bound)
    fit = fit_linear_decomposition(dist, pat, size_bound)
    return {
        "certificate": cert.as_dict() if cert else None,
        "lower_bound_coefficient": cert.coefficient if cert else None,
        "searched_up_to": size_bound,
        "decomposition": fit.as_dict(),
    }
