"""Counting occurrences of a fixed plane tree as a general subtree.

An occurrence of a pattern ``t`` in ``T`` maps the root of ``t`` to some node
of ``T`` and the children of every pattern node, in order, to an increasing
subsequence of the children of its image.  The toll ``n_t(T)`` counts
occurrences whose root goes to the root of ``T``; the total ``N_t(T)`` sums
the toll over all fringe subtrees.

For a node with children ``T_1..T_k`` and a pattern with branches
``t_1..t_d`` the toll is a sum over increasing index tuples of products of
branch tolls.  It is evaluated here as a prefix dynamic program over the
children, for every (pattern node, tree node) pair at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Mapping, Sequence

import numpy as np

from ._kernels import toll_table
from .errors import IncompleteTableError, OracleTooLargeError
from .trees import OrderedTree, parse_tree, read_tree

BRUTE_FORCE_MAX_PATTERN = 8
BRUTE_FORCE_MAX_TREE = 14


@dataclass(frozen=True, eq=False)
class Pattern:
    """A fixed pattern tree with its derived structure."""

    shape: OrderedTree

    @classmethod
    def parse(cls, text: str) -> Pattern:
        return cls(read_tree(text))

    @property
    def size(self) -> int:
        return len(self.shape)

    @cached_property
    def height(self) -> int:
        return self.shape.height

    @cached_property
    def max_degree(self) -> int:
        return int(self.shape.degrees.max())

    @cached_property
    def branches(self) -> tuple[OrderedTree, ...]:
        return tuple(self.shape.branches())

    @cached_property
    def level_cuts(self) -> tuple[OrderedTree, ...]:
        return tuple(self.shape.cut_at_depth(level) for level in range(self.height + 1))

    @cached_property
    def fringe_patterns(self) -> tuple[OrderedTree, ...]:
        """Distinct fringe subtrees of the shape, in preorder of first appearance."""
        seen = {}
        for v in range(len(self.shape)):
            sub = self.shape.fringe_at(v)
            seen.setdefault(sub.serialize(), sub)
        return tuple(seen.values())

    @cached_property
    def _arrays(self):
        s = self.shape
        return s.degrees, s.child_offsets, s.child_index

    def __str__(self):
        return self.shape.serialize()

    def __repr__(self):
        return f"Pattern({self.shape.serialize()!r})"

    def __eq__(self, other):
        return isinstance(other, Pattern) and self.shape == other.shape

    def __hash__(self):
        return hash(self.shape)


def as_pattern(pat) -> Pattern:
    if isinstance(pat, Pattern):
        return pat
    if isinstance(pat, OrderedTree):
        return Pattern(pat)
    return Pattern.parse(pat)


@dataclass(frozen=True)
class TruncationWindow:
    """Fringe sizes ``p <= |T| < q``; ``q = None`` means no upper limit."""

    p: int = 1
    q: int | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("window start must be at least 1")
        if self.q is not None and self.q < self.p:
            raise ValueError("window end must not precede its start")

    def contains(self, size):
        upper = math.inf if self.q is None else self.q
        return (size >= self.p) & (size < upper)

    @classmethod
    def parse(cls, text: str) -> TruncationWindow:
        lo, _, hi = text.partition(":")
        hi = hi.strip()
        return cls(int(lo), None if hi in ("", "inf") else int(hi))

    def __str__(self):
        return f"{self.p}:{'inf' if self.q is None else self.q}"


# -- the dynamic program ---------------------------------------------------


def node_tolls(pat, tree: OrderedTree) -> np.ndarray:
    """``n_t`` of the fringe subtree at every node of ``tree``.

    Returns an int64 array, or an object array of Python ints when a count
    does not fit in 64 bits.
    """
    pat = as_pattern(pat)
    pd, po, pc = pat._arrays
    table, overflowed = toll_table(tree.degrees, tree.child_offsets, tree.child_index, pd, po, pc)
    if overflowed:
        return np.array(_toll_rows_exact(pat, tree)[0], dtype=object)
    return table[0]


def _toll_rows_exact(pat: Pattern, tree: OrderedTree) -> list[list[int]]:
    """Same recursion as the compiled kernel, in unbounded Python integers."""
    shape = pat.shape
    m, n = len(shape), len(tree)
    pdeg = shape.degrees.tolist()
    pkids = [shape.children(a).tolist() for a in range(m)]
    rows = [[0] * n for _ in range(m)]
    for v in range(n - 1, -1, -1):
        kids = tree.children(v).tolist()
        for a in range(m - 1, -1, -1):
            d = pdeg[a]
            if d == 0:
                rows[a][v] = 1
                continue
            if len(kids) < d:
                continue
            dp = [1] + [0] * d
            branch_rows = [rows[b] for b in pkids[a]]
            for c in kids:
                for j in range(d, 0, -1):
                    if dp[j - 1]:
                        dp[j] += dp[j - 1] * branch_rows[j - 1][c]
            rows[a][v] = dp[d]
    return rows


def _total(values: np.ndarray) -> int:
    if values.dtype == object or (values.size and int(values.max()) > np.iinfo(np.int64).max // values.size):
        return sum(int(x) for x in values)
    return int(values.sum())


def toll_count(pat, tree: OrderedTree) -> int:
    """Occurrences of the pattern with its root at the root of ``tree``.

    Only the cut of ``tree`` at the pattern height matters.
    """
    pat = as_pattern(pat)
    return int(node_tolls(pat, tree.cut_at_depth(pat.height))[0])


def subtree_count(pat, tree: OrderedTree) -> int:
    """Total occurrences of the pattern anywhere in ``tree``."""
    return _total(node_tolls(pat, tree))


def truncated_toll(pat, window: TruncationWindow, tree: OrderedTree) -> int:
    if not window.contains(len(tree)):
        return 0
    return toll_count(pat, tree)


def truncated_additive(pat, window: TruncationWindow, tree: OrderedTree, centered: bool = False,
                       mu_table: Mapping[int, float] | None = None) -> float:
    """Sum over all fringe subtrees of the gated (optionally centered) toll."""
    tolls = node_tolls(pat, tree)
    sizes = tree.fringe_sizes
    mask = window.contains(sizes)
    if not centered:
        return float(_total(tolls[mask]))
    needed = sorted(set(sizes[mask].tolist()))
    missing = [k for k in needed if mu_table is None or k not in mu_table]
    if missing:
        raise IncompleteTableError(f"no mean toll for fringe sizes {missing[:10]}")
    means = np.array([mu_table[k] for k in sizes[mask].tolist()], dtype=np.float64)
    return math.fsum(tolls[mask].astype(np.float64) - means)


def tail_sums(pat, tree: OrderedTree, starts: Sequence[int]) -> list[int]:
    """``F_{p,inf}(tree)`` for each start ``p`` from one pass of the DP."""
    tolls = node_tolls(pat, tree)
    sizes = tree.fringe_sizes
    return [_total(tolls[sizes >= p]) for p in starts]


# -- brute-force oracle ----------------------------------------------------


def iter_embeddings(pat, tree: OrderedTree, anchor: int = 0) -> Iterator[tuple[int, ...]]:
    """All occurrences with the pattern root at ``anchor``, as tuples giving the
    image of each pattern node (pattern preorder)."""
    shape = as_pattern(pat).shape
    m = len(shape)
    parent = shape.parent.tolist()
    prev_sibling = [-1] * m
    for a in range(m):
        kids = shape.children(a).tolist()
        for left, right in zip(kids, kids[1:]):
            prev_sibling[right] = left
    tkids = [tree.children(v).tolist() for v in range(len(tree))]
    image = [-1] * m
    image[0] = anchor

    def extend(a):
        if a == m:
            yield tuple(image)
            return
        options = tkids[image[parent[a]]]
        floor = image[prev_sibling[a]] if prev_sibling[a] >= 0 else -1
        for c in options:
            if c > floor:
                image[a] = c
                yield from extend(a + 1)
        image[a] = -1

    yield from extend(1)


def is_embedding(pat, tree: OrderedTree, image: Sequence[int]) -> bool:
    """Check an explicit node map against the definition of an occurrence."""
    shape = as_pattern(pat).shape
    if len(image) != len(shape) or len(set(image)) != len(image):
        return False
    for a in range(1, len(shape)):
        if tree.parent[image[a]] != image[shape.parent[a]]:
            return False
    for a in range(len(shape)):
        kids = shape.children(a).tolist()
        imgs = [image[k] for k in kids]
        if imgs != sorted(imgs):
            return False
        if tree.degrees[image[a]] < shape.degrees[a]:
            return False
    return True


def brute_force_count(pat, tree: OrderedTree, anchored: bool = True) -> int:
    """Count occurrences by listing every embedding explicitly."""
    pat = as_pattern(pat)
    if len(pat.shape) > BRUTE_FORCE_MAX_PATTERN or len(tree) > BRUTE_FORCE_MAX_TREE:
        raise OracleTooLargeError(
            f"brute force limited to patterns of <= {BRUTE_FORCE_MAX_PATTERN} and trees of "
            f"<= {BRUTE_FORCE_MAX_TREE} nodes")
    anchors = [0] if anchored else range(len(tree))
    total = 0
    for v in anchors:
        for image in iter_embeddings(pat, tree, v):
            if not is_embedding(pat, tree, image):
                raise AssertionError(f"enumerated map {image} is not an occurrence")
            total += 1
    return total


# -- convenience -----------------------------------------------------------


CHERRY = "(()())"
PATH3 = "((()))"
EDGE = "(())"
SINGLE = "()"


def star_pattern(k: int) -> Pattern:
    return Pattern(OrderedTree([k] + [0] * k))


def path_pattern(n: int) -> Pattern:
    return Pattern(parse_tree("(" * n + ")" * n))
