"""Rooted ordered (plane) trees stored as flat preorder arrays.

A tree is identified by its preorder outdegree sequence, which is a valid
Lukasiewicz word: the partial sums of ``d_i - 1`` stay nonnegative until the
last step, where they reach -1.  Node identity is the preorder index; the
root is node 0.

Two text forms are supported: balanced parentheses (``"(()())"`` is a root
with two leaves) and a comma-separated outdegree list (``"2,0,0"``).
"""

from __future__ import annotations

from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from ._kernels import tree_structure
from .errors import TreeParseError


def is_lukasiewicz(degrees: Sequence[int]) -> bool:
    d = np.asarray(degrees, dtype=np.int64)
    if d.ndim != 1 or d.size == 0 or (d < 0).any():
        return False
    walk = np.cumsum(d - 1)
    return bool(walk[-1] == -1 and (walk[:-1] >= 0).all())


class OrderedTree:
    """Immutable rooted plane tree.

    Parameters
    ----------
    degrees : sequence of int
        Preorder outdegree sequence.  Must satisfy the Lukasiewicz condition.
    """

    def __init__(self, degrees: Iterable[int], *, check: bool = True):
        d = np.array(degrees, dtype=np.int64).reshape(-1)
        if check and not is_lukasiewicz(d):
            raise ValueError(f"not a valid preorder outdegree sequence: {d[:20].tolist()}")
        d.setflags(write=False)
        parent, depth, size = tree_structure(d)
        for arr in (parent, depth, size):
            arr.setflags(write=False)
        self._degrees = d
        self._parent = parent
        self._depth = depth
        self._size = size

    # -- basic accessors ---------------------------------------------------

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    @property
    def parent(self) -> np.ndarray:
        """Parent index per node; -1 for the root."""
        return self._parent

    @property
    def depth(self) -> np.ndarray:
        return self._depth

    @property
    def fringe_sizes(self) -> np.ndarray:
        """Number of nodes in the fringe subtree of each node."""
        return self._size

    def __len__(self) -> int:
        return int(self._degrees.shape[0])

    @property
    def size(self) -> int:
        return len(self)

    @cached_property
    def height(self) -> int:
        return int(self._depth.max())

    @property
    def root_degree(self) -> int:
        return int(self._degrees[0])

    @cached_property
    def child_offsets(self) -> np.ndarray:
        off = np.zeros(len(self) + 1, dtype=np.int64)
        np.cumsum(self._degrees, out=off[1:])
        off.setflags(write=False)
        return off

    @cached_property
    def child_index(self) -> np.ndarray:
        """Children of all nodes, grouped by parent in left-to-right order."""
        ch = np.argsort(self._parent[1:], kind="stable").astype(np.int64) + 1
        ch.setflags(write=False)
        return ch

    def children(self, v: int) -> np.ndarray:
        off = self.child_offsets
        return self.child_index[off[v]:off[v + 1]]

    def branches(self) -> list[OrderedTree]:
        """Root branches, left to right."""
        return [self.fringe_at(int(c)) for c in self.children(0)]

    # -- structural queries ------------------------------------------------

    def fringe_at(self, v: int) -> OrderedTree:
        if not 0 <= v < len(self):
            raise IndexError(f"node {v} out of range for a tree with {len(self)} nodes")
        return OrderedTree(self._degrees[v:v + self._size[v]], check=False)

    def cut_at_depth(self, m: int) -> OrderedTree:
        if m < 0:
            raise ValueError("depth must be nonnegative")
        if m >= self.height:
            return self
        keep = self._depth <= m
        d = self._degrees[keep].copy()
        d[self._depth[keep] == m] = 0
        return OrderedTree(d, check=False)

    def level_width(self, m: int) -> int:
        return int(np.count_nonzero(self._depth == m))

    def level_widths(self) -> np.ndarray:
        return np.bincount(self._depth)

    # -- text forms --------------------------------------------------------

    def serialize(self) -> str:
        # node v closes right after its last descendant v + size - 1
        closes = np.bincount(np.arange(len(self)) + self._size - 1, minlength=len(self))
        return "".join("(" + ")" * int(c) for c in closes)

    def to_degree_string(self) -> str:
        return ",".join(map(str, self._degrees.tolist()))

    def key(self) -> bytes:
        return self._degrees.tobytes()

    def __eq__(self, other):
        if not isinstance(other, OrderedTree):
            return NotImplemented
        return len(self) == len(other) and bool(np.array_equal(self._degrees, other._degrees))

    def __hash__(self):
        return hash(self.key())

    def __str__(self):
        return self.serialize()

    def __repr__(self):
        text = self.serialize() if len(self) <= 40 else f"<{len(self)} nodes>"
        return f"OrderedTree({text!r})"


def parse_tree(text: str) -> OrderedTree:
    """Parse a balanced-parenthesis string such as ``"(()(()))"``."""
    if not text:
        raise TreeParseError("empty input", 0)
    degrees: list[int] = []
    stack: list[int] = []
    closed_root = False
    for i, ch in enumerate(text):
        if ch == "(":
            if closed_root:
                raise TreeParseError("more than one top-level group", i)
            if stack:
                degrees[stack[-1]] += 1
            stack.append(len(degrees))
            degrees.append(0)
        elif ch == ")":
            if not stack:
                raise TreeParseError("unbalanced ')'", i)
            stack.pop()
            if not stack:
                closed_root = True
        else:
            raise TreeParseError(f"unexpected character {ch!r}", i)
    if stack:
        raise TreeParseError("unclosed '('", len(text))
    return OrderedTree(degrees, check=False)


def serialize_tree(tree: OrderedTree) -> str:
    return tree.serialize()


def parse_degrees(text: str) -> OrderedTree:
    """Parse a comma-separated preorder outdegree sequence such as ``"2,0,0"``."""
    if not text.strip():
        raise TreeParseError("empty input", 0)
    values = []
    pos = 0
    for part in text.split(","):
        token = part.strip()
        if not token.isdigit():
            raise TreeParseError(f"bad outdegree {part!r}", pos)
        values.append(int(token))
        pos += len(part) + 1
    if not is_lukasiewicz(values):
        raise TreeParseError("not a valid preorder outdegree sequence", len(text))
    return OrderedTree(values, check=False)


def read_tree(text: str) -> OrderedTree:
    """Accept either text form."""
    text = text.strip()
    if text.startswith("("):
        return parse_tree(text)
    return parse_degrees(text)


def from_branches(branches: Sequence[OrderedTree]) -> OrderedTree:
    """A new root whose children are ``branches`` in order."""
    parts = [np.array([len(branches)], dtype=np.int64)] + [b.degrees for b in branches]
    return OrderedTree(np.concatenate(parts), check=False)


def single_node() -> OrderedTree:
    return OrderedTree([0], check=False)


def path(n: int) -> OrderedTree:
    return OrderedTree([1] * (n - 1) + [0], check=False)


def star(k: int) -> OrderedTree:
    return OrderedTree([k] + [0] * k, check=False)


def cut_at_depth(tree: OrderedTree, m: int) -> OrderedTree:
    return tree.cut_at_depth(m)


def level_width(tree: OrderedTree, m: int) -> int:
    return tree.level_width(m)


def fringe_at(tree: OrderedTree, v: int) -> OrderedTree:
    return tree.fringe_at(v)
