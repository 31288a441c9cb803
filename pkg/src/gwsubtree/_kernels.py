"""Compiled inner loops over flat preorder arrays."""

import numpy as np
from numba import njit

INT64_MAX = np.iinfo(np.int64).max


@njit(cache=True)
def tree_structure(degrees):
    """Parent, depth and fringe size of every node of a valid preorder sequence."""
    n = degrees.shape[0]
    parent = np.empty(n, np.int64)
    depth = np.empty(n, np.int64)
    size = np.ones(n, np.int64)
    stack = np.empty(n, np.int64)
    remaining = np.empty(n, np.int64)
    top = -1
    for i in range(n):
        if top >= 0:
            p = stack[top]
            parent[i] = p
            depth[i] = depth[p] + 1
            remaining[top] -= 1
            if remaining[top] == 0:
                top -= 1
        else:
            parent[i] = -1
            depth[i] = 0
        if degrees[i] > 0:
            top += 1
            stack[top] = i
            remaining[top] = degrees[i]
    for i in range(n - 1, 0, -1):
        size[parent[i]] += size[i]
    return parent, depth, size


@njit(cache=True)
def toll_table(t_deg, t_off, t_child, p_deg, p_off, p_child):
    """Root-anchored occurrence counts for every (pattern node, tree node) pair.

    ``table[a, v]`` counts embeddings of the fringe of pattern node ``a`` into
    the fringe of tree node ``v`` with ``a`` mapped to ``v``.  Returns
    ``(table, overflowed)``; on int64 overflow the table is incomplete.
    """
    n = t_deg.shape[0]
    m = p_deg.shape[0]
    table = np.zeros((m, n), np.int64)
    dmax = 0
    for a in range(m):
        if p_deg[a] > dmax:
            dmax = p_deg[a]
    dp = np.zeros(dmax + 1, np.int64)
    for v in range(n - 1, -1, -1):
        k = t_deg[v]
        base = t_off[v]
        for a in range(m - 1, -1, -1):
            d = p_deg[a]
            if d == 0:
                table[a, v] = 1
                continue
            if k < d:
                continue
            dp[0] = 1
            for j in range(1, d + 1):
                dp[j] = 0
            pbase = p_off[a]
            for i in range(k):
                c = t_child[base + i]
                # slot j can only be filled once j-1 earlier children exist and
                # enough later children remain for slots j+1..d
                jhi = i + 1 if i + 1 < d else d
                jlo = d - (k - i) + 1
                if jlo < 1:
                    jlo = 1
                for j in range(jhi, jlo - 1, -1):
                    prev = dp[j - 1]
                    if prev == 0:
                        continue
                    x = table[p_child[pbase + j - 1], c]
                    if x == 0:
                        continue
                    if x > INT64_MAX // prev:
                        return table, True
                    prod = prev * x
                    if dp[j] > INT64_MAX - prod:
                        return table, True
                    dp[j] += prod
            table[a, v] = dp[d]
    return table, False


@njit(cache=True)
def child_layout(degrees, parent):
    """Offsets and grouped child indices, as on OrderedTree."""
    n = degrees.shape[0]
    off = np.zeros(n + 1, np.int64)
    for i in range(n):
        off[i + 1] = off[i] + degrees[i]
    fill = off[:n].copy()
    child = np.empty(off[n], np.int64)
    for v in range(1, n):
        p = parent[v]
        child[fill[p]] = v
        fill[p] += 1
    return off, child


@njit(cache=True)
def batch_counts(seqs, p_deg, p_off, p_child):
    """Root toll and total count for each row of a 2-D array of preorder sequences."""
    rows = seqs.shape[0]
    n = seqs.shape[1]
    root = np.zeros(rows, np.int64)
    total = np.zeros(rows, np.int64)
    d = np.empty(n, np.int64)
    for r in range(rows):
        for i in range(n):
            d[i] = seqs[r, i]
        parent, depth, size = tree_structure(d)
        off, child = child_layout(d, parent)
        table, over = toll_table(d, off, child, p_deg, p_off, p_child)
        if over:
            return root, total, True
        root[r] = table[0, 0]
        s = 0
        for v in range(n):
            if s > INT64_MAX - table[0, v]:
                return root, total, True
            s += table[0, v]
        total[r] = s
    return root, total, False
