"""Reference implementations of the graph kernels (no compiled code).

Graphs are in CSR form: the successors of node ``i`` are
``indices[indptr[i]:indptr[i+1]]``.  Targets ``>= n`` denote the sentinel
"outside the grid" node and are ignored by the set-valued kernels.
Masks are ``uint8`` arrays of length ``n``.
"""
from __future__ import annotations

from collections import deque

import numpy as np


def forward_closure(indptr, indices, allowed, seeds):
    n = allowed.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    queue = deque()
    for i in np.flatnonzero(seeds):
        if allowed[i] and not out[i]:
            out[i] = 1
            queue.append(int(i))
    while queue:
        i = queue.popleft()
        for j in indices[indptr[i]:indptr[i + 1]]:
            if j < n and allowed[j] and not out[j]:
                out[j] = 1
                queue.append(int(j))
    return out


def survive(indptr, indices, allowed, k):
    n = allowed.shape[0]
    alive = allowed.astype(np.uint8).copy()
    for _ in range(int(k)):
        nxt = np.zeros(n, dtype=np.uint8)
        for i in np.flatnonzero(alive):
            for j in indices[indptr[i]:indptr[i + 1]]:
                if j < n and alive[j]:
                    nxt[i] = 1
                    break
        if np.array_equal(nxt, alive):
            break
        alive = nxt
    return alive


def trim(indptr, indices, rindptr, rindices, allowed):
    n = allowed.shape[0]
    keep = allowed.astype(np.uint8).copy()
    count = np.zeros(n, dtype=np.int64)
    for i in np.flatnonzero(keep):
        c = 0
        for j in indices[indptr[i]:indptr[i + 1]]:
            if j < n and keep[j]:
                c += 1
        count[i] = c
    queue = deque(int(i) for i in np.flatnonzero(keep) if count[i] == 0)
    while queue:
        i = queue.popleft()
        if not keep[i]:
            continue
        keep[i] = 0
        for p in rindices[rindptr[i]:rindptr[i + 1]]:
            if p < n and keep[p]:
                count[p] -= 1
                if count[p] == 0:
                    queue.append(int(p))
    return keep


def box_adjacency(lo, hi, res):
    """Enumerate, per source row, all cells of the integer box [lo, hi].

    Boxes reaching outside ``[0, res)`` additionally get the sentinel target
    ``prod(res)``.
    """
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    res = np.asarray(res, dtype=np.int64)
    m, d = lo.shape
    total = int(np.prod(res))
    strides = np.ones(d, dtype=np.int64)
    for a in range(d - 2, -1, -1):
        strides[a] = strides[a + 1] * res[a + 1]
    indptr = np.zeros(m + 1, dtype=np.int64)
    chunks = []
    for r in range(m):
        clo = np.maximum(lo[r], 0)
        chi = np.minimum(hi[r], res - 1)
        outside = bool(np.any(lo[r] < 0) or np.any(hi[r] > res - 1))
        if np.any(chi < clo):
            cells = np.zeros(0, dtype=np.int64)
        else:
            axes = [np.arange(clo[a], chi[a] + 1) * strides[a] for a in range(d)]
            grid = np.zeros(1, dtype=np.int64)
            for ax in axes:
                grid = (grid[:, None] + ax[None, :]).reshape(-1)
            cells = np.sort(grid)
        if outside:
            cells = np.append(cells, total)
        chunks.append(cells)
        indptr[r + 1] = indptr[r] + cells.shape[0]
    indices = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return indptr, indices.astype(np.int64)
