# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.uint8_t u8


def forward_closure(const i64[:] indptr, const i64[:] indices,
                    const u8[:] allowed, const u8[:] seeds):
    cdef Py_ssize_t n = allowed.shape[0]
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef u8[:] out = out_arr
    stack_arr = np.empty(n + 1, dtype=np.int64)
    cdef i64[:] stack = stack_arr
    cdef Py_ssize_t top = 0, i, p, j
    for i in range(n):
        if seeds[i] and allowed[i] and not out[i]:
            out[i] = 1
            stack[top] = i
            top += 1
    while top > 0:
        top -= 1
        i = stack[top]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j < n and allowed[j] and not out[j]:
                out[j] = 1
                stack[top] = j
                top += 1
    return out_arr


def survive(const i64[:] indptr, const i64[:] indices, const u8[:] allowed, long k):
    cdef Py_ssize_t n = allowed.shape[0]
    a_arr = np.array(allowed, dtype=np.uint8, copy=True)
    b_arr = np.zeros(n, dtype=np.uint8)
    cdef u8[:] alive = a_arr
    cdef u8[:] nxt = b_arr
    cdef Py_ssize_t i, p, j
    cdef long step
    cdef bint changed
    for step in range(k):
        changed = False
        for i in range(n):
            nxt[i] = 0
            if alive[i]:
                for p in range(indptr[i], indptr[i + 1]):
                    j = indices[p]
                    if j < n and alive[j]:
                        nxt[i] = 1
                        break
                if not nxt[i]:
                    changed = True
        if not changed:
            break
        for i in range(n):
            alive[i] = nxt[i]
    return a_arr


def trim(const i64[:] indptr, const i64[:] indices,
         const i64[:] rindptr, const i64[:] rindices, const u8[:] allowed):
    cdef Py_ssize_t n = allowed.shape[0]
    keep_arr = np.array(allowed, dtype=np.uint8, copy=True)
    cdef u8[:] keep = keep_arr
    count_arr = np.zeros(n, dtype=np.int64)
    cdef i64[:] count = count_arr
    queue_arr = np.empty(n + 1, dtype=np.int64)
    cdef i64[:] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0, i, p, j, c
    for i in range(n):
        if keep[i]:
            c = 0
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j < n and keep[j]:
                    c += 1
            count[i] = c
            if c == 0:
                queue[tail] = i
                tail += 1
    while head < tail:
        i = queue[head]
        head += 1
        if not keep[i]:
            continue
        keep[i] = 0
        for p in range(rindptr[i], rindptr[i + 1]):
            j = rindices[p]
            if j < n and keep[j]:
                count[j] -= 1
                if count[j] == 0:
                    queue[tail] = j
                    tail += 1
    return keep_arr


def box_adjacency(lo_in, hi_in, res_in):
    cdef i64[:, :] lo = np.ascontiguousarray(lo_in, dtype=np.int64)
    cdef i64[:, :] hi = np.ascontiguousarray(hi_in, dtype=np.int64)
    cdef i64[:] res = np.ascontiguousarray(res_in, dtype=np.int64)
    cdef Py_ssize_t m = lo.shape[0], d = lo.shape[1]
    cdef Py_ssize_t r, a, total = 1, count, pos, lin
    for a in range(d):
        total *= res[a]
    strides_arr = np.ones(d, dtype=np.int64)
    cdef i64[:] strides = strides_arr
    for a in range(d - 2, -1, -1):
        strides[a] = strides[a + 1] * res[a + 1]
    clo_arr = np.empty((m, d), dtype=np.int64)
    chi_arr = np.empty((m, d), dtype=np.int64)
    cdef i64[:, :] clo = clo_arr
    cdef i64[:, :] chi = chi_arr
    out_flag_arr = np.zeros(m, dtype=np.uint8)
    cdef u8[:] outside = out_flag_arr
    indptr_arr = np.zeros(m + 1, dtype=np.int64)
    cdef i64[:] indptr = indptr_arr
    cdef bint empty
    for r in range(m):
        count = 1
        empty = False
        for a in range(d):
            clo[r, a] = lo[r, a] if lo[r, a] > 0 else 0
            chi[r, a] = hi[r, a] if hi[r, a] < res[a] - 1 else res[a] - 1
            if lo[r, a] < 0 or hi[r, a] > res[a] - 1:
                outside[r] = 1
            if chi[r, a] < clo[r, a]:
                empty = True
            else:
                count *= chi[r, a] - clo[r, a] + 1
        if empty:
            count = 0
        indptr[r + 1] = indptr[r] + count + outside[r]
    indices_arr = np.empty(indptr[m], dtype=np.int64)
    cdef i64[:] indices = indices_arr
    cur_arr = np.empty(d, dtype=np.int64)
    cdef i64[:] cur = cur_arr
    for r in range(m):
        pos = indptr[r]
        empty = False
        for a in range(d):
            if chi[r, a] < clo[r, a]:
                empty = True
            cur[a] = clo[r, a]
        if not empty:
            while True:
                lin = 0
                for a in range(d):
                    lin += cur[a] * strides[a]
                indices[pos] = lin
                pos += 1
                a = d - 1
                while a >= 0:
                    cur[a] += 1
                    if cur[a] <= chi[r, a]:
                        break
                    cur[a] = clo[r, a]
                    a -= 1
                if a < 0:
                    break
        if outside[r]:
            indices[pos] = total
    return indptr_arr, indices_arr
