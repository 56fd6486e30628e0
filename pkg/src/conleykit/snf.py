"""Smith normal form over the integers with unimodular transforms.

Matrices are lists of lists of Python ints (exact arithmetic).
"""
from __future__ import annotations

from typing import List, Tuple

Matrix = List[List[int]]


def identity(n: int) -> Matrix:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def zeros(r: int, c: int) -> Matrix:
    return [[0] * c for _ in range(r)]


def matmul(A: Matrix, B: Matrix) -> Matrix:
    if not A:
        return []
    inner = len(B)
    cols = len(B[0]) if B else 0
    out = []
    for row in A:
        acc = [0] * cols
        for k in range(inner):
            a = row[k]
            if a:
                bk = B[k]
                for j in range(cols):
                    if bk[j]:
                        acc[j] += a * bk[j]
        out.append(acc)
    return out


def transpose(A: Matrix, ncols: int = 0) -> Matrix:
    if not A:
        return [[] for _ in range(ncols)]
    return [list(col) for col in zip(*A)]


def det(A: Matrix) -> int:
    """Exact determinant by fraction-free Bareiss elimination."""
    n = len(A)
    if n == 0:
        return 1
    M = [row[:] for row in A]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if M[i][k] != 0), None)
            if swap is None:
                return 0
            M[k], M[swap] = M[swap], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


class SNF:
    """``P @ A @ Q == S`` with S diagonal (d1 | d2 | ...), all of P, Q unimodular.

    ``Pinv`` and ``Qinv`` are kept alongside.
    """

    def __init__(self, A: Matrix, nrows: int, ncols: int):
        self.nrows = nrows
        self.ncols = ncols
        S = [row[:] for row in A]
        P, Pinv = identity(nrows), identity(nrows)
        Q, Qinv = identity(ncols), identity(ncols)

        def row_add(i, j, c):  # row_i += c * row_j
            if c == 0:
                return
            Si, Sj = S[i], S[j]
            for k in range(ncols):
                if Sj[k]:
                    Si[k] += c * Sj[k]
            Pi, Pj = P[i], P[j]
            for k in range(nrows):
                if Pj[k]:
                    Pi[k] += c * Pj[k]
            for row in Pinv:  # col_j -= c * col_i
                if row[i]:
                    row[j] -= c * row[i]

        def row_swap(i, j):
            S[i], S[j] = S[j], S[i]
            P[i], P[j] = P[j], P[i]
            for row in Pinv:
                row[i], row[j] = row[j], row[i]

        def row_neg(i):
            S[i] = [-v for v in S[i]]
            P[i] = [-v for v in P[i]]
            for row in Pinv:
                row[i] = -row[i]

        def col_add(i, j, c):  # col_i += c * col_j
            if c == 0:
                return
            for row in S:
                if row[j]:
                    row[i] += c * row[j]
            for row in Q:
                if row[j]:
                    row[i] += c * row[j]
            Qi, Qj = Qinv[i], Qinv[j]  # row_j -= c * row_i
            for k in range(ncols):
                if Qi[k]:
                    Qj[k] -= c * Qi[k]

        def col_swap(i, j):
            for row in S:
                row[i], row[j] = row[j], row[i]
            for row in Q:
                row[i], row[j] = row[j], row[i]
            Qinv[i], Qinv[j] = Qinv[j], Qinv[i]

        t = 0
        while t < min(nrows, ncols):
            best = None
            for i in range(t, nrows):
                Si = S[i]
                for j in range(t, ncols):
                    v = Si[j]
                    if v and (best is None or abs(v) < best[0]):
                        best = (abs(v), i, j)
                        if best[0] == 1:
                            break
                if best is not None and best[0] == 1:
                    break
            if best is None:
                break
            _, i, j = best
            row_swap(t, i)
            col_swap(t, j)
            while True:
                done = True
                p = S[t][t]
                for i in range(t + 1, nrows):
                    if S[i][t]:
                        row_add(i, t, -(S[i][t] // p))
                        if S[i][t]:
                            done = False
                for j in range(t + 1, ncols):
                    if S[t][j]:
                        col_add(j, t, -(S[t][j] // p))
                        if S[t][j]:
                            done = False
                if done:
                    # divisibility: every remaining entry must be a multiple of p
                    bad = None
                    for i in range(t + 1, nrows):
                        for j in range(t + 1, ncols):
                            if S[i][j] % p:
                                bad = i
                                break
                        if bad is not None:
                            break
                    if bad is None:
                        break
                    row_add(t, bad, 1)
                    continue
                # move the smallest entry of row/column t to the pivot
                best = (abs(S[t][t]), t, t)
                for i in range(t + 1, nrows):
                    if S[i][t] and abs(S[i][t]) < best[0]:
                        best = (abs(S[i][t]), i, t)
                for j in range(t + 1, ncols):
                    if S[t][j] and abs(S[t][j]) < best[0]:
                        best = (abs(S[t][j]), t, j)
                _, i, j = best
                row_swap(t, i)
                col_swap(t, j)
            if S[t][t] < 0:
                row_neg(t)
            t += 1
        self.S, self.P, self.Pinv, self.Q, self.Qinv = S, P, Pinv, Q, Qinv
        self.rank = t
        self.diag = [S[i][i] for i in range(t)]


def smith_diagonal(A: Matrix, nrows: int, ncols: int) -> Tuple[int, List[int]]:
    s = SNF(A, nrows, ncols)
    return s.rank, s.diag
