"""Independent oracles for the test-suite.

Homology is recomputed from scratch: cells of the closed cubes are enumerated
directly, boundary matrices are assembled densely, and a plain Smith-form
elimination gives ranks and torsion.  Nothing here imports the package's homology
code.
"""
from __future__ import annotations

import itertools
from typing import Dict, List, Sequence, Tuple

import numpy as np
from sympy import Matrix


def _cells_of_cube(c: Sequence[int]):
    d = len(c)
    for k in range(d + 1):
        for S in itertools.combinations(range(d), k):
            free = [i for i in range(d) if i not in S]
            for bits in itertools.product((0, 1), repeat=len(free)):
                v = list(c)
                for i, b in zip(free, bits):
                    v[i] += b
                yield (tuple(v), S)


def closure(cubes) -> set:
    out = set()
    for c in cubes:
        out.update(_cells_of_cube(tuple(int(x) for x in c)))
    return out


def cell_boundary(cell):
    v, S = cell
    out = {}
    for j, a in enumerate(S):
        rest = S[:j] + S[j + 1:]
        sgn = (-1) ** j
        up = list(v)
        up[a] += 1
        out[(tuple(up), rest)] = out.get((tuple(up), rest), 0) + sgn
        out[(v, rest)] = out.get((v, rest), 0) - sgn
    return out


def invariant_factors(M: List[List[int]]) -> List[int]:
    """Nonzero diagonal of the Smith form, by elimination on the smallest pivot.

    Always pivoting on the entry of least absolute value keeps coefficients
    small, which general-purpose routines do not guarantee on tensor products.
    """
    A = [list(map(int, row)) for row in M]
    if not A or not A[0]:
        return []
    rows, cols = len(A), len(A[0])
    diag = []
    t = 0
    while t < min(rows, cols):
        nz = [(abs(A[i][j]), i, j) for i in range(t, rows) for j in range(t, cols) if A[i][j]]
        if not nz:
            break
        _, i, j = min(nz)
        A[t], A[i] = A[i], A[t]
        for row in A:
            row[t], row[j] = row[j], row[t]
        while True:
            p = A[t][t]
            for i in range(t + 1, rows):
                q = A[i][t] // p
                if q:
                    A[i] = [a - q * b for a, b in zip(A[i], A[t])]
            for j in range(t + 1, cols):
                q = A[t][j] // p
                if q:
                    for row in A:
                        row[j] -= q * row[t]
            rest = [(abs(A[i][t]), i, t) for i in range(t + 1, rows) if A[i][t]]
            rest += [(abs(A[t][j]), t, j) for j in range(t + 1, cols) if A[t][j]]
            if rest:
                _, i, j = min(rest)
                if i != t:
                    A[t], A[i] = A[i], A[t]
                else:
                    for row in A:
                        row[t], row[j] = row[j], row[t]
                continue
            bad = [(i, j) for i in range(t + 1, rows) for j in range(t + 1, cols) if A[i][j] % p]
            if not bad:
                break
            # fold a row whose entry p does not divide into the pivot row
            i = bad[0][0]
            A[t] = [a + b for a, b in zip(A[t], A[i])]
        diag.append(abs(A[t][t]))
        t += 1
    return diag


def homology_of_complex(dims: Dict[int, int], bnd: Dict[int, List[List[int]]]) -> Dict[int, Tuple[int, Tuple[int, ...]]]:
    """``bnd[k]`` is the matrix of C_k -> C_{k-1} (rows index C_{k-1})."""
    facs = {k: invariant_factors(M) for k, M in bnd.items()}
    out = {}
    for k, n in dims.items():
        rk_out = len(facs.get(k, []))
        rk_in = len(facs.get(k + 1, []))
        free = n - rk_out - rk_in
        tors = tuple(sorted(f for f in facs.get(k + 1, []) if f > 1))
        if free or tors:
            out[k] = (free, tors)
    return out


def relative_cubical_homology(N_cubes, L_cubes=()) -> Dict[int, Tuple[int, Tuple[int, ...]]]:
    cells = sorted(closure(N_cubes) - closure(L_cubes))
    by_dim: Dict[int, list] = {}
    for c in cells:
        by_dim.setdefault(len(c[1]), []).append(c)
    index = {k: {c: i for i, c in enumerate(v)} for k, v in by_dim.items()}
    dims = {k: len(v) for k, v in by_dim.items()}
    bnd = {}
    for k, cs in by_dim.items():
        if k == 0 or k - 1 not in index:
            continue
        M = [[0] * len(cs) for _ in range(dims[k - 1])]
        for j, c in enumerate(cs):
            for f, s in cell_boundary(c).items():
                i = index[k - 1].get(f)
                if i is not None:
                    M[i][j] += s
        bnd[k] = M
    return homology_of_complex(dims, bnd)


def as_signature_json(h) -> dict:
    return {str(k): [r, list(t)] for k, (r, t) in sorted(h.items())}


# ---------------------------------------------------------------------------
# random chain complexes for Kunneth checks

def random_unimodular(n: int, rng) -> np.ndarray:
    U = np.eye(n, dtype=np.int64)
    for _ in range(3 * n):
        i, j = rng.choice(n, size=2, replace=False) if n > 1 else (0, 0)
        if i == j:
            continue
        U[i] += int(rng.integers(-2, 3)) * U[j]
    return U


def random_complex(rng, max_deg: int = 2, max_cells: int = 6):
    """Free complex with chosen elementary divisors, disguised by unimodular changes of basis.

    In degree k the first r_k basis vectors map onto multiples of the basis
    vectors r_{k-1} .. r_{k-1} + r_k - 1 of degree k - 1.
    """
    dims = {k: int(rng.integers(0, max_cells + 1)) for k in range(max_deg + 1)}
    r = {0: 0}
    for k in range(1, max_deg + 1):
        cap = min(dims[k], dims[k - 1] - r[k - 1])
        r[k] = int(rng.integers(0, cap + 1)) if cap > 0 else 0
    base = {}
    for k in range(1, max_deg + 1):
        D = np.zeros((dims[k - 1], dims[k]), dtype=np.int64)
        for t in range(r[k]):
            D[r[k - 1] + t, t] = int(rng.choice([1, 1, 2, 3, 4]))
        base[k] = D
    U = {k: random_unimodular(n, rng) for k, n in dims.items()}
    Uinv = {k: np.array(Matrix(U[k].tolist()).inv().tolist(), dtype=np.int64) if dims[k] else U[k]
            for k in dims}
    bnd = {k: Uinv[k - 1] @ base[k] @ U[k] for k in base}
    return dims, bnd


def tensor_complex(A, B):
    dA, bA = A
    dB, bB = B
    dims = {}
    for p, m in dA.items():
        for q, n in dB.items():
            dims[p + q] = dims.get(p + q, 0) + m * n
    offs = {}
    for s in dims:
        o = 0
        for p in sorted(dA):
            q = s - p
            if q in dB:
                offs[(p, q)] = o
                o += dA[p] * dB[q]
    bnd = {}
    for s in dims:
        if s - 1 not in dims:
            continue
        M = np.zeros((dims[s - 1], dims[s]), dtype=np.int64)
        for p in sorted(dA):
            q = s - p
            if q not in dB:
                continue
            m, n = dA[p], dB[q]
            Im, In = np.eye(m, dtype=np.int64), np.eye(n, dtype=np.int64)
            col = offs[(p, q)]
            if p >= 1 and (p - 1, q) in offs:
                blk = np.kron(bA[p], In)
                row = offs[(p - 1, q)]
                M[row:row + blk.shape[0], col:col + blk.shape[1]] += blk
            if q >= 1 and (p, q - 1) in offs:
                blk = (-1) ** p * np.kron(Im, bB[q])
                row = offs[(p, q - 1)]
                M[row:row + blk.shape[0], col:col + blk.shape[1]] += blk
        bnd[s] = M
    return dims, bnd


def complex_homology(C):
    dims, bnd = C
    return homology_of_complex(dims, {k: M.tolist() for k, M in bnd.items() if M.size})
