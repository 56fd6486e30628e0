"""Integer relative cubical homology H_*(N, L) of cube-set pairs.

The chain complex uses every face of every cube of N that is not a face of a
cube of L.  It is shrunk by eliminating boundary entries equal to +-1 (free
faces first, then general unit pivots), which is an exact chain equivalence;
the small residue is finished with a Smith normal form.  The elimination log
is kept so that homology generators can be lifted back to cubical chains and
homology coordinates can be read off any cycle through cocycles.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .cubical import CubeSet, Grid
from .errors import ConleyError, NotCellular, NotNested
from .snf import SNF, Matrix, det, identity, matmul

Chain = Dict[int, int]


# ---------------------------------------------------------------------------
# cell encoding: key = linear(vertex in (res+1)-lattice) * 2**d + axis mask

class CellCodec:
    def __init__(self, grid: Grid):
        self.grid = grid
        self.d = grid.dim
        self.vshape = tuple(r + 1 for r in grid.res)
        self.nmask = 1 << self.d
        self._popcount = np.array([bin(m).count("1") for m in range(self.nmask)], dtype=np.int64)

    def encode(self, verts: np.ndarray, masks) -> np.ndarray:
        vl = np.ravel_multi_index(tuple(np.asarray(verts, dtype=np.int64).T), self.vshape)
        return vl * self.nmask + np.asarray(masks, dtype=np.int64)

    def decode(self, keys) -> Tuple[np.ndarray, np.ndarray]:
        keys = np.asarray(keys, dtype=np.int64)
        masks = keys % self.nmask
        verts = np.stack(np.unravel_index(keys // self.nmask, self.vshape), axis=-1)
        return verts, masks

    def dim_of(self, keys) -> np.ndarray:
        return self._popcount[np.asarray(keys, dtype=np.int64) % self.nmask]

    def closure(self, S: CubeSet) -> np.ndarray:
        """Sorted keys of all faces of the cubes of ``S``."""
        cubes = S.multi_indices()
        if cubes.shape[0] == 0:
            return np.zeros(0, dtype=np.int64)
        out = []
        for mask in range(self.nmask):
            free = [a for a in range(self.d) if not (mask >> a) & 1]
            for bits in itertools.product((0, 1), repeat=len(free)):
                off = np.zeros(self.d, dtype=np.int64)
                for a, b in zip(free, bits):
                    off[a] = b
                out.append(self.encode(cubes + off, np.full(cubes.shape[0], mask)))
        return np.unique(np.concatenate(out))

    def boundary_entries(self, keys: np.ndarray):
        """(cell, face, coefficient) triples of the cubical boundary of ``keys``."""
        verts, masks = self.decode(keys)
        cells, faces, coefs = [], [], []
        for a in range(self.d):
            has = ((masks >> a) & 1).astype(bool)
            if not has.any():
                continue
            # position of axis a among the axes of the cell
            below = masks & ((1 << a) - 1)
            pos = self._popcount[below]
            sign = np.where(pos % 2 == 0, 1, -1)
            k = keys[has]
            v = verts[has]
            m = masks[has] & ~(1 << a)
            s = sign[has]
            lowf = self.encode(v, m)
            vhi = v.copy()
            vhi[:, a] += 1
            highf = self.encode(vhi, m)
            cells += [k, k]
            faces += [lowf, highf]
            coefs += [-s, s]
        if not cells:
            z = np.zeros(0, dtype=np.int64)
            return z, z, z
        return np.concatenate(cells), np.concatenate(faces), np.concatenate(coefs)

    def center(self, key: int) -> np.ndarray:
        v, m = self.decode(np.array([key]))
        half = np.array([(int(m[0]) >> a) & 1 for a in range(self.d)]) * 0.5
        return self.grid.lo + (v[0] + half) * self.grid.widths


# ---------------------------------------------------------------------------

@dataclass
class HomologySignature:
    """Per-degree free rank and torsion coefficients."""

    degrees: Dict[int, Tuple[int, Tuple[int, ...]]] = field(default_factory=dict)
    unpointed: bool = False

    def __post_init__(self):
        clean = {}
        for k, (r, tors) in self.degrees.items():
            tors = tuple(sorted(int(t) for t in tors if int(t) != 1))
            if any(t < 2 for t in tors):
                raise ConleyError("torsion coefficients must be >= 2")
            if r < 0:
                raise ConleyError("free rank must be nonnegative")
            if r or tors:
                clean[int(k)] = (int(r), tors)
        self.degrees = dict(sorted(clean.items()))

    def rank(self, k: int) -> int:
        return self.degrees.get(k, (0, ()))[0]

    def torsion(self, k: int) -> Tuple[int, ...]:
        return self.degrees.get(k, (0, ()))[1]

    def is_zero(self) -> bool:
        return not self.degrees

    def betti(self) -> Dict[int, int]:
        return {k: r for k, (r, _) in self.degrees.items() if r}

    def euler(self) -> int:
        return sum((-1) ** k * r for k, (r, _) in self.degrees.items())

    def __eq__(self, other):
        return isinstance(other, HomologySignature) and self.degrees == other.degrees

    def to_json(self):
        return {str(k): [r, list(t)] for k, (r, t) in self.degrees.items()}

    @classmethod
    def from_json(cls, d) -> "HomologySignature":
        return cls({int(k): (int(v[0]), tuple(v[1])) for k, v in d.items()})

    def __repr__(self):
        return f"HomologySignature({self.to_json()})"


@dataclass
class _Elim:
    deg_b: int
    a: int
    b: int
    u: int
    bd_a: Chain
    cob_b: Chain


class PairHomology:
    """Homology of the pair (N, L) with generators and coordinate cocycles."""

    def __init__(self, N: CubeSet, L: Optional[CubeSet] = None, check: bool = True):
        if L is None:
            L = CubeSet.empty(N.grid)
        if N.grid != L.grid:
            raise ConleyError("N and L live on different grids")
        if not L.issubset(N):
            raise NotNested("L is not contained in N", witnesses=(L - N).to_json()[:20])
        self.N, self.L = N, L
        self.grid = N.grid
        self.codec = CellCodec(N.grid)
        d = self.grid.dim
        cN = self.codec.closure(N)
        cL = self.codec.closure(L)
        rel = np.setdiff1d(cN, cL, assume_unique=True)
        self.cells = rel
        dims = self.codec.dim_of(rel)
        self.chain_ranks = {k: int((dims == k).sum()) for k in range(d + 1)}
        self._cellset = set(rel.tolist())
        self._dim = dict(zip(rel.tolist(), dims.tolist()))
        self._assemble(check)
        self._reduce()
        self._finish()

    # assembly ---------------------------------------------------------------
    def _assemble(self, check: bool) -> None:
        cells, faces, coefs = self.codec.boundary_entries(self.cells)
        if faces.size:
            keep = np.isin(faces, self.cells, assume_unique=False)
            cells, faces, coefs = cells[keep], faces[keep], coefs[keep]
        bd: Dict[int, Chain] = {c: {} for c in self.cells.tolist()}
        cob: Dict[int, Chain] = {c: {} for c in self.cells.tolist()}
        for c, f, s in zip(cells.tolist(), faces.tolist(), coefs.tolist()):
            bd[c][f] = s
            cob[f][c] = s
        self._bd0 = {c: dict(v) for c, v in bd.items()} if check else None
        if check:
            for c, faces_c in bd.items():
                acc: Chain = {}
                for f, s in faces_c.items():
                    for g, t in bd[f].items():
                        acc[g] = acc.get(g, 0) + s * t
                if any(acc.values()):
                    raise ConleyError("boundary of boundary is nonzero")
        self.bd, self.cob = bd, cob

    # reduction --------------------------------------------------------------
    def _eliminate(self, a: int, b: int) -> None:
        bd, cob = self.bd, self.cob
        u = bd[a][b]
        bd_a = dict(bd[a])
        cob_b = dict(cob[b])
        self.log.append(_Elim(self._dim[b], a, b, u, bd_a, cob_b))
        for c, lam in cob_b.items():
            if c == a:
                continue
            factor = lam * u
            bc = bd[c]
            for f, s in bd_a.items():
                nv = bc.get(f, 0) - factor * s
                if nv:
                    bc[f] = nv
                    cob[f][c] = nv
                else:
                    bc.pop(f, None)
                    cob[f].pop(c, None)
            self._touched.append(c)
        for dcell in list(cob[a].keys()):
            bd[dcell].pop(a, None)
            self._touched.append(dcell)
        for f in bd_a:
            cob[f].pop(a, None)
            self._touched.append(f)
        for g in list(bd[b].keys()):
            cob[g].pop(b, None)
            self._touched.append(g)
        del bd[a], cob[a], bd[b], cob[b]

    def _free_pair(self, x: int):
        """A unit pair (a, b) involving ``x`` that causes no fill-in, if any."""
        bd, cob = self.bd, self.cob
        if x not in bd:
            return None
        co = cob[x]
        if len(co) == 1:
            (a, s), = co.items()
            if abs(s) == 1:
                return a, x
        fa = bd[x]
        if len(fa) == 1:
            (b, s), = fa.items()
            if abs(s) == 1:
                return x, b
        return None

    def _reduce(self) -> None:
        self.log: List[_Elim] = []
        self._touched: List[int] = []
        queue = deque(sorted(self.bd.keys()))
        while True:
            while queue:
                x = queue.popleft()
                pair = self._free_pair(x)
                if pair is None:
                    continue
                self._eliminate(*pair)
                queue.extend(self._touched)
                self._touched = []
            # no free pair left: pick the unit pivot with least fill-in
            best = None
            for a in sorted(self.bd.keys()):
                fa = self.bd[a]
                for b, s in fa.items():
                    if abs(s) == 1:
                        cost = (len(fa) - 1) * (len(self.cob[b]) - 1)
                        if best is None or cost < best[0]:
                            best = (cost, a, b)
                if best is not None and best[0] == 0:
                    break
            if best is None:
                break
            self._eliminate(best[1], best[2])
            queue.extend(self._touched)
            self._touched = []

    # finishing with SNF ----------------------------------------------------
    def _finish(self) -> None:
        d = self.grid.dim
        rem = {k: sorted(c for c in self.bd if self._dim[c] == k) for k in range(d + 1)}
        pos = {k: {c: i for i, c in enumerate(rem[k])} for k in rem}
        D: Dict[int, Matrix] = {}
        for k in range(d + 2):
            rows = rem.get(k - 1, [])
            cols = rem.get(k, [])
            M = [[0] * len(cols) for _ in rows]
            for j, c in enumerate(cols):
                for f, s in self.bd[c].items():
                    M[pos[k - 1][f]][j] = s
            D[k] = M
        self.reduced_cells = rem
        degrees = {}
        self._gens: Dict[int, List[Chain]] = {}
        self._cocycles: Dict[int, List[Chain]] = {}
        for k in range(d + 1):
            nk = len(rem[k])
            if nk == 0:
                self._gens[k], self._cocycles[k] = [], []
                continue
            up = SNF(D[k + 1], nk, len(rem.get(k + 1, [])))
            r = up.rank
            torsion = tuple(v for v in up.diag if v != 1)
            # D_k expressed in the basis given by the columns of P^{-1}
            Dk = D[k]
            rows_prev = len(rem.get(k - 1, []))
            M = matmul(Dk, up.Pinv) if rows_prev else [[0] * nk for _ in range(0)]
            if rows_prev and any(M[i][j] for i in range(rows_prev) for j in range(r)):
                raise ConleyError("reduced complex violates boundary of boundary")
            rest = nk - r
            if rows_prev:
                M2 = [row[r:] for row in M]
                ker = SNF(M2, rows_prev, rest)
                p = ker.rank
                Q2, Q2inv = ker.Q, ker.Qinv
            else:
                p = 0
                Q2, Q2inv = identity(rest), identity(rest)
            f = rest - p
            gens_red = []
            for j in range(f):
                z2 = [Q2[i][p + j] for i in range(rest)]
                znew = [0] * r + z2
                g = [sum(up.Pinv[i][t] * znew[t] for t in range(nk)) for i in range(nk)]
                gens_red.append(g)
            # coordinate functionals: Q2inv[p:] @ P[r:]
            Prest = up.P[r:]
            coords_red = matmul([row[:] for row in Q2inv[p:]], Prest) if f else []
            degrees[k] = (f, torsion)
            cells_k = rem[k]
            self._gens[k] = [self._lift_chain(k, {cells_k[i]: v for i, v in enumerate(g) if v})
                             for g in gens_red]
            self._cocycles[k] = [self._pull_cochain(k, {cells_k[i]: v for i, v in enumerate(row) if v})
                                 for row in coords_red]
        self.signature = HomologySignature(degrees, unpointed=(len(self.L) == 0))

    def _lift_chain(self, k: int, chain: Chain) -> Chain:
        out = dict(chain)
        for e in reversed(self.log):
            if e.deg_b + 1 != k:
                continue
            tot = 0
            for c, lam in e.cob_b.items():
                if c != e.a and c in out:
                    tot += out[c] * lam
            if tot:
                out[e.a] = out.get(e.a, 0) - tot * e.u
        return {c: v for c, v in out.items() if v}

    def _pull_cochain(self, k: int, phi: Chain) -> Chain:
        out = dict(phi)
        for e in reversed(self.log):
            if e.deg_b != k:
                continue
            tot = 0
            for f, s in e.bd_a.items():
                if f != e.b:
                    v = out.get(f)
                    if v:
                        tot += s * v
            if tot:
                out[e.b] = -e.u * tot
        return {c: v for c, v in out.items() if v}

    # public API -------------------------------------------------------------
    def rank(self, k: int) -> int:
        return self.signature.rank(k)

    def generators(self, k: int) -> List[Chain]:
        return self._gens.get(k, [])

    def cocycles(self, k: int) -> List[Chain]:
        return self._cocycles.get(k, [])

    def contains_cell(self, key: int) -> bool:
        return key in self._cellset

    def restrict(self, chain: Chain) -> Chain:
        """Drop cells that are not in the relative complex (i.e. carried by L)."""
        return {c: v for c, v in chain.items() if v and c in self._cellset}

    def boundary(self, chain: Chain) -> Chain:
        """Relative boundary of a chain of relative cells."""
        keys = np.array(sorted(chain), dtype=np.int64)
        out: Chain = {}
        if keys.size == 0:
            return out
        cells, faces, coefs = self.codec.boundary_entries(keys)
        for c, f, s in zip(cells.tolist(), faces.tolist(), coefs.tolist()):
            if f in self._cellset:
                out[f] = out.get(f, 0) + chain[c] * s
        return {f: v for f, v in out.items() if v}

    def is_cycle(self, chain: Chain) -> bool:
        return not self.boundary(self.restrict(chain))

    def coords(self, k: int, chain: Chain) -> List[int]:
        return [sum(v * phi.get(c, 0) for c, v in chain.items()) for phi in self.cocycles(k)]

    def euler_chain(self) -> int:
        return sum((-1) ** k * n for k, n in self.chain_ranks.items())


def relative_homology(N: CubeSet, L: Optional[CubeSet] = None) -> HomologySignature:
    return PairHomology(N, L).signature


# ---------------------------------------------------------------------------
# homology morphisms

@dataclass
class HomologyMorphism:
    """Graded integer matrices H_k(source) -> H_{k+shift}(target), free parts."""

    matrices: Dict[int, Matrix]
    shift: int = 0
    source_sig: Optional[HomologySignature] = None
    target_sig: Optional[HomologySignature] = None

    def matrix(self, k: int) -> Matrix:
        return self.matrices.get(k, [])

    def compose(self, first: "HomologyMorphism") -> "HomologyMorphism":
        """``self`` after ``first``."""
        out = {}
        for k, A in first.matrices.items():
            B = self.matrices.get(k + first.shift)
            if B is None:
                continue
            out[k] = matmul(B, A) if A and B else [[0] * (len(A[0]) if A else 0) for _ in B]
        return HomologyMorphism(out, self.shift + first.shift, first.source_sig, self.target_sig)

    def is_isomorphism(self) -> bool:
        for A in self.matrices.values():
            if len(A) != (len(A[0]) if A else 0):
                return False
            if A and abs(det(A)) != 1:
                return False
        return True

    def determinants(self) -> Dict[int, int]:
        return {k: det(A) for k, A in self.matrices.items()
                if A and len(A) == len(A[0])}

    def to_json(self):
        return {"shift": self.shift,
                "matrices": {str(k): A for k, A in sorted(self.matrices.items())}}


def identity_cell_map(key: int) -> Chain:
    return {key: 1}


def chain_map_matrices(src: PairHomology, dst: PairHomology,
                       cell_map: Callable[[int], Chain] = identity_cell_map,
                       check: bool = True) -> HomologyMorphism:
    """Matrices of the map induced by a chain-level cell map.

    Images are reduced modulo the target's L.  With ``check`` each image of a
    generator is verified to be a relative cycle.
    """
    mats = {}
    for k in range(src.grid.dim + 1):
        rows = dst.rank(k)
        cols = src.rank(k)
        M = [[0] * cols for _ in range(rows)]
        for j, g in enumerate(src.generators(k)):
            img: Chain = {}
            for c, v in g.items():
                for t, s in cell_map(c).items():
                    img[t] = img.get(t, 0) + v * s
            img = dst.restrict(img)
            if check and dst.boundary(img):
                raise NotCellular("image of a homology generator is not a relative cycle",
                                  witnesses=[int(k), j])
            col = dst.coords(k, img)
            for i in range(rows):
                M[i][j] = col[i]
        if rows or cols:
            mats[k] = M
    return HomologyMorphism(mats, 0, src.signature, dst.signature)


def pair_map(src: PairHomology, dst: PairHomology) -> HomologyMorphism:
    """Map induced by the identity on cells (inclusions, quotients, collapses)."""
    if src.grid != dst.grid:
        raise ConleyError("pairs live on different grids")
    return chain_map_matrices(src, dst)
