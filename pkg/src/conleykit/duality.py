"""Duality maps on isolating blocks.

Point level: collar retractions a, b and the maps
    eps_hat([y] ^ [x]) = [b(y) - a(x)]   (basepoint unless |b(y) - a(x)| < delta)
    eta_hat(x)         = [x] ^ [x]       (basepoint outside N).

Homology level: with X = N/L (forward exit set L) and Xbar = N/Lbar (reversed
exit set Lbar), eps induces a pairing H_k(Xbar) x H_{d-k}(X) -> Z and eta a
class in H_{d-k}(X) (x) H_k(Xbar).  The pairing is computed as a signed
intersection number: a cycle of (N, Lbar) is pushed off a collar of L (the
role of b), a cycle of (N, L) is pushed off a collar of Lbar (the role of a)
and shifted by half a cell, so that a k-cube and a (d-k)-cube meet in at most
one point.  The eta class is the cubical diagonal of the fundamental chain of
N.  The zig-zag identity then reads C P = (-1)^{k(d-k)} I.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .conley import BASEPOINT, _closed_member
from .cubical import (CubeSet, Grid, boundary_faces, face_distances, nearest_face_distance,
                      topological_interior)
from .errors import BallTooSmall, CollarTooThin, ConleyError, LevelUnavailable, ReportFail
from .homology import Chain, PairHomology, pair_map
from .snf import Matrix, det, matmul, transpose


# ---------------------------------------------------------------------------
# point level

def _owned_faces(N: CubeSet, S: CubeSet, other: CubeSet):
    """Faces of S in the normal classes carried by S outside ``other``."""
    own = {(f[0], f[1]) for f in boundary_faces(N, S - other)}
    return [f for f in boundary_faces(N, S) if (f[0], f[1]) in own]


@dataclass
class BlockDualityData:
    N: CubeSet
    L: CubeSet
    Lbar: CubeSet
    delta: float
    faces_L: list = field(repr=False, default_factory=list)
    faces_Lbar: list = field(repr=False, default_factory=list)

    def _push(self, P, faces) -> np.ndarray:
        P = np.atleast_2d(np.asarray(P, dtype=float))
        t = face_distances(P, faces)
        dl = self.delta
        out = P.copy()
        # per normal class, distance t goes to delta + 2t/3: off the open
        # delta-collar and the identity from 3 delta on
        shift = np.where(t < 3.0 * dl, dl - t / 3.0, 0.0)
        for c in range(t.shape[1]):
            a, side = divmod(c, 2)
            out[:, a] -= (1 if side else -1) * shift[:, c]
        return out

    def a(self, X) -> np.ndarray:
        """Retraction off the delta-collar of Lbar."""
        return self._push(X, self.faces_Lbar)

    def b(self, Y) -> np.ndarray:
        """Retraction off the delta-collar of L."""
        return self._push(Y, self.faces_L)

    def swapped(self) -> "BlockDualityData":
        return BlockDualityData(self.N, self.Lbar, self.L, self.delta, self.faces_Lbar, self.faces_L)

    def sample_checks(self, n: int = 400, seed: int = 0) -> Dict[str, bool]:
        rng = np.random.default_rng(seed)
        g = self.N.grid
        cubes = self.N.indices
        pick = cubes[rng.integers(0, cubes.size, size=n)]
        P = g.lo + (g.multi(pick) + rng.uniform(0, 1, size=(n, g.dim))) * g.widths
        P = np.concatenate([P, g.centers(cubes)])
        aP, bP = self.a(P), self.b(P)
        dl = self.delta
        inL = _closed_member(self.L, P)
        inLb = _closed_member(self.Lbar, P)
        tN = nearest_face_distance(P, self.faces_L + self.faces_Lbar)
        far = tN >= 3.0 * dl
        out = {
            "a_moves_less_than_2delta": bool(np.all(np.linalg.norm(aP - P, axis=1) < 2 * dl)),
            "b_moves_less_than_2delta": bool(np.all(np.linalg.norm(bP - P, axis=1) < 2 * dl)),
            "a_identity_off_collar": bool(np.allclose(aP[far], P[far])),
            "b_identity_off_collar": bool(np.allclose(bP[far], P[far])),
            "a_keeps_L": bool(np.all(_closed_member(self.L, aP[inL]))),
            "b_keeps_Lbar": bool(np.all(_closed_member(self.Lbar, bP[inLb]))),
            "a_stays_in_N": bool(np.all(_closed_member(self.N, aP))),
            "b_stays_in_N": bool(np.all(_closed_member(self.N, bP))),
        }
        ta = nearest_face_distance(aP, self.faces_Lbar)
        tb = nearest_face_distance(bP, self.faces_L)
        out["a_avoids_Lbar_collar"] = bool(np.all(ta >= dl - 1e-12))
        out["b_avoids_L_collar"] = bool(np.all(tb >= dl - 1e-12))
        return out


def cell_diagonal(grid: Grid) -> float:
    return float(np.linalg.norm(grid.widths))


def build_retractions(N: CubeSet, L: CubeSet, Lbar: CubeSet, delta: Optional[float] = None) -> BlockDualityData:
    """Collar retractions a, b for a block with exit sets L (forward) and Lbar (reversed)."""
    g = N.grid
    if delta is None:
        delta = 2.0 * cell_diagonal(g)
    if delta < 2.0 * cell_diagonal(g) - 1e-12:
        raise CollarTooThin("delta must be at least two cell diagonals", witnesses=[delta])
    layers = int(math.ceil(3.0 * delta / float(np.min(g.widths))))
    core = N
    for _ in range(layers):
        core = topological_interior(core)
        if not core:
            break
    opened = core.dilate(layers) & N if core else CubeSet.empty(g)
    thin = N - opened
    if not core or thin:
        raise CollarTooThin("block is thinner than 6 delta", witnesses=thin.to_json()[:50])
    return BlockDualityData(N, L, Lbar, float(delta), _owned_faces(N, L, Lbar),
                            _owned_faces(N, Lbar, L))


def epsilon_hat(data: BlockDualityData, y, x):
    v = data.b(np.asarray(y, dtype=float)[None, :])[0] - data.a(np.asarray(x, dtype=float)[None, :])[0]
    if np.linalg.norm(v) < data.delta:
        return v
    return BASEPOINT


def eta_hat(data: BlockDualityData, R: float, x):
    g = data.N.grid
    idx = data.N.multi_indices()
    corners_lo = g.lo + idx * g.widths
    corners_hi = corners_lo + g.widths
    far = np.maximum(np.abs(corners_lo), np.abs(corners_hi))
    if idx.size and float(np.max(np.linalg.norm(far, axis=1))) > R / 2.0:
        raise BallTooSmall("N is not contained in the ball of radius R/2", witnesses=[R])
    x = np.asarray(x, dtype=float)
    if _closed_member(data.N, x[None, :])[0]:
        return (x.copy(), x.copy())
    return BASEPOINT


# ---------------------------------------------------------------------------
# homology level

def inverse_unimodular(M: Matrix) -> Matrix:
    n = len(M)
    if n == 0:
        return []
    if abs(det(M)) != 1:
        raise ConleyError("matrix is not unimodular")
    A = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(M)]
    for c in range(n):
        p = next(r for r in range(c, n) if A[r][c] != 0)
        A[c], A[p] = A[p], A[c]
        pv = A[c][c]
        A[c] = [v / pv for v in A[c]]
        for r in range(n):
            if r != c and A[r][c] != 0:
                f = A[r][c]
                A[r] = [u - f * w for u, w in zip(A[r], A[c])]
    return [[int(v) for v in row[n:]] for row in A]


@dataclass
class ExcisedBasis:
    """Representatives of a basis of H_k(N, S) supported away from a collar."""

    full: PairHomology
    excised: PairHomology
    reps: Dict[int, List[Chain]]
    dets: Dict[int, int]


def excised_basis(N: CubeSet, S: CubeSet, avoid: CubeSet, layers: int,
                  full: Optional[PairHomology] = None) -> ExcisedBasis:
    """Cycles of (N, S) pushed off the ``layers``-collar of ``avoid``."""
    nu = avoid.dilate(layers) & N if layers > 0 else avoid
    full = full or PairHomology(N, S)
    ex = PairHomology(N - nu, S - nu)
    E = pair_map(ex, full)
    reps, dets = {}, {}
    for k in range(N.grid.dim + 1):
        if full.rank(k) == 0 and ex.rank(k) == 0:
            continue
        M = E.matrix(k)
        if len(M) != (len(M[0]) if M else 0) or abs(det(M)) != 1:
            raise ReportFail(f"excision is not an isomorphism in degree {k}", witnesses=M)
        dets[k] = det(M)
        Mi = inverse_unimodular(M)
        gens = ex.generators(k)
        out = []
        for j in range(len(Mi)):
            ch: Chain = {}
            for m, gch in enumerate(gens):
                c = Mi[m][j]
                if c:
                    for key, v in gch.items():
                        ch[key] = ch.get(key, 0) + c * v
            out.append({c: v for c, v in ch.items() if v})
        reps[k] = out
    return ExcisedBasis(full, ex, reps, dets)


def _perm_sign(S: int, d: int) -> int:
    order = [a for a in range(d) if (S >> a) & 1] + [a for a in range(d) if not (S >> a) & 1]
    inv = sum(1 for i in range(d) for j in range(i + 1, d) if order[i] > order[j])
    return -1 if inv % 2 else 1


def intersection_number(codec, d: int, Y: Chain, X: Chain) -> int:
    """Signed count of meetings of Y with X shifted by half a cell in every axis."""
    if not Y or not X:
        return 0
    keys = np.array(list(Y), dtype=np.int64)
    verts, masks = codec.decode(keys)
    full = (1 << d) - 1
    comp = full ^ masks
    u = verts.copy()
    for a in range(d):
        u[:, a] -= (comp >> a) & 1
    ok = np.all(u >= 0, axis=1)
    tot = 0
    if not ok.any():
        return 0
    xk = codec.encode(u[ok], comp[ok])
    for key, m, k2 in zip(keys[ok].tolist(), masks[ok].tolist(), xk.tolist()):
        xv = X.get(k2)
        if xv:
            tot += Y[key] * xv * _perm_sign(m, d)
    return tot


def pairing_matrix(codec, d: int, Ys: Sequence[Chain], Xs: Sequence[Chain]) -> Matrix:
    return [[intersection_number(codec, d, y, x) for x in Xs] for y in Ys]


def diagonal_matrix(N: CubeSet, HX: PairHomology, HY: PairHomology, p: int) -> Matrix:
    """Coefficients of the cubical diagonal of [N] on H_p(X) (x) H_{d-p}(Xbar)."""
    d = N.grid.dim
    codec = HX.codec
    cx, cy = HX.cocycles(p), HY.cocycles(d - p)
    C = [[0] * len(cy) for _ in cx]
    if not cx or not cy:
        return C
    full = (1 << d) - 1
    cubes = N.multi_indices()
    for S in range(full + 1):
        if bin(S).count("1") != p:
            continue
        sign = (-1) ** sum(sum(1 for b in range(a) if not (S >> b) & 1) for a in range(d) if (S >> a) & 1)
        left = codec.encode(cubes, np.full(len(cubes), S))
        up = cubes.copy()
        for a in range(d):
            if (S >> a) & 1:
                up[:, a] += 1
        right = codec.encode(up, np.full(len(cubes), full ^ S))
        for l, r in zip(left.tolist(), right.tolist()):
            for i, phi in enumerate(cx):
                a = phi.get(l)
                if not a:
                    continue
                for j, psi in enumerate(cy):
                    b = psi.get(r)
                    if b:
                        C[i][j] += sign * a * b
    return C


def zigzag_sign(k: int, d: int) -> int:
    return -1 if (k * (d - k)) % 2 else 1


def layers_for(delta: float, grid: Grid) -> int:
    return max(1, int(math.ceil(delta / float(np.max(grid.widths)) - 1e-9)))


@dataclass
class BlockMatrices:
    """Pairing P_k (rows H_k(N,Lbar), cols H_{d-k}(N,L)) and diagonal C_k."""

    P: Dict[int, Matrix]
    C: Dict[int, Matrix]
    dets: Dict[str, Dict[int, int]]


def block_matrices(N: CubeSet, L: CubeSet, Lbar: CubeSet, layers: int,
                   HX: Optional[PairHomology] = None, HY: Optional[PairHomology] = None) -> BlockMatrices:
    d = N.grid.dim
    ybase = excised_basis(N, Lbar, L, layers, HY)
    xbase = excised_basis(N, L, Lbar, layers, HX)
    HX, HY = xbase.full, ybase.full
    P, C = {}, {}
    for k in range(d + 1):
        ys = ybase.reps.get(k, [])
        xs = xbase.reps.get(d - k, [])
        if not ys and not xs:
            continue
        P[k] = pairing_matrix(HY.codec, d, ys, xs)
        C[k] = diagonal_matrix(N, HX, HY, d - k)
    return BlockMatrices(P, C, {"Y": ybase.dets, "X": xbase.dets})


def _identity(n: int) -> Matrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def _scaled(M: Matrix, s: int) -> Matrix:
    return [[s * v for v in row] for row in M]


@dataclass
class DualityReport:
    rank_symmetry: Dict[str, Dict]
    composites: List[Dict]
    triangles: List[Dict]
    pairing: Dict[str, Dict]
    delta_check: Dict
    notes: List[str] = field(default_factory=lambda: [
        "identities are checked as equalities of integer homology matrices"])

    @property
    def passed(self) -> bool:
        items = list(self.rank_symmetry.values()) + self.composites + self.triangles + list(self.pairing.values())
        items.append(self.delta_check)
        return all(i.get("pass", False) for i in items)

    def first_failure(self) -> Optional[str]:
        for name, group in (("rank_symmetry", self.rank_symmetry.items()),
                            ("pairing", self.pairing.items())):
            for k, v in group:
                if not v["pass"]:
                    return f"{name}[{k}]"
        for lst, name in ((self.composites, "composite"), (self.triangles, "triangle")):
            for v in lst:
                if not v["pass"]:
                    return f"{name} {v.get('id', '')}".strip()
        if not self.delta_check.get("pass", False):
            return "delta_halving"
        return None

    def to_json(self):
        return {"passed": self.passed, "rank_symmetry": self.rank_symmetry,
                "composites": self.composites, "triangles": self.triangles,
                "pairing": self.pairing, "delta_halving": self.delta_check, "notes": self.notes}


def verify_block_duality(N: CubeSet, L: CubeSet, Lbar: CubeSet, delta: Optional[float] = None,
                         strict: bool = True) -> DualityReport:
    """Rank symmetry, pairing nondegeneracy, zig-zag composite and delta-halving on one block."""
    g = N.grid
    d = g.dim
    if delta is None:
        delta = 2.0 * cell_diagonal(g)
    HX, HY = PairHomology(N, L), PairHomology(N, Lbar)
    ranks = {}
    for k in range(d + 1):
        a, b = HX.rank(k), HY.rank(d - k)
        ranks[str(k)] = {"forward": a, "reversed_dual": b, "pass": a == b}
    try:
        big = block_matrices(N, L, Lbar, layers_for(delta, g), HX, HY)
        small = block_matrices(N, L, Lbar, layers_for(delta / 2.0, g), HX, HY)
    except ReportFail as exc:
        if strict:
            raise
        # no collar-free basis: the pairing cannot be formed at all
        rep = DualityReport(ranks, [], [], {"excision": {"pass": False, "message": str(exc)}},
                            {"delta": delta, "pass": False})
        return rep
    pairing, comps = {}, []
    for k, P in big.P.items():
        sq = len(P) == (len(P[0]) if P else 0)
        dv = det(P) if sq else 0
        pairing[str(k)] = {"matrix": P, "det": dv, "pass": sq and abs(dv) == 1}
        CP = matmul(big.C[k], P) if P and big.C[k] else []
        want = _scaled(_identity(len(big.C[k])), zigzag_sign(k, d))
        comps.append({"id": f"k={k}", "C": big.C[k], "CP": CP, "expected": want, "pass": CP == want})
    same = big.P == small.P and big.C == small.C
    delta_check = {"delta": delta, "layers": [layers_for(delta, g), layers_for(delta / 2.0, g)], "pass": same}
    rep = DualityReport(ranks, comps, [], pairing, delta_check)
    if strict and not rep.passed:
        raise ReportFail("duality check failed: " + str(rep.first_failure()), witnesses=rep.to_json())
    return rep


def epsilon_symmetry(data: BlockDualityData, n: int = 200, seed: int = 0) -> Dict:
    """Sample eps_hat(y, x) against -eps_hat'(x, y) for the swapped data."""
    rng = np.random.default_rng(seed)
    g = data.N.grid
    cubes = data.N.indices
    sw = data.swapped()
    tested = bad = 0
    for _ in range(n):
        c = cubes[rng.integers(0, cubes.size)]
        y = g.lo + (g.multi(c) + rng.uniform(0, 1, g.dim)) * g.widths
        x = y + rng.uniform(-1, 1, g.dim) * data.delta
        u, v = epsilon_hat(data, y, x), epsilon_hat(sw, x, y)
        if u is BASEPOINT or v is BASEPOINT:
            bad += (u is BASEPOINT) != (v is BASEPOINT)
            continue
        tested += 1
        bad += not np.allclose(u, -v)
    return {"sampled": tested, "mismatches": int(bad), "pass": bad == 0}


def verify_duality(data: BlockDualityData, system=None, strict: bool = True) -> DualityReport:
    """Duality identities for one block, or for a pair of unfolded systems.

    ``system`` is ``None`` for the single-block case, else a pair
    ``(ind, pro)`` of unfolded systems sharing their blocks.
    """
    if system is None:
        rep = verify_block_duality(data.N, data.L, data.Lbar, data.delta, strict=False)
        rep.pairing["eps_hat_symmetry"] = epsilon_symmetry(data)
        samples = data.sample_checks()
        rep.pairing["retractions"] = {"checks": samples, "pass": all(samples.values())}
    else:
        ind, pro = system
        d = data.N.grid.dim
        k = d - next(iter(ind.objects[0].signature.degrees), 0)
        blocks = [(b.N, b.n_minus, b.n_plus) for b in ind.blocks]
        rep = system_duality(blocks, [f.matrix(d - k) for f in ind.connecting],
                             [f.matrix(k) for f in pro.connecting], k, strict=False).report
    if strict and not rep.passed:
        raise ReportFail("duality check failed: " + str(rep.first_failure()), witnesses=rep.to_json())
    return rep


# ---------------------------------------------------------------------------
# systems of blocks

@dataclass
class SystemDuality:
    """Pairings eps_{m,n} between pro level n and ind level m (m <= n)."""

    eps: Dict[Tuple[int, int], Matrix]
    degree: int
    report: DualityReport

    def matrix(self, m: int, n: int) -> Matrix:
        if (m, n) not in self.eps:
            raise LevelUnavailable(f"pairing at levels ({m}, {n}) was not computed")
        return self.eps[(m, n)]


def system_duality(blocks: Sequence[Tuple[CubeSet, CubeSet, CubeSet]],
                   ind_maps: Sequence[Matrix], pro_maps: Sequence[Matrix],
                   k: int, layers: int = 2, strict: bool = True) -> SystemDuality:
    """Pairings and compatibility triangles for a nested family of blocks.

    ``blocks[i] = (N, L, Lbar)``; ``ind_maps[i]`` is j_i: H_{d-k}(N_i, L_i) -> H_{d-k}(N_{i+1}, L_{i+1})
    and ``pro_maps[i]`` is jbar_i: H_k(N_{i+1}, Lbar_{i+1}) -> H_k(N_i, Lbar_i).
    """
    if not blocks:
        raise LevelUnavailable("no levels")
    g = blocks[0][0].grid
    d = g.dim
    ys, xs, HXs = [], [], []
    for N, L, Lb in blocks:
        yb = excised_basis(N, Lb, L, layers)
        xb = excised_basis(N, L, Lb, layers)
        ys.append(yb.reps.get(k, []))
        xs.append(xb.reps.get(d - k, []))
        HXs.append((xb.full, yb.full))
    codec = HXs[0][0].codec
    n_lv = len(blocks)
    eps = {}
    for n in range(n_lv):
        for m in range(n + 1):
            eps[(m, n)] = pairing_matrix(codec, d, ys[n], xs[m])

    def J(m, n):
        M = _identity(len(xs[m]))
        for i in range(m, n):
            M = matmul(ind_maps[i], M) if M else M
        return M

    tri, comps = [], []
    for n in range(n_lv):
        for m in range(n):
            lhs = matmul(eps[(m + 1, n)], ind_maps[m]) if eps[(m + 1, n)] else []
            tri.append({"id": f"eps[{m + 1},{n}] o (id ^ j_{m}) = eps[{m},{n}]",
                        "lhs": lhs, "rhs": eps[(m, n)], "pass": lhs == eps[(m, n)]})
    for n in range(n_lv - 1):
        for m in range(n + 1):
            lhs = matmul(transpose(pro_maps[n]), eps[(m, n)]) if eps[(m, n)] else []
            tri.append({"id": f"eps[{m},{n}] o (jbar_{n} ^ id) = eps[{m},{n + 1}]",
                        "lhs": lhs, "rhs": eps[(m, n + 1)], "pass": lhs == eps[(m, n + 1)]})
    sign = zigzag_sign(k, d)
    for n in range(n_lv):
        N, L, Lb = blocks[n]
        HX, HY = HXs[n]
        C = diagonal_matrix(N, HX, HY, d - k)
        for m in range(n + 1):
            CP = matmul(C, eps[(m, n)]) if C and eps[(m, n)] else []
            want = _scaled(J(m, n), sign)
            comps.append({"id": f"C[{n}] eps[{m},{n}] = j[{m},{n}]", "CP": CP,
                          "expected": want, "pass": CP == want})
    pairing = {}
    for n in range(n_lv):
        P = eps[(n, n)]
        sq = len(P) == (len(P[0]) if P else 0)
        dv = det(P) if sq else 0
        pairing[f"level {n}"] = {"matrix": P, "det": dv, "pass": sq and abs(dv) == 1}
    ranks = {}
    for n, (HX, HY) in enumerate(HXs):
        ranks[f"level {n}"] = {"forward": HX.rank(d - k), "reversed_dual": HY.rank(k),
                               "pass": HX.rank(d - k) == HY.rank(k)}
    rep = DualityReport(ranks, comps, tri, pairing, {"pass": True, "layers": [layers]})
    if strict and not rep.passed:
        raise ReportFail("system duality failed: " + str(rep.first_failure()), witnesses=rep.to_json())
    return SystemDuality(eps, k, rep)


def pair_morphisms(rho: Matrix, m: int, rho_bar: Matrix, n: int, sd: SystemDuality) -> Matrix:
    """Bilinear form eps_{m,n} o (rho_bar ^ rho): rows index rho_bar's source, columns rho's."""
    E = sd.matrix(m, n)
    if not rho or not rho_bar:
        cols = len(rho[0]) if rho else 0
        rows = len(rho_bar[0]) if rho_bar else 0
        return [[0] * cols for _ in range(rows)]
    return matmul(transpose(rho_bar), matmul(E, rho))
