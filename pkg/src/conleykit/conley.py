"""Combinatorial Conley theory on a transition graph.

Invariant parts, bounded invariant sets A^[-a,b], forward hulls, (T-tame)
index pairs and their constructive builder, isolating blocks, time-T flow
maps, strong Morse splittings and index triples.  Horizons given in time
units are converted to graph steps with k = ceil(T / tau).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._accel import kernels
from .certificate import Certificate
from .cubical import CubeSet, TransitionGraph, boundary_cubes, topological_interior
from .errors import (BlockFailed, NotContained, NotPreIndex, TamenessUnachievable,
                     TransversalityFailed)
from .flow import FlowConfig, VectorFieldSpec, advance


class _Basepoint:
    """The distinguished point of a quotient N/L; never a point of the grid."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "BASEPOINT"


BASEPOINT = _Basepoint()


def steps(T: float, tau: float) -> int:
    if T <= 0:
        return 0
    return int(math.ceil(T / tau - 1e-9))


# ---------------------------------------------------------------------------
# invariant sets

def invariant_part(graph: TransitionGraph, A: CubeSet) -> CubeSet:
    """Cubes of A on a bi-infinite walk inside A."""
    a = A.u8()
    fwd = kernels.trim(graph.indptr, graph.indices, graph.rindptr, graph.rindices, a)
    bwd = kernels.trim(graph.rindptr, graph.rindices, graph.indptr, graph.indices, a)
    return CubeSet(A.grid, (fwd & bwd).astype(bool))


def bounded_invariant(graph: TransitionGraph, A: CubeSet, k_minus: int, k_plus: int) -> CubeSet:
    """Cubes with a walk of k_minus backward and k_plus forward steps inside A."""
    if k_minus < 0 or k_plus < 0:
        raise ValueError("step counts must be nonnegative")
    a = A.u8()
    f = kernels.survive(graph.indptr, graph.indices, a, int(k_plus)) if k_plus else a
    b = kernels.survive(graph.rindptr, graph.rindices, a, int(k_minus)) if k_minus else a
    return CubeSet(A.grid, (np.asarray(f) & np.asarray(b)).astype(bool))


def bounded_invariant_time(graph: TransitionGraph, A: CubeSet, t_minus: float, t_plus: float) -> CubeSet:
    return bounded_invariant(graph, A, steps(t_minus, graph.tau), steps(t_plus, graph.tau))


def positive_hull(graph: TransitionGraph, A: CubeSet, K: CubeSet) -> CubeSet:
    """Forward saturation of K inside A."""
    if not K.issubset(A):
        raise NotContained("K is not contained in A", witnesses=(K - A).to_json()[:50])
    out = kernels.forward_closure(graph.indptr, graph.indices, A.u8(), K.u8())
    return CubeSet(A.grid, np.asarray(out).astype(bool))


def negative_hull(graph: TransitionGraph, A: CubeSet, K: CubeSet) -> CubeSet:
    if not K.issubset(A):
        raise NotContained("K is not contained in A")
    out = kernels.forward_closure(graph.rindptr, graph.rindices, A.u8(), K.u8())
    return CubeSet(A.grid, np.asarray(out).astype(bool))


def reach_within(graph: TransitionGraph, K: CubeSet, n: int) -> tuple:
    """Cubes reachable from K by walks of length 1..n (any cubes), and whether
    such a walk reaches the outside node."""
    cur = K
    acc = CubeSet.empty(K.grid)
    out = False
    for _ in range(n):
        out = out or bool(graph.leaves(cur, CubeSet.full(K.grid)).size)
        cur = graph.image(cur)
        acc = acc | cur
    return acc, out


# ---------------------------------------------------------------------------
# certificates

def is_isolating(graph: TransitionGraph, A: CubeSet, T: float = 0.0) -> Certificate:
    k = steps(T, graph.tau)
    cert = Certificate("isolating", {"T": T, "steps": k})
    core = invariant_part(graph, A) if k == 0 else bounded_invariant(graph, A, k, k)
    interior = topological_interior(A)
    cert.add("inv_in_interior" if k == 0 else "bounded_inv_in_interior",
             core.issubset(interior), core - interior)
    return cert


def is_preindex(graph: TransitionGraph, A: CubeSet, K1: CubeSet, K2: CubeSet, T: float) -> Certificate:
    """Combinatorial T-tame pre-index test.

    (i) every cube of K1 that survives T' = T + 2 tau inside A keeps all its
    walks of length <= 2 inside the interior of A;
    (ii) K2 does not touch A^[0,T].
    The walk-level form of (i) is also checked: the union of A^[-T,T] with
    the part of P_A(K1) inside A^[0,T] lies in int(A).
    """
    k = steps(T, graph.tau)
    cert = Certificate("preindex", {"T": T, "steps": k})
    cert.add("K1_in_A", K1.issubset(A), K1 - A)
    cert.add("K2_in_A", K2.issubset(A), K2 - A)
    inner = topological_interior(A)
    long = bounded_invariant(graph, A, 0, k + 2) & K1
    bad = []
    for c in long.indices:
        seed = CubeSet.from_linear(A.grid, [c])
        walk, out = reach_within(graph, seed, 2)
        if out or not (walk | seed).issubset(inner):
            bad.append(int(c))
    cert.add("K1_tame_forward", not bad, A.grid.multi(np.array(bad, dtype=np.int64)))
    fwd = bounded_invariant(graph, A, 0, k)
    # closed cubes that share a face or corner intersect, so disjointness of
    # the compact sets means K2 avoids the Moore collar of A^[0,T]
    touch = K2 & fwd.dilate(1)
    cert.add("K2_misses_forward_set", not bool(touch), touch)
    # a witness A' for (i): the core plus every forward continuation of K1
    # that can still survive k more steps; it must sit inside int(A)
    if K1.issubset(A):
        witness = bounded_invariant(graph, A, k, k) | (positive_hull(graph, A, K1) & fwd)
        cert.add("K1_hull_in_interior", witness.issubset(inner), witness - inner)
    return cert


def validate_index_pair(graph: TransitionGraph, A: CubeSet, N: CubeSet, L: CubeSet,
                        T: float = 0.0, invariant: Optional[CubeSet] = None) -> Certificate:
    """Check the three index-pair axioms, plus the T-tame conditions when T > 0.

    ``invariant`` is the isolated invariant set the pair should carry; it
    defaults to inv(A).
    """
    k = steps(T, graph.tau)
    cert = Certificate("index_pair", {"T": T, "steps": k})
    cert.add("L_in_N", L.issubset(N), L - N)
    S = invariant_part(graph, A) if invariant is None else invariant
    core = N - L
    inv_core = invariant_part(graph, core)
    cert.add("inv_matches", inv_core == S, inv_core ^ S)
    interior = topological_interior(core)
    cert.add("inv_in_interior", inv_core.issubset(interior), inv_core - interior)
    leak = graph.leaves(core, N)
    cert.add("exit_through_L", leak.size == 0, N.grid.multi(leak))
    src, dst = graph.edges()
    nm = np.append(N.mask, False)
    lm = np.append(L.mask, False)
    bad = L.mask[src] & nm[dst] & ~lm[dst]
    cert.add("L_positively_invariant", not bad.any(), N.grid.multi(np.unique(src[bad])))
    if k > 0:
        cert.add("N_in_A", N.issubset(A), N - A)
        am = np.append(A.mask, False)
        badN = N.mask[src] & am[dst] & ~nm[dst]
        cert.add("N_positively_invariant_in_A", not badN.any(), N.grid.multi(np.unique(src[badN])))
        badL = L.mask[src] & am[dst] & ~lm[dst]
        cert.add("L_positively_invariant_in_A", not badL.any(), N.grid.multi(np.unique(src[badL])))
        both = bounded_invariant(graph, A, k, k)
        cert.add("A_bounded_in_N", both.issubset(N), both - N)
        fwd = bounded_invariant(graph, A, 0, k)
        cert.add("L_misses_forward_set", not bool(fwd & L), fwd & L)
    return cert


# ---------------------------------------------------------------------------
# index pairs

@dataclass
class IndexPair:
    N: CubeSet
    L: CubeSet
    A: CubeSet
    graph: TransitionGraph
    certificate: Certificate
    T: float = 0.0
    parts: dict = field(default_factory=dict)

    def to_json(self):
        return {"N": self.N.to_json(), "L": self.L.to_json(), "T": self.T,
                "certificate": self.certificate.to_json()}


def build_index_pair_from_preindex(graph: TransitionGraph, A: CubeSet, K1: Optional[CubeSet] = None,
                                   K2: Optional[CubeSet] = None, T: float = 1.0) -> IndexPair:
    """Grow a T-tame pre-index pair (K1, K2) in A into a T-tame index pair (N, L).

    N = P_A(B) | P_A(A \\ V) and L = P_A(A \\ V).  B is K1 together with the
    core A^[-T,T] and one collar layer around it, so that the graph invariant
    set lands in the interior of N.  V is the one-layer neighbourhood of
    V0 = A^[0,T] in A.
    """
    grid = A.grid
    K1 = CubeSet.empty(grid) if K1 is None else K1
    K2 = CubeSet.empty(grid) if K2 is None else K2
    pre = is_preindex(graph, A, K1, K2, T)
    if not pre.passed:
        raise NotPreIndex("(K1, K2) is not a T-tame pre-index pair: " + ", ".join(pre.failed()),
                          witnesses=pre.to_json())
    k = steps(T, graph.tau)
    core = bounded_invariant(graph, A, k, k)
    B = K1 | (core.dilate(1) & A)
    PB = positive_hull(graph, A, B)
    V0 = bounded_invariant(graph, A, 0, k)
    A1 = (PB & V0) | (core.dilate(1) & A)
    A2 = A1.dilate(2) & A
    C0 = (A - topological_interior(A2)) & V0
    C = C0.dilate(1) & A
    V = V0.dilate(1) & A
    L = positive_hull(graph, A, A - V)
    N = PB | L
    cert = validate_index_pair(graph, A, N, L, T)
    cert.params["good_pair"] = {"C_misses_PB": not bool(C & PB), "K2_misses_V": not bool(V & K2)}
    cert.add("K1_in_N", K1.issubset(N), K1 - N)
    cert.add("K2_in_L", K2.issubset(L), K2 - L)
    if not cert.passed:
        raise TamenessUnachievable("constructed pair fails: " + ", ".join(cert.failed()),
                                   witnesses=cert.to_json())
    parts = {"A_prime": A1, "A_second": A2, "V0": V0, "C0": C0, "B": B, "V": V}
    return IndexPair(N, L, A, graph, cert, T, parts)


def search_tame_horizon(graph: TransitionGraph, A: CubeSet, K1=None, K2=None,
                        T0: float = 0.25, T_max: float = 16.0):
    """Try T = T0, 2 T0, 4 T0, ... and return the first certified pair."""
    T = T0
    last = None
    while T <= T_max + 1e-12:
        try:
            return build_index_pair_from_preindex(graph, A, K1, K2, T)
        except (NotPreIndex, TamenessUnachievable) as exc:
            last = exc
        T *= 2.0
    raise TamenessUnachievable(f"no certified horizon up to T={T_max}",
                               witnesses=getattr(last, "witnesses", []))


# ---------------------------------------------------------------------------
# isolating blocks

@dataclass
class Block:
    N: CubeSet
    n_minus: CubeSet
    n_plus: CubeSet
    ambiguous: CubeSet
    certificate: Certificate

    def to_json(self):
        return {"N": self.N.to_json(), "n_minus": self.n_minus.to_json(),
                "n_plus": self.n_plus.to_json(), "ambiguous": self.ambiguous.to_json(),
                "certificate": self.certificate.to_json()}


def isolating_block(graph: TransitionGraph, A: CubeSet, T: float,
                    rgraph: TransitionGraph, layers: int = 1) -> Block:
    """Combinatorial isolating block with exit/entry classification of ∂N.

    ``rgraph`` is the transition graph of the reversed flow.  The exit set
    n_minus is the forward hull inside N of the cubes that can leave N in one
    step; n_plus is the same for the reversed graph.  A boundary cube lying
    in neither is ambiguous.  Corner cubes may lie in both, as the corners
    of a smooth block lie in both n^+ and n^-.
    """
    k = steps(T / 2.0, graph.tau)
    N = bounded_invariant(graph, A, k, k).dilate(layers) & A
    bnd = boundary_cubes(N)
    leave_f = CubeSet.from_linear(N.grid, graph.leaves(N, N))
    leave_b = CubeSet.from_linear(N.grid, rgraph.leaves(N, N))
    n_minus = positive_hull(graph, N, leave_f)
    n_plus = positive_hull(rgraph, N, leave_b)
    ambiguous = bnd - (n_minus | n_plus)
    cert = Certificate("isolating_block", {"T": T, "steps": k, "layers": layers})
    cert.add("no_ambiguous", not ambiguous, ambiguous)
    inv = invariant_part(graph, A)
    fw = validate_index_pair(graph, A, N, n_minus, 0.0, invariant=inv)
    bw = validate_index_pair(rgraph, A, N, n_plus, 0.0, invariant=invariant_part(rgraph, A))
    for name, c in (("forward", fw), ("reversed", bw)):
        for ax, rec in c.checks.items():
            cert.checks[f"{name}:{ax}"] = rec
    Tk = steps(T, graph.tau)
    core = bounded_invariant(graph, A, Tk, Tk)
    cert.add("tame_block", core.issubset(topological_interior(N)), core - topological_interior(N))
    block = Block(N, n_minus, n_plus, ambiguous, cert)
    if not cert.passed:
        raise BlockFailed("isolating block failed: " + ", ".join(cert.failed()),
                          witnesses={"ambiguous": ambiguous.to_json(), "certificate": cert.to_json()})
    return block


# ---------------------------------------------------------------------------
# flow maps

def _closed_member(S: CubeSet, P: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Whether each point lies in the closed union of the cubes of S."""
    g = S.grid
    res = np.array(g.res)
    out = np.zeros(P.shape[0], dtype=bool)
    finite = np.all(np.isfinite(P), axis=1)
    if not finite.any():
        return out
    u = np.where(finite[:, None], (P - g.lo) / g.widths, -1.0)
    base = np.floor(u).astype(np.int64)
    frac = u - base
    near = (frac < tol) | (frac > 1.0 - tol)
    inr = finite & np.all((base >= 0) & (base < res), axis=1)
    plain = inr & ~near.any(axis=1)
    out[plain] = S.mask[g.linear(base[plain])]
    edge = np.flatnonzero(finite & near.any(axis=1))
    if edge.size:
        # points on a face: any closed cube containing them counts
        ue = u[edge]
        lo_i = np.floor(ue + tol).astype(np.int64)
        for shift in itertools.product((0, -1), repeat=g.dim):
            sh = np.array(shift)
            on_face = np.abs(ue - np.rint(ue)) < tol
            idx = lo_i + sh
            valid = np.all((sh == 0) | on_face, axis=1)
            valid &= np.all((idx >= 0) & (idx < res), axis=1)
            if valid.any():
                sel = edge[valid]
                out[sel] |= S.mask[g.linear(idx[valid])]
    return out


def _in_difference(N: CubeSet, L: CubeSet, P: np.ndarray) -> np.ndarray:
    return _closed_member(N, P) & ~_closed_member(L, P)


def flow_map_batch(field: VectorFieldSpec, cfg: FlowConfig, pair1, pair2, T: float, X,
                   tame: bool = False, A: Optional[CubeSet] = None):
    """Vectorised time-T flow map between two index pairs.

    Returns ``(images, ok)``: ``ok[i]`` is False where the value is the basepoint.
    Orbit conditions are tested at the samples of orbit_segment, one per tau.
    """
    N1, L1 = pair1
    N2, L2 = pair2
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = max(1, steps(T, cfg.tau))
    h = T / n
    ok = np.ones(X.shape[0], dtype=bool)
    cur = X.copy()
    alive = np.arange(X.shape[0])
    for i in range(3 * n + 1):
        P = cur[alive]
        if i > 0:
            with np.errstate(all="ignore"):
                try:
                    P = advance(field, cfg, P, h)
                except Exception:
                    P = _safe_advance(field, cfg, P, h)
            cur[alive] = P
        keep = np.ones(alive.size, dtype=bool)
        if tame:
            keep &= _closed_member(A, P)
        elif i <= 2 * n:
            keep &= _in_difference(N1, L1, P)
        if i >= n:
            keep &= _in_difference(N2, L2, P)
        ok[alive[~keep]] = False
        alive = alive[keep]
        if not alive.size:
            break
    return cur, ok


def _safe_advance(field, cfg, X, h):
    out = np.empty_like(X)
    for j in range(X.shape[0]):
        try:
            out[j] = advance(field, cfg, X[j], h)
        except Exception:
            out[j] = np.full(X.shape[1], np.inf)
    return out


def flow_map(field: VectorFieldSpec, cfg: FlowConfig, pair1, pair2, T: float, x,
             tame: bool = False, A: Optional[CubeSet] = None):
    """Time-T flow map [x] -> [phi(x, 3T)] or the basepoint."""
    img, ok = flow_map_batch(field, cfg, pair1, pair2, T, np.asarray(x, dtype=float)[None, :], tame, A)
    return img[0] if ok[0] else BASEPOINT


# ---------------------------------------------------------------------------
# strong Morse decompositions and index triples

def strong_morse_split(field: VectorFieldSpec, A: CubeSet, ell: Sequence[float], theta: float,
                       eps_trans: float = 0.0, graph: Optional[TransitionGraph] = None,
                       samples: int = 5, cfg: Optional[FlowConfig] = None):
    """Split A along the hyperplane <ell, x> = theta.

    Interface cubes (closed cube meets the hyperplane) belong to both parts.
    The flow must cross the interface from A1 to A2 at every sampled point.
    """
    grid = A.grid
    ell = np.asarray(ell, dtype=float)
    w = grid.widths
    C = grid.centers()
    lc = C @ ell
    half = 0.5 * np.abs(ell) @ w
    interface = (np.abs(lc - theta) <= half + 1e-12) & A.mask
    A1 = CubeSet(grid, ((lc <= theta) | interface) & A.mask)
    A2 = CubeSet(grid, ((lc >= theta) | interface) & A.mask)
    cert = Certificate("strong_morse_split", {"ell": ell.tolist(), "theta": theta, "eps": eps_trans})
    iface = np.flatnonzero(interface)
    bad_pts = []
    if iface.size:
        g = np.linspace(0.0, 1.0, samples)
        mesh = np.stack(np.meshgrid(*([g] * grid.dim), indexing="ij"), axis=-1).reshape(-1, grid.dim)
        corners = grid.lo + grid.multi(iface) * w
        P = (corners[:, None, :] + mesh[None, :, :] * w).reshape(-1, grid.dim)
        sign = -1.0 if cfg is not None and cfg.direction == "reversed" else 1.0
        rate = sign * (field(P) @ ell)
        bad = ~(rate > eps_trans)
        bad_pts = P[bad]
    cert.add("transversal", len(bad_pts) == 0, bad_pts)
    if graph is not None:
        src, dst = graph.edges()
        am = np.append(A.mask, False)
        a1 = np.append(A1.mask, False)
        a2 = np.append(A2.mask, False)
        within = am[dst]
        bad2 = A2.mask[src] & within & ~a2[dst]
        cert.add("A2_positively_invariant", not bad2.any(), grid.multi(np.unique(src[bad2])))
        bad1 = a1[dst] & within & A.mask[src] & ~A1.mask[src]
        cert.add("A1_negatively_invariant", not bad1.any(), grid.multi(np.unique(dst[bad1])))
    if not cert.passed:
        raise TransversalityFailed("strong Morse split failed: " + ", ".join(cert.failed()),
                                   witnesses=cert.to_json())
    return A1, A2, cert


@dataclass
class IndexTriple:
    N1: CubeSet
    N2: CubeSet
    N3: CubeSet
    A1: CubeSet
    A2: CubeSet
    certificates: dict

    def to_json(self):
        return {"N1": self.N1.to_json(), "N2": self.N2.to_json(), "N3": self.N3.to_json(),
                "certificates": {k: v.to_json() for k, v in self.certificates.items()}}


def index_triple(graph: TransitionGraph, A: CubeSet, A1: CubeSet, A2: CubeSet, T: float) -> IndexTriple:
    """Index triple N3 ⊆ N2 ⊆ N1 for the attractor-repeller pair of a strong Morse split."""
    base = build_index_pair_from_preindex(graph, A, None, None, T)
    N1, N3 = base.N, base.L
    N2 = N3 | positive_hull(graph, N1, N1 & A2)
    certs = {"total": base.certificate}
    certs["attractor"] = validate_index_pair(graph, A, N2, N3, 0.0,
                                             invariant=invariant_part(graph, A2))
    certs["repeller"] = validate_index_pair(graph, A, N1, N2, 0.0,
                                            invariant=invariant_part(graph, A1))
    nest = Certificate("triple_nesting")
    nest.add("N3_in_N2", N3.issubset(N2), N3 - N2)
    nest.add("N2_in_N1", N2.issubset(N1), N2 - N1)
    nest.add("N1_cap_A2_in_N2", (N1 & A2).issubset(N2), (N1 & A2) - N2)
    certs["nesting"] = nest
    failed = [k for k, c in certs.items() if not c.passed]
    if failed:
        raise TamenessUnachievable("index triple validation failed: " + ", ".join(failed),
                                   witnesses={k: c.to_json() for k, c in certs.items()})
    return IndexTriple(N1, N2, N3, A1, A2, certs)
