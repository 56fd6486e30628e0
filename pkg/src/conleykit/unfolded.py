"""Nested regions cut out of a lattice-periodic strip, and the direct (ind)
and inverse (pro) systems of Conley indices they carry.

The cutting functions are g_{j,+-}(x) = gbar(p_j x) +- L(x) with
gbar(s) = sigma |s| and L a Lyapunov function of the flow.  The region

    J_m^+- = Str(R) & { x : g_{j,+-}(x) <= theta + m for all j }

is rasterised by cube centres.  For the ind system each J_m^+ carries an
isolating block (N_m, L_m) and the connecting maps are the inclusions
(N_m, L_m) -> (N_{m+1}, L_{m+1}).  The pro system uses the reversed flow on
the same blocks, with exit sets Lbar_m; its connecting maps are quotient
followed by inverse excision, H(N_{m+1}, Lbar_{m+1}) -> H(N_m, Lbar_m).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .certificate import Certificate
from .conley import (Block, bounded_invariant, invariant_part, is_isolating, isolating_block,
                     positive_hull, steps, validate_index_pair)
from .cubical import (CubeSet, Grid, TransitionGraph, boundary_faces, nearest_face_distance,
                      topological_interior, transition_graph)
from .duality import inverse_unimodular
from .errors import BlockFailed, BoxTooSmall, ConleyError, NoLattice, ReportFail
from .flow import FlowConfig, VectorFieldSpec, stationary_points
from .homology import HomologyMorphism, HomologySignature, PairHomology, pair_map
from .snf import det

MAX_SIGMA = 0.2
LYAP_TOL = 1e-6


# ---------------------------------------------------------------------------
# Lyapunov catalog: (value, gradient), both vectorised over rows

def _periodic(k):
    return (lambda X: -k * np.cos(2 * np.pi * X[:, 0]) / (2 * np.pi),
            lambda X: np.stack([k * np.sin(2 * np.pi * X[:, 0])] + [0 * X[:, i] for i in range(1, X.shape[1])], axis=1))


def _doublewell(k):
    def val(X):
        x, y = X[:, 0], X[:, 1]
        return k * (-x ** 2 / 2 + x ** 4 / 4 + y ** 2 / 2)

    def grad(X):
        x, y = X[:, 0], X[:, 1]
        return k * np.stack([-x + x ** 3, y], axis=1)
    return val, grad


def _quadratic(k):
    return (lambda X: k * 0.5 * np.sum(X ** 2, axis=1), lambda X: k * X)


def _zero(k):
    return (lambda X: np.zeros(X.shape[0]), lambda X: np.zeros_like(X))


LYAPUNOV = {"periodic": _periodic, "doublewell": _doublewell, "quadratic": _quadratic, "zero": _zero}


def _numeric_grad(fn, X, h=1e-6):
    G = np.zeros_like(X)
    for i in range(X.shape[1]):
        e = np.zeros(X.shape[1])
        e[i] = h
        G[:, i] = (fn(X + e) - fn(X - e)) / (2 * h)
    return G


@dataclass
class CuttingSpec:
    """Cutting data for the nested regions.

    ``lyapunov`` is a catalog name or a callable on (n, d) arrays.  With
    ``lyap_scale=None`` a catalog function is scaled by sigma / 2, which keeps
    every g_{j,+-} monotone along rays for the periodic toy.
    """

    projections: Sequence[Sequence[float]]
    sigma: float = 0.1
    lyapunov: Union[str, Callable] = "zero"
    lyap_scale: Optional[float] = None
    theta: float = 0.3
    R_tilde: float = 10.0
    lattice: Optional[np.ndarray] = None

    def __post_init__(self):
        self.projections = np.atleast_2d(np.asarray(self.projections, dtype=float))
        if not (0 < self.sigma <= MAX_SIGMA):
            raise ConleyError(f"gbar slope sigma must lie in (0, {MAX_SIGMA}]")
        if self.lattice is not None:
            self.lattice = np.atleast_2d(np.asarray(self.lattice, dtype=float))
        scale = self.sigma / 2.0 if self.lyap_scale is None else float(self.lyap_scale)
        self.scale = scale
        if callable(self.lyapunov):
            self._L = self.lyapunov
            self._dL = lambda X: _numeric_grad(self._L, X)
        elif self.lyapunov in LYAPUNOV:
            self._L, self._dL = LYAPUNOV[self.lyapunov](scale)
        else:
            raise ConleyError(f"unknown Lyapunov function {self.lyapunov!r}")

    @classmethod
    def for_field(cls, field: VectorFieldSpec, **kw) -> "CuttingSpec":
        if "lattice" not in kw and field.lattice is not None:
            kw["lattice"] = field.lattice_matrix()
        if "projections" not in kw:
            kw["projections"] = np.eye(field.dim)[:1] if field.lattice is None else field.lattice_matrix()
        return cls(**kw)

    @property
    def dim(self) -> int:
        return self.projections.shape[1]

    def gbar(self, s):
        return self.sigma * np.abs(s)

    def L(self, X) -> np.ndarray:
        return self._L(np.atleast_2d(np.asarray(X, dtype=float)))

    def g(self, X, sign: str) -> np.ndarray:
        """Max over j of g_{j,sign}; shape (n,)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        s = 1.0 if sign == "+" else -1.0
        return np.max(self.gbar(X @ self.projections.T), axis=1) + s * self.L(X)

    def check(self, field: VectorFieldSpec, lo, hi, n: int = 2000, seed: int = 0) -> Certificate:
        """Slope bound and Lyapunov decay on random samples of the box."""
        cert = Certificate("cutting_spec", {"sigma": self.sigma, "lyap_scale": self.scale})
        cert.add("slope_bound", self.sigma <= MAX_SIGMA, [self.sigma])
        rng = np.random.default_rng(seed)
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        X = lo + rng.uniform(size=(n, len(lo))) * (hi - lo)
        rate = np.sum(self._dL(X) * field(X), axis=1)
        bad = rate > LYAP_TOL
        cert.add("lyapunov_decreasing", not bad.any(), X[bad])
        return cert

    def to_json(self):
        return {"projections": self.projections.tolist(), "sigma": self.sigma,
                "lyapunov": self.lyapunov if isinstance(self.lyapunov, str) else "callable",
                "lyap_scale": self.scale, "theta": self.theta, "R_tilde": self.R_tilde,
                "lattice": None if self.lattice is None else self.lattice.tolist()}


# ---------------------------------------------------------------------------
# strips

def _reduce(G: np.ndarray, x: np.ndarray, span: int = 2):
    c0 = np.rint(-np.linalg.lstsq(G.T, x, rcond=None)[0]).astype(int)
    best = None
    for off in itertools.product(range(-span, span + 1), repeat=G.shape[0]):
        c = c0 + np.array(off, dtype=int)
        y = x + c @ G
        key = (round(float(np.linalg.norm(y)), 12), tuple(int(v) for v in c))
        if best is None or key < best[0]:
            best = (key, y)
    return best[1], best[0][1]


def fundamental_reduce(field: VectorFieldSpec, x) -> Tuple[np.ndarray, Tuple[int, ...]]:
    """Minimum-norm lattice translate of ``x`` and the coefficients used."""
    if field.lattice is None:
        raise NoLattice("field has no lattice")
    return _reduce(field.lattice_matrix(), np.asarray(x, dtype=float).reshape(-1))


def strip_membership(field: VectorFieldSpec, R: float, x) -> bool:
    y, _ = fundamental_reduce(field, x)
    return bool(np.linalg.norm(y) <= R)


def _strip_mask(cutting: CuttingSpec, X: np.ndarray) -> np.ndarray:
    if cutting.lattice is None:
        return np.linalg.norm(X, axis=1) <= cutting.R_tilde
    out = np.empty(X.shape[0], dtype=bool)
    for i, x in enumerate(X):
        y, _ = _reduce(cutting.lattice, x)
        out[i] = np.linalg.norm(y) <= cutting.R_tilde
    return out


def _strip_mask_fast(cutting: CuttingSpec, X: np.ndarray) -> np.ndarray:
    # a full-rank lattice whose fundamental domain fits in the ball covers everything
    G = cutting.lattice
    if G is not None and G.shape[0] == G.shape[1]:
        if 0.5 * float(np.sum(np.linalg.norm(G, axis=1))) <= cutting.R_tilde:
            return np.ones(X.shape[0], dtype=bool)
    return _strip_mask(cutting, X)


def build_J_region(grid: Grid, cutting: CuttingSpec, m: int, sign: str = "+") -> CubeSet:
    """Cubes whose centres lie in Str(R) and below level theta + m of every g_{j,sign}."""
    if sign not in ("+", "-"):
        raise ConleyError("sign must be '+' or '-'")
    C = grid.centers()
    mask = (cutting.g(C, sign) <= cutting.theta + m) & _strip_mask_fast(cutting, C)
    J = CubeSet(grid, mask)
    edge = np.any((grid.multi(J.indices) == 0) | (grid.multi(J.indices) == np.array(grid.res) - 1), axis=1)
    if edge.any():
        raise BoxTooSmall(f"region J_{m} reaches the edge of the grid",
                          witnesses=J.indices[edge][:50].tolist())
    return J


def stationary_clearance(field: VectorFieldSpec, J: CubeSet) -> Tuple[float, np.ndarray]:
    """Smallest distance from a stationary point in the box to the boundary of J."""
    g = J.grid
    pts = stationary_points(field, g.lo, g.lo + g.widths * np.array(g.res))
    if pts is None or len(pts) == 0 or not J:
        return math.inf, np.zeros((0, g.dim))
    d = nearest_face_distance(pts, boundary_faces(J))
    return float(d.min()), pts[d <= d.min()]


def certify_J_isolating(graph: TransitionGraph, J: CubeSet, T: float,
                        field: Optional[VectorFieldSpec] = None) -> Certificate:
    """Tameness of J at horizons T and 2T, isolation, and clearance from stationary points."""
    k = steps(T, graph.tau)
    cert = Certificate("J_isolating", {"T": T, "steps": k})
    inner = bounded_invariant(graph, J, 2 * k, 2 * k)
    tset = bounded_invariant(graph, J, k, k)
    # once the horizons have stabilised the strict gap is below grid resolution,
    # and the condition reduces to the T-set sitting inside int(J)
    stable = inner == tset
    cert.params["horizons_stabilised"] = bool(stable)
    outer = topological_interior(J if stable else tset)
    cert.add("2T_set_in_interior_of_T_set", inner.issubset(outer), inner - outer)
    iso = is_isolating(graph, J, T)
    for name, rec in iso.checks.items():
        cert.checks[name] = rec
    if field is not None:
        clear, wit = stationary_clearance(field, J)
        need = 2.0 * float(np.max(J.grid.widths))
        cert.params["stationary_clearance"] = clear if math.isfinite(clear) else None
        cert.add("generic_theta", clear >= need, wit)
    return cert


# ---------------------------------------------------------------------------
# systems

@dataclass
class DesuspendedIndex:
    """Homology of one level with its formal suspension indices (m, n)."""

    signature: HomologySignature
    susp: Tuple[int, int]

    def to_json(self):
        return {"degrees": self.signature.to_json(), "susp": list(self.susp)}


@dataclass
class UnfoldedSystem:
    direction: str
    objects: List[DesuspendedIndex]
    connecting: List[HomologyMorphism]
    provenance: List[Dict]
    blocks: List[Block] = field(default_factory=list, repr=False)
    regions: List[CubeSet] = field(default_factory=list, repr=False)
    certificates: List[Certificate] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certificates)

    def exit_sets(self) -> List[CubeSet]:
        return [b.n_minus if self.direction == "ind" else b.n_plus for b in self.blocks]

    def composite(self, i: int, j: int) -> HomologyMorphism:
        """Connecting map between levels i < j (ind: i -> j, pro: j -> i)."""
        f = self.connecting[i]
        for t in range(i + 1, j):
            f = self.connecting[t].compose(f) if self.direction == "ind" else f.compose(self.connecting[t])
        return f

    def to_json(self):
        conn = []
        for i, f in enumerate(self.connecting):
            src, dst = (i, i + 1) if self.direction == "ind" else (i + 1, i)
            conn.append({"from": src, "to": dst,
                         "matrices": {str(k): v for k, v in sorted(f.matrices.items())}})
        return {"direction": self.direction, "objects": [o.to_json() for o in self.objects],
                "connecting": conn, "provenance": self.provenance,
                "certificates": [c.to_json() for c in self.certificates],
                "notes": ["grid refinement stands in for spectral truncation"]}


def _inverse_excision(small: PairHomology, big: PairHomology) -> HomologyMorphism:
    E = pair_map(small, big)
    mats = {}
    for k, M in E.matrices.items():
        if M and (len(M) != len(M[0]) or abs(det(M)) != 1):
            raise ReportFail(f"excision is not an isomorphism in degree {k}", witnesses=M)
        mats[k] = inverse_unimodular(M) if M else M
    return HomologyMorphism(mats, 0, big.signature, small.signature)


def attractor_map(graph: TransitionGraph, A_next: CubeSet, inner: Block, outer: Block,
                  inner_inv: CubeSet) -> Tuple[HomologyMorphism, Certificate]:
    """Inclusion (N_m, L_m) -> (N_{m+1}, L_{m+1}) with its validity checks.

    The middle pair (N_m | L_{m+1}, L_{m+1}) must be an index pair for
    inv(J_m) inside J_{m+1}, which makes the inclusion the attractor map
    of the triple N_{m+1} > N_m | L_{m+1} > L_{m+1}.
    """
    cert = Certificate("attractor_map")
    Nm, Lm, Nn, Ln = inner.N, inner.n_minus, outer.N, outer.n_minus
    cert.add("N_nested", Nm.issubset(Nn), Nm - Nn)
    cert.add("L_nested", Lm.issubset(Ln), Lm - Ln)
    mid = validate_index_pair(graph, A_next, Nm | Ln, Ln, 0.0, invariant=inner_inv)
    for ax, rec in mid.checks.items():
        cert.checks[f"middle_pair:{ax}"] = rec
    return pair_map(PairHomology(Nm, Lm), PairHomology(Nn, Ln)), cert


def repeller_map(inner: Block, outer: Block) -> HomologyMorphism:
    """Quotient then inverse excision: H(N_{m+1}, Lbar_{m+1}) -> H(N_m, Lbar_m)."""
    Nm, Lbm, Nn, Lbn = inner.N, inner.n_plus, outer.N, outer.n_plus
    X = Lbn | (Nn - Nm) | Lbm
    hbig = PairHomology(Nn, Lbn)
    hq = PairHomology(Nn, X)
    q = pair_map(hbig, hq)
    hs = PairHomology(Nm, Lbm)
    e = _inverse_excision(hs, hq)
    return e.compose(q)


def _block(graph, J, T, rgraph, max_layers):
    """Thinnest block collar (1..max_layers cubes) that validates in both directions."""
    err = None
    for layers in range(1, max_layers + 1):
        try:
            return isolating_block(graph, J, T, rgraph, layers)
        except BlockFailed as e:
            err = e
    raise err


def assemble_system(field: VectorFieldSpec, cutting: CuttingSpec, m_max: int, direction: str,
                    grid: Grid, T: float = 4.0, cfg: Optional[FlowConfig] = None,
                    graph: Optional[TransitionGraph] = None,
                    rgraph: Optional[TransitionGraph] = None, sign: str = "+",
                    max_layers: int = 4) -> UnfoldedSystem:
    """Certified regions J_1..J_{m_max}, their blocks and the connecting maps.

    Both directions use the blocks of the regions J_m^{sign} for the forward
    flow; ``pro`` reads off the reversed-flow exit sets so that the two
    systems share blocks and can be paired.
    """
    if direction not in ("ind", "pro"):
        raise ConleyError("direction must be 'ind' or 'pro'")
    cfg = cfg or FlowConfig()
    graph = graph or transition_graph(field, cfg, grid)
    rgraph = rgraph or transition_graph(field, cfg.reversed(), grid)
    b1 = 0 if cutting.lattice is None else cutting.lattice.shape[0]
    regions, blocks, certs, prov, objs = [], [], [], [], []
    lo, hi = grid.lo, grid.lo + grid.widths * np.array(grid.res)
    certs.append(cutting.check(field, lo, hi))
    for m in range(1, m_max + 1):
        J = build_J_region(grid, cutting, m, sign)
        c = certify_J_isolating(graph, J, T, field)
        certs.append(c)
        if not c.passed:
            raise ReportFail(f"J_{m} is not certified: " + ", ".join(c.failed()),
                             witnesses=c.to_json())
        if regions:
            mono = regions[-1].issubset(J)
            mc = Certificate("monotone", {"m": m})
            mc.add("J_nested", mono, regions[-1] - J)
            certs.append(mc)
        blk = _block(graph, J, T, rgraph, max_layers)
        regions.append(J)
        blocks.append(blk)
        L = blk.n_minus if direction == "ind" else blk.n_plus
        sig = PairHomology(blk.N, L).signature
        objs.append(DesuspendedIndex(sig, (-b1, 0)))
        prov.append({"m": m, "sign": sign, "J_cubes": len(J), "N_cubes": len(blk.N),
                     "exit_cubes": len(L), "flow": "forward" if direction == "ind" else "reversed"})
    conn = []
    for m in range(len(blocks) - 1):
        if direction == "ind":
            inv_m = invariant_part(graph, regions[m])
            f, c = attractor_map(graph, regions[m + 1], blocks[m], blocks[m + 1], inv_m)
            inv_n = invariant_part(graph, regions[m + 1])
            hull = positive_hull(graph, inv_n, inv_m) if inv_m else inv_m
            c.add("attractor_in_next", hull == inv_m, hull - inv_m)
            certs.append(c)
        else:
            f = repeller_map(blocks[m], blocks[m + 1])
        conn.append(f)
    sys_ = UnfoldedSystem(direction, objs, conn, prov, blocks, regions, certs)
    return sys_


def refinement_check(field: VectorFieldSpec, cutting: CuttingSpec, m_max: int, direction: str,
                     grid: Grid, factor: int = 2, T: float = 4.0,
                     cfg: Optional[FlowConfig] = None) -> Certificate:
    """Compare level signatures and connecting maps on ``grid`` and on a refinement of it.

    Only stability of the homology data is checked; nothing here identifies
    the two systems canonically.
    """
    fine = Grid(grid.box_lo, grid.box_hi, tuple(int(r) * factor for r in grid.res))
    coarse_sys = assemble_system(field, cutting, m_max, direction, grid, T, cfg)
    fine_sys = assemble_system(field, cutting, m_max, direction, fine, T, cfg)
    cert = Certificate("refinement", {"res": list(grid.res), "factor": factor})
    for m, (a, b) in enumerate(zip(coarse_sys.objects, fine_sys.objects), start=1):
        cert.add(f"signature_m{m}", a.signature == b.signature,
                 [a.signature.to_json(), b.signature.to_json()])
    for m, (f, g) in enumerate(zip(coarse_sys.connecting, fine_sys.connecting), start=1):
        cert.add(f"connecting_m{m}", f.matrices == g.matrices, [f.to_json(), g.to_json()])
    return cert
