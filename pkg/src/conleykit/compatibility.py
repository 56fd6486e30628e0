"""Compatibility of canonical maps from pre-index pairs with attractor and
repeller maps of a strong Morse decomposition, checked on homology.

Attractor side: for a pre-index pair (K1, K2) in A2,
    i o s'_T o iota_2  ==  s_T o iota        as maps H(K1, K2) -> H(N1~, N3~).
Repeller side: for a pre-index pair (K3, K4) in A with
(K3', K4') = (K3 & A1, (K4 & A1) | (K3 & A1 & A2)),
    r o s_T o iota  ==  s'_T o iota' o q     as maps H(K3, K4) -> H(N1~, N2~).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

from .conley import IndexTriple, build_index_pair_from_preindex
from .cubical import CubeSet, TransitionGraph
from .flow import FlowConfig, VectorFieldSpec
from .homology import HomologyMorphism, PairHomology, pair_map
from .maps import flow_point_map, induced_homology_map


@dataclass
class CompatibilityReport:
    name: str
    left: HomologyMorphism
    right: HomologyMorphism

    @property
    def passed(self) -> bool:
        return _same(self.left, self.right)

    def to_json(self):
        return {"name": self.name, "passed": self.passed,
                "left": self.left.to_json(), "right": self.right.to_json()}


def _same(f: HomologyMorphism, g: HomologyMorphism) -> bool:
    keys = set(f.matrices) | set(g.matrices)
    for k in keys:
        a, b = f.matrices.get(k, []), g.matrices.get(k, [])
        if any(any(row) for row in a) or any(any(row) for row in b):
            if a != b:
                return False
    return True


def _flow(field, cfg, src_pair, dst_pair, T, hs: PairHomology, hd: PairHomology):
    fm = flow_point_map(field, cfg, src_pair, dst_pair, T)
    return induced_homology_map(fm, hs, hd)


def attractor_triangle(field: VectorFieldSpec, cfg: FlowConfig, graph: TransitionGraph,
                       A: CubeSet, triple: IndexTriple, K1: CubeSet, K2: CubeSet,
                       T: float) -> CompatibilityReport:
    A2 = triple.A2
    hK = PairHomology(K1, K2)
    pa2 = build_index_pair_from_preindex(graph, A2, K1, K2, T)
    pa = build_index_pair_from_preindex(graph, A, K1, K2, T)
    h_a2 = PairHomology(pa2.N, pa2.L)
    h_a = PairHomology(pa.N, pa.L)
    h23 = PairHomology(triple.N2, triple.N3)
    h13 = PairHomology(triple.N1, triple.N3)
    iota2 = pair_map(hK, h_a2)
    s2 = _flow(field, cfg, (pa2.N, pa2.L), (triple.N2, triple.N3), T, h_a2, h23)
    inc = pair_map(h23, h13)
    left = inc.compose(s2.compose(iota2))
    iota = pair_map(hK, h_a)
    s = _flow(field, cfg, (pa.N, pa.L), (triple.N1, triple.N3), T, h_a, h13)
    right = s.compose(iota)
    return CompatibilityReport("attractor_triangle", left, right)


def repeller_restriction(K3: CubeSet, K4: CubeSet, A1: CubeSet, A2: CubeSet):
    K3p = K3 & A1
    K4p = (K4 & A1) | (K3 & A1 & A2)
    return K3p, K4p


def repeller_square(field: VectorFieldSpec, cfg: FlowConfig, graph: TransitionGraph,
                    A: CubeSet, triple: IndexTriple, K3: CubeSet, K4: CubeSet,
                    T: float) -> CompatibilityReport:
    A1, A2 = triple.A1, triple.A2
    K3p, K4p = repeller_restriction(K3, K4, A1, A2)
    hK = PairHomology(K3, K4)
    hKp = PairHomology(K3p, K4p)
    pa = build_index_pair_from_preindex(graph, A, K3, K4, T)
    pa1 = build_index_pair_from_preindex(graph, A1, K3p, K4p, T)
    h_a = PairHomology(pa.N, pa.L)
    h_a1 = PairHomology(pa1.N, pa1.L)
    h13 = PairHomology(triple.N1, triple.N3)
    h12 = PairHomology(triple.N1, triple.N2)
    s = _flow(field, cfg, (pa.N, pa.L), (triple.N1, triple.N3), T, h_a, h13)
    r = pair_map(h13, h12)
    left = r.compose(s.compose(pair_map(hK, h_a)))
    q = pair_map(hK, hKp)
    s1 = _flow(field, cfg, (pa1.N, pa1.L), (triple.N1, triple.N2), T, h_a1, h12)
    right = s1.compose(pair_map(hKp, h_a1).compose(q))
    return CompatibilityReport("repeller_square", left, right)


def compatibility_suite(field, cfg, graph, A, triple, K_attr, K_rep, T) -> Dict[str, CompatibilityReport]:
    return {"attractor_triangle": attractor_triangle(field, cfg, graph, A, triple, *K_attr, T),
            "repeller_square": repeller_square(field, cfg, graph, A, triple, *K_rep, T)}
