import math

import numpy as np
import pytest

from conleykit import conley
from conleykit.conley import BASEPOINT
from conleykit.cubical import CubeSet, Grid, boundary_cubes, build_cubeset_from_predicate, transition_graph
from conleykit.errors import (BlockFailed, NotContained, NotPreIndex, TransversalityFailed)
from conleykit.flow import FlowConfig, VectorFieldSpec, advance
from conleykit.homology import PairHomology, pair_map, relative_homology
from conleykit.maps import flow_point_map, induced_homology_map

from oracles import as_signature_json, relative_cubical_homology

CFG = FlowConfig(tau=0.125)
SQUARE = Grid((-1.0, -1.0), (1.0, 1.0), (64, 64))


class System:
    def __init__(self, kind, grid=SQUARE, cfg=CFG, pad=0.25):
        self.field = VectorFieldSpec.catalog(kind) if isinstance(kind, str) else kind
        self.grid, self.cfg = grid, cfg
        self.G = transition_graph(self.field, cfg, grid, pad=pad)
        self.R = transition_graph(self.field, cfg.reversed(), grid, pad=pad)
        self.A = CubeSet.full(grid)

    def box(self, lo, hi):
        lo, hi = np.asarray(lo), np.asarray(hi)
        return build_cubeset_from_predicate(self.grid, lambda p: np.all((p >= lo) & (p <= hi), axis=-1))


@pytest.fixture(scope="module")
def saddle():
    return System("SADDLE2")


@pytest.fixture(scope="module")
def sink():
    return System("SINK2")


@pytest.fixture(scope="module")
def zero():
    return System(VectorFieldSpec.zero(2), Grid((-1.0, -1.0), (1.0, 1.0), (8, 8)), pad=0.0)


@pytest.fixture(scope="module")
def doublewell():
    return System("DOUBLEWELL2", Grid((-2.0, -1.0), (2.0, 1.0), (128, 64)))


def near_origin(S, r):
    c = S.grid.centers()[S.indices]
    return bool(len(S)) and np.all(np.abs(c) <= r)


def test_steps():
    assert conley.steps(2.0, 0.125) == 16
    assert conley.steps(0.3, 0.125) == 3
    assert conley.steps(0.0, 0.125) == 0


class TestInvariantPart:
    def test_sink_keeps_origin(self, sink):
        inv = conley.invariant_part(sink.G, sink.A)
        origin = sink.box([-0.02, -0.02], [0.02, 0.02])
        assert len(origin) == 4 and origin <= inv
        # one tau-step of padded images only contracts far from the origin
        assert near_origin(inv, 0.7) and not sink.A <= inv

    def test_saddle_strip_is_empty(self, saddle):
        strip = saddle.box([0.25, -1.0], [1.0, 1.0])
        G = transition_graph(saddle.field, FlowConfig(tau=0.25), SQUARE)
        assert not conley.invariant_part(G, strip)

    def test_short_tau_keeps_spurious_loops(self, saddle):
        # padded one-step images overlap their own cube near x1 = 1/4
        strip = saddle.box([0.25, -1.0], [1.0, 1.0])
        spurious = conley.invariant_part(saddle.G, strip)
        assert spurious and SQUARE.centers()[spurious.indices][:, 0].max() < 0.4

    def test_zero_field_everything(self, zero):
        assert conley.invariant_part(zero.G, zero.A) == zero.A


class TestBoundedInvariant:
    def test_no_steps_gives_A(self, saddle):
        assert conley.bounded_invariant(saddle.G, saddle.A, 0, 0) == saddle.A

    def test_monotone_in_horizon(self, saddle):
        prev = saddle.A
        for k in (1, 2, 4, 8, 16):
            cur = conley.bounded_invariant(saddle.G, saddle.A, k, k)
            assert cur <= prev
            prev = cur
        assert conley.invariant_part(saddle.G, saddle.A) <= prev

    def test_contains_true_orbits(self, saddle):
        # every cube whose centre flows inside the box for time 1 both ways is kept
        k = conley.steps(1.0, CFG.tau)
        S = conley.bounded_invariant(saddle.G, saddle.A, k, k)
        C = saddle.grid.centers()
        inside = np.ones(len(C), bool)
        for d in (CFG, CFG.reversed()):
            P = C.copy()
            for _ in range(k):
                P = advance(saddle.field, d, P, CFG.tau)
                inside &= np.all(np.abs(P) <= 1.0, axis=1)
        assert CubeSet(saddle.grid, inside) <= S
        assert near_origin(S, 0.6)

    def test_negative_steps(self, saddle):
        with pytest.raises(ValueError):
            conley.bounded_invariant(saddle.G, saddle.A, -1, 0)


class TestIsolating:
    def test_saddle_box(self, saddle):
        assert conley.is_isolating(saddle.G, saddle.A).passed

    def test_zero_field_fails_with_witnesses(self, zero):
        cert = conley.is_isolating(zero.G, zero.A)
        assert not cert.passed
        assert cert.checks["inv_in_interior"]["witnesses"]

    def test_periodic_interval(self):
        g = Grid((-0.3,), (0.3,), (24,))
        G = transition_graph(VectorFieldSpec.catalog("PERIODIC1"), FlowConfig(tau=0.125), g)
        assert conley.is_isolating(G, CubeSet.full(g)).passed


class TestHulls:
    def test_empty_seed(self, saddle):
        assert not conley.positive_hull(saddle.G, saddle.A, CubeSet.empty(SQUARE))

    def test_zero_field_hull_is_seed(self):
        z = System(VectorFieldSpec.zero(2), Grid((-1.0, -1.0), (1.0, 1.0), (8, 8)))
        G0 = transition_graph(z.field, CFG, z.grid, pad=0.0)
        K = CubeSet.from_multi(z.grid, [[2, 2], [5, 1]])
        assert conley.positive_hull(G0, z.A, K) == K

    def test_saddle_sweeps_right(self, saddle):
        K = saddle.box([0.2, -0.05], [0.3, 0.05])
        H = conley.positive_hull(saddle.G, saddle.A, K)
        xs = saddle.grid.centers()[H.indices][:, 0]
        assert K <= H and xs.max() > 0.95
        assert xs.min() > 0.1

    def test_negative_hull_sweeps_along_stable_axis(self, saddle):
        K = saddle.box([-0.05, 0.2], [0.05, 0.3])
        H = conley.negative_hull(saddle.G, saddle.A, K)
        assert saddle.grid.centers()[H.indices][:, 1].max() > 0.95

    def test_not_contained(self, saddle):
        inner = saddle.box([-0.5, -0.5], [0.5, 0.5])
        with pytest.raises(NotContained):
            conley.positive_hull(saddle.G, inner, saddle.A)


class TestPreIndex:
    def test_empty_pair_passes(self, saddle):
        empty = CubeSet.empty(SQUARE)
        assert conley.is_preindex(saddle.G, saddle.A, empty, empty, 2.0).passed

    def test_K2_on_the_forward_set_fails(self, saddle):
        empty = CubeSet.empty(SQUARE)
        K2 = saddle.box([-0.05, -0.05], [0.05, 0.05])
        cert = conley.is_preindex(saddle.G, saddle.A, empty, K2, 2.0)
        assert not cert.passed and "K2_misses_forward_set" in cert.failed()

    def test_builder_rejects(self, saddle):
        K2 = saddle.box([-0.05, -0.05], [0.05, 0.05])
        with pytest.raises(NotPreIndex):
            conley.build_index_pair_from_preindex(saddle.G, saddle.A, None, K2, 2.0)


class TestIndexPairBuilder:
    def test_saddle_segment(self, saddle):
        K1 = saddle.box([-0.1, 0.55], [0.1, 0.6])
        P = conley.build_index_pair_from_preindex(saddle.G, saddle.A, K1, None, 2.0)
        assert P.certificate.passed and K1 <= P.N
        assert relative_homology(P.N, P.L).to_json() == {"1": [1, []]}
        box = [[i, j] for i in range(5) for j in range(5)]
        sides = [[i, j] for i in (0, 4) for j in range(5)]
        assert as_signature_json(relative_cubical_homology(box, sides)) == {"1": [1, []]}

    def test_sink(self, sink):
        P = conley.build_index_pair_from_preindex(sink.G, sink.A, None, None, 2.0)
        assert relative_homology(P.N, P.L).to_json() == {"0": [1, []]}

    def test_empty_K_covers_core(self, saddle):
        T = 2.0
        P = conley.build_index_pair_from_preindex(saddle.G, saddle.A, None, None, T)
        k = conley.steps(T, CFG.tau)
        assert conley.bounded_invariant(saddle.G, saddle.A, k, k) <= P.N

    def test_search_horizon(self, sink):
        P = conley.search_tame_horizon(sink.G, sink.A)
        assert P.T >= 0.25 and P.certificate.passed


class TestValidateIndexPair:
    def test_builder_output(self, saddle):
        P = conley.build_index_pair_from_preindex(saddle.G, saddle.A, None, None, 2.0)
        assert conley.validate_index_pair(saddle.G, saddle.A, P.N, P.L, 2.0).passed

    def test_no_exit_set(self, saddle):
        cert = conley.validate_index_pair(saddle.G, saddle.A, saddle.A, CubeSet.empty(SQUARE))
        assert "exit_through_L" in cert.failed()

    def test_zero_field_flags_only_interior(self, zero):
        cert = conley.validate_index_pair(zero.G, zero.A, zero.A, CubeSet.empty(zero.grid))
        assert cert.failed() == ["inv_in_interior"]

    def test_L_not_in_N(self, saddle):
        N = saddle.box([-0.5, -0.5], [0.5, 0.5])
        cert = conley.validate_index_pair(saddle.G, saddle.A, N, saddle.A)
        assert "L_in_N" in cert.failed()


class TestBlock:
    def test_saddle_bands(self, saddle):
        b = conley.isolating_block(saddle.G, saddle.A, 2.0, saddle.R)
        C = SQUARE.centers()
        xm, xp = C[b.n_minus.indices], C[b.n_plus.indices]
        assert np.all(np.abs(xm[:, 0]) > np.abs(xm[:, 1]) - 0.1)
        assert np.all(np.abs(xp[:, 1]) > np.abs(xp[:, 0]) - 0.1)
        assert boundary_cubes(b.N) <= (b.n_minus | b.n_plus)
        assert not b.ambiguous
        assert relative_homology(b.N, b.n_minus).to_json() == {"1": [1, []]}
        assert relative_homology(b.N, b.n_plus).to_json() == {"1": [1, []]}

    def test_sink_block(self, sink):
        b = conley.isolating_block(sink.G, sink.A, 2.0, sink.R)
        assert not b.n_minus
        # exit/entry sets are collars; their boundary part is the classification
        assert b.n_plus & boundary_cubes(b.N) == boundary_cubes(b.N)
        assert b.n_plus <= b.N

    def test_zero_field_fails(self, zero):
        with pytest.raises(BlockFailed):
            conley.isolating_block(zero.G, zero.A, 1.0, zero.R)


class TestFlowMap:
    def test_invariant_point_stays(self, sink):
        P = conley.build_index_pair_from_preindex(sink.G, sink.A, None, None, 2.0)
        y = conley.flow_map(sink.field, CFG, (P.N, P.L), (P.N, P.L), 2.0, [0.0, 0.0])
        assert y is not BASEPOINT and np.allclose(y, 0.0)

    def test_exit_point_goes_to_basepoint(self, saddle):
        P = conley.build_index_pair_from_preindex(saddle.G, saddle.A, None, None, 2.0)
        x = SQUARE.centers()[P.L.indices[0]]
        assert conley.flow_map(saddle.field, CFG, (P.N, P.L), (P.N, P.L), 2.0, x) is BASEPOINT

    def test_stable_axis_between_pairs(self, saddle):
        P = conley.build_index_pair_from_preindex(saddle.G, saddle.A, None, None, 2.0)
        b = conley.isolating_block(saddle.G, saddle.A, 2.0, saddle.R)
        src, dst = (b.N, b.n_minus), (P.N, P.L)
        y = conley.flow_map(saddle.field, CFG, src, dst, 2.0, [0.0, 0.5])
        assert y is not BASEPOINT
        assert abs(y[0]) < 1e-9 and y[1] == pytest.approx(0.5 * math.exp(-6.0), rel=1e-6)
        M = induced_homology_map(flow_point_map(saddle.field, CFG, src, dst, 2.0),
                                 PairHomology(*src), PairHomology(*dst))
        assert M.matrices[1] in ([[1]], [[-1]])


class TestStrongMorseSplit:
    def test_doublewell_splits(self, doublewell):
        dw = doublewell
        A1, A2, cert = conley.strong_morse_split(dw.field, dw.A, [1, 0], 0.5, graph=dw.G)
        assert cert.passed
        x1 = dw.grid.centers()[conley.invariant_part(dw.G, A1).indices][:, 0]
        x2 = dw.grid.centers()[conley.invariant_part(dw.G, A2).indices][:, 0]
        assert x1.min() < -0.9 and x1.max() < 0.5
        assert x2.min() > 0.5 and abs(x2.mean() - 1.0) < 0.1

    def test_wrong_direction_fails(self, doublewell):
        dw = doublewell
        with pytest.raises(TransversalityFailed):
            conley.strong_morse_split(dw.field, dw.A, [1, 0], 1.0, graph=dw.G)

    def test_stationary_interface_fails(self, doublewell):
        dw = doublewell
        with pytest.raises(TransversalityFailed):
            conley.strong_morse_split(dw.field, dw.A, [1, 0], 0.0, graph=dw.G)

    def test_zero_field_fails(self, zero):
        with pytest.raises(TransversalityFailed):
            conley.strong_morse_split(zero.field, zero.A, [1, 0], 0.0)


class TestIndexTriple:
    def test_doublewell_exact_sequence(self, doublewell):
        dw = doublewell
        A1, A2, _ = conley.strong_morse_split(dw.field, dw.A, [1, 0], 0.5, graph=dw.G)
        tr = conley.index_triple(dw.G, dw.A, A1, A2, 2.0)
        assert tr.N3 <= tr.N2 <= tr.N1
        h_att = PairHomology(tr.N2, tr.N3)
        h_tot = PairHomology(tr.N1, tr.N3)
        h_rep = PairHomology(tr.N1, tr.N2)
        assert h_att.signature.to_json() == {"0": [1, []]}
        assert h_tot.signature.to_json() == {"0": [1, []]}
        assert h_rep.signature.is_zero()
        i = pair_map(h_att, h_tot)
        p = pair_map(h_tot, h_rep)
        assert i.is_isomorphism()
        assert all(all(v == 0 for row in M for v in row) for M in p.compose(i).matrices.values())

    def test_saddle_degenerate_split(self, saddle):
        A1, A2, _ = conley.strong_morse_split(saddle.field, saddle.A, [1, 0], 0.5, graph=saddle.G)
        assert not conley.invariant_part(saddle.G, A2)
        tr = conley.index_triple(saddle.G, saddle.A, A1, A2, 2.0)
        assert relative_homology(tr.N2, tr.N3).is_zero()
        assert relative_homology(tr.N1, tr.N2) == relative_homology(tr.N1, tr.N3)


class TestInducedMaps:
    def test_identity_flow_map(self, saddle):
        P = conley.build_index_pair_from_preindex(saddle.G, saddle.A, None, None, 2.0)
        H = PairHomology(P.N, P.L)
        assert pair_map(H, H).matrices[1] == [[1]]
        f = flow_point_map(saddle.field, CFG, (P.N, P.L), (P.N, P.L), 2.0)
        M = induced_homology_map(f, H, H)
        assert M.matrices[1] == [[1]]

    def test_collapse_is_zero(self, saddle):
        P = conley.build_index_pair_from_preindex(saddle.G, saddle.A, None, None, 2.0)
        M = pair_map(PairHomology(P.N, P.L), PairHomology(P.N, P.N))
        assert all(not row or not any(row) for A in M.matrices.values() for row in A)
