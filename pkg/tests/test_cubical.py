import numpy as np
import pytest

from conleykit import _kernels_py
from conleykit._accel import BACKEND, kernels
from conleykit.cubical import (CubeSet, Grid, boundary_cubes, build_cubeset_from_predicate,
                               thread_count, topological_interior, transition_graph)
from conleykit.errors import ConleyError, NotNested
from conleykit.flow import FlowConfig, VectorFieldSpec
from conleykit.homology import PairHomology, relative_homology

from oracles import as_signature_json, relative_cubical_homology

G4 = Grid((-1.0, -1.0), (1.0, 1.0), (4, 4))
ZERO2 = VectorFieldSpec.zero(2)


def cubes(S):
    return {tuple(map(int, r)) for r in S.multi_indices()}


class TestGrid:
    def test_rejects_bad_boxes(self):
        with pytest.raises(ConleyError):
            Grid((1.0,), (0.0,), (4,))
        with pytest.raises(ConleyError):
            Grid((0.0,), (1.0,), (0,))
        with pytest.raises(ConleyError):
            Grid((0.0, 0.0), (1.0,), (4,))

    def test_point_lookup(self):
        assert G4.cube_of_point(np.array([[-0.9, 0.9]])).tolist() == [G4.linear([[0, 3]])[0]]
        assert np.allclose(G4.widths, [0.5, 0.5])


class TestCubeSet:
    def test_set_algebra(self):
        a = CubeSet.from_multi(G4, [[0, 0], [1, 1]])
        b = CubeSet.from_multi(G4, [[1, 1], [2, 2]])
        assert cubes(a | b) == {(0, 0), (1, 1), (2, 2)}
        assert cubes(a & b) == {(1, 1)}
        assert cubes(a - b) == {(0, 0)}
        assert cubes(a ^ b) == {(0, 0), (2, 2)}
        assert (a & b) <= a and not a <= b
        assert CubeSet.from_multi(G4, [[1, 1], [1, 1]]) == CubeSet.from_multi(G4, [[1, 1]])

    def test_out_of_range(self):
        with pytest.raises(ConleyError):
            CubeSet.from_multi(G4, [[4, 0]])

    def test_text_round_trip_is_bit_exact(self):
        S = CubeSet.from_multi(G4, [[3, 1], [0, 2], [0, 0]])
        text = S.to_text()
        assert text.splitlines()[0] == "dim 2 res 4 4 box -1.0 -1.0 1.0 1.0"
        assert text.splitlines()[1:] == ["0 0", "0 2", "3 1"]
        again = CubeSet.from_text(text)
        assert again == S and again.to_text() == text

    def test_text_errors(self):
        with pytest.raises(ConleyError):
            CubeSet.from_text("")
        with pytest.raises(ConleyError):
            CubeSet.from_text("dim 2 res 4 box 0 0 1 1\n0 0\n")
        with pytest.raises(ConleyError):
            CubeSet.from_text("dim 2 res 4 4 box 0 0 1 1\n0 0 0\n")


class TestPredicate:
    def test_everything(self):
        assert len(build_cubeset_from_predicate(G4, lambda p: np.max(np.abs(p), axis=-1) <= 1)) == 16

    def test_nothing(self):
        assert len(build_cubeset_from_predicate(G4, lambda p: np.zeros(len(p), bool))) == 0

    def test_half_plane(self):
        S = build_cubeset_from_predicate(G4, lambda p: p[..., 0] >= 0)
        assert cubes(S) == {(i, j) for i in (2, 3) for j in range(4)}

    def test_scalar_predicate_fallback(self):
        S = build_cubeset_from_predicate(G4, lambda c: float(c[0]) >= 0)
        assert len(S) == 8


class TestInterior:
    def test_full_grid(self):
        full = CubeSet.full(G4)
        assert cubes(topological_interior(full)) == {(1, 1), (1, 2), (2, 1), (2, 2)}

    def test_single_cube(self):
        one = CubeSet.from_multi(G4, [[1, 1]])
        assert not topological_interior(one)
        assert boundary_cubes(one) == one

    def test_empty(self):
        e = CubeSet.empty(G4)
        assert not topological_interior(e) and not boundary_cubes(e)

    def test_partition(self):
        rng = np.random.default_rng(0)
        g = Grid((0.0, 0.0), (1.0, 1.0), (9, 9))
        for _ in range(20):
            A = CubeSet(g, rng.random(81) < 0.7)
            i, b = topological_interior(A), boundary_cubes(A)
            assert (i | b) == A and not (i & b)


class TestTransitionGraph:
    def test_zero_field_self_loops(self):
        G = transition_graph(ZERO2, FlowConfig(), G4, pad=0.0)
        for c in range(G4.ncubes):
            assert G.adjacency(c) == {c}
        G = transition_graph(ZERO2, FlowConfig(), G4)
        for c in range(G4.ncubes):
            assert c in G.adjacency(c)

    def test_sink_contracts_to_centre(self):
        g = Grid((-1.0, -1.0), (1.0, 1.0), (8, 8))
        G = transition_graph(VectorFieldSpec.catalog("SINK2"), FlowConfig(tau=5.0, step=0.125), g, pad=0.25)
        centre = set(g.linear([[3, 3], [3, 4], [4, 3], [4, 4]]).tolist())
        for c in range(g.ncubes):
            assert centre <= G.adjacency(c)

    def test_saddle_stretches_along_unstable_axis(self):
        g = Grid((-1.0, -1.0), (1.0, 1.0), (16, 16))
        G = transition_graph(VectorFieldSpec.catalog("SADDLE2"), FlowConfig(tau=0.5), g)
        c = int(g.linear([[10, 8]])[0])
        xs = g.multi(np.array(sorted(G.adjacency(c))))[:, 0]
        assert xs.max() - xs.min() > 0

    def test_outside_node(self):
        G = transition_graph(VectorFieldSpec.catalog("SOURCE2"), FlowConfig(), G4)
        corner = int(G4.linear([[0, 0]])[0])
        assert G4.ncubes in G.adjacency(corner)

    def test_monotone_in_pad_and_samples(self):
        g = Grid((-1.0, -1.0), (1.0, 1.0), (16, 16))
        f = VectorFieldSpec.catalog("DOUBLEWELL2")
        small = transition_graph(f, FlowConfig(), g, pad=0.1, samples_per_cube=5)
        big = transition_graph(f, FlowConfig(), g, pad=0.4, samples_per_cube=5)
        more = transition_graph(f, FlowConfig(), g, pad=0.1, samples_per_cube=20)
        for c in range(g.ncubes):
            assert small.adjacency(c) <= big.adjacency(c)
            assert small.adjacency(c) <= more.adjacency(c)

    def test_deterministic_across_threads(self, monkeypatch):
        g = Grid((-1.0, -1.0), (1.0, 1.0), (48, 48))
        f = VectorFieldSpec.catalog("SADDLE2")
        monkeypatch.setenv("CONLEY_THREADS", "1")
        a = transition_graph(f, FlowConfig(), g)
        monkeypatch.setenv("CONLEY_THREADS", "4")
        assert thread_count() == 4
        b = transition_graph(f, FlowConfig(), g)
        assert np.array_equal(a.indptr, b.indptr) and np.array_equal(a.indices, b.indices)
        monkeypatch.setenv("CONLEY_THREADS", "junk")
        assert thread_count() == 1

    def test_dimension_mismatch(self):
        with pytest.raises(ConleyError):
            transition_graph(VectorFieldSpec.catalog("PERIODIC1"), FlowConfig(), G4)


class TestKernels:
    def test_backends_agree(self):
        g = Grid((-1.0, -1.0), (1.0, 1.0), (32, 32))
        G = transition_graph(VectorFieldSpec.catalog("DOUBLEWELL2"), FlowConfig(), g)
        allowed = np.ones(g.ncubes, dtype=np.uint8)
        seeds = np.zeros(g.ncubes, dtype=np.uint8)
        seeds[[5, 500, 700]] = 1
        assert np.array_equal(np.asarray(kernels.forward_closure(G.indptr, G.indices, allowed, seeds)),
                              _kernels_py.forward_closure(G.indptr, G.indices, allowed, seeds))
        assert np.array_equal(np.asarray(kernels.survive(G.indptr, G.indices, allowed, 7)),
                              _kernels_py.survive(G.indptr, G.indices, allowed, 7))
        assert np.array_equal(np.asarray(kernels.trim(G.indptr, G.indices, G.rindptr, G.rindices, allowed)),
                              _kernels_py.trim(G.indptr, G.indices, G.rindptr, G.rindices, allowed))

    def test_backend_name(self):
        assert BACKEND in ("cython", "python")


class TestRelativeHomology:
    def test_one_cube(self):
        h = relative_homology(CubeSet.from_multi(G4, [[0, 0]]))
        assert h.to_json() == {"0": [1, []]}
        assert h.unpointed

    def test_square_rel_right_column(self):
        N = CubeSet.from_multi(G4, [[0, 0], [0, 1], [1, 0], [1, 1]])
        L = CubeSet.from_multi(G4, [[1, 0], [1, 1]])
        assert relative_homology(N, L).is_zero()

    def test_disc_rel_boundary(self):
        N = CubeSet.from_multi(G4, [[i, j] for i in range(3) for j in range(3)])
        L = N - CubeSet.from_multi(G4, [[1, 1]])
        assert relative_homology(N, L).to_json() == {"2": [1, []]}

    def test_not_nested(self):
        with pytest.raises(NotNested):
            relative_homology(CubeSet.from_multi(G4, [[0, 0]]), CubeSet.from_multi(G4, [[1, 1]]))

    def test_annulus_and_3d(self):
        g = Grid((0.0,) * 3, (1.0,) * 3, (3, 3, 3))
        shell = CubeSet.full(g) - CubeSet.from_multi(g, [[1, 1, 1]])
        assert relative_homology(shell).to_json() == {"0": [1, []], "2": [1, []]}

    def test_random_against_oracle(self):
        rng = np.random.default_rng(7)
        g = Grid((0.0, 0.0), (1.0, 1.0), (5, 5))
        for _ in range(25):
            N = CubeSet(g, rng.random(25) < 0.6)
            L = CubeSet(g, N.mask & (rng.random(25) < 0.3))
            want = as_signature_json(relative_cubical_homology(N.multi_indices(), L.multi_indices()))
            assert relative_homology(N, L).to_json() == want

    def test_excision(self):
        rng = np.random.default_rng(11)
        g = Grid((0.0, 0.0), (1.0, 1.0), (7, 7))
        left = np.zeros((7, 7), bool)
        left[:, :3] = True
        for _ in range(10):
            N = CubeSet(g, left.ravel() & (rng.random(49) < 0.7))
            L = CubeSet(g, N.mask & (rng.random(49) < 0.4))
            extra = CubeSet(g, (~left).ravel() & (rng.random(49) < 0.5))
            extra = extra - N.dilate(1)
            assert relative_homology(N | extra, L | extra) == relative_homology(N, L)

    def test_euler_characteristic(self):
        rng = np.random.default_rng(5)
        g = Grid((0.0, 0.0), (1.0, 1.0), (6, 6))
        for _ in range(10):
            N = CubeSet(g, rng.random(36) < 0.6)
            L = CubeSet(g, N.mask & (rng.random(36) < 0.3))
            H = PairHomology(N, L)
            chain = sum((-1) ** k * n for k, n in H.chain_ranks.items())
            assert H.signature.euler() == chain
