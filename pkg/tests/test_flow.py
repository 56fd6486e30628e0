import math
import threading

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conleykit.errors import ConleyError, NoLattice, NonFinite
from conleykit.flow import (FlowConfig, VectorFieldSpec, advance, lattice_translate, orbit_segment,
                            stationary_points)

SADDLE = VectorFieldSpec.catalog("SADDLE2")
SINK = VectorFieldSpec.catalog("SINK2")
PER = VectorFieldSpec.catalog("PERIODIC1")
CATALOG = ["SADDLE2", "SINK2", "SOURCE2", "DOUBLEWELL2", "PERIODIC1"]


def reference_flow(field, x, t):
    """High-order adaptive integration, independent of the fixed-step integrator."""
    sol = solve_ivp(lambda _t, y: field(y), (0.0, t), np.asarray(x, float), method="DOP853",
                    rtol=1e-12, atol=1e-13)
    return sol.y[:, -1]


class TestAdvance:
    def test_time_zero_is_exact_identity(self):
        x = np.array([1.0, 1.0])
        assert np.array_equal(advance(SADDLE, FlowConfig(), x, 0.0), x)

    def test_saddle_closed_form(self):
        y = advance(SADDLE, FlowConfig(), [0.1, 0.8], math.log(2))
        assert np.allclose(y, [0.2, 0.4], atol=1e-6)
        assert np.allclose(y, reference_flow(SADDLE, [0.1, 0.8], math.log(2)), atol=1e-6)

    def test_periodic_rest_point(self):
        for t in (0.3, 1.0, 7.5):
            assert abs(advance(PER, FlowConfig(), [0.5], t)[0] - 0.5) < 1e-9

    def test_doublewell_matches_reference(self):
        f = VectorFieldSpec.catalog("DOUBLEWELL2")
        x = [0.3, -0.7]
        assert np.allclose(advance(f, FlowConfig(), x, 2.0), reference_flow(f, x, 2.0), atol=1e-6)

    def test_batch_matches_single(self):
        X = np.array([[0.1, 0.2], [-0.5, 0.9], [0.0, 0.0]])
        B = advance(SINK, FlowConfig(), X, 1.0)
        for x, b in zip(X, B):
            assert np.array_equal(advance(SINK, FlowConfig(), x, 1.0), b)

    def test_reversed_direction_integrates_negated_field(self):
        y = advance(SADDLE, FlowConfig(direction="reversed"), [0.2, 0.4], math.log(2))
        assert np.allclose(y, [0.1, 0.8], atol=1e-6)

    def test_blow_up_guard(self):
        f = VectorFieldSpec.polynomial([[(1.0, [2])]])
        with pytest.raises(NonFinite):
            advance(f, FlowConfig(), [10.0], 1.0)

    def test_negative_time_rejected(self):
        with pytest.raises(ConleyError):
            advance(SADDLE, FlowConfig(), [0.0, 0.0], -1.0)

    @pytest.mark.parametrize("kind", CATALOG)
    def test_semigroup(self, kind):
        f = VectorFieldSpec.catalog(kind)
        rng = np.random.default_rng(3)
        cfg = FlowConfig()
        for _ in range(5):
            x = rng.uniform(-1, 1, f.dim) * (0.2 if kind in ("SOURCE2", "SADDLE2") else 1.0)
            s, t = rng.uniform(0, 2, 2)
            a = advance(f, cfg, x, s + t)
            b = advance(f, cfg, advance(f, cfg, x, s), t)
            # separate step sequences: agreement is up to the integrator's local error
            assert np.linalg.norm(a - b) < 1e-7 * max(1.0, np.linalg.norm(a))

    @pytest.mark.parametrize("kind", CATALOG)
    def test_reversal_round_trip(self, kind):
        f = VectorFieldSpec.catalog(kind)
        rng = np.random.default_rng(4)
        cfg = FlowConfig()
        for _ in range(20):
            x = rng.uniform(-2, 2, f.dim)
            if kind == "DOUBLEWELL2" and abs(x[0]) > 1 and -0.5 * math.log(1 - 1 / x[0] ** 2) < 0.5:
                # x' = x^3 - x escapes to infinity before t = 0.5 once |x| > 1.258
                with pytest.raises(NonFinite):
                    advance(f, cfg.reversed(), x, 0.5)
                continue
            y = advance(f, cfg.reversed(), x, 0.5)
            assert np.linalg.norm(advance(f, cfg, y, 0.5) - x) < 1e-6

    def test_concurrent_calls_agree(self):
        X = np.random.default_rng(0).uniform(-1, 1, (200, 2))
        want = advance(SADDLE, FlowConfig(), X, 1.0)
        out = [None] * 4

        def work(i):
            out[i] = advance(SADDLE, FlowConfig(), X, 1.0)

        ts = [threading.Thread(target=work, args=(i,)) for i in range(4)]
        for t in ts:
            t.start()
        for t in ts:
            t.join()
        assert all(np.array_equal(o, want) for o in out)


class TestOrbitSegment:
    def test_zero_horizon(self):
        pts = orbit_segment(SINK, FlowConfig(), [1.0, 0.0], 0.0)
        assert pts.shape == (1, 2) and np.array_equal(pts[0], [1.0, 0.0])

    def test_stable_axis(self):
        cfg = FlowConfig(tau=0.5)
        pts = orbit_segment(SADDLE, cfg, [0.0, 0.5], 2.0)
        assert pts.shape == (5, 2)
        assert np.all(np.abs(pts[:, 0]) < 1e-9)
        assert np.allclose(pts[:, 1], 0.5 * np.exp(-0.5 * np.arange(5)), atol=1e-6)
        for a, b in zip(pts[:-1], pts[1:]):
            assert np.array_equal(advance(SADDLE, cfg, a, cfg.tau), b)

    def test_periodic_decays_to_rest_point(self):
        pts = orbit_segment(PER, FlowConfig(), [0.25], 10.0)[:, 0]
        assert len(pts) == 81
        assert np.all(np.diff(pts) < 0)
        assert abs(pts[-1]) < 1e-3


class TestLattice:
    def test_identity_translation(self):
        assert lattice_translate(PER, [0], [0.3])[0] == pytest.approx(0.3)

    def test_pure_translation(self):
        assert lattice_translate(PER, [2], [0.3])[0] == pytest.approx(2.3)

    def test_commutes_with_flow(self):
        cfg = FlowConfig()
        a = advance(PER, cfg, lattice_translate(PER, [-1], [0.3]), 1.0)
        b = lattice_translate(PER, [-1], advance(PER, cfg, [0.3], 1.0))
        assert abs(a[0] - b[0]) < 1e-9

    def test_inverse(self):
        x = np.array([0.37])
        assert np.allclose(lattice_translate(PER, [-3], lattice_translate(PER, [3], x)), x)

    def test_no_lattice(self):
        with pytest.raises(NoLattice):
            lattice_translate(SADDLE, [1], [0.0, 0.0])

    def test_equivariance_is_checked(self):
        with pytest.raises(ConleyError):
            VectorFieldSpec.polynomial([[(1.0, [1])]], lattice=[[1]])
        f = VectorFieldSpec.polynomial([[(2.0, [0])]], lattice=[["1/2"]])
        assert f.lattice[0][0] == pytest.approx(0.5)


class TestSpecs:
    def test_catalog_dimensions(self):
        assert [VectorFieldSpec.catalog(k).dim for k in CATALOG] == [2, 2, 2, 2, 1]

    def test_unknown_kind(self):
        with pytest.raises(ConleyError):
            VectorFieldSpec.catalog("LORENZ3")

    def test_polynomial_component_count(self):
        with pytest.raises(ConleyError):
            VectorFieldSpec(2, "polynomial", (((1.0, (1, 0)),),))

    def test_linear_matches_matrix(self):
        M = np.array([[0.5, -1.0], [2.0, 0.0]])
        f = VectorFieldSpec.linear(M)
        x = np.array([0.3, -0.2])
        assert np.allclose(f(x), M @ x)

    def test_config_invariants(self):
        with pytest.raises(ConleyError):
            FlowConfig(tau=0.0)
        with pytest.raises(ConleyError):
            FlowConfig(tau=0.1, step=0.2)
        assert FlowConfig(tau=0.5).step == pytest.approx(0.0625)
        assert FlowConfig().reversed().reversed() == FlowConfig()

    def test_json_round_trip(self):
        from conleykit.cli import field_from_json
        for f in [SADDLE, PER, VectorFieldSpec.polynomial([[(1.0, [1, 0]), (-1.0, [3, 0])], [(-1.0, [0, 1])]])]:
            assert field_from_json(f.to_json()) == f

    def test_stationary_points_in_box(self):
        pts = stationary_points(VectorFieldSpec.catalog("DOUBLEWELL2"), [-2, -1], [2, 1])
        assert sorted(pts[:, 0].tolist()) == [-1.0, 0.0, 1.0]
        assert np.allclose(VectorFieldSpec.catalog("DOUBLEWELL2")(pts), 0)
