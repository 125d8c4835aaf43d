import math

import numpy as np
import pytest

from bregprox import (
    EuclideanSpace,
    GeometryError,
    Hyperboloid,
    check_comparison_inequalities,
    manifold_from_name,
)
from oracles import hyperboloid_geodesic_ode, hyperboloid_transport_ode, mink


class TestInner:
    def test_euclidean_unit_vector(self, E2):
        x = E2.point([0.0, 0.0])
        u = E2.tangent(x, [1.0, 0.0])
        assert E2.inner(x, u, u) == 1.0

    def test_hyperboloid_orthogonal_directions(self, H2):
        x = H2.point([1.0, 0.0, 0.0])
        u = H2.tangent(x, [0.0, 1.0, 0.0])
        v = H2.tangent(x, [0.0, 0.0, 1.0])
        assert H2.inner(x, u, v) == 0.0

    def test_hyperboloid_spacelike(self, H2):
        x = H2.point([1.0, 0.0, 0.0])
        u = H2.tangent(x, [0.0, 2.0, 0.0])
        assert H2.inner(x, u, u) == 4.0

    def test_mismatched_base_rejected(self, E2):
        x, y = E2.point([0.0, 0.0]), E2.point([1.0, 0.0])
        u = E2.tangent(x, [1.0, 0.0])
        v = E2.tangent(y, [1.0, 0.0])
        with pytest.raises(GeometryError):
            E2.inner(x, u, v)


class TestExpLog:
    def test_euclidean_straight_line(self, E2):
        x = E2.point([1.0, 2.0])
        v = E2.tangent(x, [3.0, -1.0])
        assert np.allclose(E2.exp(x, v).coords, [4.0, 1.0])

    def test_zero_vector_is_identity(self, E2, H2, rng):
        for m in (E2, H2):
            x = m.random_point(rng)
            assert np.allclose(m.exp(x, m.zero_tangent(x)).coords, x.coords)

    def test_hyperboloid_exp_against_ode_oracle(self, H2):
        x = np.array([1.0, 0.0, 0.0])
        v = np.array([0.0, 0.7, 0.0])
        oracle = hyperboloid_geodesic_ode(x, v)
        got = H2.exp(H2.point(x), H2.tangent(H2.point(x), v))
        assert np.abs(got.coords - oracle).max() < 1e-10
        assert np.abs(got.coords - [math.cosh(0.7), math.sinh(0.7), 0.0]).max() < 1e-12

    def test_exp_preserves_distance(self, H2, rng):
        for _ in range(50):
            x = H2.random_point(rng)
            v = H2.random_tangent(rng, x, 0.8)
            assert abs(H2.dist(x, H2.exp(x, v)) - H2.norm(v)) < 1e-8

    def test_euclidean_log_is_difference(self, E2):
        v = E2.log(E2.point([0.0, 0.0]), E2.point([2.0, 3.0]))
        assert np.allclose(v.components, [2.0, 3.0])

    def test_log_of_same_point_is_zero(self, E2, H2, rng):
        for m in (E2, H2):
            x = m.random_point(rng)
            assert np.abs(m.log(x, x).components).max() < 1e-12

    def test_hyperboloid_log_inverts_exp(self, H2):
        x = H2.point([1.0, 0.0, 0.0])
        y = H2.point([math.cosh(0.7), math.sinh(0.7), 0.0])
        v = H2.log(x, y)
        assert np.abs(v.components - [0.0, 0.7, 0.0]).max() < 1e-12
        assert np.abs(H2.exp(x, v).coords - y.coords).max() < 1e-12

    def test_roundtrip_invariant(self, E3, H2, rng):
        for m in (E3, H2):
            for _ in range(200):
                x = m.random_point(rng)
                v = m.random_tangent(rng, x, 1.5)
                n = m.norm(v)
                if n > 5.0:
                    v = v * (5.0 / n)
                w = m.log(x, m.exp(x, v))
                assert np.abs((w - v).components).max() < 1e-7

    def test_nonfinite_input_rejected(self, E2):
        x = E2.point([0.0, 0.0])
        with pytest.raises(GeometryError):
            E2.tangent(x, [np.nan, 0.0])
        with pytest.raises(GeometryError):
            E2.point([np.inf, 0.0])


class TestDist:
    def test_self_distance_zero(self, E2, H2, rng):
        for m in (E2, H2):
            x = m.random_point(rng)
            assert m.dist(x, x) == 0.0

    def test_pythagorean(self, E2):
        assert E2.dist(E2.point([0.0, 0.0]), E2.point([3.0, 4.0])) == 5.0

    def test_hyperboloid_dist_against_ode_oracle(self, H2):
        x = H2.point([1.0, 0.0, 0.0])
        y = H2.point([math.cosh(0.7), math.sinh(0.7), 0.0])
        assert abs(H2.dist(x, y) - 0.7) < 1e-12

    def test_equals_log_norm(self, H2, rng):
        for _ in range(50):
            x, y = H2.random_point(rng), H2.random_point(rng)
            assert abs(H2.dist(x, y) - H2.norm(H2.log(x, y))) < 1e-10

    def test_metric_axioms_on_samples(self, H2, rng):
        for _ in range(50):
            x, y, z = (H2.random_point(rng) for _ in range(3))
            assert H2.dist(x, y) >= 0
            assert abs(H2.dist(x, y) - H2.dist(y, x)) < 1e-12
            assert H2.dist(x, z) <= H2.dist(x, y) + H2.dist(y, z) + 1e-12


class TestTransport:
    def test_euclidean_identity_on_components(self, E2, rng):
        x, y = E2.random_point(rng), E2.random_point(rng)
        v = E2.random_tangent(rng, x)
        assert np.array_equal(E2.transport(x, y, v).components, v.components)

    def test_zero_vector(self, H2, rng):
        x, y = H2.random_point(rng), H2.random_point(rng)
        out = H2.transport(x, y, H2.zero_tangent(x))
        assert np.abs(out.components).max() < 1e-15

    def test_against_ode_oracle(self, H2, rng):
        for _ in range(20):
            x = H2.random_point(rng)
            y = H2.random_point(rng)
            w = H2.random_tangent(rng, x)
            oracle = hyperboloid_transport_ode(x.coords, H2.log(x, y).components, w.components)
            got = H2.transport(x, y, w)
            assert np.abs(got.components - oracle).max() < 1e-9

    def test_isometry_invariant(self, H2, rng):
        for _ in range(200):
            x, y = H2.random_point(rng), H2.random_point(rng)
            u, v = H2.random_tangent(rng, x), H2.random_tangent(rng, x)
            pu, pv = H2.transport(x, y, u), H2.transport(x, y, v)
            assert abs(H2.inner(y, pu, pv) - H2.inner(x, u, v)) < 1e-8

    def test_inverse_invariant(self, H2, rng):
        for _ in range(100):
            x, y = H2.random_point(rng), H2.random_point(rng)
            v = H2.random_tangent(rng, x)
            back = H2.transport(y, x, H2.transport(x, y, v))
            assert np.abs((back - v).components).max() < 1e-8

    def test_composition_along_one_geodesic(self, H2, rng):
        for _ in range(50):
            x = H2.random_point(rng)
            u = H2.random_tangent(rng, x, 1.0)
            u = u * (1.0 / max(H2.norm(u), 1e-12))
            y, z = H2.exp(x, u * 0.5), H2.exp(x, u * 1.3)
            v = H2.random_tangent(rng, z)
            direct = H2.transport(z, x, v)
            chained = H2.transport(y, x, H2.transport(z, y, v))
            assert np.abs((direct - chained).components).max() < 1e-8

    def test_composition_exact_euclidean(self, E2, rng):
        x, y, z = (E2.random_point(rng) for _ in range(3))
        v = E2.random_tangent(rng, z)
        direct = E2.transport(z, x, v)
        chained = E2.transport(y, x, E2.transport(z, y, v))
        assert np.array_equal(direct.components, chained.components)


class TestGeodesicPoint:
    def test_endpoints(self, H2, rng):
        x, y = H2.random_point(rng), H2.random_point(rng)
        assert np.abs(H2.geodesic_point(x, y, 0.0).coords - x.coords).max() < 1e-12
        assert np.abs(H2.geodesic_point(x, y, 1.0).coords - y.coords).max() < 1e-10

    def test_euclidean_midpoint(self, E2):
        mid = E2.geodesic_point(E2.point([0.0, 0.0]), E2.point([2.0, 2.0]), 0.5)
        assert np.allclose(mid.coords, [1.0, 1.0])

    def test_constant_speed(self, H2, rng):
        for _ in range(50):
            x, y = H2.random_point(rng), H2.random_point(rng)
            t = float(rng.uniform())
            assert abs(H2.dist(x, H2.geodesic_point(x, y, t)) - t * H2.dist(x, y)) < 1e-10

    def test_parameter_out_of_range(self, E2):
        x, y = E2.point([0.0, 0.0]), E2.point([1.0, 0.0])
        with pytest.raises(GeometryError):
            E2.geodesic_point(x, y, 1.5)
        with pytest.raises(GeometryError):
            E2.geodesic_point(x, y, -0.1)


class TestTriangleComparison:
    def test_euclidean_flat_equality(self, E2, rng):
        for _ in range(100):
            pts = [E2.random_point(rng, 2.0) for _ in range(3)]
            r = check_comparison_inequalities(E2, *pts)
            assert max(abs(s) for s in r.cyclic_slacks) < 1e-10
            assert abs(r.halved_slack) < 1e-10

    def test_hyperboloid_nonnegative_slack(self, H2, rng):
        worst = math.inf
        for _ in range(1000):
            pts = [H2.random_point(rng, 1.2) for _ in range(3)]
            worst = min(worst, check_comparison_inequalities(H2, *pts).min_slack)
        assert worst >= -1e-8

    def test_equilateral_like_triple(self, H2):
        c = H2.point([1.0, 0.0, 0.0])
        pts = [
            H2.exp(c, H2.tangent(c, [0.0, math.cos(a), math.sin(a)]))
            for a in (0.0, 2.0 * math.pi / 3.0, 4.0 * math.pi / 3.0)
        ]
        r = check_comparison_inequalities(H2, *pts)
        assert r.min_slack >= 0.0
        assert not r.degenerate

    def test_degenerate_flagged_and_zero_slack(self, E2):
        x = E2.point([0.0, 0.0])
        z = E2.point([1.0, 1.0])
        r = check_comparison_inequalities(E2, x, x, z)
        assert r.degenerate
        assert min(abs(s) for s in r.cyclic_slacks) < 1e-12


class TestValidation:
    def test_hyperboloid_membership_tolerance(self, H2):
        with pytest.raises(GeometryError):
            H2.point([1.0, 0.5, 0.0])  # <x,x> != -1
        with pytest.raises(GeometryError):
            H2.point([-1.0, 0.0, 0.0])  # lower sheet

    def test_tangency_enforced(self, H2):
        x = H2.point([1.0, 0.0, 0.0])
        with pytest.raises(GeometryError):
            H2.tangent(x, [1.0, 0.0, 0.0])  # timelike, not tangent

    def test_dimension_mismatch(self, E2, E3):
        x2 = E2.point([0.0, 0.0])
        x3 = E3.point([0.0, 0.0, 0.0])
        with pytest.raises(GeometryError):
            E2.dist(x2, x3)
        with pytest.raises(GeometryError):
            E2.point([0.0, 0.0, 0.0])

    def test_mixed_backends_rejected(self, E3, H2):
        with pytest.raises(GeometryError):
            H2.dist(H2.origin(), E3.point([1.0, 0.0, 0.0]))

    def test_backend_factory(self):
        assert isinstance(manifold_from_name("euclidean", 2), EuclideanSpace)
        assert isinstance(manifold_from_name("hyperboloid", 2), Hyperboloid)
        with pytest.raises(GeometryError):
            manifold_from_name("poincare", 2)


def test_constraint_drift_over_10k_chained_ops(H2, rng):
    x = H2.random_point(rng)
    drift = 0.0
    for _ in range(3400):
        v = H2.random_tangent(rng, x, 1.0)
        v = v * (0.5 / max(H2.norm(v), 1e-12))
        y = H2.exp(x, v)
        x = H2.exp(y, H2.log(y, x))
        drift = max(drift, abs(mink(x.coords, x.coords) + 1.0))
    assert drift < 1e-8


def test_pairing_gradient_matches_finite_differences(H2, rng):
    # grad_y <v, log_x(y)> oracle against central differences
    from oracles import central_difference_gradient

    for _ in range(20):
        x, y = H2.random_point(rng), H2.random_point(rng)
        v = H2.random_tangent(rng, x)
        got = H2.pairing_gradient(x, y, v)
        ref = central_difference_gradient(
            lambda q: H2.inner(x, v, H2.log(x, q)), H2, y
        )
        assert np.abs((got - ref).components).max() < 1e-6
