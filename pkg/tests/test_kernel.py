import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from knotgeo.curve import EmbeddingError, circle, random_smooth, torus_knot
from knotgeo.kernel import (
    Quadrature,
    build_pair_table,
    check_exponent,
    edge_derivatives,
    lambda_ratio,
    rs_apply,
    self_correction_constant,
)

S = 1.75


def _rotation(rng, m=3):
    q, r = np.linalg.qr(rng.normal(size=(m, m)))
    return q * np.sign(np.diag(r))


def _rect(k=4):
    """Long rectangle whose sides are subdivided into ``k`` collinear edges."""
    t = np.linspace(0, 1, k, endpoint=False)
    sides = [
        np.column_stack([4 * t, 0 * t]),
        np.column_stack([4 + 0 * t, t]),
        np.column_stack([4 - 4 * t, 1 + 0 * t]),
        np.column_stack([0 * t, 1 - t]),
    ]
    return np.vstack(sides)


@pytest.mark.parametrize("s", [1.5, 2.0, 1.0, float("nan")])
def test_exponent_range_is_open(s):
    with pytest.raises(ValueError):
        check_exponent(s)


def test_self_correction_constant_value():
    zeta_half = -1.4603545088095868  # zeta(1/2), tabulated
    assert self_correction_constant(1.75) == pytest.approx(-zeta_half / 2, rel=1e-14)


class TestPairTable:
    def test_covers_all_ordered_pairs(self):
        t = build_pair_table(random_smooth(11, 0), S)
        assert t.mask.sum() == 11 * 10
        assert np.all(t.weights[t.mask] > 0)
        assert np.all(t.dist[t.mask] > 0)
        assert np.all(np.diag(t.weights) == 0)

    def test_skip_adjacent_drops_neighbours(self):
        t = build_pair_table(random_smooth(11, 0), S, Quadrature(skip_adjacent=True))
        assert t.mask.sum() == 11 * 8
        assert not t.mask[0, 1] and not t.mask[0, 10] and t.mask[0, 2]

    def test_weights_and_cached_operator(self):
        x = np.asarray(random_smooth(9, 1))
        t = build_pair_table(x, S)
        i, j = 2, 6
        li = np.linalg.norm(x[3] - x[2])
        lj = np.linalg.norm(x[7] - x[6])
        pi, pj = 0.5 * (x[2] + x[3]), 0.5 * (x[6] + x[7])
        d = np.linalg.norm(pj - pi)
        tau = (x[3] - x[2]) / li
        assert t.weights[i, j] == pytest.approx(li * lj / d, rel=1e-14)
        ref = ((pj - pi) - tau * (tau @ (pj - pi))) / d**S
        np.testing.assert_allclose(t.rs_gamma[i, j], ref, rtol=1e-13)

    def test_collinear_pairs_vanish(self):
        x = _rect(4)
        t = build_pair_table(x, S)
        # edges 0..3 lie on the bottom side
        for i in range(4):
            for j in range(4):
                np.testing.assert_allclose(t.rs_gamma[i, j], 0.0, atol=1e-15)
        assert np.linalg.norm(t.rs_gamma[0, 8]) > 0

    def test_circle_closed_form(self):
        n = 40
        t = build_pair_table(circle(n), S)
        # midpoints sit on the circle of radius cos(pi/n), edges are tangent to it
        r = math.cos(math.pi / n)
        off = t.mask
        np.testing.assert_allclose(
            np.sum(t.rs_gamma**2, axis=2)[off],
            t.dist[off] ** (4 - 2 * S) / (4 * r**2),
            rtol=1e-12,
        )

    def test_coincident_midpoints_rejected(self):
        bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(EmbeddingError):
            build_pair_table(bowtie, S)

    def test_rigid_motion(self):
        rng = np.random.default_rng(2)
        x = np.asarray(random_smooth(13, 2))
        Q, b = _rotation(rng), rng.normal(size=3)
        t0 = build_pair_table(x, S)
        t1 = build_pair_table(x @ Q.T + b, S)
        np.testing.assert_allclose(t1.weights, t0.weights, rtol=1e-12)
        np.testing.assert_allclose(t1.rs_gamma, t0.rs_gamma @ Q.T, atol=1e-12)

    def test_cyclic_relabeling_permutes(self):
        x = np.asarray(random_smooth(13, 3))
        k = 5
        t0 = build_pair_table(x, S)
        t1 = build_pair_table(np.roll(x, -k, axis=0), S)
        perm = (np.arange(13) + k) % 13
        np.testing.assert_allclose(t1.weights, t0.weights[np.ix_(perm, perm)], rtol=1e-13)
        np.testing.assert_allclose(t1.rs_gamma, t0.rs_gamma[np.ix_(perm, perm)], rtol=1e-12, atol=1e-14)


class TestRsApply:
    def test_constant_field_vanishes(self):
        x = np.asarray(random_smooth(12, 4))
        t = build_pair_table(x, S)
        u = np.tile([1.0, -2.0, 0.5], (12, 1))
        np.testing.assert_allclose(rs_apply(t, u), 0.0, atol=1e-14)

    def test_gamma_reproduces_cache(self):
        x = np.asarray(random_smooth(12, 4))
        t = build_pair_table(x, S)
        np.testing.assert_allclose(rs_apply(t, x), t.rs_gamma, rtol=1e-12, atol=1e-15)

    def test_linear_image_against_direct_evaluation(self):
        rng = np.random.default_rng(5)
        x = np.asarray(random_smooth(10, 5))
        A = rng.normal(size=(3, 3))
        u = x @ A.T
        t = build_pair_table(x, S)
        got = rs_apply(t, u)
        n = 10
        for i in range(n):
            li = np.linalg.norm(x[(i + 1) % n] - x[i])
            Du = (u[(i + 1) % n] - u[i]) / li
            tau = (x[(i + 1) % n] - x[i]) / li
            pi = 0.5 * (x[i] + x[(i + 1) % n])
            for j in range(n):
                if i == j:
                    continue
                pj = 0.5 * (x[j] + x[(j + 1) % n])
                ubar_diff = A @ (pj - pi)
                ref = (ubar_diff - Du * (tau @ (pj - pi))) / np.linalg.norm(pj - pi) ** S
                np.testing.assert_allclose(got[i, j], ref, rtol=1e-11, atol=1e-14)

    def test_shape_mismatch(self):
        t = build_pair_table(circle(8), S)
        with pytest.raises(ValueError):
            rs_apply(t, np.zeros((7, 3)))

    def test_scale_covariance(self):
        rng = np.random.default_rng(6)
        x = np.asarray(random_smooth(12, 6))
        u = rng.normal(size=x.shape)
        lam = 3.0
        t0, t1 = build_pair_table(x, S), build_pair_table(lam * x, S)
        np.testing.assert_allclose(rs_apply(t1, lam * u), lam ** (1 - S) * rs_apply(t0, u), rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(t1.weights, lam * t0.weights, rtol=1e-13)

    def test_rigid_equivariance(self):
        rng = np.random.default_rng(7)
        x = np.asarray(random_smooth(12, 7))
        u = rng.normal(size=x.shape)
        Q, b = _rotation(rng), rng.normal(size=3)
        r0 = rs_apply(build_pair_table(x, S), u)
        r1 = rs_apply(build_pair_table(x @ Q.T + b, S), u @ Q.T)
        np.testing.assert_allclose(r1, r0 @ Q.T, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(-5, 5))
def test_rs_apply_is_linear(seed, alpha):
    rng = np.random.default_rng(seed)
    x = np.asarray(random_smooth(9, rng))
    u, v = rng.normal(size=(2,) + x.shape)
    t = build_pair_table(x, S)
    lhs = rs_apply(t, alpha * u + v)
    rhs = alpha * rs_apply(t, u) + rs_apply(t, v)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


class TestEdgeDerivatives:
    def test_gamma_gives_tangent_projector(self):
        x = np.asarray(torus_knot(30))
        P = edge_derivatives(x, x).full
        np.testing.assert_allclose(P @ P, P, atol=1e-14)
        np.testing.assert_allclose(P, np.swapaxes(P, 1, 2), atol=1e-15)
        np.testing.assert_allclose(np.trace(P, axis1=1, axis2=2), 1.0, rtol=1e-14)

    def test_arc_derivative(self):
        x = np.asarray(circle(6))
        u = np.arange(18.0).reshape(6, 3)
        ed = edge_derivatives(x, u)
        ell = 2 * math.sin(math.pi / 6)
        np.testing.assert_allclose(ed.arc[0], (u[1] - u[0]) / ell, rtol=1e-14)


class TestLambdaRatio:
    def test_beta_zero_is_one(self):
        lam = lambda_ratio(random_smooth(10, 1), 0.0)
        off = ~np.eye(10, dtype=bool)
        np.testing.assert_array_equal(lam[off], 1.0)
        assert np.all(np.isnan(np.diag(lam)))

    def test_reciprocal(self):
        c = random_smooth(10, 2)
        off = ~np.eye(10, dtype=bool)
        np.testing.assert_allclose((lambda_ratio(c, 1.0) * lambda_ratio(c, -1.0))[off], 1.0, rtol=1e-14)

    def test_circle_maximum_tends_to_half_pi(self):
        vals = [np.nanmax(lambda_ratio(circle(n), 1.0)) for n in (16, 64, 256, 1024)]
        errs = [abs(v - math.pi / 2) for v in vals]
        assert all(b < a for a, b in zip(errs, errs[1:]))
        assert errs[-1] < 1e-5

    def test_zero_chord_rejected(self):
        bowtie = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
        with pytest.raises(EmbeddingError):
            lambda_ratio(bowtie, 1.0)

    def test_non_finite_beta(self):
        with pytest.raises(ValueError):
            lambda_ratio(circle(5), float("inf"))
