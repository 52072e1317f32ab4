import math

import numpy as np
import pytest

from knotgeo.curve import EmbeddingError, arc_length, circle, distortion, random_smooth, torus_knot
from knotgeo.energy import energy
from knotgeo.geodesic import (
    Constraint,
    ConstraintDegeneracyError,
    DiscretePath,
    PhaseState,
    barycenter_constraint,
    connect,
    flow,
    length_constraint,
    path_energy,
    path_length,
    shoot,
    shoot_constrained,
    spray,
)
from knotgeo.metric import g_inner
from knotgeo.variation import directional_difference, fd_step

S = 1.75


def unit_speed(x, v):
    return v / math.sqrt(g_inner(x, S, v, v))


def smooth_velocity(n, seed=0, modes=(2, 3)):
    rng = np.random.default_rng(seed)
    t = 2 * np.pi * np.arange(n) / n
    v = np.zeros((n, 3))
    for k in modes:
        a, b = rng.normal(size=(2, 3))
        v += np.outer(np.cos(k * t), a) + np.outer(np.sin(k * t), b)
    return v


def budgets(traj):
    p = 2 * S + 1
    E, L, arc = (np.asarray(a) for a in (traj.energy, traj.length, traj.arc))
    de = np.abs(np.sqrt(E) - np.sqrt(E[0])) - math.sqrt(1 + p / 4) * arc
    dl = np.abs(np.sqrt(L) - np.sqrt(L[0])) - 0.5 * arc
    return de.max(), dl.max()


class TestSpray:
    def test_zero_velocity(self):
        x = np.asarray(random_smooth(16, 0))
        dx, dv = spray(PhaseState(x, np.zeros_like(x), 0.0))
        assert np.all(dx == 0) and np.all(dv == 0)

    def test_quadratic_in_velocity(self):
        x = np.asarray(random_smooth(16, 1))
        v = smooth_velocity(16, 1)
        dx1, dv1 = spray(PhaseState(x, v, 0.0))
        dx2, dv2 = spray(PhaseState(x, 3.0 * v, 0.0))
        np.testing.assert_allclose(dx2, 3.0 * dx1)
        np.testing.assert_allclose(dv2, 9.0 * dv1, rtol=1e-10, atol=1e-12 * np.abs(dv2).max())

    def test_translation_velocity_on_circle(self):
        # only the L2 term sees a constant field, and its variation is tangential to
        # the shape: the acceleration has no G-component along translations
        x = np.asarray(circle(24))
        b = np.array([0.3, -0.2, 0.1])
        v = np.tile(b, (24, 1))
        _, acc = spray(PhaseState(x, v, 0.0))
        for e in np.eye(3):
            assert abs(g_inner(x, S, acc, np.tile(e, (24, 1)))) <= 1e-12
        # reduced quantity: d/dt of the translation momentum G(V, e) vanishes
        h = fd_step(x)
        for e in np.eye(3):
            E_field = np.tile(e, (24, 1))
            rate = directional_difference(lambda y: g_inner(y, S, v, E_field), x, v, h)
            assert abs(rate) <= 1e-8


class TestShoot:
    def test_unit_speed_drift_on_48gon(self):
        x = np.asarray(circle(48))
        v = unit_speed(x, smooth_velocity(48))
        traj = shoot(x, v, S, T=1.0, steps=100)
        assert not traj.aborted
        assert traj.speed_drift <= 1e-6
        assert np.all(np.diff(traj.times) > 0)
        assert len(traj.states) == 101

    def test_fourth_order_under_halving(self):
        x = np.asarray(circle(48))
        v = 10 * unit_speed(x, smooth_velocity(48))
        drifts = [shoot(x, v, S, T=1.0, steps=k, adaptive=False).speed_drift for k in (25, 50, 100)]
        ratios = [a / b for a, b in zip(drifts, drifts[1:])]
        assert min(ratios) >= 8
        assert all(abs(math.log2(r) - 4) < 0.5 for r in ratios)

    def test_time_reversal(self):
        x = np.asarray(random_smooth(32, 2))
        v = 2 * unit_speed(x, smooth_velocity(32, 2))
        fwd = shoot(x, v, S, T=0.5, steps=50)
        end = fwd.states[-1]
        back = shoot(end.curve, -end.velocity, S, T=0.5, steps=50)
        assert np.abs(back.states[-1].curve - x).max() <= 1e-5
        assert np.abs(back.states[-1].velocity + v).max() <= 1e-5

    def test_lipschitz_budgets(self):
        x = np.asarray(torus_knot(48))
        v = 3 * unit_speed(x, smooth_velocity(48, 4))
        traj = shoot(x, v, S, T=1.0, steps=50)
        de, dl = budgets(traj)
        assert de <= 1e-3 and dl <= 1e-3

    def test_adaptive_halving_tightens_drift(self):
        x = np.asarray(circle(32))
        v = 40 * unit_speed(x, smooth_velocity(32, 5))
        fixed = shoot(x, v, S, T=0.5, steps=10, adaptive=False)
        adaptive = shoot(x, v, S, T=0.5, steps=10, adaptive=True, max_halvings=4)
        assert adaptive.speed_drift < fixed.speed_drift / 10

    def test_abort_keeps_partial_trajectory(self):
        n = 48
        t = 2 * np.pi * np.arange(n) / n
        x = np.column_stack([np.cos(t), 0.3 * np.sin(t), 0 * t])
        v = np.zeros_like(x)
        v[:, 1] = -x[:, 1]
        v = 30 * unit_speed(x, v)
        # a strict separation threshold turns the squeeze into an abort
        traj = shoot(x, v, S, T=1.0, steps=50, rtol=0.05)
        assert traj.aborted
        assert "embeddedness" in traj.message
        assert 1 <= len(traj.states) < 51

    def test_input_validation(self):
        x = np.asarray(circle(12))
        with pytest.raises(ValueError):
            shoot(x, np.zeros_like(x), S)
        with pytest.raises(ValueError):
            shoot(x, np.ones_like(x), S, steps=0)
        with pytest.raises(ValueError):
            shoot(x, np.ones((11, 3)), S)


class TestConstraints:
    @pytest.mark.parametrize("make", [lambda x: length_constraint(arc_length(x)), lambda x: barycenter_constraint(x.mean(0))])
    def test_jacobian_and_second_derivative_match_fd(self, make):
        rng = np.random.default_rng(6)
        x = np.asarray(random_smooth(20, rng))
        con = make(x)
        u = rng.normal(size=x.shape)
        u /= np.linalg.norm(u)
        h = fd_step(x)
        d1 = directional_difference(con.value, x, u, h)
        np.testing.assert_allclose(np.einsum("rnm,nm->r", con.jacobian(x), u), d1, rtol=1e-6, atol=1e-10)
        d2 = (con.value(x + 10 * h * u) - 2 * con.value(x) + con.value(x - 10 * h * u)) / (10 * h) ** 2
        np.testing.assert_allclose(con.second(x, u), d2, rtol=1e-4, atol=1e-8)

    def test_length_preserved(self):
        x = np.asarray(circle(48))
        L0 = arc_length(x)
        v = unit_speed(x, smooth_velocity(48, 7))
        free = shoot(x, v, S, T=1.0, steps=50)
        con = shoot_constrained(x, v, length_constraint(L0), S, T=1.0, steps=50)
        assert con.constraint_drift / L0 <= 1e-6
        assert max(abs(L - L0) for L in free.length) / L0 > 100 * con.constraint_drift / L0

    def test_tangential_rotation(self):
        x = np.asarray(circle(32))
        t = 2 * np.pi * np.arange(32) / 32
        v = np.column_stack([-np.sin(t), np.cos(t), 0 * t])
        traj = shoot_constrained(x, unit_speed(x, v), length_constraint(arc_length(x)), S, T=1.0, steps=20)
        assert max(abs(L / traj.length[0] - 1) for L in traj.length) <= 1e-6

    def test_barycenter_preserved(self):
        x = np.asarray(random_smooth(32, 8))
        v = smooth_velocity(32, 8)
        v -= v.mean(axis=0)
        traj = shoot_constrained(x, unit_speed(x, v), barycenter_constraint(x.mean(0)), S, T=1.0, steps=30)
        assert traj.constraint_drift <= 1e-8
        assert traj.message == ""

    def test_normal_component_projected_and_reported(self):
        x = np.asarray(circle(24))
        v = np.tile([1.0, 0.0, 0.0], (24, 1)) + smooth_velocity(24, 9)
        traj = shoot_constrained(x, v, barycenter_constraint(x.mean(0)), S, T=0.2, steps=5)
        assert "projected" in traj.message
        np.testing.assert_allclose(traj.states[0].velocity.mean(axis=0), 0.0, atol=1e-12)

    def test_reprojection(self):
        x = np.asarray(circle(32))
        L0 = arc_length(x)
        v = 5 * unit_speed(x, smooth_velocity(32, 10))
        plain = shoot_constrained(x, v, length_constraint(L0), S, T=1.0, steps=10, adaptive=False)
        proj = shoot_constrained(x, v, length_constraint(L0), S, T=1.0, steps=10, adaptive=False, reproject=True)
        assert proj.constraint_drift <= 1e-12 * L0
        assert proj.constraint_drift <= plain.constraint_drift

    def test_degenerate_constraint(self):
        x = np.asarray(circle(12))
        zero = Constraint(
            "zero",
            value=lambda y: np.zeros(1),
            jacobian=lambda y: np.zeros((1,) + y.shape),
            second=lambda y, u: np.zeros(1),
        )
        with pytest.raises(ConstraintDegeneracyError):
            shoot_constrained(x, smooth_velocity(12), zero, S, T=0.1, steps=2)

    def test_start_must_satisfy_constraint(self):
        x = np.asarray(circle(12))
        with pytest.raises(ValueError):
            shoot_constrained(x, smooth_velocity(12), length_constraint(1.0), S)


class TestPathEnergy:
    def test_constant_path(self):
        x = np.asarray(random_smooth(16, 11))
        assert path_energy(np.stack([x] * 5), S) == 0.0

    def test_translation_path(self):
        x = np.asarray(random_smooth(20, 12))
        b = np.array([0.4, -0.1, 0.2])
        K = 6
        curves = np.stack([x + k / K * b for k in range(K + 1)])
        assert path_energy(curves, S) == pytest.approx(0.5 * (b @ b) * arc_length(x), rel=1e-12)

    def test_hoelder(self):
        rng = np.random.default_rng(13)
        x = np.asarray(random_smooth(16, rng))
        w = smooth_velocity(16, 13)
        K = 5
        for times in (np.linspace(0, 1, K + 1), np.sort(np.r_[0, rng.uniform(size=K - 1), 1])):
            curves = np.stack([x + 0.3 * t * w for t in times])
            length, E = path_length(curves, S), path_energy(curves, S)
            assert length**2 <= 2 * E * (1 + 1e-12)
        # equality up to rounding for an equal-speed straight segment family
        curves = np.stack([x + 1e-6 * k * w for k in range(K + 1)])
        assert path_length(curves, S) ** 2 == pytest.approx(2 * path_energy(curves, S), rel=1e-6)

    def test_left_evaluation_differs_at_second_order(self):
        x = np.asarray(random_smooth(16, 14))
        w = smooth_velocity(16, 14)
        errs = []
        for K in (4, 8, 16):
            curves = np.stack([x + 0.2 * (k / K) * w + 0.05 * (k / K) ** 2 * w[::-1] for k in range(K + 1)])
            errs.append(abs(path_energy(curves, S, evaluation="left") - path_energy(curves, S)))
        assert errs[0] > errs[1] > errs[2]

    def test_names_offending_curve(self):
        x = np.asarray(circle(8))
        bad = x.copy()
        bad[4] = bad[0]
        with pytest.raises(EmbeddingError, match="curve 2"):
            path_energy(np.stack([x, x, bad, x]), S)

    def test_accepts_discrete_path(self):
        x = np.asarray(circle(10))
        assert path_energy(DiscretePath(np.stack([x, x + 0.1])), S) == pytest.approx(0.5 * 0.03 * arc_length(x))


class TestConnect:
    def test_identical_ends(self):
        x = np.asarray(random_smooth(16, 15))
        p = connect(x, x, S, K=4)
        assert p.converged and p.iterations == 0
        assert p.energy == 0.0

    def test_translation(self):
        x = np.asarray(circle(24))
        b = np.array([1e-2, 5e-3, 0.0])
        p = connect(x, x + b, S, K=4, tol=1e-8)
        assert p.converged
        assert p.energy == pytest.approx(0.5 * (b @ b) * arc_length(x), abs=1e-8)
        assert p.energy <= 0.5 * (b @ b) * arc_length(x)
        assert np.array_equal(p.curves[0], x) and np.array_equal(p.curves[-1], x + b)

    def test_endpoints_bit_identical_and_speeds_equalize(self):
        a = np.asarray(random_smooth(20, 16))
        b = a + 0.05 * smooth_velocity(20, 16)
        p = connect(a, b, S, K=6, tol=1e-8)
        assert p.converged
        assert np.array_equal(p.curves[0], a) and np.array_equal(p.curves[-1], b)
        assert p.speed_spread <= 1e-2

    def test_warm_start_and_callback(self):
        a = np.asarray(random_smooth(16, 17))
        b = a + 0.05 * smooth_velocity(16, 17)
        seen = []
        first = connect(a, b, S, K=4, tol=1e-4, callback=lambda *args: seen.append(args[1]))
        assert all(e2 <= e1 for e1, e2 in zip(seen, seen[1:]))
        again = connect(a, b, S, K=4, tol=1e-4, init=first.curves)
        assert again.iterations <= 1

    def test_iteration_limit_flagged(self):
        a = np.asarray(random_smooth(16, 18))
        b = a + 0.2 * smooth_velocity(16, 18)
        p = connect(a, b, S, K=4, tol=1e-14, max_iter=1)
        assert not p.converged
        assert "maximum" in p.message

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            connect(circle(10), circle(12), S)


class TestFlow:
    def test_circle_stays_round(self):
        traj = flow(circle(48), S, steps=30)
        assert not traj.stalled
        for st in traj.states:
            x = st.curve
            r = np.linalg.norm(x - x.mean(axis=0), axis=1)
            assert r.std() <= 1e-10 * r.mean()
        assert np.all(np.diff(traj.energy) < 0)

    def test_perturbed_circle(self):
        c = random_smooth(48, 3, amplitude=0.1)
        traj = flow(c, S, steps=30)
        E = np.asarray(traj.energy)
        assert np.all(np.diff(E) < 0)
        d = [distortion(st.curve) for st in traj.states]
        assert d[-1] < d[0]
        assert abs(d[-1] - math.pi / 2) < 5e-3
        assert max(d[5:]) < d[0]

    def test_trefoil_keeps_separation(self):
        traj = flow(torus_knot(128), S, steps=20)
        assert not traj.stalled
        assert min(traj.min_separation) > 0.5 * traj.min_separation[0]
        assert np.all(np.diff(traj.energy) < 0)

    def test_fixed_step(self):
        traj = flow(random_smooth(24, 19), S, steps=5, step=0.5)
        assert np.all(np.diff(traj.energy) < 0)
        assert np.allclose(np.diff(traj.times), 0.5)

    def test_lower_bound_along_flow_at_256(self):
        traj = flow(torus_knot(256), S, steps=5)
        ratios = [E * L ** (2 * S - 3) / math.pi**2 for E, L in zip(traj.energy, traj.length)]
        assert min(ratios) >= 0.98
        assert traj.energy[-1] == pytest.approx(energy(traj.states[-1].curve), rel=1e-14)
