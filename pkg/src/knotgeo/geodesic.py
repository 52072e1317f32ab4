"""Geodesic shooting, constrained shooting, the path-energy boundary value
problem and metric-preconditioned energy flows."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .curve import EmbeddingError, SEPARATION_RTOL, min_separation, vertices_of
from .energy import energy_from_table
from .kernel import DEFAULT_QUADRATURE, Quadrature
from .metric import PositivityError
from .variation import MetricDerivatives

__all__ = [
    "PhaseState",
    "Trajectory",
    "DiscretePath",
    "Constraint",
    "ConstraintDegeneracyError",
    "length_constraint",
    "barycenter_constraint",
    "spray",
    "shoot",
    "shoot_constrained",
    "path_energy",
    "path_length",
    "connect",
    "flow",
]

log = logging.getLogger(__name__)


class ConstraintDegeneracyError(ValueError):
    """The constraint Jacobian is rank deficient in the metric."""


@dataclass
class PhaseState:
    curve: np.ndarray
    velocity: np.ndarray
    t: float


@dataclass
class Trajectory:
    """Time-ordered states plus per-state diagnostics.

    ``arc`` holds the traversed G-length up to each state.  ``aborted`` is set
    when a step would leave the embedded curves (or the metric broke down); the
    states up to that point are kept.
    """

    s: float
    states: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    length: list = field(default_factory=list)
    speed: list = field(default_factory=list)
    min_separation: list = field(default_factory=list)
    arc: list = field(default_factory=list)
    constraint: list = field(default_factory=list)
    aborted: bool = False
    stalled: bool = False
    message: str = ""

    @property
    def times(self) -> np.ndarray:
        return np.array([st.t for st in self.states])

    @property
    def speed_drift(self) -> float:
        sp = np.asarray(self.speed)
        return float(np.max(np.abs(sp - sp[0])) / sp[0])

    @property
    def constraint_drift(self) -> float:
        return float(max(np.linalg.norm(c) for c in self.constraint)) if self.constraint else 0.0

    def _record(self, x, v, t, md, speed, arc, phi=None):
        self.states.append(PhaseState(np.array(x), np.array(v), float(t)))
        self.energy.append(energy_from_table(md.table))
        self.length.append(float(md.table.lengths.sum()))
        self.speed.append(float(speed))
        self.min_separation.append(min_separation(x))
        self.arc.append(float(arc))
        if phi is not None:
            self.constraint.append(np.asarray(phi, dtype=float))


def _speed(md, v):
    return float(np.sqrt(max(np.sum(v * (md.gram.scalar @ v)), 0.0)))


def spray(state: PhaseState, s: float = 1.75, quad: Quadrature = DEFAULT_QUADRATURE):
    """Time derivative ``(V, -A_gamma(V) V)`` of a phase state."""
    md = MetricDerivatives(state.curve, s, quad)
    v = np.asarray(state.velocity, dtype=float)
    return v.copy(), -md.christoffel(v)


# ---------------------------------------------------------------------------
# constraints


@dataclass(frozen=True)
class Constraint:
    """Vector constraint ``value(x) = 0`` with ``k`` components.

    ``jacobian(x)`` returns ``(k, n, m)`` covectors and ``second(x, u)`` the
    directional second derivative ``D^2 value(x)(u, u)``.
    """

    name: str
    value: Callable
    jacobian: Callable
    second: Callable


def length_constraint(target: float) -> Constraint:
    """Total length fixed to ``target``."""

    def edges(x):
        e = np.roll(x, -1, axis=0) - x
        ell = np.linalg.norm(e, axis=1)
        return e, ell, e / ell[:, None]

    def value(x):
        return np.array([edges(x)[1].sum() - target])

    def jacobian(x):
        _, _, tau = edges(x)
        return (np.roll(tau, 1, axis=0) - tau)[None]

    def second(x, u):
        _, ell, tau = edges(x)
        du = np.roll(u, -1, axis=0) - u
        along = np.einsum("ik,ik->i", du, tau)
        return np.array([np.sum((np.einsum("ik,ik->i", du, du) - along**2) / ell)])

    return Constraint("length", value, jacobian, second)


def barycenter_constraint(target) -> Constraint:
    """Vertex average fixed to ``target``."""
    target = np.asarray(target, dtype=float)

    def value(x):
        return x.mean(axis=0) - target

    def jacobian(x):
        n, m = x.shape
        out = np.zeros((m, n, m))
        for r in range(m):
            out[r, :, r] = 1.0 / n
        return out

    def second(x, u):
        return np.zeros(x.shape[1])

    return Constraint("barycenter", value, jacobian, second)


class _ConstraintFrame:
    """``Y = J^-1 DPhi'`` and the Gram matrix ``S = DPhi J^-1 DPhi'``."""

    def __init__(self, con, x, md):
        self.jac = con.jacobian(x)
        self.Y = np.stack([md.gram.solve(j) for j in self.jac])
        S = np.einsum("rnm,qnm->rq", self.jac, self.Y)
        scale = max(np.abs(S).max(), np.finfo(float).tiny)
        try:
            self.S = cho_factor(S / scale)
        except LinAlgError:
            raise ConstraintDegeneracyError(f"constraint Jacobian is rank deficient: S = {S}") from None
        if np.linalg.cond(S) > 1e12:
            raise ConstraintDegeneracyError(f"constraint Jacobian is rank deficient: S = {S}")
        self.scale = scale

    def pinv(self, y):
        """``DPhi^dagger y``."""
        return np.einsum("r,rnm->nm", cho_solve(self.S, np.asarray(y)) / self.scale, self.Y)

    def project(self, v):
        """``Q v``, the G-orthogonal part of ``v`` normal to the constraint."""
        return self.pinv(np.einsum("rnm,nm->r", self.jac, v))


def _accel(x, v, s, quad, con=None):
    md = MetricDerivatives(x, s, quad)
    a = md.christoffel(v)
    if con is None:
        return -a, md
    fr = _ConstraintFrame(con, x, md)
    return -fr.pinv(con.second(x, v)) - a + fr.project(a), md


# ---------------------------------------------------------------------------
# shooting


def _rk4(x, v, h, a1, s, quad, con):
    x2 = x + 0.5 * h * v
    v2 = v + 0.5 * h * a1
    a2, _ = _accel(x2, v2, s, quad, con)
    x3 = x + 0.5 * h * v2
    v3 = v + 0.5 * h * a2
    a3, _ = _accel(x3, v3, s, quad, con)
    x4 = x + h * v3
    v4 = v + h * a3
    a4, _ = _accel(x4, v4, s, quad, con)
    xn = x + h / 6 * (v + 2 * v2 + 2 * v3 + v4)
    vn = v + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
    return xn, vn


def _advance(x, v, h, a1, sp0, s, quad, con, tol, depth):
    """One step of size ``h``, halved recursively while the per-step speed
    drift exceeds ``tol``."""
    xn, vn = _rk4(x, v, h, a1, s, quad, con)
    an, mdn = _accel(xn, vn, s, quad, con)
    spn = _speed(mdn, vn)
    if tol is None or depth == 0 or abs(spn - sp0) <= tol * sp0:
        return xn, vn, an, mdn, spn
    xm, vm, am, _, spm = _advance(x, v, 0.5 * h, a1, sp0, s, quad, con, tol, depth - 1)
    return _advance(xm, vm, 0.5 * h, am, spm, s, quad, con, tol, depth - 1)


def _integrate(x0, v0, s, T, steps, quad, con, adaptive, drift_tol, max_halvings, reproject, rtol):
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.array(vertices_of(x0), dtype=float)
    v = np.array(v0, dtype=float)
    if v.shape != x.shape:
        raise ValueError(f"velocity shape {v.shape} does not match curve {x.shape}")
    traj = Trajectory(s=float(s))
    a, md = _accel(x, v, s, quad, con)
    sp = _speed(md, v)
    if not np.isfinite(sp) or sp <= 0:
        raise ValueError("initial velocity must have finite positive G-norm")
    traj._record(x, v, 0.0, md, sp, 0.0, None if con is None else con.value(x))
    h = T / steps
    arc = 0.0
    tol = drift_tol if adaptive else None
    depth = max_halvings if adaptive else 0
    for k in range(steps):
        try:
            xn, vn, an, mdn, spn = _advance(x, v, h, a, sp, s, quad, con, tol, depth)
            if con is not None and reproject:
                xn, vn = _reproject(xn, vn, s, quad, con)
                an, mdn = _accel(xn, vn, s, quad, con)
                spn = _speed(mdn, vn)
        except (EmbeddingError, PositivityError, LinAlgError) as exc:
            traj.aborted = True
            traj.message = f"step {k}: {exc}"
            break
        sep = min_separation(xn)
        if not sep > rtol * mdn.table.lengths.sum() or not np.all(np.isfinite(xn)):
            traj.aborted = True
            traj.message = f"step {k}: embeddedness proxy violated (min separation {sep:.3e})"
            break
        arc += 0.5 * h * (sp + spn)
        x, v, a, md, sp = xn, vn, an, mdn, spn
        traj._record(x, v, (k + 1) * h, md, sp, arc, None if con is None else con.value(x))
    if traj.aborted:
        log.warning("shooting aborted: %s", traj.message)
    return traj


def shoot(
    gamma0,
    v0,
    s: float = 1.75,
    T: float = 1.0,
    steps: int = 100,
    quad: Quadrature = DEFAULT_QUADRATURE,
    adaptive: bool = True,
    drift_tol: float = 1e-8,
    max_halvings: int = 6,
    rtol: float = SEPARATION_RTOL,
) -> Trajectory:
    """Integrate the geodesic equation from ``(gamma0, v0)`` up to time ``T``
    with classical RK4.

    With ``adaptive`` a step is split in half (recursively, up to
    ``max_halvings`` times) whenever it changes the G-speed by more than
    ``drift_tol`` relative.  States are recorded at the ``steps`` nominal times.
    """
    return _integrate(gamma0, v0, s, T, steps, quad, None, adaptive, drift_tol, max_halvings, False, rtol)


def _reproject(x, v, s, quad, con, tol=1e-12, iters=5):
    for _ in range(iters):
        phi = con.value(x)
        if np.linalg.norm(phi) <= tol:
            break
        md = MetricDerivatives(x, s, quad)
        x = x - _ConstraintFrame(con, x, md).pinv(phi)
    md = MetricDerivatives(x, s, quad)
    return x, v - _ConstraintFrame(con, x, md).project(v)


def shoot_constrained(
    gamma0,
    v0,
    constraint: Constraint,
    s: float = 1.75,
    T: float = 1.0,
    steps: int = 100,
    quad: Quadrature = DEFAULT_QUADRATURE,
    reproject: bool = False,
    adaptive: bool = True,
    drift_tol: float = 1e-8,
    max_halvings: int = 6,
    rtol: float = SEPARATION_RTOL,
) -> Trajectory:
    """Geodesic shooting on the submanifold ``constraint.value = 0``.

    The acceleration is ``-DPhi^dagger D^2Phi(V, V) - (I - Q) A(V) V`` with the
    G-orthogonal projector ``Q = DPhi^dagger DPhi``.  A start velocity with a
    normal component is projected first (noted in ``message``).
    """
    x = np.array(vertices_of(gamma0), dtype=float)
    phi0 = constraint.value(x)
    if np.linalg.norm(phi0) > 1e-10:
        raise ValueError(f"start curve violates the {constraint.name} constraint: {phi0}")
    md = MetricDerivatives(x, s, quad)
    frame = _ConstraintFrame(constraint, x, md)
    v = np.array(v0, dtype=float)
    normal = frame.project(v)
    note = ""
    if np.sqrt(np.sum(normal * (md.gram.scalar @ normal))) > 1e-12 * max(_speed(md, v), 1e-300):
        v = v - normal
        note = "initial velocity projected onto the constraint tangent space"
    traj = _integrate(x, v, s, T, steps, quad, constraint, adaptive, drift_tol, max_halvings, reproject, rtol)
    if note:
        traj.message = note if not traj.message else f"{note}; {traj.message}"
    return traj


# ---------------------------------------------------------------------------
# boundary value problem


@dataclass
class DiscretePath:
    """Curves ``gamma^0 .. gamma^K`` on the uniform grid ``k/K``; the end
    curves are pinned."""

    curves: np.ndarray
    s: float = 1.75
    energy: float = float("nan")
    iterations: int = 0
    grad_norm: float = float("nan")
    converged: bool = False
    message: str = ""
    segment_speeds: np.ndarray | None = None

    @property
    def K(self) -> int:
        return self.curves.shape[0] - 1

    @property
    def speed_spread(self) -> float:
        """Standard deviation of the per-segment speeds relative to their mean."""
        sp = np.asarray(self.segment_speeds)
        return float(sp.std() / sp.mean()) if sp.mean() > 0 else 0.0


def _as_path(p):
    curves = p.curves if isinstance(p, DiscretePath) else np.asarray(p, dtype=float)
    if curves.ndim != 3 or curves.shape[0] < 2:
        raise ValueError(f"a path needs shape (K+1, n, m) with K >= 1, got {curves.shape}")
    return curves


def _check_interior(curves, rtol):
    for k in range(1, curves.shape[0] - 1):
        x = curves[k]
        L = np.linalg.norm(np.roll(x, -1, axis=0) - x, axis=1).sum()
        if not min_separation(x) > rtol * L:
            raise EmbeddingError(f"path curve {k} fails the embeddedness proxy")


def _segments(curves, s, quad, evaluation, grad=False):
    K = curves.shape[0] - 1
    total = 0.0
    mats, speeds = [], []
    g = np.zeros_like(curves) if grad else None
    for k in range(K):
        delta = curves[k + 1] - curves[k]
        base = 0.5 * (curves[k] + curves[k + 1]) if evaluation == "midpoint" else curves[k]
        md = MetricDerivatives(base, s, quad)
        M = md.asm.scalar_matrix()
        Md = M @ delta
        q = float(np.sum(delta * Md))
        total += 0.5 * K * q
        mats.append(M)
        speeds.append(K * np.sqrt(max(q, 0.0)))
        if grad:
            gm = md.grad_metric(delta, delta)
            if evaluation == "midpoint":
                g[k + 1] += K * Md + 0.25 * K * gm
                g[k] += -K * Md + 0.25 * K * gm
            else:
                g[k + 1] += K * Md
                g[k] += -K * Md + 0.5 * K * gm
    return total, g, mats, np.array(speeds)


def path_energy(
    p,
    s: float = 1.75,
    quad: Quadrature = DEFAULT_QUADRATURE,
    evaluation: str = "midpoint",
    rtol: float = SEPARATION_RTOL,
) -> float:
    """``(K/2) sum_k G_{mid_k}(delta_k, delta_k)`` with ``delta_k = gamma^{k+1} - gamma^k``.

    ``evaluation="left"`` uses the metric at ``gamma^k`` instead of the
    segment midpoint.
    """
    curves = _as_path(p)
    _check_interior(curves, rtol)
    return _segments(curves, s, quad, evaluation)[0]


def path_length(p, s: float = 1.75, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    """Discrete G-length ``sum_k ||delta_k||_{G_{mid_k}}``."""
    curves = _as_path(p)
    return float(_segments(curves, s, quad, "midpoint")[3].sum() / (curves.shape[0] - 1))


def _preconditioner(mats, K, n):
    """Hessian of the path energy with frozen metrics: block tridiagonal in
    time, blocks ``K (M_{k-1} + M_k)`` and ``-K M_k``."""
    N = (K - 1) * n
    P = np.zeros((N, N))
    for k in range(1, K):
        r = slice((k - 1) * n, k * n)
        P[r, r] = K * (mats[k - 1] + mats[k])
        if k < K - 1:
            c = slice(k * n, (k + 1) * n)
            P[r, c] = -K * mats[k]
            P[c, r] = -K * mats[k]
    return cho_factor(P, lower=True)


def connect(
    gamma_a,
    gamma_b,
    s: float = 1.75,
    K: int = 8,
    tol: float = 1e-6,
    max_iter: int = 200,
    init=None,
    quad: Quadrature = DEFAULT_QUADRATURE,
    evaluation: str = "midpoint",
    rtol: float = SEPARATION_RTOL,
    callback=None,
) -> DiscretePath:
    """Minimize the discrete path energy between two curves.

    Preconditioned gradient descent with Armijo backtracking.  The
    preconditioner is the path-energy Hessian with the metric frozen at the
    current segment midpoints; candidate steps with a non-embedded curve are
    rejected inside the line search.  Stops when ``sqrt(g' P^-1 g) <= tol``.
    ``callback(iteration, energy, grad_norm, curves)`` sees every iterate.
    """
    xa = np.array(vertices_of(gamma_a), dtype=float)
    xb = np.array(vertices_of(gamma_b), dtype=float)
    if xa.shape != xb.shape:
        raise ValueError(f"end curves differ in shape: {xa.shape} vs {xb.shape}")
    if K < 1:
        raise ValueError("K must be >= 1")
    if init is None:
        t = np.linspace(0.0, 1.0, K + 1)[:, None, None]
        curves = (1 - t) * xa + t * xb
    else:
        curves = np.array(_as_path(init), dtype=float)
        if curves.shape != (K + 1,) + xa.shape:
            raise ValueError("warm start has the wrong shape")
    curves[0], curves[-1] = xa, xb
    _check_interior(curves, rtol)
    n = xa.shape[0]
    path = DiscretePath(curves, s=float(s))

    E, g, mats, speeds = _segments(curves, s, quad, evaluation, grad=True)
    it = 0
    while True:
        if K == 1:
            path.converged, gnorm = True, 0.0
            break
        gi = g[1:-1].reshape((K - 1) * n, -1)
        fac = _preconditioner(mats, K, n)
        d = -cho_solve(fac, gi)
        slope = float(np.sum(gi * d))
        gnorm = float(np.sqrt(max(-slope, 0.0)))
        if callback is not None:
            callback(it, E, gnorm, curves)
        if gnorm <= tol:
            path.converged = True
            break
        if it >= max_iter:
            path.message = "maximum iterations reached"
            break
        d = d.reshape(K - 1, n, -1)
        step = 1.0
        accepted = False
        while step > 1e-12:
            trial = curves.copy()
            trial[1:-1] += step * d
            try:
                _check_interior(trial, rtol)
                Et, gt, mt, st = _segments(trial, s, quad, evaluation, grad=True)
            except (EmbeddingError, PositivityError):
                step *= 0.5
                continue
            if Et <= E + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            path.message = "line search failed to find an admissible step"
            break
        curves, E, g, mats, speeds = trial, Et, gt, mt, st
        it += 1
    path.curves = curves
    path.energy = E
    path.iterations = it
    path.grad_norm = gnorm
    path.segment_speeds = speeds
    return path


# ---------------------------------------------------------------------------
# energy flow


def flow(
    gamma0,
    s: float = 1.75,
    steps: int = 100,
    step: float | None = None,
    quad: Quadrature = DEFAULT_QUADRATURE,
    rtol: float = SEPARATION_RTOL,
    max_backtracks: int = 40,
    max_step: float = 1.0,
) -> Trajectory:
    """Gradient flow ``gamma <- gamma - tau J^-1 grad E`` in the metric G.

    With ``step=None`` each step size comes from Armijo backtracking (starting
    from twice the last accepted size); otherwise ``step`` is used as is and
    still halved if the energy would not decrease.  Armijo steps never exceed
    ``max_step``: the metric is close to the energy Hessian (the generalized
    eigenvalues of the pair stay below about 1), so much longer explicit steps
    are unstable in the stiff shape modes even while the energy still drops.
    The state velocity is the preconditioned descent direction and ``speed``
    its G-norm.
    """
    from .energy import grad_energy

    x = np.array(vertices_of(gamma0), dtype=float)
    traj = Trajectory(s=float(s))
    tau = max_step if step is None else float(step)
    t = 0.0
    arc = 0.0
    md = MetricDerivatives(x, s, quad)
    E = energy_from_table(md.table)
    for k in range(steps + 1):
        grad = grad_energy(x, s, quad)
        d = -md.gram.solve(grad)
        sp = _speed(md, d)
        traj._record(x, d, t, md, sp, arc)
        if k == steps:
            break
        slope = float(np.sum(grad * d))
        trial_tau = tau if step is not None else min(2.0 * tau, max_step)
        for _ in range(max_backtracks):
            xt = x + trial_tau * d
            try:
                L = np.linalg.norm(np.roll(xt, -1, axis=0) - xt, axis=1).sum()
                if not min_separation(xt) > rtol * L:
                    raise EmbeddingError("candidate leaves the embedded curves")
                mdt = MetricDerivatives(xt, s, quad)
                Et = energy_from_table(mdt.table)
            except (EmbeddingError, PositivityError):
                trial_tau *= 0.5
                continue
            if Et <= E + 1e-4 * trial_tau * slope and Et < E:
                break
            trial_tau *= 0.5
        else:
            traj.stalled = True
            traj.message = f"step {k}: line search exhausted"
            break
        delta = xt - x
        arc += float(np.sqrt(max(np.sum(delta * (MetricDerivatives(0.5 * (x + xt), s, quad).asm.scalar_matrix() @ delta)), 0.0)))
        tau = trial_tau
        t += trial_tau
        x, md, E = xt, mdt, Et
    return traj
