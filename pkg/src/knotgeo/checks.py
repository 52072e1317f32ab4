"""Seeded invariant gates run by ``knotgeo check``.

Each gate returns a ``Gate`` record; a suite report is plain JSON with a
stable schema::

    {"suite": str, "seed": int, "s": float, "passed": bool,
     "gates": [{"name": str, "passed": bool, "value": float,
                "threshold": float, "detail": str}, ...]}
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .curve import circle, random_smooth
from .energy import energy, grad_energy
from .kernel import DEFAULT_QUADRATURE, Quadrature
from .metric import bilinear_forms
from .variation import MetricDerivatives, central_difference, fd_step

__all__ = ["Gate", "SUITES", "run_suite", "lipschitz_excess", "relative_error"]

SUITES = ("identities", "gradients", "geodesic")


@dataclass
class Gate:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""


def relative_error(a, b, floor: float = 1e-10) -> float:
    """``|a - b| / max(|b|, floor)`` in the max norm."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), floor))


def _gate(name, value, threshold, detail=""):
    return Gate(name, bool(value <= threshold), float(value), float(threshold), detail)


def lipschitz_excess(traj, s: float) -> tuple[float, float]:
    """Largest violation of the energy and length Lipschitz budgets along a
    trajectory, without slack (negative or zero means the budget holds)."""
    E = np.asarray(traj.energy)
    L = np.asarray(traj.length)
    arc = np.asarray(traj.arc)
    p = 2 * s + 1
    de = np.abs(np.sqrt(E) - np.sqrt(E[0])) - np.sqrt(1 + p / 4) * arc
    dl = np.abs(np.sqrt(L) - np.sqrt(L[0])) - 0.5 * arc
    return float(de.max()), float(dl.max())


def identities(rng, s, quad, count=20):
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(32, 129))
        x = np.asarray(random_smooth(n, rng))
        E = energy(x, s, quad)
        fv = bilinear_forms(x, s, x, x, quad)
        worst = max(worst, *(abs(val - ref) / E for val, ref in ((fv.B1, E), (fv.B2, E), (fv.B3, 2 * E))))
    gates = [_gate("forms_vs_energy", worst, 1e-12, f"{count} random curves, n in [32, 128]")]

    x = np.asarray(random_smooth(48, rng))
    E = energy(x, s, quad)
    scale = max(abs(energy(lam * x, s, quad) / (lam ** (3 - 2 * s) * E) - 1) for lam in (0.5, 2.0, 10.0))
    gates.append(_gate("scale_law", scale, 1e-12, "lambda in {0.5, 2, 10}"))
    euler = abs(np.sum(grad_energy(x, s, quad) * x) - (3 - 2 * s) * E) / E
    gates.append(_gate("euler_identity", euler, 1e-10, "<grad E, gamma> = (3 - 2s) E"))
    return gates


def gradients(rng, s, quad, count=2):
    ge, gm = 0.0, 0.0
    for _ in range(count):
        x = np.asarray(random_smooth(24, rng, jitter=0.05))
        h = fd_step(x)
        ge = max(ge, relative_error(grad_energy(x, s, quad), central_difference(lambda y: energy(y, s, quad), x, h)))
        u, v = rng.normal(size=(2,) + x.shape)
        exact = MetricDerivatives(x, s, quad).grad_metric(u, v)
        fd = central_difference(lambda y: MetricDerivatives(y, s, quad).asm.value(u, v), x, h)
        gm = max(gm, relative_error(exact, fd))
    return [
        _gate("grad_energy_fd", ge, 1e-6, f"{count} random 24-gons, step 1e-5 L"),
        _gate("grad_metric_fd", gm, 1e-6, f"{count} random 24-gons, step 1e-5 L"),
    ]


def geodesic(rng, s, quad):
    from .geodesic import shoot

    n = 48
    x = np.asarray(circle(n))
    t = 2 * np.pi * np.arange(n) / n
    v = np.zeros_like(x)
    for k in (2, 3):
        a, b = rng.normal(size=(2, 3))
        v += np.outer(np.cos(k * t), a) + np.outer(np.sin(k * t), b)
    v /= np.sqrt(MetricDerivatives(x, s, quad).gram.inner(v, v))

    traj = shoot(x, v, s, T=1.0, steps=100, quad=quad)
    gates = [_gate("speed_drift_unit", traj.speed_drift, 1e-6, "48-gon circle, T = 1, 100 RK4 steps")]
    de, dl = lipschitz_excess(traj, s)
    gates.append(_gate("energy_lipschitz", de, 1e-3, "excess over sqrt(1 + p/4) * G-length"))
    gates.append(_gate("length_lipschitz", dl, 1e-3, "excess over G-length / 2"))

    # the unit-speed drift sits at rounding level, so measure the order at speed 10
    coarse = shoot(x, 10 * v, s, T=1.0, steps=50, quad=quad, adaptive=False).speed_drift
    fine = shoot(x, 10 * v, s, T=1.0, steps=100, quad=quad, adaptive=False).speed_drift
    ratio = coarse / max(fine, 1e-300)
    gates.append(Gate("halving_ratio", bool(ratio >= 8), float(ratio), 8.0, "drift(50 steps) / drift(100 steps), at least"))
    return gates


_RUNNERS = {"identities": identities, "gradients": gradients, "geodesic": geodesic}


def run_suite(suite: str = "all", seed: int = 0, s: float = 1.75, quad: Quadrature = DEFAULT_QUADRATURE) -> dict:
    names = SUITES if suite == "all" else (suite,)
    for name in names:
        if name not in _RUNNERS:
            raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or all")
    gates = []
    for name in names:
        rng = np.random.default_rng([seed, SUITES.index(name)])
        gates.extend(_RUNNERS[name](rng, s, quad))
    return {
        "suite": suite,
        "seed": int(seed),
        "s": float(s),
        "passed": all(g.passed for g in gates),
        "gates": [asdict(g) for g in gates],
    }
