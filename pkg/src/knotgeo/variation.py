"""Derivatives of the discrete metric with respect to the curve.

``grad_metric`` and ``apply_dG`` differentiate the discrete assembly exactly
(chain rule through edge lengths, tangents, midpoints and chords), so they
agree with finite differences of the discrete metric up to truncation error.
The finite-difference helpers at the bottom are the independent oracles.
"""

from __future__ import annotations

import numpy as np

from ._assembly import Assembly, metric_weights
from .curve import arc_length, vertices_of
from .kernel import DEFAULT_QUADRATURE, Quadrature, build_pair_table
from .metric import GramOperator, gram_from_table

__all__ = [
    "MetricDerivatives",
    "grad_metric",
    "apply_dG",
    "christoffel_apply",
    "central_difference",
    "directional_difference",
    "fd_step",
]


class MetricDerivatives:
    """Metric, Gram factorization and first derivatives at one curve.

    Building this once per curve lets the geodesic solvers reuse the pair
    table for the Riesz solve and both Koszul terms.
    """

    def __init__(self, c, s: float = 1.75, quad: Quadrature = DEFAULT_QUADRATURE):
        self.table = build_pair_table(c, s, quad)
        self.s = self.table.s
        self.asm = Assembly(self.table, metric_weights(self.s))
        self._gram = None

    @property
    def shape(self):
        return self.table.vertices.shape

    @property
    def gram(self) -> GramOperator:
        if self._gram is None:
            self._gram = gram_from_table(self.table, self.asm)
        return self._gram

    def grad_metric(self, u, v) -> np.ndarray:
        return self.asm.vjp(_as(u, self.shape), _as(v, self.shape))

    def apply_dG(self, w, v) -> np.ndarray:
        return self.asm.jvp_matrix(_as(w, self.shape)) @ _as(v, self.shape)

    def christoffel(self, v) -> np.ndarray:
        """``A_gamma(v) v = J^-1((DG v)(v, .) - 1/2 (DG .)(v, v))``."""
        v = _as(v, self.shape)
        rhs = self.apply_dG(v, v) - 0.5 * self.grad_metric(v, v)
        return self.gram.solve(rhs)


def _as(u, shape):
    u = np.asarray(u, dtype=float)
    if u.shape != shape:
        raise ValueError(f"field shape {u.shape} does not match curve {shape}")
    return u


def grad_metric(c, s, u, v, quad: Quadrature = DEFAULT_QUADRATURE) -> np.ndarray:
    """Covector ``w -> (DG(gamma) w)(u, v)`` over vertex coordinates."""
    return MetricDerivatives(c, s, quad).grad_metric(u, v)


def apply_dG(c, s, w, v, quad: Quadrature = DEFAULT_QUADRATURE) -> np.ndarray:
    """Covector ``u -> (DG(gamma) w)(v, u)``."""
    return MetricDerivatives(c, s, quad).apply_dG(w, v)


def christoffel_apply(c, s, v, quad: Quadrature = DEFAULT_QUADRATURE) -> np.ndarray:
    return MetricDerivatives(c, s, quad).christoffel(v)


def central_difference(f, x, h: float) -> np.ndarray:
    """Coordinate-wise central-difference gradient of a scalar function."""
    x = np.array(x, dtype=float)
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        fp = f(x)
        x[idx] = old - h
        fm = f(x)
        x[idx] = old
        grad[idx] = (fp - fm) / (2 * h)
    return grad


def directional_difference(f, x, w, h: float):
    """Central difference of ``f`` (scalar or array valued) along ``w``."""
    x = np.asarray(x, dtype=float)
    return (np.asarray(f(x + h * w)) - np.asarray(f(x - h * w))) / (2 * h)


def fd_step(c, rel: float = 1e-5) -> float:
    """Default finite-difference step ``1e-5 * L``."""
    return rel * arc_length(vertices_of(c))
