"""The metric G = 2 B1 + (2s+1) B2 + B3 + H1 + L2, its Gram matrix and Riesz map."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ._assembly import FORMS, Assembly, metric_weights
from .curve import vertices_of
from .kernel import DEFAULT_QUADRATURE, PairTable, Quadrature, build_pair_table

__all__ = [
    "FormValues",
    "GramOperator",
    "PositivityError",
    "bilinear_forms",
    "assemble_gram",
    "gram_from_table",
    "riesz_solve",
    "g_inner",
    "g_norm",
    "fingerprint",
]


class PositivityError(RuntimeError):
    """The assembled Gram matrix is not positive definite."""


@dataclass(frozen=True)
class FormValues:
    s: float
    B1: float
    B2: float
    B3: float
    H1: float
    L2: float

    @property
    def G(self) -> float:
        return 2.0 * self.B1 + (2.0 * self.s + 1.0) * self.B2 + self.B3 + self.H1 + self.L2


def _field(u, shape):
    u = np.asarray(u, dtype=float)
    if u.shape != shape:
        raise ValueError(f"field shape {u.shape} does not match curve {shape}")
    return u


def bilinear_forms(c, s, u, v, quad: Quadrature = DEFAULT_QUADRATURE) -> FormValues:
    table = build_pair_table(c, s, quad)
    shape = table.vertices.shape
    u, v = _field(u, shape), _field(v, shape)
    vals = {f: Assembly(table, {f: 1.0}).value(u, v) for f in FORMS}
    return FormValues(s=table.s, **vals)


def fingerprint(c, s: float) -> str:
    x = np.ascontiguousarray(vertices_of(c))
    h = hashlib.sha1(x.tobytes())
    h.update(repr((x.shape, float(s))).encode())
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class GramOperator:
    """Gram matrix of ``G_gamma`` with its Cholesky factor.

    Every form acts on each ambient component with the same scalar
    ``(n, n)`` matrix, so only that block is stored and factored; the full
    ``(n m, n m)`` matrix in vertex-major order is ``kron(scalar, I_m)``.
    """

    scalar: np.ndarray
    dim: int
    s: float
    fingerprint: str
    _factor: tuple = field(repr=False)

    @property
    def n(self) -> int:
        return self.scalar.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return np.kron(self.scalar, np.eye(self.dim))

    def apply(self, u) -> np.ndarray:
        """Covector ``G_gamma(u, .)`` as an ``(n, m)`` array."""
        return self.scalar @ _field(u, (self.n, self.dim))

    def solve(self, rhs) -> np.ndarray:
        return cho_solve(self._factor, _field(rhs, (self.n, self.dim)))

    def inner(self, u, v) -> float:
        return float(np.sum(_field(u, (self.n, self.dim)) * self.apply(v)))


def _factor(scalar):
    try:
        return cho_factor(scalar, lower=True)
    except LinAlgError as exc:
        raise PositivityError("Gram matrix lost positive definiteness") from exc


def gram_from_table(table: PairTable, asm: Assembly | None = None) -> GramOperator:
    if asm is None:
        asm = Assembly(table, metric_weights(table.s))
    scalar = asm.scalar_matrix()
    return GramOperator(scalar, table.dim, table.s, fingerprint(table.vertices, table.s), _factor(scalar))


def assemble_gram(c, s: float = 1.75, quad: Quadrature = DEFAULT_QUADRATURE) -> GramOperator:
    return gram_from_table(build_pair_table(c, s, quad))


def riesz_solve(g: GramOperator, rhs, curve=None) -> np.ndarray:
    """Field ``u`` with ``G_gamma(u, .) = rhs``.

    When ``curve`` is given it must be the curve ``g`` was assembled on.
    """
    if curve is not None and fingerprint(curve, g.s) != g.fingerprint:
        raise ValueError("covector and Gram operator belong to different curves")
    return g.solve(rhs)


def g_inner(c, s, u, v, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    table = build_pair_table(c, s, quad)
    shape = table.vertices.shape
    return Assembly(table, metric_weights(table.s)).value(_field(u, shape), _field(v, shape))


def g_norm(c, s, u, quad: Quadrature = DEFAULT_QUADRATURE) -> float:
    return float(np.sqrt(max(g_inner(c, s, u, u, quad), 0.0)))
