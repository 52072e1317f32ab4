"""Pairwise kernel layer: chords, measure weights and the operator R^s.

All continuum double integrals are replaced by sums over ordered pairs of
distinct edges ``(i, j)``, one quadrature node per edge at its midpoint.
Arrays indexed by pairs have shape ``(n, n)`` (or ``(n, n, m)``); entries
outside :attr:`PairTable.mask` are zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import zeta

from .curve import EmbeddingError, edge_data, vertices_of

__all__ = [
    "Quadrature",
    "DEFAULT_QUADRATURE",
    "PairTable",
    "EdgeDerivatives",
    "check_exponent",
    "build_pair_table",
    "rs_apply",
    "edge_derivatives",
    "lambda_ratio",
    "self_correction_constant",
]


@dataclass(frozen=True)
class Quadrature:
    """Discretization switches shared by the energy and the metric.

    ``self_correction`` adds, for every edge, the local contribution of the
    near-diagonal region that the midpoint rule misses.  The integrand behaves
    like ``|t|^(3-2s)`` there, so the plain rule converges only like
    ``h^(4-2s)``; the correction is the zeta-function term of the generalized
    Euler-Maclaurin expansion and restores second order.  It enters the energy
    and all three B-forms consistently, so the identities between them hold
    exactly.

    ``skip_adjacent`` drops pairs of neighbouring edges, which some repulsion
    codes do; it is meant for comparison runs only.
    """

    self_correction: bool = True
    skip_adjacent: bool = False


DEFAULT_QUADRATURE = Quadrature()


def check_exponent(s: float) -> float:
    s = float(s)
    if not 1.5 < s < 2.0:
        raise ValueError(f"s must lie in (3/2, 2), got {s}")
    return s


def self_correction_constant(s: float) -> float:
    """Coefficient ``-zeta(2s-3)/2`` of the per-edge singular correction."""
    return -0.5 * float(zeta(2 * s - 3))


@dataclass(frozen=True, eq=False)
class PairTable:
    """Per-edge and per-pair quantities of a curve for a fixed exponent ``s``.

    Attributes
    ----------
    chords : (n, n, m)
        ``p_j - p_i`` between edge midpoints.
    dist, dist_s : (n, n)
        chord length and its ``s``-th power (zero on the diagonal).
    along : (n, n)
        ``<tau_i, p_j - p_i>``, the chord component along the first edge.
    weights : (n, n)
        discrete measure ``l_i l_j / |p_j - p_i|``.
    rs_gamma : (n, n, m)
        ``R^s_gamma gamma`` on every pair.
    """

    s: float
    quad: Quadrature
    vertices: np.ndarray
    lengths: np.ndarray
    tangents: np.ndarray
    midpoints: np.ndarray
    mask: np.ndarray
    chords: np.ndarray
    dist: np.ndarray
    dist_s: np.ndarray
    along: np.ndarray
    weights: np.ndarray
    rs_gamma: np.ndarray

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def safe_dist(self) -> np.ndarray:
        """Chord lengths with the diagonal replaced by 1 (for division)."""
        return self.dist + np.eye(self.n)


def _pair_mask(n, quad):
    mask = ~np.eye(n, dtype=bool)
    if quad.skip_adjacent:
        gap = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n
        mask &= (gap != 1) & (gap != n - 1)
    return mask


def build_pair_table(c, s: float = 1.75, quad: Quadrature = DEFAULT_QUADRATURE) -> PairTable:
    s = check_exponent(s)
    x = vertices_of(c)
    n = x.shape[0]
    ed = edge_data(x)
    tau, p, ell = ed.tangents, ed.midpoints, ed.lengths
    chords = p[None, :, :] - p[:, None, :]
    dist = np.linalg.norm(chords, axis=2)
    offdiag = ~np.eye(n, dtype=bool)
    if np.any(dist[offdiag] == 0):
        i, j = np.argwhere((dist == 0) & offdiag)[0]
        raise EmbeddingError(f"midpoints of edges {i} and {j} coincide")
    mask = _pair_mask(n, quad)
    safe = dist + np.eye(n)
    along = np.einsum("ik,ijk->ij", tau, chords)
    dist_s = np.where(offdiag, safe**s, 0.0)
    weights = np.where(mask, ell[:, None] * ell[None, :] / safe, 0.0)
    normal = chords - along[:, :, None] * tau[:, None, :]
    rs_gamma = np.where(mask[:, :, None], normal / safe[:, :, None] ** s, 0.0)
    return PairTable(
        s=s,
        quad=quad,
        vertices=x,
        lengths=ell,
        tangents=tau,
        midpoints=p,
        mask=mask,
        chords=chords,
        dist=dist,
        dist_s=dist_s,
        along=along,
        weights=weights,
        rs_gamma=rs_gamma,
    )


@dataclass(frozen=True)
class EdgeDerivatives:
    """Arc-length derivative ``D u`` (n, m) and ``D u tau^T`` (n, m, m) per edge."""

    arc: np.ndarray
    full: np.ndarray


def edge_derivatives(c, u) -> EdgeDerivatives:
    ed = edge_data(c)
    u = np.asarray(u, dtype=float)
    du = (np.roll(u, -1, axis=0) - u) / ed.lengths[:, None]
    return EdgeDerivatives(du, du[:, :, None] * ed.tangents[:, None, :])


def rs_apply(table: PairTable, u) -> np.ndarray:
    """``R^s_gamma u`` on every ordered pair, shape ``(n, n, m)``.

    ``(ubar_j - ubar_i - D u_i <tau_i, p_j - p_i>) / |p_j - p_i|^s`` with
    ``ubar`` the edge-midpoint average of ``u``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != table.vertices.shape:
        raise ValueError(f"field shape {u.shape} does not match curve {table.vertices.shape}")
    nxt = np.roll(u, -1, axis=0)
    ubar = 0.5 * (u + nxt)
    du = (nxt - u) / table.lengths[:, None]
    num = ubar[None, :, :] - ubar[:, None, :] - table.along[:, :, None] * du[:, None, :]
    return np.where(table.mask[:, :, None], num / table.safe_dist[:, :, None] ** table.s, 0.0)


def lambda_ratio(c, beta: float) -> np.ndarray:
    """``(reference separation / chord)^beta`` for all pairs of edge midpoints.

    The reference separation is the cyclic distance of the midpoints in a
    uniform-in-index parameterization, scaled to the total length ``L``:
    ``L * min(|i - j|, n - |i - j|) / n``.  Diagonal entries are NaN.
    """
    beta = float(beta)
    if not np.isfinite(beta):
        raise ValueError("beta must be finite")
    ed = edge_data(c)
    n = ed.lengths.size
    k = np.abs(np.arange(n)[None, :] - np.arange(n)[:, None])
    ref = ed.total_length * np.minimum(k, n - k) / n
    chord = np.linalg.norm(ed.midpoints[None, :, :] - ed.midpoints[:, None, :], axis=2)
    offdiag = ~np.eye(n, dtype=bool)
    if np.any(chord[offdiag] == 0):
        raise EmbeddingError("coincident edge midpoints")
    out = np.full((n, n), np.nan)
    out[offdiag] = (ref[offdiag] / chord[offdiag]) ** beta
    return out
