"""Closed polylines in R^m: representation, generators and geometric diagnostics.

A curve is stored as an ``(n, m)`` array of vertices; edge ``i`` runs from
vertex ``i`` to vertex ``i + 1 (mod n)``.  Tangent fields on a curve are plain
``(n, m)`` arrays indexed like the vertices.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np

__all__ = [
    "Curve",
    "CurveError",
    "EmbeddingError",
    "EdgeData",
    "vertices_of",
    "edge_data",
    "generate",
    "circle",
    "torus_knot",
    "figure_eight",
    "from_samples",
    "random_smooth",
    "arc_length",
    "distortion",
    "resample_uniform",
    "min_separation",
    "is_embedded",
    "SEPARATION_RTOL",
]

#: default embeddedness threshold, relative to the total length
SEPARATION_RTOL = 1e-8


class CurveError(ValueError):
    """Raised when vertex data violates the basic curve invariants."""


class EmbeddingError(ValueError):
    """Raised when a curve fails the discrete embeddedness proxy."""


@dataclass(frozen=True, eq=False)
class Curve:
    """Closed polyline with ``n >= 3`` vertices in ``R^m``, ``m >= 2``.

    The vertex array is copied and made read-only on construction.
    """

    vertices: np.ndarray

    def __post_init__(self):
        x = np.array(self.vertices, dtype=float)
        _validate(x)
        x.setflags(write=False)
        object.__setattr__(self, "vertices", x)

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def __len__(self):
        return self.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.vertices, dtype=dtype)

    def translated(self, b) -> "Curve":
        return Curve(self.vertices + np.asarray(b, dtype=float))

    def scaled(self, lam: float) -> "Curve":
        return Curve(lam * self.vertices)

    def rolled(self, k: int) -> "Curve":
        """Same polyline with the vertex labels shifted cyclically by ``k``."""
        return Curve(np.roll(self.vertices, -k, axis=0))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "vertices": self.vertices.tolist()}


def _validate(x):
    if x.ndim != 2:
        raise CurveError(f"vertices must be a 2-d array, got shape {x.shape}")
    n, m = x.shape
    if n < 3:
        raise CurveError(f"a closed curve needs at least 3 vertices, got {n}")
    if m < 2:
        raise CurveError(f"ambient dimension must be >= 2, got {m}")
    if not np.all(np.isfinite(x)):
        raise CurveError("vertices contain NaN or Inf")
    lengths = np.linalg.norm(np.roll(x, -1, axis=0) - x, axis=1)
    if np.any(lengths <= 0):
        i = int(np.argmin(lengths))
        raise CurveError(f"edge {i} has zero length")


def vertices_of(c) -> np.ndarray:
    """Vertex array of a :class:`Curve` or anything array-like."""
    if isinstance(c, Curve):
        return c.vertices
    x = np.asarray(c, dtype=float)
    if x.ndim != 2 or x.shape[0] < 3:
        raise CurveError(f"expected an (n, m) vertex array with n >= 3, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class EdgeData:
    """Per-edge lengths, unit tangents and midpoints."""

    lengths: np.ndarray
    tangents: np.ndarray
    midpoints: np.ndarray

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())


def edge_data(c) -> EdgeData:
    x = vertices_of(c)
    nxt = np.roll(x, -1, axis=0)
    e = nxt - x
    lengths = np.linalg.norm(e, axis=1)
    return EdgeData(lengths, e / lengths[:, None], 0.5 * (x + nxt))


# ---------------------------------------------------------------------------
# generators


def _embed(x, dim):
    if dim < x.shape[1]:
        raise CurveError(f"cannot place a {x.shape[1]}-d curve in dimension {dim}")
    out = np.zeros((x.shape[0], dim))
    out[:, : x.shape[1]] = x
    return out


def circle(n: int, radius: float = 1.0, center=None, dim: int = 3) -> Curve:
    """Regular ``n``-gon inscribed in a circle in the first coordinate plane."""
    if n < 3:
        raise CurveError(f"n must be >= 3, got {n}")
    if not radius > 0:
        raise CurveError(f"radius must be positive, got {radius}")
    t = 2 * np.pi * np.arange(n) / n
    x = _embed(radius * np.column_stack([np.cos(t), np.sin(t)]), dim)
    if center is not None:
        x = x + np.asarray(center, dtype=float)
    return Curve(x)


def torus_knot(n: int, p: int = 2, q: int = 3, major: float = 2.0, minor: float = 1.0) -> Curve:
    """(p, q) torus knot on a torus with the given radii: p turns around the
    symmetry axis, q turns around the tube."""
    if n < 3:
        raise CurveError(f"n must be >= 3, got {n}")
    if int(p) != p or int(q) != q or p == 0 or q == 0:
        raise CurveError(f"torus knot parameters must be nonzero integers, got ({p}, {q})")
    if gcd(int(p), int(q)) != 1:
        raise CurveError(f"torus knot parameters must be coprime, got ({p}, {q})")
    if not (major > 0 and minor > 0) or minor >= major:
        raise CurveError("torus radii must satisfy 0 < minor < major")
    t = 2 * np.pi * np.arange(n) / n
    rho = major + minor * np.cos(q * t)
    return Curve(np.column_stack([rho * np.cos(p * t), rho * np.sin(p * t), minor * np.sin(q * t)]))


def figure_eight(n: int, scale: float = 1.0) -> Curve:
    """Figure-eight knot (4_1), standard trigonometric parameterization."""
    if n < 3:
        raise CurveError(f"n must be >= 3, got {n}")
    if not scale > 0:
        raise CurveError(f"scale must be positive, got {scale}")
    t = 2 * np.pi * np.arange(n) / n
    rho = 2 + np.cos(2 * t)
    return Curve(scale * np.column_stack([rho * np.cos(3 * t), rho * np.sin(3 * t), np.sin(4 * t)]))


def from_samples(points, n: int | None = None) -> Curve:
    """Curve through the given closed sample sequence, optionally resampled
    to ``n`` equally spaced vertices."""
    c = Curve(points)
    return c if n is None else resample_uniform(c, n)


def random_smooth(n: int, rng=None, dim: int = 3, modes: int = 3, amplitude: float = 0.15, jitter: float = 0.0) -> Curve:
    """Unit circle plus a random low-frequency Fourier perturbation.

    Mode ``k`` gets coefficients of size ``amplitude / k``, which keeps the
    curve embedded for the default amplitude.  ``jitter`` adds independent
    vertex noise relative to the edge length.
    """
    rng = np.random.default_rng(rng)
    t = 2 * np.pi * np.arange(n) / n
    x = _embed(np.column_stack([np.cos(t), np.sin(t)]), dim)
    for k in range(1, modes + 1):
        a, b = rng.normal(scale=amplitude / k, size=(2, dim))
        x += np.outer(np.cos(k * t), a) + np.outer(np.sin(k * t), b)
    if jitter:
        x += rng.normal(scale=jitter * 2 * np.pi / n, size=x.shape)
    return Curve(x)


_GENERATORS = {
    "random_smooth": random_smooth,
    "circle": circle,
    "torus_knot": torus_knot,
    "figure_eight": figure_eight,
}


def generate(kind: str, n: int, **params) -> Curve:
    """Build a named curve and check that it passes the embeddedness proxy.

    ``kind`` is one of ``circle``, ``torus_knot``, ``figure_eight`` or
    ``from_samples`` (which takes ``points=``).
    """
    if kind == "from_samples":
        c = from_samples(params.pop("points"), n)
    elif kind in _GENERATORS:
        c = _GENERATORS[kind](n, **params)
    else:
        raise ValueError(f"unknown curve kind {kind!r}")
    if not is_embedded(c):
        raise EmbeddingError(f"{kind} curve with n={n} fails the embeddedness proxy")
    return c


# ---------------------------------------------------------------------------
# diagnostics


def arc_length(c) -> float:
    return edge_data(c).total_length


def distortion(c) -> float:
    """Largest ratio of intrinsic (shorter-arc) distance to chord length over
    all pairs of distinct vertices."""
    x = vertices_of(c)
    n = x.shape[0]
    lengths = edge_data(x).lengths
    s = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    total = lengths.sum()
    i, j = np.triu_indices(n, 1)
    arc = s[j] - s[i]
    arc = np.minimum(arc, total - arc)
    chord = np.linalg.norm(x[j] - x[i], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = arc / chord
    ratio[chord == 0] = np.inf
    return float(ratio.max())


def resample_uniform(c, n_new: int) -> Curve:
    """Place ``n_new`` vertices at equal arc-length spacing along the polyline,
    starting at vertex 0."""
    if n_new < 3:
        raise CurveError(f"n_new must be >= 3, got {n_new}")
    x = vertices_of(Curve(vertices_of(c)))
    closed = np.vstack([x, x[:1]])
    seg = np.linalg.norm(np.diff(closed, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    targets = s[-1] * np.arange(n_new) / n_new
    k = np.clip(np.searchsorted(s, targets, side="right") - 1, 0, len(seg) - 1)
    frac = (targets - s[k]) / seg[k]
    return Curve(closed[k] + frac[:, None] * (closed[k + 1] - closed[k]))


def _segment_distances(p1, q1, p2, q2):
    # closest points between segment batches, clamped parameterization
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = np.einsum("...k,...k", d1, d1)
    e = np.einsum("...k,...k", d2, d2)
    f = np.einsum("...k,...k", d2, r)
    c = np.einsum("...k,...k", d1, r)
    b = np.einsum("...k,...k", d1, d2)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        sc = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
    tc = (b * sc + f) / e
    lo = tc < 0
    hi = tc > 1
    sc = np.where(lo, np.clip(-c / a, 0.0, 1.0), np.where(hi, np.clip((b - c) / a, 0.0, 1.0), sc))
    tc = np.clip(tc, 0.0, 1.0)
    diff = p1 + sc[..., None] * d1 - p2 - tc[..., None] * d2
    return np.linalg.norm(diff, axis=-1)


def min_separation(c, chunk: int = 256) -> float:
    """Minimum distance between non-adjacent edges (``inf`` for triangles,
    which have none)."""
    x = vertices_of(c)
    n = x.shape[0]
    nxt = np.roll(x, -1, axis=0)
    best = np.inf
    j = np.arange(n)
    for start in range(0, n, chunk):
        i = np.arange(start, min(start + chunk, n))
        gap = (j[None, :] - i[:, None]) % n
        keep = (gap >= 2) & (gap <= n - 2) & (j[None, :] > i[:, None])
        ii, jj = np.nonzero(keep)
        if ii.size == 0:
            continue
        ii = i[ii]
        dist = _segment_distances(x[ii], nxt[ii], x[jj], nxt[jj])
        best = min(best, float(dist.min()))
    return best


def is_embedded(c, rtol: float = SEPARATION_RTOL) -> bool:
    """Embeddedness proxy: non-adjacent edges stay ``rtol * L`` apart."""
    return min_separation(c) > rtol * arc_length(c)
