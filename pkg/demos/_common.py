"""Shared helpers for the demo scripts."""

import math
import os
from pathlib import Path

import numpy as np

from knotgeo import g_inner

OUTPUT = Path(os.environ.get("KNOTGEO_DEMO_OUT", Path(__file__).with_name("output")))


def output_dir(name: str) -> Path:
    path = OUTPUT / name
    path.mkdir(parents=True, exist_ok=True)
    return path


def fourier_field(n: int, rng, modes=(2, 3), dim: int = 3) -> np.ndarray:
    """Smooth vertex field built from a few low Fourier modes."""
    t = 2 * np.pi * np.arange(n) / n
    v = np.zeros((n, dim))
    for k in modes:
        a, b = rng.normal(size=(2, dim))
        v += np.outer(np.cos(k * t), a) + np.outer(np.sin(k * t), b)
    return v


def with_speed(x, v, speed: float, s: float = 1.75) -> np.ndarray:
    """Rescale ``v`` to the given G-norm at the curve ``x``."""
    return v * (speed / math.sqrt(g_inner(x, s, v, v)))
