"""Boundary value problem: recover a geodesic from its two end curves.

Run:  python demos/03_shoot_then_connect.py

Shoot a geodesic for time T from a circle, keep only the end curve, then ask
``connect`` for the shortest discrete path between the circle and that end
curve.  If both solvers agree, the minimized path energy equals
(1/2)(T * |V0|_G)^2 and the K path segments move at the same G-speed.  The
script also compares against the straight-line path, which the minimizer
must beat.
"""

import math

import numpy as np

from knotgeo import DEFAULT_QUADRATURE, circle, connect, g_inner, path_energy, shoot
from knotgeo.cli import path_frames
from knotgeo.io import write_frames

from _common import fourier_field, output_dir, with_speed

S = 1.75


def main():
    x = np.asarray(circle(32))
    v = with_speed(x, fourier_field(32, np.random.default_rng(8)), 1.0, S)
    T = 0.3
    end = shoot(x, v, S, T=T, steps=30).states[-1].curve
    target = 0.5 * (T * math.sqrt(g_inner(x, S, v, v))) ** 2

    K = 8
    straight = np.stack([x + (k / K) * (end - x) for k in range(K + 1)])
    print(f"target (1/2)(T |V0|)^2        {target:.8f}")
    print(f"straight-line path energy     {path_energy(straight, S):.8f}")

    def report(it, E, gnorm, curves):
        if it % 5 == 0:
            print(f"  iteration {it:3d}   E = {E:.10f}   stationarity {gnorm:.2e}")

    path = connect(x, end, S, K=K, tol=1e-8, callback=report)
    print(f"minimized path energy         {path.energy:.8f}  ({path.iterations} iterations)")
    print(f"relative gap to the target    {abs(path.energy / target - 1):.2e}")
    print(f"segment speed spread          {path.speed_spread:.2e}")

    # refining the time grid: the discrete energy approaches the target
    print("\n  K   path energy   rel. gap")
    for k in (2, 4, 8, 16):
        p = connect(x, end, S, K=k, tol=1e-8)
        print(f"{k:3d}   {p.energy:.8f}   {abs(p.energy / target - 1):.2e}")

    out = output_dir("connect")
    write_frames(path_frames(path, S, DEFAULT_QUADRATURE), out / "path.jsonl")
    print(f"\npath frames written to {out}")


if __name__ == "__main__":
    main()
