"""Energy of a few closed curves and how the discrete value converges.

Run:  python demos/01_energy_landscape.py

The tangent-point energy is infinite on curves that touch themselves, so it
works as a barrier in the space of embedded curves.  This script prints

* the convergence of the regular n-gon energy to the closed-form circle value,
* the scale-invariant quantity E * L^(2s-3) for several knots, which never
  drops below pi^2 (the circle attains the minimum among these),
* how the energy blows up as two strands of a curve are pushed together.
"""

import math

import numpy as np

from knotgeo import (
    Quadrature,
    circle,
    circle_energy_closed_form,
    energy,
    energy_report,
    figure_eight,
    random_smooth,
    torus_knot,
)

S = 1.75


def convergence():
    ref = circle_energy_closed_form(S)
    print(f"unit circle, closed form E = {ref:.10f}")
    print("     n   corrected E   rel. error   plain midpoint rel. error")
    plain = Quadrature(self_correction=False)
    prev = None
    for n in (32, 64, 128, 256, 512, 1024):
        c = circle(n)
        err = energy(c, S) / ref - 1
        err_plain = energy(c, S, plain) / ref - 1
        rate = "" if prev is None else f"  (order {math.log2(prev / err):.2f})"
        print(f"{n:6d}   {energy(c, S):.8f}   {err:.3e}   {err_plain:+.3e}{rate}")
        prev = err
    print()


def knots():
    print("scale-invariant energy E * L^(2s-3) / pi^2 at n = 256")
    curves = {
        "circle": circle(256),
        "random smooth unknot": random_smooth(256, 1),
        "trefoil (2,3)": torus_knot(256),
        "torus knot (2,5)": torus_knot(256, 2, 5),
        "figure-eight knot": figure_eight(256),
    }
    for name, c in curves.items():
        rep = energy_report(c, S)
        print(f"  {name:22s} {rep.scale_invariant / math.pi**2:8.4f}   distortion {rep.distortion:6.3f}")
    print()


def barrier():
    print("squeezing an ellipse: strand gap versus energy")
    n = 128
    t = 2 * np.pi * np.arange(n) / n
    for b in (0.5, 0.2, 0.1, 0.05, 0.02):
        x = np.column_stack([np.cos(t), b * np.sin(t), 0 * t])
        print(f"  gap {2 * b:5.2f}   E = {energy(x, S):10.3f}")


if __name__ == "__main__":
    convergence()
    knots()
    barrier()
