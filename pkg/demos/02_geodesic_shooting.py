"""Shooting geodesics: conservation, constraints and collision avoidance.

Run:  python demos/02_geodesic_shooting.py

A geodesic is integrated from an initial curve and velocity with RK4.  The
G-speed is a conserved quantity, so its drift measures integration accuracy.
The second run keeps the total length fixed by projecting onto the
constraint's tangent space.  The third run drives the two long sides of a
flat ellipse toward each other at high speed; the metric grows as the
strands approach, so they keep slowing down and never meet.  Frames go
to ``demos/output/shooting/`` as JSONL plus OBJ polylines.
"""

import numpy as np

from knotgeo import arc_length, circle, length_constraint, shoot, shoot_constrained, torus_knot
from knotgeo.checks import lipschitz_excess
from knotgeo.io import write_frames, write_obj

from _common import fourier_field, output_dir, with_speed

S = 1.75


def free(out):
    x = np.asarray(torus_knot(64))
    v = with_speed(x, fourier_field(64, np.random.default_rng(0)), 1.0, S)
    traj = shoot(x, v, S, T=1.0, steps=100)
    de, dl = lipschitz_excess(traj, S)
    print("trefoil, unit speed, T = 1, 100 RK4 steps")
    print(f"  relative speed drift   {traj.speed_drift:.2e}")
    print(f"  energy  {traj.energy[0]:.4f} -> {traj.energy[-1]:.4f}")
    print(f"  Lipschitz budgets hold: {de <= 0 and dl <= 0}")
    write_frames(traj, out / "trefoil.jsonl")
    write_obj(traj, out / "trefoil_obj")


def constrained(out):
    x = np.asarray(circle(48))
    v = with_speed(x, fourier_field(48, np.random.default_rng(1)), 1.0, S)
    L0 = arc_length(x)
    plain = shoot(x, v, S, T=1.0, steps=50)
    fixed = shoot_constrained(x, v, length_constraint(L0), S, T=1.0, steps=50)
    print("circle, T = 1, with and without the length constraint")
    print(f"  free geodesic: length {min(plain.length):.4f} .. {max(plain.length):.4f}")
    print(f"  constrained:   length drift {fixed.constraint_drift / L0:.1e} (relative)")
    if fixed.message:
        print(f"  note: {fixed.message}")
    write_frames(fixed, out / "circle_fixed_length.jsonl")


def squeeze(out):
    n = 64
    t = 2 * np.pi * np.arange(n) / n
    x = np.column_stack([np.cos(t), 0.3 * np.sin(t), 0 * t])
    v = np.zeros_like(x)
    v[:, 1] = -x[:, 1]
    v = with_speed(x, v, 50.0, S)
    traj = shoot(x, v, S, T=2.0, steps=200)
    gap = [np.linalg.norm(st.curve[n // 4] - st.curve[3 * n // 4]) for st in traj.states]
    print("flat ellipse, both long sides pushed inward at G-speed 50")
    print("     t   strand gap   energy")
    for k in range(0, len(gap), 25):
        print(f"  {traj.times[k]:4.2f}   {gap[k]:10.4f}   {traj.energy[k]:8.1f}")
    de, dl = lipschitz_excess(traj, S)
    print(f"  aborted: {traj.aborted}; speed drift {traj.speed_drift:.1e}; budgets hold: {de <= 0 and dl <= 0}")
    write_frames(traj, out / "squeeze.jsonl")
    write_obj(traj, out / "squeeze_obj")


if __name__ == "__main__":
    out = output_dir("shooting")
    free(out)
    print()
    constrained(out)
    print()
    squeeze(out)
    print(f"\nframes written to {out}")
