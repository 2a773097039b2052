"""Two small systems: a disturbed double integrator and a bead on a circle.

The integral term lets a PID loop reject a constant disturbance.  At rest the
integral state settles at D / ki.  On a circular track, the constraint force
that keeps a particle on the circle is the centripetal force m r w^2.

Run with ``python3 demos/disturbance_and_constraint_force.py``.
"""

# %%
import numpy as np

from geopid import Gains, circle_particle, constraint_force, euclidean_design, euclidean_simulate

# %% [markdown]
# Double integrator x'' = D + u with D = 0.3.  The gains (3, 1, 0.5) pass the
# Euclidean design conditions, so both Lyapunov matrices are positive definite.

# %%
gains = Gains(kp=3.0, kd=1.0, ki=0.5)
design = euclidean_design(gains)
print(f"design passes: {design.passed}, min eig P = {design.p_min_eig:.3f}, min eig Q = {design.q_min_eig:.3f}")

traj = euclidean_simulate(gains, disturbance=0.3, x0=[0.0], t_end=60.0, dt=1e-3)
print(f"e(60) = {traj.e[-1, 0]:+.2e}, z(60) = {traj.z[-1, 0]:.6f}  (D/ki = {0.3 / gains.ki})")
print(f"W non-increasing: {bool(np.all(np.diff(traj.W) <= 1e-12))}")

# %% [markdown]
# Particle of mass 1 on a circle of radius 1.5 moving at angular rate 2.
# With no applied force, the constraint force has magnitude 1 * 1.5 * 2^2 = 6.

# %%
m = circle_particle(radius=1.5, mass=1.0, theta_dot=2.0)
g = np.asarray(m.initial, float)
zeta = m.system.dist(g) @ np.asarray(m.u0)
force = constraint_force(m.system.metric, m.system.dist, g, zeta)
print(f"position {g}, velocity {zeta}")
print(f"constraint force {force}, magnitude {np.linalg.norm(force):.9f}")
