"""Classical fixed-step fourth-order Runge-Kutta."""

import numpy as np


def rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + (0.5 * dt) * k1)
    k3 = f(y + (0.5 * dt) * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_count(t_end: float, dt: float) -> int:
    """Number of fixed steps covering ``[0, t_end]``; ``t_end`` is rounded to a multiple of ``dt``."""
    if not dt > 0 or not t_end > 0:
        raise ValueError(f"need dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}")
    return max(1, int(round(t_end / dt)))
