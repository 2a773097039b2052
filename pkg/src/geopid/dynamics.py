"""Constrained equations of motion and the closed PID loop in reduced coordinates.

Velocities are carried as coefficients in the distribution basis:
``zeta_E = B(g) u`` and ``zeta_I = B(g) w``.  Projecting the Newton and
integral-error equations with ``B^T`` gives

    (B^T I B) u' = B^T gamma - B^T I [Gamma(zeta, zeta) + (D_zeta B) u]
    (B^T I B) w' = B^T dV    - B^T I [Gamma(zeta, zeta_I) + (D_zeta B) w]

The constraint-force and integral-correction terms live in ``D*_perp`` and
are annihilated by ``B^T``, so they never need to be formed here.  The
full-space formulation with an explicit constraint force is kept for
cross-validation only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .constraint import (
    FD_STEP,
    DistributionField,
    check_basis,
    gram,
    nabla_projector,
    projectors,
)
from .controller import Gains, LyapunovCoefficients, lyapunov_coefficients
from .errors import DegenerateConstraint, DegenerateMetric, NonFiniteState, StructuralError
from .geometry import (
    ChartPoint,
    MetricField,
    Topology,
    angular_mask,
    as_coords,
    christoffel,
    connection_term,
    wrap_coords,
)
from .integrators import rk4_step, step_count
from .morse import MorseSpec

CONVERGENCE_THRESHOLD = 1e-2
CONVERGENCE_HOLD = 1.0


@dataclass(frozen=True)
class MechanicalSystem:
    """The quartet (group, product, metric, distribution) in chart form."""

    metric: MetricField
    dist: DistributionField
    topology: tuple
    name: str = "system"
    variables: tuple = None
    abelian: bool = True

    def __post_init__(self):
        topo = tuple(Topology(t) for t in self.topology)
        object.__setattr__(self, "topology", topo)
        if self.variables is None:
            object.__setattr__(self, "variables", tuple(f"q{i + 1}" for i in range(len(topo))))
        elif len(self.variables) != len(topo):
            raise StructuralError("variable names and topology flags differ in length")

    @property
    def n(self) -> int:
        return len(self.topology)

    @property
    def k(self) -> int:
        return self.dist.rank

    @property
    def mask(self) -> np.ndarray:
        return angular_mask(self.topology)

    def point(self, coords) -> ChartPoint:
        return ChartPoint(coords, self.topology)

    def validate_at(self, g):
        g = as_coords(g)
        if g.size != self.n:
            raise StructuralError(f"configuration has {g.size} coordinates, system has {self.n}")
        b = self.dist(g)
        if b.shape != (self.n, self.k):
            raise StructuralError(f"basis has shape {b.shape}, expected {(self.n, self.k)}")
        check_basis(b, self.k)
        gram(self.metric(g), b)


@dataclass(frozen=True)
class ClosedLoopState:
    """Configuration plus reduced error velocity ``u`` and integral error ``w``."""

    g: np.ndarray
    u: np.ndarray
    w: np.ndarray

    def __init__(self, g, u, w):
        object.__setattr__(self, "g", np.array(as_coords(g), dtype=float))
        object.__setattr__(self, "u", np.atleast_1d(np.asarray(u, dtype=float)).copy())
        object.__setattr__(self, "w", np.atleast_1d(np.asarray(w, dtype=float)).copy())

    def zeta(self, sys: MechanicalSystem) -> np.ndarray:
        return sys.dist(self.g) @ self.u

    def zeta_integral(self, sys: MechanicalSystem) -> np.ndarray:
        return sys.dist(self.g) @ self.w

    def pack(self) -> np.ndarray:
        return np.concatenate([self.g, self.u, self.w])

    @classmethod
    def unpack(cls, y: np.ndarray, n: int, k: int) -> "ClosedLoopState":
        return cls(y[:n], y[n : n + k], y[n + k :])


# -- right-hand sides ------------------------------------------------------------


def _solve(gm: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    k = gm.shape[0]
    # closed forms for the common small ranks; numpy's solve dominates the step cost otherwise
    if k <= 2:
        det = gm[0, 0] if k == 1 else gm[0, 0] * gm[1, 1] - gm[0, 1] * gm[1, 0]
        scale = np.abs(gm).max() ** k
        if not abs(det) > 1e-14 * scale:
            raise DegenerateConstraint("B^T I B is singular")
        if k == 1:
            return rhs / det
        inv = np.array([[gm[1, 1], -gm[0, 1]], [-gm[1, 0], gm[0, 0]]]) / det
        return inv @ rhs
    try:
        return np.linalg.solve(gm, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConstraint("B^T I B is singular") from exc


def _corrections(sys: MechanicalSystem, g, zeta, vecs, h):
    """``(D_zeta B) v + Gamma(zeta, B v)`` for each reduced vector ``v``."""
    db = sys.dist.derivative(g, zeta, h)
    out = [db @ v for v in vecs]
    if not sys.metric.is_flat:
        gam = christoffel(sys.metric, g, h)
        b = sys.dist(g)
        out = [c + connection_term(gam, zeta, b @ v) for c, v in zip(out, vecs)]
    return out


def reduced_accel(sys: MechanicalSystem, g, u, gamma_applied, h: float = FD_STEP) -> np.ndarray:
    """``u'`` under the applied covector, from the ``D*``-projected Newton equation."""
    g = as_coords(g)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    b = sys.dist(g)
    ib = sys.metric(g) @ b
    gm = b.T @ ib
    (cu,) = _corrections(sys, g, b @ u, [u], h)
    return _solve(gm, b.T @ np.asarray(gamma_applied, dtype=float) - ib.T @ cu)


def full_acceleration(sys: MechanicalSystem, g, u, udot, h: float = FD_STEP) -> np.ndarray:
    """Chart acceleration ``zeta' = B u' + (D_zeta B) u`` reconstructed from reduced data."""
    g = as_coords(g)
    b = sys.dist(g)
    zeta = b @ u
    return b @ udot + sys.dist.derivative(g, zeta, h) @ u


def integral_error_rate(sys: MechanicalSystem, morse: MorseSpec, g, u, w, h: float = FD_STEP) -> np.ndarray:
    """``w'`` from the constrained integral-error dynamics."""
    g = as_coords(g)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    b = sys.dist(g)
    ib = sys.metric(g) @ b
    gm = b.T @ ib
    (cw,) = _corrections(sys, g, b @ u, [w], h)
    return _solve(gm, b.T @ morse.differential(g) - ib.T @ cw)


class _ClosedLoop:
    """Right-hand side on the packed state ``[g, u, w]``.

    Binds the raw basis, basis-derivative and differential callables once and
    caches a constant metric; this is the inner loop of every simulation.
    """

    def __init__(self, sys: MechanicalSystem, morse: MorseSpec, gains: Gains, h: float = FD_STEP):
        self.sys, self.morse, self.gains, self.h = sys, morse, gains, h
        self.n, self.k = sys.n, sys.k
        self._basis = sys.dist._basis
        self._dbasis = sys.dist._basis_derivative
        self._dv = morse._differential or morse.differential
        self._flat = sys.metric.is_flat
        self._metric = None
        self._identity = False
        if sys.metric.constant:
            m = np.array(sys.metric(np.zeros(sys.n)), dtype=float)
            self._metric = m
            self._identity = bool(np.array_equal(m, np.eye(sys.n)))

    def __call__(self, y: np.ndarray) -> np.ndarray:
        n, k, sys = self.n, self.k, self.sys
        g, u, w = y[:n], y[n : n + k], y[n + k :]
        b = self._basis(g)
        if self._identity:
            ib = b
        elif self._metric is not None:
            ib = self._metric @ b
        else:
            ib = sys.metric(g) @ b
        gm = b.T @ ib
        zeta = b @ u
        uw = y[n:].reshape(2, k).T
        if self._dbasis is not None:
            corr = self._dbasis(g, zeta) @ uw
        else:
            corr = sys.dist.derivative(g, zeta, self.h) @ uw
        if not self._flat:
            gam = christoffel(sys.metric, g, self.h)
            corr = corr + np.einsum("ijk,j,kl->il", gam, zeta, b @ uw)
        bdv = b.T @ self._dv(g)
        kp, kd, ki = self.gains.kp, self.gains.kd, self.gains.ki
        # B^T P_D* = B^T, so the projected PID covector reduces to this
        rhs = -(ib.T @ corr)
        rhs[:, 0] += -kp * bdv - gm @ (kd * u + ki * w)
        rhs[:, 1] += bdv
        sol = _solve(gm, rhs)
        out = np.empty_like(y)
        out[:n] = zeta
        out[n : n + k] = sol[:, 0]
        out[n + k :] = sol[:, 1]
        return out


@dataclass(frozen=True)
class StateDerivative:
    g_dot: np.ndarray
    u_dot: np.ndarray
    w_dot: np.ndarray


def closed_loop_rhs(sys: MechanicalSystem, morse: MorseSpec, gains: Gains, state: ClosedLoopState) -> StateDerivative:
    """Time derivative of ``(g, u, w)`` under the PID law in regulation mode."""
    y = _ClosedLoop(sys, morse, gains)(state.pack())
    n, k = sys.n, sys.k
    return StateDerivative(y[:n], y[n : n + k], y[n + k :])


# -- Lyapunov function -----------------------------------------------------------


def lyapunov_W(sys: MechanicalSystem, morse: MorseSpec, gains: Gains, coeffs: LyapunovCoefficients, state: ClosedLoopState) -> float:
    """Lyapunov function of the closed loop.

    ``W = kp V + <zeta, zeta>/2 + gamma <zeta_I, zeta_I>/2 + alpha <P_D grad V, zeta>
    + beta <zeta_I, zeta> + sigma <zeta_I, P_D grad V>``, evaluated in reduced
    coordinates where ``<P_D grad V, B u> = (B^T dV) . u``.
    """
    g = state.g
    b = sys.dist(g)
    gm = b.T @ sys.metric(g) @ b
    p = b.T @ morse.differential(g)
    return _w_value(gains.kp, coeffs, morse.value(g), gm, p, state.u, state.w)


def _w_value(kp, c: LyapunovCoefficients, v, gm, p, u, w) -> float:
    gu = gm @ u
    return float(
        kp * v
        + 0.5 * (u @ gu)
        + 0.5 * c.gamma * (w @ gm @ w)
        + c.alpha * (p @ u)
        + c.beta * (w @ gu)
        + c.sigma * (p @ w)
    )


def default_coefficients(gains: Gains, kappa: float = 1.0) -> LyapunovCoefficients:
    if gains.kd == 0:
        return LyapunovCoefficients(0.0, 0.0, 0.0, 0.0)
    return lyapunov_coefficients(gains, kappa)


# -- integration -----------------------------------------------------------------


@dataclass
class Trajectory:
    """Fixed-step closed-loop trajectory with per-step diagnostics.

    ``residual`` is ``|P_{D*perp} I zeta|`` (the chart constraint residual),
    ``integral_residual`` the same for ``zeta_I``, ``error`` is
    ``|P_{D*} dV| + |u| + |w|`` and ``force`` the applied control covector.
    """

    times: np.ndarray
    g: np.ndarray
    u: np.ndarray
    w: np.ndarray
    residual: np.ndarray
    integral_residual: np.ndarray
    W: np.ndarray
    force: np.ndarray
    error: np.ndarray
    variables: tuple = ()
    topology: tuple = ()
    gains: Optional[Gains] = None
    coeffs: Optional[LyapunovCoefficients] = None

    def __len__(self):
        return self.times.size

    def state(self, i: int) -> ClosedLoopState:
        return ClosedLoopState(self.g[i], self.u[i], self.w[i])

    @property
    def final(self) -> ClosedLoopState:
        return self.state(-1)

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual))

    def w_increase(self) -> float:
        """Largest single-step increase of ``W`` (negative if strictly decreasing)."""
        if self.times.size < 2:
            return 0.0
        return float(np.max(np.diff(self.W)))

    def w_monotone(self, slack: float = 1e-9) -> bool:
        return self.w_increase() <= slack

    def converged_time(self, threshold: float = CONVERGENCE_THRESHOLD, hold: float = CONVERGENCE_HOLD):
        """Start of the trailing window where ``error < threshold``, if it lasts ``hold`` seconds."""
        below = self.error < threshold
        if not below[-1]:
            return None
        bad = np.flatnonzero(~below)
        start = 0 if bad.size == 0 else bad[-1] + 1
        t0 = self.times[start]
        if self.times[-1] - t0 + 1e-12 < hold:
            return None
        return float(t0)

    @property
    def converged(self) -> bool:
        return self.converged_time() is not None


def _diagnostics(sys, morse, gains, coeffs, ys):
    """Per-row residuals, W, applied force and convergence error, batched over ``ys``."""
    n, k = sys.n, sys.k
    g, u, w = ys[:, :n], ys[:, n : n + k], ys[:, n + k :]
    b = np.stack([sys.dist(row) for row in g])
    if sys.metric.constant:
        ib = np.einsum("ij,tjk->tik", sys.metric(g[0]), b)
    else:
        ib = np.einsum("tij,tjk->tik", np.stack([sys.metric(row) for row in g]), b)
    gm = np.einsum("tji,tjk->tik", b, ib)
    dv = np.stack([morse.differential(row) for row in g])
    v = np.array([morse.value(row) for row in g])
    i_zeta = np.einsum("tij,tj->ti", ib, u)
    i_zi = np.einsum("tij,tj->ti", ib, w)
    # P_D* c = I B G^-1 B^T c, applied to the three covectors at once
    cov = np.stack([i_zeta, i_zi, dv], axis=2)
    try:
        coef = np.linalg.solve(gm, np.einsum("tji,tjc->tic", b, cov))
    except np.linalg.LinAlgError as exc:
        raise DegenerateConstraint("B^T I B is singular along the trajectory") from exc
    proj = np.einsum("tij,tjc->tic", ib, coef)
    res = np.linalg.norm(i_zeta - proj[:, :, 0], axis=1)
    ires = np.linalg.norm(i_zi - proj[:, :, 1], axis=1)
    pdv = proj[:, :, 2]
    force = -gains.kp * pdv - gains.kd * i_zeta - gains.ki * i_zi
    bdv = np.einsum("tji,tj->ti", b, dv)
    gu = np.einsum("tij,tj->ti", gm, u)
    gw = np.einsum("tij,tj->ti", gm, w)
    c = coeffs
    wv = (
        gains.kp * v
        + 0.5 * np.sum(u * gu, axis=1)
        + 0.5 * c.gamma * np.sum(w * gw, axis=1)
        + c.alpha * np.sum(bdv * u, axis=1)
        + c.beta * np.sum(w * gu, axis=1)
        + c.sigma * np.sum(bdv * w, axis=1)
    )
    err = np.linalg.norm(pdv, axis=1) + np.linalg.norm(u, axis=1) + np.linalg.norm(w, axis=1)
    return res, ires, wv, force, err


def integrate(
    sys: MechanicalSystem,
    morse: MorseSpec,
    gains: Gains,
    state0: ClosedLoopState,
    t_end: float,
    dt: float = 1e-3,
    *,
    kappa: float = 1.0,
    coeffs: Optional[LyapunovCoefficients] = None,
    h: float = FD_STEP,
) -> Trajectory:
    """Fixed-step RK4 integration of the closed loop.

    Angular coordinates are re-wrapped after every step.  ``t_end`` is rounded
    to a whole number of steps.

    Raises
    ------
    NonFiniteState
        If any state component becomes inf or nan.
    """
    steps = step_count(t_end, dt)
    n, k = sys.n, sys.k
    if state0.g.size != n or state0.u.size != k or state0.w.size != k:
        raise StructuralError("initial state does not match system dimensions")
    sys.validate_at(state0.g)
    if coeffs is None:
        coeffs = default_coefficients(gains, kappa)
    rhs = _ClosedLoop(sys, morse, gains, h)
    mask = np.zeros(n + 2 * k, dtype=bool)
    mask[:n] = sys.mask

    ys = np.empty((steps + 1, n + 2 * k))
    y = wrap_coords(state0.pack(), mask)
    ys[0] = y
    has_angles = bool(mask.any())
    for i in range(1, steps + 1):
        y = rk4_step(rhs, y, dt)
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"state left the finite range at t={i * dt:g}")
        if has_angles:
            y = wrap_coords(y, mask)
        ys[i] = y
    with np.errstate(over="ignore", invalid="ignore"):
        res, ires, wv, force, err = _diagnostics(sys, morse, gains, coeffs, ys)
    if not (np.all(np.isfinite(wv)) and np.all(np.isfinite(force))):
        raise NonFiniteState("diagnostics overflowed; the closed loop is diverging")
    return Trajectory(
        times=dt * np.arange(steps + 1),
        g=ys[:, :n],
        u=ys[:, n : n + k],
        w=ys[:, n + k :],
        residual=res,
        integral_residual=ires,
        W=wv,
        force=force,
        error=err,
        variables=sys.variables,
        topology=sys.topology,
        gains=gains,
        coeffs=coeffs,
    )


# -- full-space cross-check -------------------------------------------------------


def full_space_rhs(sys: MechanicalSystem, g, zeta, gamma_applied, h: float = FD_STEP) -> np.ndarray:
    """Chart acceleration from ``I nabla_zeta zeta = gamma + gamma_lambda``.

    The constraint force is formed explicitly.  This inverts the full metric
    and therefore requires it to be nondegenerate.
    """
    g = as_coords(g)
    zeta = np.asarray(zeta, dtype=float)
    m = sys.metric(g)
    ps = projectors(sys.metric, sys.dist, g)
    i_zeta = m @ zeta
    lhs = ps.p_dstar @ np.asarray(gamma_applied, float) - nabla_projector(sys.metric, sys.dist, g, zeta, h) @ i_zeta
    try:
        acc = np.linalg.solve(m, lhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateMetric("full-space dynamics need an invertible metric") from exc
    if not sys.metric.is_flat:
        acc = acc - connection_term(christoffel(sys.metric, g, h), zeta, zeta)
    return acc


@dataclass
class FullSpaceTrajectory:
    times: np.ndarray
    g: np.ndarray
    zeta: np.ndarray
    residual: np.ndarray


def integrate_full_space(
    sys: MechanicalSystem,
    g0,
    zeta0,
    force: Callable[[np.ndarray, np.ndarray], np.ndarray],
    t_end: float,
    dt: float,
    h: float = FD_STEP,
) -> FullSpaceTrajectory:
    """RK4 on ``(g, zeta)`` with the explicit constraint force; ``force(g, zeta)`` gives the applied covector."""
    n = sys.n
    steps = step_count(t_end, dt)
    mask = np.zeros(2 * n, dtype=bool)
    mask[:n] = sys.mask

    def f(y):
        g, z = y[:n], y[n:]
        return np.concatenate([z, full_space_rhs(sys, g, z, force(g, z), h)])

    ys = np.empty((steps + 1, 2 * n))
    ys[0] = wrap_coords(np.concatenate([as_coords(g0), np.asarray(zeta0, float)]), mask)
    for i in range(steps):
        ys[i + 1] = wrap_coords(rk4_step(f, ys[i], dt), mask)
        if not np.all(np.isfinite(ys[i + 1])):
            raise NonFiniteState(f"state left the finite range at t={(i + 1) * dt:g}")
    res = np.array(
        [
            np.linalg.norm(projectors(sys.metric, sys.dist, y[:n]).p_dstar_perp @ (sys.metric(y[:n]) @ y[n:]))
            for y in ys
        ]
    )
    return FullSpaceTrajectory(dt * np.arange(steps + 1), ys[:, :n], ys[:, n:], res)
