"""PID force law, gain certification and the Euclidean PID design."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteState, ParameterError, Unsupported
from .geometry import as_coords, christoffel, connection_term
from .integrators import rk4_step, step_count
from .morse import projected_dV

PD_TOL = 1e-10


@dataclass(frozen=True)
class Gains:
    """Proportional, derivative and integral gains.

    Zero or negative values are representable so that degenerate runs and
    failing certificates can be expressed; ``positive`` reports validity.
    """

    kp: float
    kd: float
    ki: float

    @property
    def positive(self) -> bool:
        return self.kp > 0 and self.kd > 0 and self.ki > 0

    def replace(self, **kw) -> "Gains":
        return Gains(**{**self.__dict__, **kw})


@dataclass(frozen=True)
class LyapunovCoefficients:
    alpha: float
    beta: float
    gamma: float
    sigma: float


def lyapunov_coefficients(gains: Gains, kappa: float = 1.0) -> LyapunovCoefficients:
    """Cross-term weights of the Lyapunov function.

    ``alpha = ki/kd^2``, ``beta = ki/kd``, ``gamma = (ki^2 + ki kp kd)/kd^2``
    and ``sigma = 2 kappa ki``.
    """
    kp, kd, ki = gains.kp, gains.kd, gains.ki
    if kd == 0:
        raise ParameterError("Lyapunov coefficients need kd != 0")
    return LyapunovCoefficients(
        alpha=ki / kd**2,
        beta=ki / kd,
        gamma=(ki**2 + ki * kp * kd) / kd**2,
        sigma=2.0 * kappa * ki,
    )


# -- geometric PID ---------------------------------------------------------------


def pid_force(morse, sys, gains: Gains, state) -> np.ndarray:
    """Control covector ``-kp P_{D*} dV - kd I zeta_E - ki I zeta_I`` (regulation)."""
    g = as_coords(state.g)
    b = sys.dist(g)
    m = sys.metric(g)
    return (
        -gains.kp * projected_dV(morse, sys.metric, sys.dist, g)
        - gains.kd * (m @ (b @ state.u))
        - gains.ki * (m @ (b @ state.w))
    )


@dataclass(frozen=True)
class GainCertificate:
    gains: Gains
    kappa: float
    delta: float
    lam: float
    mu: float
    margins: dict
    kp_bound: float
    ki_bound: float

    @property
    def passed(self) -> bool:
        return all(v > 0 for v in self.margins.values())

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    @property
    def violated(self) -> list:
        return [k for k, v in self.margins.items() if not v > 0]


KD_POSITIVE = "0 < kd"
KI_POSITIVE = "0 < ki"
KI_UPPER = "ki < kd^3 (1 - delta^2) / mu"
KP_LOWER = "kp > max[2 kappa kd^2, lambda ki^2/(2 kd^4) (1 + sqrt(...))]"


def geometric_kp_bound(kd: float, ki: float, lam: float, kappa: float) -> float:
    """Lower bound on ``kp`` required by the convergence theorem."""
    if kd <= 0:
        return math.inf
    first = 2.0 * kappa * kd**2
    if ki <= 0:
        # the second term tends to 0 as ki -> 0+
        return first
    inner = 1.0 + (4.0 * kd**3 / (lam * ki**3)) * (ki**2 + 4.0 * kappa**2 * kd**6)
    second = (lam * ki**2 / (2.0 * kd**4)) * (1.0 + math.sqrt(inner))
    return max(first, second)


def certify_geometric(gains: Gains, lam: float, mu: float, kappa: float = 1.0) -> GainCertificate:
    """Check the gain inequalities of the constrained convergence theorem.

    With ``delta = kappa mu - 1`` the conditions are ``0 < kd``,
    ``0 < ki < kd^3 (1 - delta^2)/mu`` and ``kp`` above
    :func:`geometric_kp_bound`.  Each margin is the slack of one strict
    inequality; the certificate passes iff every margin is positive.
    """
    if not (lam > 0 and mu > 0):
        raise ParameterError(f"lambda and mu must be positive, got lambda={lam}, mu={mu}")
    if not 0 < kappa < 2.0 / mu:
        raise ParameterError(f"kappa must lie in (0, 2/mu) = (0, {2.0 / mu:g}), got {kappa}")
    kp, kd, ki = gains.kp, gains.kd, gains.ki
    delta = kappa * mu - 1.0
    ki_bound = kd**3 * (1.0 - delta**2) / mu if kd > 0 else 0.0
    kp_bound = geometric_kp_bound(kd, ki, lam, kappa)
    margins = {
        KD_POSITIVE: kd,
        KI_POSITIVE: ki,
        KI_UPPER: ki_bound - ki,
        KP_LOWER: kp - kp_bound,
    }
    return GainCertificate(gains, kappa, delta, lam, mu, margins, kp_bound, ki_bound)


def best_kappa(gains: Gains, lam: float, mu: float, steps: int = 50):
    """Sweep ``kappa`` over (0, 2/mu) and return the certificate with the largest worst margin."""
    if not (lam > 0 and mu > 0):
        raise ParameterError(f"lambda and mu must be positive, got lambda={lam}, mu={mu}")
    certs = [
        certify_geometric(gains, lam, mu, (2.0 / mu) * i / (steps + 1))
        for i in range(1, steps + 1)
    ]
    return max(certs, key=lambda c: min(c.margins.values())), certs


# -- Euclidean design --------------------------------------------------------------


@dataclass(frozen=True)
class EuclideanDesign:
    """Lyapunov design for the unit-mass Euclidean PID loop.

    ``P`` is the Lyapunov matrix (``W = u^T P u / 2`` with ``u = (e, e', z)``)
    and ``Q`` the matrix with ``-2 dW/dt = u^T Q u``.
    """

    gains: Gains
    K: float
    coeffs: LyapunovCoefficients
    P: np.ndarray
    Q: np.ndarray
    margins: dict

    @property
    def alpha(self):
        return self.coeffs.alpha

    @property
    def beta(self):
        return self.coeffs.beta

    @property
    def gamma(self):
        return self.coeffs.gamma

    @property
    def sigma(self):
        return self.coeffs.sigma

    @property
    def delta(self) -> float:
        return self.K - 1.0

    @property
    def p_min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.P)[0])

    @property
    def q_min_eig(self) -> float:
        return float(np.linalg.eigvalsh(self.Q)[0])

    @property
    def p_posdef(self) -> bool:
        return self.p_min_eig > PD_TOL

    @property
    def q_posdef(self) -> bool:
        return self.q_min_eig > PD_TOL

    @property
    def passed(self) -> bool:
        return all(v > 0 for v in self.margins.values())


E_KI_POSITIVE = "ki > 0"
E_KD_CUBE = "kd^3 > ki / (1 - delta^2)"
E_KP_LOWER = "kp > max(2 K kd^2, sqrt((ki^3 + 4 K^2 ki kd^6 + 4 K ki^2 kd^3) / kd^5))"


def lyapunov_matrices(gains: Gains, c: LyapunovCoefficients):
    kp, kd, ki = gains.kp, gains.kd, gains.ki
    a, b, g, s = c.alpha, c.beta, c.gamma, c.sigma
    p = np.array([[kp, a, s], [a, 1.0, b], [s, b, g]])
    q = np.array(
        [
            [2 * (kp * a - s), kd * a - b, ki * a + kp * b - g],
            [kd * a - b, 2 * (kd - a), ki + b * kd - s],
            [ki * a + kp * b - g, ki + b * kd - s, 2 * b * ki],
        ]
    )
    return p, q


def euclidean_design(gains: Gains, K: float = 1.0) -> EuclideanDesign:
    """Assemble ``P`` and ``Q`` with ``sigma = 2 K ki`` and grade the three gain conditions."""
    if not 0 < K < 2:
        raise ParameterError(f"K must lie in (0, 2), got {K}")
    kp, kd, ki = gains.kp, gains.kd, gains.ki
    if kd <= 0:
        raise ParameterError("euclidean design needs kd > 0")
    coeffs = lyapunov_coefficients(gains, K)
    p, q = lyapunov_matrices(gains, coeffs)
    delta = K - 1.0
    root = math.sqrt(max(ki**3 + 4 * K**2 * ki * kd**6 + 4 * K * ki**2 * kd**3, 0.0) / kd**5)
    margins = {
        E_KI_POSITIVE: ki,
        E_KD_CUBE: kd**3 - ki / (1.0 - delta**2),
        E_KP_LOWER: kp - max(2 * K * kd**2, root),
    }
    return EuclideanDesign(gains, K, coeffs, p, q, margins)


@dataclass
class EuclideanTrajectory:
    times: np.ndarray
    e: np.ndarray
    edot: np.ndarray
    z: np.ndarray
    W: np.ndarray
    design: EuclideanDesign
    disturbance: np.ndarray = field(default=None)


def euclidean_simulate(
    gains: Gains,
    disturbance,
    x0,
    t_end: float,
    dt: float,
    *,
    v0=None,
    z0=None,
    x_d=None,
    K: float = 1.0,
) -> EuclideanTrajectory:
    """RK4 run of ``x'' = D - kp e - kd e' - ki z``, ``z' = e`` (unit mass).

    ``W`` is evaluated with the integral state shifted by ``D / ki`` so that
    it is zero at the disturbed equilibrium.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    dist = np.broadcast_to(np.asarray(disturbance, dtype=float), (n,)).copy()
    x_d = np.zeros(n) if x_d is None else np.broadcast_to(np.asarray(x_d, float), (n,))
    v0 = np.zeros(n) if v0 is None else np.asarray(v0, float)
    z0 = np.zeros(n) if z0 is None else np.asarray(z0, float)
    kp, kd, ki = gains.kp, gains.kd, gains.ki

    def f(y):
        e, ed, z = y[:n], y[n : 2 * n], y[2 * n :]
        return np.concatenate([ed, dist - kp * e - kd * ed - ki * z, e])

    steps = step_count(t_end, dt)
    ys = np.empty((steps + 1, 3 * n))
    ys[0] = np.concatenate([x0 - x_d, v0, z0])
    for i in range(steps):
        ys[i + 1] = rk4_step(f, ys[i], dt)
        if not np.all(np.isfinite(ys[i + 1])):
            raise NonFiniteState(f"state left the finite range at t={(i + 1) * dt:g}")
    design = euclidean_design(gains, K) if gains.kd > 0 and 0 < K < 2 else None
    e, ed, z = ys[:, :n], ys[:, n : 2 * n], ys[:, 2 * n :]
    if design is not None and ki != 0:
        zs = z - dist / ki
        u = np.stack([e, ed, zs], axis=-1)  # (T, n, 3)
        w = 0.5 * np.einsum("tna,ab,tnb->t", u, design.P, u)
    else:
        w = np.full(steps + 1, np.nan)
    return EuclideanTrajectory(dt * np.arange(steps + 1), e, ed, z, w, design, dist)


# -- feedforward -------------------------------------------------------------


def feedforward_Fr(sys, point, zeta_E, zeta_r, zeta_r_dot=None, h: float = 1e-5) -> np.ndarray:
    """Feedforward ``F_r = nabla_{zeta_E} eta_r + nabla_{eta_r} zeta_E + nabla_{eta_r} eta_r``.

    On the abelian chart groups ``Ad`` is the identity, so ``eta_r = zeta_r``.
    The first term is the derivative along the error curve,
    ``eta_r' + Gamma(zeta_E, eta_r)``; the other two are the bilinear connection
    terms.  Christoffel symbols are evaluated at ``point``.
    """
    if not getattr(sys, "abelian", True):
        raise Unsupported("feedforward is only implemented on abelian product groups")
    zeta_r = np.asarray(zeta_r, dtype=float)
    zeta_E = np.asarray(zeta_E, dtype=float)
    eta_dot = np.zeros_like(zeta_r) if zeta_r_dot is None else np.asarray(zeta_r_dot, float)
    if not np.any(zeta_r) and not np.any(eta_dot):
        return np.zeros_like(zeta_r)
    if sys.metric.is_flat:
        return eta_dot.copy()
    gam = christoffel(sys.metric, point, h)
    return (
        eta_dot
        + connection_term(gam, zeta_E, zeta_r)
        + connection_term(gam, zeta_r, zeta_E)
        + connection_term(gam, zeta_r, zeta_r)
    )
