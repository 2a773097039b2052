"""Constraint distributions, their projectors and the constraint force.

The distribution ``D(g)`` is the column span of a basis matrix ``B(g)``.  All
projectors come from the Gram matrix ``B^T I B``, so the metric itself is
never inverted and may be degenerate as long as it is injective on ``D``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConstraintViolation, DegenerateConstraint
from .geometry import MetricField, as_coords, christoffel

RANK_TOL = 1e-8
GRAM_COND_MAX = 1e10
FD_STEP = 1e-5
RESIDUAL_TOL = 1e-6


class DistributionField:
    """Constant-rank distribution ``g -> span B(g)``.

    Parameters
    ----------
    basis : callable
        Maps coordinates to an ``n x k`` matrix whose columns span ``D(g)``.
    rank : int
        The constant dimension ``k``.
    basis_derivative : callable, optional
        Analytic directional derivative ``(g, X) -> D_X B`` (``n x k``).
        Falls back to central differences.
    constant : bool
        Declares ``B`` independent of ``g``.
    """

    def __init__(
        self,
        basis: Callable[[np.ndarray], np.ndarray],
        rank: int,
        basis_derivative: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
        constant: bool = False,
    ):
        self._basis = basis
        self.rank = rank
        self._basis_derivative = basis_derivative
        self.constant = constant

    @classmethod
    def full(cls, n: int) -> "DistributionField":
        eye = np.eye(n)
        eye.setflags(write=False)
        return cls(lambda g: eye, n, lambda g, x: np.zeros((n, n)), constant=True)

    @classmethod
    def from_matrix(cls, b) -> "DistributionField":
        b = np.array(b, dtype=float)
        b.setflags(write=False)
        return cls(lambda g: b, b.shape[1], lambda g, x: np.zeros(b.shape), constant=True)

    def __call__(self, g) -> np.ndarray:
        return self._basis(as_coords(g))

    basis = __call__

    def derivative(self, g, x, h: float = FD_STEP) -> np.ndarray:
        """Directional derivative ``D_x B`` of the basis matrix."""
        g = as_coords(g)
        x = np.asarray(x, dtype=float)
        if self._basis_derivative is not None:
            return self._basis_derivative(g, x)
        return directional_fd(self._basis, g, x, h)


def directional_fd(f, g: np.ndarray, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central difference of ``f`` at ``g`` along ``x``, scaled by ``|x|``.

    The probe step is ``h`` in chart distance regardless of ``|x|``.
    """
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        return np.zeros_like(np.asarray(f(g), dtype=float))
    d = (h / norm) * x
    return (np.asarray(f(g + d)) - np.asarray(f(g - d))) * (norm / (2.0 * h))


def check_basis(b: np.ndarray, k: int):
    if b.ndim != 2 or b.shape[1] != k:
        raise DegenerateConstraint(f"basis has shape {b.shape}, expected (n, {k})")
    s = np.linalg.svd(b, compute_uv=False)
    if s[-1] <= RANK_TOL * s[0]:
        raise DegenerateConstraint(
            f"distribution basis is rank deficient (singular values {s})"
        )


def gram(metric_m: np.ndarray, b: np.ndarray) -> np.ndarray:
    g = b.T @ metric_m @ b
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond >= GRAM_COND_MAX:
        raise DegenerateConstraint(
            f"B^T I B is ill-conditioned (cond={cond:.3e}); metric not injective on D"
        )
    return g


@dataclass(frozen=True)
class ProjectorSet:
    """The four projectors at one configuration.

    ``p_d`` and ``p_d_perp`` act on tangent components, ``p_dstar`` and
    ``p_dstar_perp`` on cotangent components.
    """

    p_d: np.ndarray
    p_d_perp: np.ndarray
    p_dstar: np.ndarray
    p_dstar_perp: np.ndarray


def _projector_matrices(metric_m: np.ndarray, b: np.ndarray):
    g = gram(metric_m, b)
    ib = metric_m @ b
    # P_D = B G^-1 B^T I, P_D* = I B G^-1 B^T = P_D^T
    p_dstar = ib @ np.linalg.solve(g, b.T)
    return p_dstar.T, p_dstar


def projectors(metric: MetricField, dist: DistributionField, g) -> ProjectorSet:
    """Projectors onto ``D``, ``D_perp``, ``D*`` and ``D*_perp`` at ``g``."""
    g = as_coords(g)
    b = dist(g)
    check_basis(b, dist.rank)
    p_d, p_dstar = _projector_matrices(metric(g), b)
    eye = np.eye(g.size)
    return ProjectorSet(p_d, eye - p_d, p_dstar, eye - p_dstar)


def dstar_perp(metric: MetricField, dist: DistributionField, g: np.ndarray) -> np.ndarray:
    _, p_dstar = _projector_matrices(metric(g), dist(g))
    return np.eye(g.size) - p_dstar


def nabla_projector(metric: MetricField, dist: DistributionField, g, x, h: float = FD_STEP):
    """Covariant derivative ``nabla_x P_{D*perp}`` as a matrix on covector components.

    For a map ``M`` with ``(M a)_i = M_i^j a_j`` the (1,1)-tensor rule gives
    ``nabla_x M = d_x M - Gamma_x^T M + M Gamma_x^T`` with
    ``(Gamma_x)^i_m = Gamma^i_{km} x^k``.  The directional derivative ``d_x M``
    is taken by central differences.
    """
    g = as_coords(g)
    x = np.asarray(x, dtype=float)
    check_basis(dist(g), dist.rank)
    dm = directional_fd(lambda p: dstar_perp(metric, dist, p), g, x, h)
    if metric.is_flat or not np.any(x):
        return dm
    gam_x = np.einsum("ikm,k->im", christoffel(metric, g, h), x)
    m = dstar_perp(metric, dist, g)
    return dm - gam_x.T @ m + m @ gam_x.T


def nabla_projector_tangent(metric: MetricField, dist: DistributionField, g, x, h: float = FD_STEP):
    """Covariant derivative of ``P_D`` acting on tangent components.

    ``nabla_x P = d_x P + Gamma_x P - P Gamma_x``.
    """
    g = as_coords(g)
    x = np.asarray(x, dtype=float)
    dp = directional_fd(lambda p: projectors(metric, dist, p).p_d, g, x, h)
    if metric.is_flat or not np.any(x):
        return dp
    gam_x = np.einsum("ikm,k->im", christoffel(metric, g, h), x)
    p = projectors(metric, dist, g).p_d
    return dp + gam_x @ p - p @ gam_x


def constraint_residual(metric: MetricField, dist: DistributionField, g, zeta) -> float:
    """Norm of ``P_{D*perp} I zeta``; zero iff ``zeta`` lies in ``D``."""
    g = as_coords(g)
    return float(np.linalg.norm(dstar_perp(metric, dist, g) @ (metric(g) @ zeta)))


def constraint_force(metric: MetricField, dist: DistributionField, g, zeta, gamma_applied=None, h: float = FD_STEP):
    """Covector the constraint exerts so that ``zeta`` stays in ``D``.

    ``gamma_lambda = -P_{D*perp} gamma - (nabla_zeta P_{D*perp}) I zeta``

    Raises
    ------
    ConstraintViolation
        If ``I zeta`` is not in ``D*`` to relative tolerance 1e-6.
    """
    g = as_coords(g)
    zeta = np.asarray(zeta, dtype=float)
    if gamma_applied is None:
        gamma_applied = np.zeros_like(zeta)
    m = metric(g)
    i_zeta = m @ zeta
    perp = dstar_perp(metric, dist, g)
    res = float(np.linalg.norm(perp @ i_zeta))
    if res > RESIDUAL_TOL * (1.0 + np.linalg.norm(i_zeta)):
        raise ConstraintViolation("velocity is not in the constraint distribution", res)
    return -perp @ np.asarray(gamma_applied, dtype=float) - nabla_projector(metric, dist, g, zeta, h) @ i_zeta
