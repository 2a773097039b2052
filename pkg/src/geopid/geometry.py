"""Chart representation of product groups R^a x (S^1)^b and their metric geometry.

Configurations are coordinate vectors in a single chart.  Linear coordinates
compose by addition, angular ones by addition modulo 2*pi, so left translation
acts as the identity on velocity components and the body velocity equals the
chart velocity.

Tangent and cotangent vectors are plain ``numpy`` arrays of length ``n``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateMetric, StructuralError

TWO_PI = 2.0 * np.pi


class Topology(enum.Enum):
    LINEAR = "linear"
    ANGULAR = "angular"


def wrap_angle(a):
    """Map angles into [0, 2*pi), elementwise."""
    out = np.mod(a, TWO_PI)
    # np.mod returns exactly 2*pi for tiny negative inputs
    return np.where(out >= TWO_PI, 0.0, out)


def angular_mask(topology: Sequence[Topology]) -> np.ndarray:
    return np.array([t is Topology.ANGULAR for t in topology], dtype=bool)


def wrap_coords(coords: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Return a copy of ``coords`` with the entries selected by ``mask`` wrapped."""
    out = np.array(coords, dtype=float, copy=True)
    if mask.any():
        out[..., mask] = wrap_angle(out[..., mask])
    return out


def chart_difference(a, b, mask: np.ndarray) -> np.ndarray:
    """Componentwise ``a - b`` with angular entries reduced to [-pi, pi)."""
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if mask.any():
        d = np.array(d, copy=True)
        d[..., mask] = np.mod(d[..., mask] + np.pi, TWO_PI) - np.pi
    return d


@dataclass(frozen=True, eq=False)
class ChartPoint:
    """Immutable configuration in the product-group chart.

    Angular components are normalised to [0, 2*pi) on construction.
    """

    coords: np.ndarray
    topology: tuple

    def __init__(self, coords, topology=None):
        c = np.asarray(coords, dtype=float).reshape(-1)
        if topology is None:
            topology = (Topology.LINEAR,) * c.size
        topology = tuple(Topology(t) for t in topology)
        if len(topology) != c.size:
            raise StructuralError(
                f"{c.size} coordinates but {len(topology)} topology flags"
            )
        c = wrap_coords(c, angular_mask(topology))
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        object.__setattr__(self, "topology", topology)

    @property
    def dim(self) -> int:
        return self.coords.size

    @property
    def mask(self) -> np.ndarray:
        return angular_mask(self.topology)

    def __len__(self):
        return self.coords.size

    def __array__(self, dtype=None, copy=None):
        return np.array(self.coords, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, ChartPoint):
            return NotImplemented
        return self.topology == other.topology and np.array_equal(self.coords, other.coords)

    def __hash__(self):
        return hash((self.topology, self.coords.tobytes()))

    def __repr__(self):
        vals = ", ".join(f"{v:.6g}" for v in self.coords)
        return f"ChartPoint([{vals}])"

    @classmethod
    def identity(cls, topology) -> "ChartPoint":
        return cls(np.zeros(len(topology)), topology)


def as_coords(g) -> np.ndarray:
    """Coordinates of a ChartPoint or array-like as a float vector."""
    if type(g) is np.ndarray and g.ndim == 1 and g.dtype == np.float64:
        return g
    if isinstance(g, ChartPoint):
        return g.coords
    return np.asarray(g, dtype=float).reshape(-1)


def _check_same(a: ChartPoint, b: ChartPoint):
    if a.dim != b.dim or a.topology != b.topology:
        raise StructuralError(
            f"group elements differ: dim {a.dim} vs {b.dim}, topology mismatch"
            if a.dim != b.dim
            else "group elements have different topology flags"
        )


def group_compose(a: ChartPoint, b: ChartPoint) -> ChartPoint:
    """Product ``a . b``: linear components add, angular ones add modulo 2*pi."""
    _check_same(a, b)
    return ChartPoint(a.coords + b.coords, a.topology)


def group_inverse(a: ChartPoint) -> ChartPoint:
    return ChartPoint(-a.coords, a.topology)


def tracking_error(g_r: ChartPoint, g: ChartPoint) -> ChartPoint:
    """Left-invariant tracking error ``g_r^{-1} . g``."""
    _check_same(g_r, g)
    return group_compose(group_inverse(g_r), g)


class MetricField:
    """Symmetric positive-semidefinite metric ``g -> I(g)`` in chart coordinates.

    Parameters
    ----------
    matrix : callable
        Maps a coordinate vector to an ``n x n`` array.
    christoffel : callable, optional
        Analytic Christoffel symbols ``g -> Gamma[i, j, k]``.  Mandatory when
        the metric is degenerate.
    constant : bool
        Declares that ``matrix`` does not depend on ``g``.  Constant metrics
        have identically vanishing Christoffel symbols.
    """

    def __init__(
        self,
        matrix: Callable[[np.ndarray], np.ndarray],
        christoffel: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        constant: bool = False,
    ):
        self._matrix = matrix
        self.analytic_christoffel = christoffel
        self.constant = constant

    @classmethod
    def from_matrix(cls, m) -> "MetricField":
        m = np.array(m, dtype=float)
        m.setflags(write=False)
        n = m.shape[0]
        zero = np.zeros((n, n, n))
        zero.setflags(write=False)
        return cls(lambda g: m, christoffel=lambda g: zero, constant=True)

    @classmethod
    def euclidean(cls, n: int) -> "MetricField":
        return cls.from_matrix(np.eye(n))

    def __call__(self, g) -> np.ndarray:
        return self._matrix(as_coords(g))

    eval = __call__

    @property
    def is_flat(self) -> bool:
        return self.constant


def _metric_derivatives(metric: MetricField, g: np.ndarray, h: float) -> np.ndarray:
    """``dg[l, i, j] = d g_ij / d x^l`` by central differences."""
    n = g.size
    dg = np.empty((n, n, n))
    for l in range(n):
        step = np.zeros(n)
        step[l] = h
        dg[l] = (metric(g + step) - metric(g - step)) / (2.0 * h)
    return dg


def christoffel(metric: MetricField, g, h: float = 1e-5) -> np.ndarray:
    """Levi-Civita symbols ``Gamma[i, j, k]`` (upper i, lower j k) at ``g``.

    Analytic symbols are returned when the metric carries them; otherwise the
    coordinate formula is evaluated with central-difference metric derivatives.
    """
    g = as_coords(g)
    if metric.analytic_christoffel is not None:
        return np.asarray(metric.analytic_christoffel(g), dtype=float)
    m = metric(g)
    evals = np.linalg.eigvalsh(0.5 * (m + m.T))
    if evals[0] <= 1e-12 * max(evals[-1], 1.0):
        raise DegenerateMetric(
            "metric is degenerate at this point; analytic Christoffel symbols required"
        )
    dg = _metric_derivatives(metric, g, h)
    # lowered symbols Gamma_{l j k} = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
    low = 0.5 * (
        np.transpose(dg, (1, 0, 2))  # d_j g_lk -> [l, j, k]
        + np.transpose(dg, (1, 2, 0))  # d_k g_lj -> [l, j, k]
        - dg  # d_l g_jk
    )
    gamma = np.einsum("il,ljk->ijk", np.linalg.inv(m), low)
    return 0.5 * (gamma + np.transpose(gamma, (0, 2, 1)))


def connection_term(gamma: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``Gamma(a, b)^i = Gamma^i_{jk} a^j b^k``."""
    return np.einsum("ijk,j,k->i", gamma, a, b)


def covariant_accel(gamma: np.ndarray, zeta, zeta_dot) -> np.ndarray:
    """Coordinate form of ``nabla_zeta zeta``: ``zeta_dot + Gamma(zeta, zeta)``."""
    zeta = np.asarray(zeta, dtype=float)
    zeta_dot = np.asarray(zeta_dot, dtype=float)
    if zeta.shape != zeta_dot.shape or gamma.shape[0] != zeta.size:
        raise StructuralError("velocity, acceleration and Christoffel shapes disagree")
    return zeta_dot + connection_term(gamma, zeta, zeta)


def inner(metric: MetricField, g, v, w) -> float:
    """Metric pairing ``v^T I(g) w``."""
    return float(np.asarray(v, dtype=float) @ metric(g) @ np.asarray(w, dtype=float))
