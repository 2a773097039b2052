"""Built-in mechanical systems with analytic derivatives.

Each builder returns a :class:`Model`: the system, its Morse function and the
defaults used by the command line (gains, initial condition, region).  The
same systems are also described by expression strings so that the generic
finite-difference path can be checked against the analytic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .constraint import DistributionField
from .controller import Gains
from .dynamics import MechanicalSystem
from .errors import ParameterError
from .geometry import TWO_PI, MetricField, Topology
from .morse import MorseSpec, SamplingRegion

L, A = Topology.LINEAR, Topology.ANGULAR


@dataclass(frozen=True)
class Model:
    """A system together with its error function and simulation defaults."""

    system: MechanicalSystem
    morse: MorseSpec
    gains: Gains
    initial: tuple
    region: SamplingRegion
    u0: tuple = None
    w0: tuple = None
    kappa: float = 1.0
    dt: float = 1e-3
    t_end: float = 30.0
    lam: float = None
    mu: float = None
    # expression description of the same system: metric rows, basis rows, V
    expressions: dict = field(default_factory=dict)

    def __post_init__(self):
        k = self.system.k
        if self.u0 is None:
            object.__setattr__(self, "u0", (0.0,) * k)
        if self.w0 is None:
            object.__setattr__(self, "w0", (0.0,) * k)


# -- unicycle ------------------------------------------------------------------------


def _unicycle_basis(g):
    c, s = math.cos(g[2]), math.sin(g[2])
    return np.array([[0.0, c], [0.0, s], [1.0, 0.0]])


def _unicycle_basis_derivative(g, x):
    c, s = math.cos(g[2]), math.sin(g[2])
    return x[2] * np.array([[0.0, -s], [0.0, c], [0.0, 0.0]])


def unicycle() -> Model:
    """Planar robot on R^2 x S^1 that cannot slip sideways.

    Coordinates ``(x, y, theta)``; velocities ``u = (theta_dot, v)`` along
    the heading.  The error function ``0.5 (x^2 + y^2) + 1 - cos(theta)``
    has its minimum at the origin.
    """
    metric = MetricField.euclidean(3)
    dist = DistributionField(_unicycle_basis, 2, _unicycle_basis_derivative)
    system = MechanicalSystem(metric, dist, (L, L, A), "unicycle", ("x", "y", "theta"))
    morse = MorseSpec(
        lambda g: 0.5 * (g[0] ** 2 + g[1] ** 2) + 1.0 - math.cos(g[2]),
        (0.0, 0.0, 0.0),
        differential=lambda g: np.array([g[0], g[1], math.sin(g[2])]),
        hessian=lambda g: np.diag([1.0, 1.0, math.cos(g[2])]),
    )
    region = SamplingRegion(((-2.0, 2.0), (-2.0, 2.0), (0.0, TWO_PI)), (16, 16, 16), (L, L, A))
    return Model(
        system,
        morse,
        Gains(20.0, 2.0, 0.5),
        (1.0, -0.1, 0.6),
        region,
        t_end=120.0,
        lam=4.0,
        mu=1.0,
        expressions={
            "metric": (("1", "0", "0"), ("0", "1", "0"), ("0", "0", "1")),
            "basis": (("0", "cos(theta)"), ("0", "sin(theta)"), ("1", "0")),
            "V": "0.5*(x^2 + y^2) + 1 - cos(theta)",
        },
    )


# -- particle on a circle ------------------------------------------------------------


def circle_particle(radius: float = 1.5, mass: float = 1.0, theta_dot: float = 2.0) -> Model:
    """Point mass in the plane constrained to the circle ``x^2 + y^2 = radius^2``.

    The constraint is holonomic; its tangent distribution is spanned by
    ``(-y, x)``, so ``u`` is the angular rate.  The error function is the
    squared distance to ``(radius, 0)``, which is also the starting point;
    the initial angular rate is ``theta_dot``.
    """
    if not radius > 0 or not mass > 0:
        raise ParameterError(f"radius and mass must be positive, got {radius}, {mass}")
    r = float(radius)
    metric = MetricField.from_matrix(mass * np.eye(2))
    dist = DistributionField(
        lambda g: np.array([[-g[1]], [g[0]]]),
        1,
        lambda g, x: np.array([[-x[1]], [x[0]]]),
    )
    system = MechanicalSystem(metric, dist, (L, L), "circle-particle", ("x", "y"))
    morse = MorseSpec(
        lambda g: 0.5 * ((g[0] - r) ** 2 + g[1] ** 2),
        (r, 0.0),
        differential=lambda g: np.array([g[0] - r, g[1]]),
        hessian=lambda g: np.eye(2),
    )
    region = SamplingRegion(((-2 * r, 2 * r), (-2 * r, 2 * r)), (21, 21), (L, L))
    m = repr(float(mass))
    return Model(
        system,
        morse,
        Gains(4.0, 2.0, 0.5),
        (r, 0.0),
        region,
        u0=(float(theta_dot),),
        t_end=30.0,
        expressions={
            "metric": ((m, "0"), ("0", m)),
            "basis": (("-y",), ("x",)),
            "V": f"0.5*((x - {r!r})^2 + y^2)",
        },
    )


# -- Euclidean space -----------------------------------------------------------------


def euclidean(dim: int = 1) -> Model:
    """Unit point mass in R^dim, unconstrained, driven to the origin."""
    dim = int(dim)
    if dim < 1:
        raise ParameterError(f"dimension must be at least 1, got {dim}")
    names = tuple(f"x{i + 1}" for i in range(dim))
    system = MechanicalSystem(
        MetricField.euclidean(dim), DistributionField.full(dim), (L,) * dim, "euclidean", names
    )
    morse = MorseSpec(
        lambda g: 0.5 * float(g @ g),
        (0.0,) * dim,
        differential=lambda g: np.array(g, dtype=float),
        hessian=lambda g: np.eye(dim),
    )
    region = SamplingRegion(((-2.0, 2.0),) * dim, (max(2, int(4096 ** (1.0 / dim))),) * dim)
    eye = tuple(tuple("1" if i == j else "0" for j in range(dim)) for i in range(dim))
    return Model(
        system,
        morse,
        Gains(20.0, 2.0, 0.5),
        (1.0,) * dim,
        region,
        t_end=30.0,
        lam=1.0,
        mu=1.0,
        expressions={
            "metric": eye,
            "basis": eye,
            "V": "0.5*(" + " + ".join(f"{v}^2" for v in names) + ")",
        },
    )


BUILTINS = {
    "unicycle": unicycle,
    "circle-particle": circle_particle,
    "euclidean": euclidean,
}

# parameters accepted by each builder, with their types
BUILTIN_PARAMS = {
    "unicycle": {},
    "circle-particle": {"radius": float, "mass": float, "theta_dot": float},
    "euclidean": {"dim": int},
}


def builtin(name: str, **params) -> Model:
    """Look up and build a built-in system by name."""
    try:
        builder = BUILTINS[name]
    except KeyError:
        raise ParameterError(f"unknown built-in system {name!r}; choose from {sorted(BUILTINS)}") from None
    allowed = BUILTIN_PARAMS[name]
    for key in params:
        if key not in allowed:
            raise ParameterError(f"built-in {name!r} has no parameter {key!r}")
    return builder(**{k: allowed[k](v) for k, v in params.items()})
