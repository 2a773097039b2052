"""Geometric PID control of nonholonomic mechanical systems on product Lie groups."""

from .constraint import (
    DistributionField,
    ProjectorSet,
    constraint_force,
    constraint_residual,
    nabla_projector,
    projectors,
)
from .controller import (
    EuclideanDesign,
    GainCertificate,
    Gains,
    certify_geometric,
    euclidean_design,
    euclidean_simulate,
    feedforward_Fr,
    lyapunov_coefficients,
    pid_force,
)
from .dynamics import (
    ClosedLoopState,
    MechanicalSystem,
    Trajectory,
    closed_loop_rhs,
    integral_error_rate,
    integrate,
    lyapunov_W,
    reduced_accel,
)
from .errors import (
    ConstraintViolation,
    DegenerateConstraint,
    DegenerateMetric,
    EmptyRegion,
    GeoPidError,
    NonFiniteState,
    ParameterError,
    StructuralError,
    Unsupported,
)
from .geometry import ChartPoint, MetricField, Topology, christoffel, group_compose, group_inverse, tracking_error
from .morse import MorseSpec, SamplingRegion, d_hessian, estimate_lambda_mu, find_d_critical, projected_dV
from .systems import builtin, circle_particle, euclidean, unicycle

__version__ = "0.1.0"
