"""Simulation runs and their serialised outputs (CSV, summary, SVG)."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .config import SystemConfig, build_model
from .controller import GainCertificate, Gains, certify_geometric
from .dynamics import ClosedLoopState, Trajectory, integrate
from .errors import GeoPidError, ParameterError
from .morse import LambdaMu, estimate_lambda_mu
from .svg import line_plot
from .systems import Model

FLOAT_FMT = "%.17g"


def fmt(x) -> str:
    """Float with 17 significant digits, or a comma-joined vector of them."""
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (list, tuple, np.ndarray)):
        return ", ".join(fmt(v) for v in np.ravel(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return FLOAT_FMT % x
    return str(x)


# -- lambda / mu and certification -------------------------------------------------


@dataclass(frozen=True)
class Constants:
    """The constants used for certification and where they came from."""

    lam: float
    mu: float
    source: str  # "declared", "estimated" or "override"
    estimate: Optional[LambdaMu]


def resolve_constants(model: Model, lam=None, mu=None, estimate: bool = True) -> Constants:
    """Pick ``lambda`` and ``mu``: explicit values, else declared, else sampled."""
    est = None
    if estimate:
        try:
            est = estimate_lambda_mu(model.morse, model.system.metric, model.system.dist, model.region)
        except GeoPidError:
            est = None
    if lam is not None or mu is not None:
        base_lam = model.lam if model.lam is not None else (est.lam if est else None)
        base_mu = model.mu if model.mu is not None else (est.mu if est else None)
        return Constants(
            lam if lam is not None else base_lam,
            mu if mu is not None else base_mu,
            "override",
            est,
        )
    if model.lam is not None and model.mu is not None:
        return Constants(model.lam, model.mu, "declared", est)
    if est is None:
        raise ParameterError("no declared lambda/mu and the region gives no admissible samples")
    return Constants(est.lam, est.mu, "estimated", est)


def certify(gains: Gains, consts: Constants, kappa: float) -> GainCertificate:
    if consts.lam is None or consts.mu is None:
        raise ParameterError("lambda and mu are unavailable")
    return certify_geometric(gains, consts.lam, consts.mu, kappa)


# -- summary ------------------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    system: str
    gains: Gains
    kappa: float
    dt: float
    t_end: float
    steps: int
    final_g: tuple
    final_u: tuple
    final_w: tuple
    max_residual: float
    max_integral_residual: float
    W_initial: float
    W_final: float
    W_max_increase: float
    W_monotone: bool
    converged: bool
    converged_time: Optional[float]
    certificate: str
    violated: tuple
    constants_source: str
    lam: Optional[float]
    mu: Optional[float]
    lam_estimate: Optional[float]
    mu_estimate: Optional[float]

    def lines(self) -> list:
        c = self
        return [
            ("system", c.system),
            ("kp", c.gains.kp),
            ("kd", c.gains.kd),
            ("ki", c.gains.ki),
            ("kappa", c.kappa),
            ("dt", c.dt),
            ("t_end", c.t_end),
            ("steps", c.steps),
            ("final_g", c.final_g),
            ("final_u", c.final_u),
            ("final_w", c.final_w),
            ("max_residual", c.max_residual),
            ("max_integral_residual", c.max_integral_residual),
            ("W_initial", c.W_initial),
            ("W_final", c.W_final),
            ("W_max_increase", c.W_max_increase),
            ("W_monotone", c.W_monotone),
            ("converged", c.converged),
            ("converged_time", c.converged_time),
            ("certificate", c.certificate),
            ("violated", "; ".join(c.violated) if c.violated else "none"),
            ("lambda_mu_source", c.constants_source),
            ("lambda", c.lam),
            ("mu", c.mu),
            ("lambda_estimate", c.lam_estimate),
            ("mu_estimate", c.mu_estimate),
            ("lyapunov_coefficients", "unconstrained design reused with sigma = 2 kappa ki"),
        ]

    def text(self) -> str:
        return "".join(f"{k} = {fmt(v)}\n" for k, v in self.lines())


def summarize(model: Model, cfg: SystemConfig, traj: Trajectory, consts: Optional[Constants]) -> RunSummary:
    verdict, violated = "unavailable", ()
    if consts is not None:
        try:
            cert = certify(cfg.gains, consts, cfg.kappa)
            verdict, violated = cert.verdict, tuple(cert.violated)
        except ParameterError as exc:
            verdict = f"invalid ({exc})"
    est = consts.estimate if consts is not None else None
    fin = traj.final
    return RunSummary(
        system=cfg.name,
        gains=cfg.gains,
        kappa=cfg.kappa,
        dt=cfg.dt,
        t_end=float(traj.times[-1]),
        steps=len(traj) - 1,
        final_g=tuple(fin.g),
        final_u=tuple(fin.u),
        final_w=tuple(fin.w),
        max_residual=traj.max_residual,
        max_integral_residual=float(np.max(traj.integral_residual)),
        W_initial=float(traj.W[0]),
        W_final=float(traj.W[-1]),
        W_max_increase=traj.w_increase(),
        W_monotone=traj.w_monotone(),
        converged=traj.converged,
        converged_time=traj.converged_time(),
        certificate=verdict,
        violated=violated,
        constants_source=consts.source if consts is not None else "none",
        lam=consts.lam if consts is not None else None,
        mu=consts.mu if consts is not None else None,
        lam_estimate=est.lam if est is not None else None,
        mu_estimate=est.mu if est is not None else None,
    )


# -- runs ---------------------------------------------------------------------------


def simulate(cfg: SystemConfig, model: Optional[Model] = None) -> Trajectory:
    model = model or build_model(cfg)
    state0 = ClosedLoopState(cfg.initial, cfg.u0, cfg.w0)
    return integrate(model.system, model.morse, cfg.gains, state0, cfg.t_end, cfg.dt, kappa=cfg.kappa)


def csv_header(traj: Trajectory) -> list:
    k = traj.u.shape[1]
    n = traj.g.shape[1]
    return (
        ["t", *traj.variables]
        + [f"u{i + 1}" for i in range(k)]
        + [f"w{i + 1}" for i in range(k)]
        + ["residual", "W"]
        + [f"f{i + 1}" for i in range(n)]
    )


def trajectory_csv(traj: Trajectory) -> str:
    """CSV text: header row, one row per step, ``%.17g`` floats, LF line endings."""
    table = np.column_stack([traj.times, traj.g, traj.u, traj.w, traj.residual, traj.W, traj.force])
    buf = io.StringIO()
    buf.write(",".join(csv_header(traj)) + "\n")
    np.savetxt(buf, table, fmt=FLOAT_FMT, delimiter=",", newline="\n")
    return buf.getvalue()


def trajectory_svg(traj: Trajectory, title: str) -> str:
    series = {name: traj.g[:, i] for i, name in enumerate(traj.variables)}
    series.update({f"u{i + 1}": traj.u[:, i] for i in range(traj.u.shape[1])})
    return line_plot(traj.times, series, title=title)


def sweep_row(cfg: SystemConfig, gains: Gains, lam, mu) -> list:
    """One sweep result; runs in a worker process, so it rebuilds the model."""
    run = cfg.replace(kp=gains.kp, kd=gains.kd, ki=gains.ki)
    consts = Constants(lam, mu, "given", None)
    try:
        cert = certify(gains, consts, run.kappa)
        verdict, violated = cert.verdict, "; ".join(cert.violated) or "none"
    except ParameterError as exc:
        verdict, violated = "invalid", str(exc)
    try:
        traj = simulate(run)
    except GeoPidError as exc:
        nan = [math.nan] * (3 + run.dimension)
        return [gains.kp, gains.kd, gains.ki, verdict, violated, f"error: {type(exc).__name__}", *nan]
    ct = traj.converged_time()
    return [
        gains.kp,
        gains.kd,
        gains.ki,
        verdict,
        violated,
        "true" if ct is not None else "false",
        math.nan if ct is None else ct,
        traj.max_residual,
        traj.w_increase(),
        *traj.final.g,
    ]


def sweep_header(cfg: SystemConfig) -> list:
    return [
        "kp",
        "kd",
        "ki",
        "certificate",
        "violated",
        "converged",
        "converged_time",
        "max_residual",
        "W_max_increase",
        *[f"final_{v}" for v in cfg.variables],
    ]


def sweep_csv(cfg: SystemConfig, rows) -> str:
    def cell(v):
        if isinstance(v, str):
            return '"' + v.replace('"', '""') + '"' if ("," in v or '"' in v) else v
        return fmt(v)

    lines = [",".join(sweep_header(cfg))]
    lines += [",".join(cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"
