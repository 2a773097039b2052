"""Morse functions relative to a distribution.

Covers the projected differential ``P_{D*} dV``, the search for D-critical
points, the Hessian restricted to ``D`` and sampled estimates of the
constants ``lambda`` and ``mu`` used in gain certification.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .constraint import FD_STEP, DistributionField, check_basis, gram, projectors
from .errors import EmptyRegion
from .geometry import (
    TWO_PI,
    ChartPoint,
    MetricField,
    Topology,
    angular_mask,
    as_coords,
    chart_difference,
    wrap_coords,
)

HESS_STEP = 1e-4
MAX_HALVINGS = 30


class MorseSpec:
    """Scalar error function ``V`` with its declared global minimiser.

    ``differential`` and ``hessian`` are optional analytic overrides; without
    them both are obtained by central differences.
    """

    def __init__(
        self,
        value: Callable[[np.ndarray], float],
        minimum,
        differential: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        hessian: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        h: float = FD_STEP,
    ):
        self._value = value
        self._differential = differential
        self._hessian = hessian
        self.minimum = minimum if isinstance(minimum, ChartPoint) else ChartPoint(minimum)
        self.h = h

    def value(self, g) -> float:
        return float(self._value(as_coords(g)))

    __call__ = value

    def differential(self, g) -> np.ndarray:
        g = as_coords(g)
        if self._differential is not None:
            return np.asarray(self._differential(g), dtype=float)
        n = g.size
        out = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = self.h
            out[i] = (self._value(g + e) - self._value(g - e)) / (2.0 * self.h)
        return out

    def hessian(self, g) -> np.ndarray:
        """Chart Hessian, symmetrised."""
        g = as_coords(g)
        n = g.size
        if self._hessian is not None:
            hm = np.asarray(self._hessian(g), dtype=float)
        elif self._differential is not None:
            hm = np.empty((n, n))
            for i in range(n):
                e = np.zeros(n)
                e[i] = self.h
                hm[:, i] = (self.differential(g + e) - self.differential(g - e)) / (2.0 * self.h)
        else:
            # second differences of the value; larger step keeps roundoff ~eps/h^2 small
            s = HESS_STEP
            f = self._value
            hm = np.empty((n, n))
            for i in range(n):
                ei = np.zeros(n)
                ei[i] = s
                hm[i, i] = (f(g + ei) - 2.0 * f(g) + f(g - ei)) / s**2
                for j in range(i + 1, n):
                    ej = np.zeros(n)
                    ej[j] = s
                    hm[i, j] = hm[j, i] = (
                        f(g + ei + ej) - f(g + ei - ej) - f(g - ei + ej) + f(g - ei - ej)
                    ) / (4.0 * s * s)
        return 0.5 * (hm + hm.T)

    def scaled(self, c: float) -> "MorseSpec":
        """The function ``c * V``."""
        d = None if self._differential is None else (lambda g: c * self._differential(g))
        hs = None if self._hessian is None else (lambda g: c * self._hessian(g))
        return MorseSpec(lambda g: c * self._value(g), self.minimum, d, hs, self.h)


def projected_dV(morse: MorseSpec, metric: MetricField, dist: DistributionField, g) -> np.ndarray:
    """``P_{D*}(g) dV(g)``."""
    g = as_coords(g)
    return projectors(metric, dist, g).p_dstar @ morse.differential(g)


def projected_gradient(morse: MorseSpec, metric: MetricField, dist: DistributionField, g) -> np.ndarray:
    """Tangent vector ``P_D grad V = B (B^T I B)^{-1} B^T dV``; needs no metric inverse."""
    g = as_coords(g)
    b = dist(g)
    return b @ np.linalg.solve(gram(metric(g), b), b.T @ morse.differential(g))


def d_hessian(morse: MorseSpec, metric: MetricField, dist: DistributionField, g) -> np.ndarray:
    """Chart Hessian of ``V`` restricted to ``D``: symmetrised ``B^T H B``."""
    g = as_coords(g)
    b = dist(g)
    check_basis(b, dist.rank)
    r = b.T @ morse.hessian(g) @ b
    return 0.5 * (r + r.T)


# -- sampling regions -------------------------------------------------------


@dataclass(frozen=True)
class SamplingRegion:
    """Axis-aligned box sampled on a tensor grid.

    Linear axes include both endpoints; angular axes default to [0, 2*pi)
    with the upper endpoint excluded.
    """

    bounds: tuple
    counts: tuple
    topology: tuple = None

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        counts = tuple(int(c) for c in self.counts)
        topo = self.topology
        if topo is None:
            topo = (Topology.LINEAR,) * len(bounds)
        topo = tuple(Topology(t) for t in topo)
        if not (len(bounds) == len(counts) == len(topo)) or not bounds:
            raise EmptyRegion("region bounds, counts and topology must have equal nonzero length")
        for (lo, hi), c in zip(bounds, counts):
            if c < 1 or not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
                raise EmptyRegion(f"invalid axis [{lo}, {hi}] with {c} samples")
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "topology", topo)

    @classmethod
    def box(cls, bounds, counts, topology=None) -> "SamplingRegion":
        return cls(tuple(bounds), tuple(counts), topology)

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def axes(self) -> list:
        out = []
        for (lo, hi), c, t in zip(self.bounds, self.counts, self.topology):
            periodic = t is Topology.ANGULAR and math.isclose(hi - lo, TWO_PI)
            if c == 1:
                out.append(np.array([0.5 * (lo + hi)]))
            else:
                out.append(np.linspace(lo, hi, c, endpoint=not periodic))
        return out

    def points(self) -> np.ndarray:
        grids = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([gr.reshape(-1) for gr in grids], axis=1)


# -- D-critical search --------------------------------------------------------


@dataclass(frozen=True)
class CriticalPoint:
    point: ChartPoint
    residual: float
    hessian_eigenvalues: np.ndarray
    is_declared_minimum: bool = False

    @property
    def signature(self) -> tuple:
        """Counts of (positive, negative, zero) restricted-Hessian eigenvalues."""
        ev = self.hessian_eigenvalues
        scale = max(1.0, float(np.max(np.abs(ev)))) if ev.size else 1.0
        tol = 1e-6 * scale
        return (int(np.sum(ev > tol)), int(np.sum(ev < -tol)), int(np.sum(np.abs(ev) <= tol)))

    @property
    def kind(self) -> str:
        pos, neg, zero = self.signature
        if zero:
            return "degenerate"
        if neg == 0:
            return "minimum"
        if pos == 0:
            return "maximum"
        return "saddle"


@dataclass
class CriticalSearch:
    """Sampled D-critical points plus bookkeeping on the seeds that failed."""

    points: list
    n_seeds: int
    n_dropped: int
    tol: float

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)


def seed_grid(region: SamplingRegion, per_axis: int = 16, cap: int = 4096) -> np.ndarray:
    per = per_axis
    while per > 1 and per ** region.dim > cap:
        per -= 1
    return SamplingRegion(region.bounds, (per,) * region.dim, region.topology).points()


def _jacobian(f, x: np.ndarray, h: float) -> np.ndarray:
    n = x.size
    r0 = f(x)
    jac = np.empty((r0.size, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        jac[:, j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return jac


def find_d_critical(
    morse: MorseSpec,
    metric: MetricField,
    dist: DistributionField,
    region: SamplingRegion,
    tol: float = 1e-8,
    *,
    seeds_per_axis: int = 16,
    max_seeds: int = 4096,
    max_iter: int = 100,
    dedup_radius: float = 1e-4,
    h: float = FD_STEP,
) -> CriticalSearch:
    """Multi-start damped Newton search for zeros of ``P_{D*} dV``.

    Each seed takes minimum-norm Newton steps (least squares on a finite
    difference Jacobian); a step is halved while it increases the residual.
    Seeds that stall, or converge outside the region, are dropped.
    Converged points are deduplicated within ``dedup_radius`` in chart
    distance (angles compared modulo 2*pi) and annotated with the spectrum of
    the restricted Hessian.
    """
    mask = angular_mask(region.topology)

    def resid(x):
        # P_D* dV without the rank checks of projectors(); singular Gram -> inf
        b = dist(x)
        ib = metric(x) @ b
        try:
            return ib @ np.linalg.solve(b.T @ ib, b.T @ morse.differential(x))
        except np.linalg.LinAlgError:
            return np.full(x.size, np.inf)

    lo = np.array([b[0] for b in region.bounds])
    hi = np.array([b[1] for b in region.bounds])
    slack = 1e-9 * np.maximum(1.0, np.abs(hi - lo))

    def inside(x):
        # angular axes spanning a full turn cover the whole circle
        full = mask & np.isclose(hi - lo, TWO_PI)
        ok = (x >= lo - slack) & (x <= hi + slack)
        return bool(np.all(ok | full))

    seeds = seed_grid(region, seeds_per_axis, max_seeds)
    found = []
    dropped = 0
    for seed in seeds:
        x = np.array(seed, dtype=float)
        r = resid(x)
        rn = float(np.linalg.norm(r))
        ok = rn <= tol
        it = 0
        while not ok and it < max_iter:
            it += 1
            jac = _jacobian(resid, x, h)
            step = np.linalg.lstsq(jac, -r, rcond=None)[0]
            lam = 1.0
            accepted = False
            for _ in range(MAX_HALVINGS):
                xn = x + lam * step
                rn_new = resid(xn)
                nn = float(np.linalg.norm(rn_new))
                if np.isfinite(nn) and nn < rn:
                    accepted = True
                    break
                lam *= 0.5
            # a heavily damped step that barely helps means the seed sits in a
            # basin of a nonzero residual minimum
            if not accepted or (lam < 1e-3 and nn > 0.9 * rn):
                break
            x, r, rn = xn, rn_new, nn
            ok = rn <= tol
        if ok:
            x = wrap_coords(x, mask)
        if not ok or not inside(x):
            dropped += 1
            continue
        if any(np.linalg.norm(chart_difference(x, y, mask)) <= dedup_radius for y, _ in found):
            continue
        found.append((x, rn))

    topo = region.topology
    m0 = morse.minimum.coords
    points = []
    for x, rn in found:
        ev = np.linalg.eigvalsh(d_hessian(morse, metric, dist, x))
        is_min = bool(np.linalg.norm(chart_difference(x, m0, mask)) <= dedup_radius)
        points.append(CriticalPoint(ChartPoint(x, topo), rn, ev, is_min))
    return CriticalSearch(points, len(seeds), dropped, tol)


# -- lambda / mu ---------------------------------------------------------------


@dataclass(frozen=True)
class LambdaMu:
    lam: float
    mu: float
    sample_count: int


def estimate_lambda_mu(
    morse: MorseSpec,
    metric: MetricField,
    dist: DistributionField,
    region: SamplingRegion,
    exclude_radius: float = 1e-6,
    samples: Optional[np.ndarray] = None,
) -> LambdaMu:
    """Sampled suprema of the two constants entering gain certification.

    ``lambda = max |P_D grad V|_I^2 / (2 V)`` and ``mu`` is the largest
    generalised eigenvalue of ``(sym(B^T H B), B^T I B)`` over the samples.
    Points within ``exclude_radius`` of the declared minimum are skipped, as
    are points where ``V`` vanishes.
    """
    pts = region.points() if samples is None else np.atleast_2d(samples)
    mask = angular_mask(region.topology)
    m0 = morse.minimum.coords
    lam = 0.0
    mu = 0.0
    count = 0
    for x in pts:
        if np.linalg.norm(chart_difference(x, m0, mask)) <= exclude_radius:
            continue
        v = morse.value(x)
        if not v > 0.0:
            continue
        b = dist(x)
        gm = gram(metric(x), b)
        bdv = b.T @ morse.differential(x)
        lam = max(lam, float(bdv @ np.linalg.solve(gm, bdv)) / (2.0 * v))
        hr = b.T @ morse.hessian(x) @ b
        top = scipy.linalg.eigh(0.5 * (hr + hr.T), gm, eigvals_only=True)[-1]
        mu = max(mu, float(top))
        count += 1
    if count == 0:
        raise EmptyRegion("no admissible samples after excluding the minimum")
    return LambdaMu(lam, mu, count)
