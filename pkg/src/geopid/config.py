"""Sectioned key/value configuration for systems and runs.

Example::

    [system]
    name = unicycle
    variables = x, y, theta
    topology = linear, linear, angular
    metric = 1, 0, 0; 0, 1, 0; 0, 0, 1
    basis = 0, cos(theta); 0, sin(theta); 1, 0

    [morse]
    V = 0.5*(x^2 + y^2) + 1 - cos(theta)
    minimum = 0, 0, 0

    [gains]
    kp = 20
    kd = 2
    ki = 0.5

    [sim]
    initial = 1, -0.1, 0.6

    [region]
    bounds = -2:2, -2:2, 0:2*pi

Matrix rows are separated by ``;`` and entries by ``,``.  Scalars accept
constant expressions such as ``2*pi``.  ``builtin = NAME`` in ``[system]``
selects a built-in system; its remaining ``[system]`` keys are builder
parameters and the system's own expressions may not be overridden.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constraint import DistributionField
from .controller import Gains
from .dynamics import MechanicalSystem
from .errors import DegenerateMetric, GeoPidError, StructuralError
from .expr import ExprError, compile_expr, compile_matrix, evaluate
from .geometry import MetricField, Topology
from .morse import MorseSpec, SamplingRegion
from .systems import BUILTIN_PARAMS, Model, builtin


class ConfigError(GeoPidError, ValueError):
    """Problem in a configuration file, located by line and key."""

    def __init__(self, message, line=None, key=None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.key = key

    def __str__(self):
        parts = []
        if self.line is not None:
            parts.append(f"line {self.line}")
        if self.key is not None:
            parts.append(f"key {self.key!r}")
        loc = ", ".join(parts)
        return f"{loc}: {self.message}" if loc else self.message


class ConfigSyntaxError(ConfigError):
    pass


class DimensionMismatch(ConfigError, StructuralError):
    pass


SECTIONS = {
    "system": ("name", "builtin", "variables", "topology", "metric", "basis"),
    "morse": ("V", "minimum", "lambda", "mu"),
    "gains": ("kp", "kd", "ki", "kappa"),
    "sim": ("initial", "u0", "w0", "dt", "t_end"),
    "region": ("bounds", "samples"),
}
# keys a built-in fixes itself
BUILTIN_FIXED = ("variables", "topology", "metric", "basis", "V", "minimum")


@dataclass(frozen=True)
class SystemConfig:
    """Everything needed to build a system and run it."""

    name: str
    variables: tuple
    topology: tuple
    metric: tuple
    basis: tuple
    V: str
    minimum: tuple
    kp: float
    kd: float
    ki: float
    initial: tuple
    bounds: tuple
    samples: tuple
    u0: tuple = None
    w0: tuple = None
    kappa: float = 1.0
    dt: float = 1e-3
    t_end: float = 30.0
    lam: Optional[float] = None
    mu: Optional[float] = None
    builtin: Optional[str] = None
    params: tuple = ()

    def __post_init__(self):
        k = len(self.basis[0]) if self.basis else 0
        if self.u0 is None:
            object.__setattr__(self, "u0", (0.0,) * k)
        if self.w0 is None:
            object.__setattr__(self, "w0", (0.0,) * k)

    @property
    def dimension(self) -> int:
        return len(self.variables)

    @property
    def rank(self) -> int:
        return len(self.basis[0])

    @property
    def gains(self) -> Gains:
        return Gains(self.kp, self.kd, self.ki)

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


# -- building -----------------------------------------------------------------------


def config_from_model(model: Model, name: str, params: dict = None) -> SystemConfig:
    sys = model.system
    ex = model.expressions
    region = model.region
    return SystemConfig(
        name=name,
        variables=tuple(sys.variables),
        topology=tuple(t.value for t in sys.topology),
        metric=tuple(tuple(r) for r in ex["metric"]),
        basis=tuple(tuple(r) for r in ex["basis"]),
        V=ex["V"],
        minimum=tuple(float(x) for x in model.morse.minimum.coords),
        kp=model.gains.kp,
        kd=model.gains.kd,
        ki=model.gains.ki,
        initial=tuple(float(x) for x in model.initial),
        bounds=region.bounds,
        samples=region.counts,
        u0=tuple(model.u0),
        w0=tuple(model.w0),
        kappa=model.kappa,
        dt=model.dt,
        t_end=model.t_end,
        lam=model.lam,
        mu=model.mu,
        builtin=name,
        params=tuple(sorted((params or {}).items())),
    )


def builtin_config(name: str, **params) -> SystemConfig:
    """Configuration of a built-in system with its defaults."""
    return config_from_model(builtin(name, **params), name, params)


def _expression_model(cfg: SystemConfig) -> tuple:
    names = cfg.variables
    mfun, mconst = compile_matrix(cfg.metric, names)
    if mconst:
        metric = MetricField.from_matrix(mfun(np.zeros(len(names))))
    else:
        metric = MetricField(mfun)
    bfun, bconst = compile_matrix(cfg.basis, names)
    if bconst:
        dist = DistributionField.from_matrix(bfun(np.zeros(len(names))))
    else:
        dist = DistributionField(bfun, cfg.rank)
    system = MechanicalSystem(metric, dist, cfg.topology, cfg.name, names)
    morse = MorseSpec(compile_expr(cfg.V, names), cfg.minimum)
    return system, morse


def build_model(cfg: SystemConfig, analytic: bool = True) -> Model:
    """Turn a configuration into a :class:`Model`.

    Built-ins use their analytic derivatives unless ``analytic`` is false, in
    which case the expression description is compiled like any custom system.
    """
    if cfg.builtin is not None and analytic:
        base = builtin(cfg.builtin, **dict(cfg.params))
        system, morse = base.system, base.morse
    else:
        system, morse = _expression_model(cfg)
    region = SamplingRegion(cfg.bounds, cfg.samples, system.topology)
    return Model(
        system,
        morse,
        cfg.gains,
        cfg.initial,
        region,
        u0=cfg.u0,
        w0=cfg.w0,
        kappa=cfg.kappa,
        dt=cfg.dt,
        t_end=cfg.t_end,
        lam=cfg.lam,
        mu=cfg.mu,
        expressions={"metric": cfg.metric, "basis": cfg.basis, "V": cfg.V},
    )


# -- parsing ------------------------------------------------------------------------


def _scalar(text: str, line: int, key: str) -> float:
    try:
        value = evaluate(text)
    except ExprError as exc:
        exc.line, exc.key = line, key
        raise
    except (ArithmeticError, ValueError) as exc:
        raise ConfigError(f"cannot evaluate {text!r}: {exc}", line, key) from exc
    if not math.isfinite(value):
        raise ConfigError(f"value {text!r} is not finite", line, key)
    return value


def _vector(text: str, line: int, key: str) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if any(not p for p in parts):
        raise ConfigSyntaxError(f"empty entry in list {text!r}", line, key)
    return tuple(_scalar(p, line, key) for p in parts)


def _words(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(","))


def _matrix(text: str, line: int, key: str) -> tuple:
    rows = tuple(tuple(e.strip() for e in row.split(",")) for row in text.split(";"))
    if any(not e for row in rows for e in row):
        raise ConfigSyntaxError("empty matrix entry", line, key)
    if len({len(r) for r in rows}) != 1:
        raise DimensionMismatch("matrix rows have different lengths", line, key)
    return rows


def _bounds(text: str, line: int, key: str) -> tuple:
    out = []
    for part in text.split(","):
        if part.count(":") != 1:
            raise ConfigSyntaxError(f"bound {part.strip()!r} is not of the form lo:hi", line, key)
        lo, hi = part.split(":")
        out.append((_scalar(lo.strip(), line, key), _scalar(hi.strip(), line, key)))
    return tuple(out)


def _read_sections(text: str) -> dict:
    """``{section: {key: (value, line)}}`` with syntax checks only."""
    sections = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigSyntaxError(f"malformed section header {stripped!r}", lineno)
            current = stripped[1:-1].strip()
            if current not in SECTIONS:
                raise ConfigSyntaxError(f"unknown section [{current}]", lineno)
            if current in sections:
                raise ConfigSyntaxError(f"section [{current}] appears twice", lineno)
            sections[current] = {}
            continue
        if "=" not in stripped:
            raise ConfigSyntaxError(f"expected 'key = value', got {stripped!r}", lineno)
        if current is None:
            raise ConfigSyntaxError("key outside of any section", lineno)
        key, value = (s.strip() for s in stripped.split("=", 1))
        if not key:
            raise ConfigSyntaxError("missing key before '='", lineno)
        if key in sections[current]:
            raise ConfigSyntaxError(f"key given twice in [{current}]", lineno, key)
        if not value:
            raise ConfigSyntaxError("missing value", lineno, key)
        sections[current][key] = (value, lineno)
    return sections


def parse_config(text: str) -> SystemConfig:
    """Parse and validate configuration text.

    Raises
    ------
    ConfigSyntaxError
        Malformed lines, sections or keys.
    ExprSyntaxError, UnknownFunction, UnknownName
        Problems inside expressions, located by line and key.
    DimensionMismatch
        Vectors or matrices whose sizes disagree with the variables.
    DegenerateConstraint, DegenerateMetric
        The system fails its invariants at the initial state.
    """
    sections = _read_sections(text)
    system = sections.get("system", {})

    def get(section, key):
        return sections.get(section, {}).get(key)

    name_entry = system.get("builtin")
    params = {}
    if name_entry is not None:
        bname, bline = name_entry
        if bname not in BUILTIN_PARAMS:
            raise ConfigError(f"unknown built-in system {bname!r}", bline, "builtin")
        allowed = BUILTIN_PARAMS[bname]
        for key, (value, line) in system.items():
            if key in ("builtin", "name"):
                continue
            if key in BUILTIN_FIXED:
                raise ConfigError(f"built-in {bname!r} defines its own {key}", line, key)
            if key not in allowed:
                raise ConfigError(f"built-in {bname!r} has no parameter {key!r}", line, key)
            params[key] = allowed[key](_scalar(value, line, key))
        for key in ("V", "minimum"):
            if get("morse", key) is not None:
                raise ConfigError(f"built-in {bname!r} defines its own {key}", get("morse", key)[1], key)
        try:
            base = builtin_config(bname, **params)
        except GeoPidError as exc:
            raise ConfigError(str(exc), bline, "builtin") from exc
        if "name" in system:
            base = base.replace(name=system["name"][0])
        fields = {}
    else:
        for key, (_, line) in system.items():
            if key not in SECTIONS["system"]:
                raise ConfigError("unknown key in [system]", line, key)
        base = None
        fields = _parse_custom_system(sections)

    for section, entries in sections.items():
        if section == "system":
            continue
        for key, (_, line) in entries.items():
            if key not in SECTIONS[section]:
                raise ConfigError(f"unknown key in [{section}]", line, key)

    overrides = {}
    scalars = {
        ("morse", "lambda"): "lam",
        ("morse", "mu"): "mu",
        ("gains", "kp"): "kp",
        ("gains", "kd"): "kd",
        ("gains", "ki"): "ki",
        ("gains", "kappa"): "kappa",
        ("sim", "dt"): "dt",
        ("sim", "t_end"): "t_end",
    }
    for (section, key), attr in scalars.items():
        entry = get(section, key)
        if entry is not None:
            overrides[attr] = _scalar(entry[0], entry[1], key)
    for key in ("initial", "u0", "w0"):
        entry = get("sim", key)
        if entry is not None:
            overrides[key] = _vector(entry[0], entry[1], key)
    entry = get("region", "bounds")
    if entry is not None:
        overrides["bounds"] = _bounds(entry[0], entry[1], "bounds")
    entry = get("region", "samples")
    if entry is not None:
        vals = _vector(entry[0], entry[1], "samples")
        if any(v != int(v) or v < 1 for v in vals):
            raise ConfigError("samples must be positive integers", entry[1], "samples")
        overrides["samples"] = tuple(int(v) for v in vals)

    if base is None:
        n = len(fields["variables"])
        missing = [k for k in ("kp", "kd", "ki", "initial", "bounds") if k not in overrides]
        if missing:
            raise ConfigError(f"missing required keys: {', '.join(missing)}")
        if "samples" not in overrides:
            overrides["samples"] = (max(2, int(4096 ** (1.0 / n))),) * n
        cfg = SystemConfig(**fields, **overrides)
    else:
        cfg = base.replace(**overrides)
    _check(cfg, sections)
    return cfg


def _parse_custom_system(sections: dict) -> dict:
    system = sections.get("system", {})
    morse = sections.get("morse", {})
    for key in ("variables", "metric", "basis"):
        if key not in system:
            raise ConfigError("missing required key in [system]", None, key)
    for key in ("V", "minimum"):
        if key not in morse:
            raise ConfigError("missing required key in [morse]", None, key)
    variables = _words(system["variables"][0])
    vline = system["variables"][1]
    for v in variables:
        if not v.isidentifier() or v in ("pi", "e", "sin", "cos", "sqrt"):
            raise ConfigError(f"invalid variable name {v!r}", vline, "variables")
    if len(set(variables)) != len(variables):
        raise ConfigError("duplicate variable names", vline, "variables")
    n = len(variables)
    if "topology" in system:
        topo, tline = system["topology"]
        words = _words(topo)
        try:
            topology = tuple(Topology(w).value for w in words)
        except ValueError:
            raise ConfigError("topology entries must be 'linear' or 'angular'", tline, "topology") from None
        if len(topology) != n:
            raise DimensionMismatch(f"{len(topology)} topology flags for {n} variables", tline, "topology")
    else:
        topology = (Topology.LINEAR.value,) * n
    metric = _matrix(*system["metric"], "metric")
    basis = _matrix(*system["basis"], "basis")
    name = system["name"][0] if "name" in system else "custom"
    return dict(
        name=name,
        variables=variables,
        topology=topology,
        metric=metric,
        basis=basis,
        V=morse["V"][0],
        minimum=_vector(*morse["minimum"], "minimum"),
    )


def _line(sections, key):
    for entries in sections.values():
        if key in entries:
            return entries[key][1]
    return None


def _check(cfg: SystemConfig, sections: dict):
    """Dimension and invariant checks on a parsed configuration."""
    n, k = cfg.dimension, cfg.rank
    at = lambda key: _line(sections, key)  # noqa: E731
    if len(cfg.metric) != n or len(cfg.metric[0]) != n:
        raise DimensionMismatch(f"metric must be {n} x {n}", at("metric"), "metric")
    if len(cfg.basis) != n:
        raise DimensionMismatch(f"basis must have {n} rows", at("basis"), "basis")
    if not 1 <= k <= n:
        raise DimensionMismatch(f"basis rank {k} outside 1..{n}", at("basis"), "basis")
    for key, size in (("minimum", n), ("initial", n), ("u0", k), ("w0", k), ("bounds", n), ("samples", n)):
        value = getattr(cfg, key)
        if len(value) != size:
            raise DimensionMismatch(f"expected {size} entries, got {len(value)}", at(key), key)
    for key in ("metric", "basis", "V"):
        text = getattr(cfg, key)
        exprs = [text] if isinstance(text, str) else [e for row in text for e in row]
        for e in exprs:
            try:
                compile_expr(e, cfg.variables)
            except ExprError as exc:
                exc.line, exc.key = at(key), key
                raise
    if not cfg.dt > 0 or not cfg.t_end > 0:
        raise ConfigError("dt and t_end must be positive", at("dt") or at("t_end"), "dt")
    model = build_model(cfg, analytic=False)
    g0 = np.array(cfg.initial, dtype=float)
    m0 = model.system.metric(g0)
    if not np.allclose(m0, m0.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.abs(m0).max()))):
        raise DegenerateMetric(f"line {at('metric')}, key 'metric': metric is not symmetric at the initial state")
    try:
        model.system.validate_at(g0)
    except GeoPidError as exc:
        raise type(exc)(f"line {at('basis')}, key 'basis': {exc}") from exc
    try:
        SamplingRegion(cfg.bounds, cfg.samples, model.system.topology)
    except GeoPidError as exc:
        raise ConfigError(str(exc), at("bounds"), "bounds") from exc


# -- serialisation ------------------------------------------------------------------


def _num(x) -> str:
    return repr(float(x)) if not isinstance(x, int) else str(x)


def _nums(xs) -> str:
    return ", ".join(_num(x) for x in xs)


def serialize(cfg: SystemConfig) -> str:
    """Configuration text that parses back to an equal :class:`SystemConfig`."""
    out = ["[system]", f"name = {cfg.name}"]
    if cfg.builtin is not None:
        out.append(f"builtin = {cfg.builtin}")
        out += [f"{k} = {_num(v)}" for k, v in cfg.params]
    else:
        out.append(f"variables = {', '.join(cfg.variables)}")
        out.append(f"topology = {', '.join(cfg.topology)}")
        out.append("metric = " + "; ".join(", ".join(r) for r in cfg.metric))
        out.append("basis = " + "; ".join(", ".join(r) for r in cfg.basis))
    out += ["", "[morse]"]
    if cfg.builtin is None:
        out += [f"V = {cfg.V}", f"minimum = {_nums(cfg.minimum)}"]
    if cfg.lam is not None:
        out.append(f"lambda = {_num(cfg.lam)}")
    if cfg.mu is not None:
        out.append(f"mu = {_num(cfg.mu)}")
    out += [
        "",
        "[gains]",
        f"kp = {_num(cfg.kp)}",
        f"kd = {_num(cfg.kd)}",
        f"ki = {_num(cfg.ki)}",
        f"kappa = {_num(cfg.kappa)}",
        "",
        "[sim]",
        f"initial = {_nums(cfg.initial)}",
        f"u0 = {_nums(cfg.u0)}",
        f"w0 = {_nums(cfg.w0)}",
        f"dt = {_num(cfg.dt)}",
        f"t_end = {_num(cfg.t_end)}",
        "",
        "[region]",
        "bounds = " + ", ".join(f"{_num(lo)}:{_num(hi)}" for lo, hi in cfg.bounds),
        "samples = " + ", ".join(str(c) for c in cfg.samples),
    ]
    return "\n".join(out) + "\n"


def load_config(path) -> SystemConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
