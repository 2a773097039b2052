"""``geo-pid`` command line: sim, gains, critical and sweep."""

from __future__ import annotations

import argparse
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, SystemConfig, build_model, builtin_config, load_config
from .controller import KD_POSITIVE, KI_POSITIVE, KI_UPPER, KP_LOWER, Gains, best_kappa
from .errors import GeoPidError, ParameterError
from .expr import ExprError
from .morse import find_d_critical
from .runner import (
    certify,
    fmt,
    resolve_constants,
    simulate,
    summarize,
    sweep_csv,
    sweep_row,
    trajectory_csv,
    trajectory_svg,
)
from .systems import BUILTINS

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("system", nargs="?", help=f"built-in system: {', '.join(BUILTINS)}")
    p.add_argument("--config", type=Path, help="configuration file")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="built-in parameter")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", type=float)
    p.add_argument("--kp", type=float)
    p.add_argument("--kd", type=float)
    p.add_argument("--ki", type=float)
    p.add_argument("--kappa", type=float)
    p.add_argument("--svg", action="store_true", help="also write an SVG plot")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geo-pid", description="Geometric PID control on constrained Lie groups.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="simulate the closed loop and write CSV and summary")
    _common(p)

    p = sub.add_parser("gains", help="certify gains against the convergence theorem")
    _common(p)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--grid", action="store_true", help="sweep kappa over (0, 2/mu) in 50 steps")

    p = sub.add_parser("critical", help="list sampled D-critical points")
    _common(p)
    p.add_argument("--seeds", type=int, default=8, help="Newton seeds per axis")
    p.add_argument("--tol", type=float, default=1e-10)

    p = sub.add_parser("sweep", help="grid of closed-loop runs over gains")
    _common(p)
    for g in ("kp", "kd", "ki"):
        p.add_argument(f"--{g}-range", metavar="LO:HI:N", help=f"linearly spaced {g} values")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--jobs", type=int, default=None)
    return parser


def _parse_value(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def load(args) -> SystemConfig:
    """Configuration from ``--config`` or a built-in name, with command-line overrides."""
    if (args.config is None) == (args.system is None):
        raise ParameterError("give exactly one of a built-in system name or --config PATH")
    if args.config is not None:
        if args.param:
            raise ParameterError("--param only applies to built-in systems")
        cfg = load_config(args.config)
    else:
        params = {}
        for item in args.param:
            key, sep, value = item.partition("=")
            if not sep:
                raise ParameterError(f"--param expects KEY=VALUE, got {item!r}")
            params[key.strip()] = _parse_value(value.strip())
        cfg = builtin_config(args.system, **params)
    changes = {
        k: v
        for k, v in (
            ("dt", args.dt),
            ("t_end", args.t_end),
            ("kp", args.kp),
            ("kd", args.kd),
            ("ki", args.ki),
            ("kappa", args.kappa),
        )
        if v is not None
    }
    if ("dt" in changes and not changes["dt"] > 0) or ("t_end" in changes and not changes["t_end"] > 0):
        raise ParameterError("--dt and --t-end must be positive")
    return cfg.replace(**changes)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


# -- commands --------------------------------------------------------------------------


def cmd_sim(args, out) -> int:
    cfg = load(args)
    model = build_model(cfg)
    traj = simulate(cfg, model)
    consts = resolve_constants(model)
    summary = summarize(model, cfg, traj, consts)
    outdir = args.out or Path(".")
    stem = cfg.name
    _write(outdir / f"{stem}.csv", trajectory_csv(traj))
    _write(outdir / f"{stem}_summary.txt", summary.text())
    written = [outdir / f"{stem}.csv", outdir / f"{stem}_summary.txt"]
    if args.svg:
        _write(outdir / f"{stem}.svg", trajectory_svg(traj, f"{cfg.name}: states and velocities"))
        written.append(outdir / f"{stem}.svg")
    out.write(summary.text())
    for p in written:
        out.write(f"wrote = {p}\n")
    return EXIT_OK


INEQUALITIES = (KD_POSITIVE, KI_POSITIVE, KI_UPPER, KP_LOWER)


def _certificate_table(cert) -> str:
    bounds = {
        KD_POSITIVE: (0.0, cert.gains.kd),
        KI_POSITIVE: (0.0, cert.gains.ki),
        KI_UPPER: (cert.ki_bound, cert.gains.ki),
        KP_LOWER: (cert.kp_bound, cert.gains.kp),
    }
    rows = [f"{'inequality':<64} {'bound':>24} {'value':>24} {'margin':>24}  ok"]
    for key in INEQUALITIES:
        bound, value = bounds[key]
        m = cert.margins[key]
        rows.append(f"{key:<64} {fmt(bound):>24} {fmt(value):>24} {fmt(m):>24}  {'yes' if m > 0 else 'NO'}")
    return "\n".join(rows) + "\n"


def cmd_gains(args, out) -> int:
    cfg = load(args)
    model = build_model(cfg)
    for name in ("lam", "mu"):
        v = getattr(args, name)
        if v is not None and not v > 0:
            raise ParameterError(f"{'lambda' if name == 'lam' else name} must be positive, got {v}")
    consts = resolve_constants(model, args.lam, args.mu)
    gains = cfg.gains
    lines = [
        f"system = {cfg.name}",
        f"gains = kp {fmt(gains.kp)}, kd {fmt(gains.kd)}, ki {fmt(gains.ki)}",
        f"lambda = {fmt(consts.lam)}",
        f"mu = {fmt(consts.mu)}",
        f"lambda_mu_source = {consts.source}",
    ]
    if consts.estimate is not None:
        lines += [f"lambda_estimate = {fmt(consts.estimate.lam)}", f"mu_estimate = {fmt(consts.estimate.mu)}"]
    if args.grid:
        cert, certs = best_kappa(gains, consts.lam, consts.mu, steps=50)
        lines.append(f"kappa_grid = {fmt(certs[0].kappa)} .. {fmt(certs[-1].kappa)} ({len(certs)} values)")
        lines.append(f"best_kappa = {fmt(cert.kappa)}")
    else:
        cert = certify(gains, consts, cfg.kappa)
        lines.append(f"kappa = {fmt(cert.kappa)}")
    lines.append(f"delta = {fmt(cert.delta)}")
    text = "\n".join(lines) + "\n" + _certificate_table(cert) + f"verdict = {cert.verdict}\n"
    if cert.violated:
        text += f"violated = {'; '.join(cert.violated)}\n"
    out.write(text)
    if args.out is not None:
        _write(args.out / f"{cfg.name}_gains.txt", text)
    return EXIT_OK


def cmd_critical(args, out) -> int:
    cfg = load(args)
    model = build_model(cfg)
    search = find_d_critical(
        model.morse, model.system.metric, model.system.dist, model.region, tol=args.tol, seeds_per_axis=args.seeds
    )
    lines = [
        f"system = {cfg.name}",
        f"seeds = {search.n_seeds}",
        f"dropped = {search.n_dropped}",
        f"points = {len(search)}",
        ",".join([*model.system.variables, "residual", "kind", "signature", "hessian_eigenvalues", "tag"]),
    ]
    for cp in search:
        pos, neg, zero = cp.signature
        lines.append(
            ",".join(
                [
                    *(fmt(x) for x in cp.point.coords),
                    fmt(cp.residual),
                    cp.kind,
                    f"+{pos}/-{neg}/0{zero}",
                    " ".join(fmt(e) for e in cp.hessian_eigenvalues),
                    "declared-minimum" if cp.is_declared_minimum else "",
                ]
            )
        )
    text = "\n".join(lines) + "\n"
    out.write(text)
    if args.out is not None:
        _write(args.out / f"{cfg.name}_critical.csv", text)
    return EXIT_OK


def _range(text: str, default: float) -> list:
    if text is None:
        return [default]
    parts = text.split(":")
    if len(parts) != 3:
        raise ParameterError(f"range {text!r} is not of the form LO:HI:N")
    lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    if n < 1:
        raise ParameterError("range needs at least one value")
    return [float(v) for v in np.linspace(lo, hi, n)]


def cmd_sweep(args, out) -> int:
    cfg = load(args)
    model = build_model(cfg)
    for name in ("lam", "mu"):
        v = getattr(args, name)
        if v is not None and not v > 0:
            raise ParameterError(f"{'lambda' if name == 'lam' else name} must be positive, got {v}")
    consts = resolve_constants(model, args.lam, args.mu)
    grid = [
        Gains(kp, kd, ki)
        for kp, kd, ki in itertools.product(
            _range(args.kp_range, cfg.kp), _range(args.kd_range, cfg.kd), _range(args.ki_range, cfg.ki)
        )
    ]
    n = len(grid)
    jobs = args.jobs or min(n, os.cpu_count() or 1)
    if jobs <= 1:
        rows = [sweep_row(cfg, g, consts.lam, consts.mu) for g in grid]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            # map yields in submission order regardless of completion order
            rows = list(pool.map(sweep_row, [cfg] * n, grid, [consts.lam] * n, [consts.mu] * n))
    text = sweep_csv(cfg, rows)
    if args.out is not None:
        path = args.out / f"{cfg.name}_sweep.csv"
        _write(path, text)
        out.write(f"wrote = {path}\n")
    else:
        out.write(text)
    return EXIT_OK


COMMANDS = {"sim": cmd_sim, "gains": cmd_gains, "critical": cmd_critical, "sweep": cmd_sweep}


def main(argv=None) -> int:
    """Entry point; returns 0 on success, 2 for usage errors and 1 for run failures."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args, sys.stdout)
    except (ParameterError, ConfigError, ExprError) as exc:
        print(f"geo-pid: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GeoPidError as exc:
        print(f"geo-pid: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"geo-pid: error: {exc.strerror or exc}: {exc.filename}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
