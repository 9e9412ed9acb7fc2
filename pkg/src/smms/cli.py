"""Command-line front end: ``smms {model,energy,verify,qe-solve,sweep}``.

Every command writes machine-readable files (JSON with 17-digit floats, CSV
with a header row) into ``--out`` (default: ``$SMMS_OUTPUT_DIR`` or the
current directory) and prints a short human summary derived from them.

Exit codes: 0 success, 1 numerical failure or non-convergence, 2 bad
configuration.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import checks
from . import variational as var
from .grid import DEFAULT_N, MIN_N, RadialGrid
from .report_io import atomic_write, csv_text, dumps, output_dir
from .warped_smms import (
    FAMILIES,
    QeSolveError,
    build_model,
    curvature_profile,
    format_dim,
    hyperbolic_scale_potential,
    kim_kim_mu,
    parse_dim,
    profile_table,
    qe_scale_residual,
    solve_qe_ode,
)

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("model", "energy", "verify", "qe-solve", "sweep")


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config

@dataclass(frozen=True)
class RunConfig:
    command: str
    family: str = "sphere"
    n: int = 4
    m: float = 2.0
    params: dict = field(default_factory=dict)
    npts: int = DEFAULT_N
    tol: float = var.DEFAULT_TOL
    max_iter: int = var.DEFAULT_MAX_ITER
    mu: float | None = None
    optimize_tau: bool = False
    seed: int = 0
    trials: int = 100
    samples: int = checks.DEFAULT_SAMPLES
    perturb: float = 0.0
    jobs: int = 1
    out: str | None = None
    figures: bool = False
    # qe-solve
    hess_f0: float | None = None
    r_max: float = 3.0
    closed: bool = False
    hyperbolic_gaussian: bool = False
    refine: bool = False
    # sweep
    sweep_param: str = "m"
    values: tuple = ()

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.npts < MIN_N:
            raise ConfigError(f"N must be >= {MIN_N}")
        if int(self.n) != self.n or self.n < 3:
            raise ConfigError("n must be an integer >= 3")
        m = parse_dim(self.m)
        if not (math.isinf(m) or m >= 0):
            raise ConfigError("m must be >= 0 or 'inf'")
        object.__setattr__(self, "m", m)
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.max_iter < 0 or self.trials < 1 or self.samples < 1:
            raise ConfigError("max-iter must be >= 0; trials and samples >= 1")

    def model(self, **overrides):
        cfg = replace(self, **overrides) if overrides else self
        try:
            return build_model(cfg.family, int(cfg.n), cfg.m, cfg.params)
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err)) from err

    def outdir(self) -> Path:
        return Path(self.out) if self.out else output_dir()


_CONFIG_KEYS = {
    "family": "family", "n": "n", "m": "m", "params": "params", "N": "npts", "tol": "tol",
    "max_iter": "max_iter", "mu": "mu", "optimize_tau": "optimize_tau", "seed": "seed",
    "trials": "trials", "samples": "samples", "perturb": "perturb", "jobs": "jobs", "out": "out",
    "figures": "figures", "hess_f0": "hess_f0", "r_max": "r_max", "closed": "closed",
    "hyperbolic_gaussian": "hyperbolic_gaussian", "refine": "refine", "sweep_param": "sweep_param",
    "values": "values",
}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_config(args: argparse.Namespace) -> RunConfig:
    """Merge the JSON config file (if any) with command-line flags; flags win."""
    merged: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
        unknown = set(raw) - set(_CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update({_CONFIG_KEYS[k]: v for k, v in raw.items()})
    for key in set(_CONFIG_KEYS.values()):
        value = getattr(args, key, None)
        if value is not None and value is not False:
            merged[key] = value
    if args.param:
        params = dict(merged.get("params") or {})
        for item in args.param:
            if "=" not in item:
                raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
            key, text = item.split("=", 1)
            params[key] = _parse_value(text)
        merged["params"] = params
    if isinstance(merged.get("values"), str):
        merged["values"] = tuple(v for v in merged["values"].split(",") if v)
    if "values" in merged:
        merged["values"] = tuple(merged["values"])
    try:
        return RunConfig(command=args.command, **merged)
    except TypeError as err:
        raise ConfigError(str(err)) from err


# ----------------------------------------------------------------- helpers

def _write(cfg: RunConfig, name: str, text: str) -> Path:
    return atomic_write(cfg.outdir() / name, text)


def _figure(cfg: RunConfig, name: str, x, series: dict, xlabel: str = "r") -> Path | None:
    if not cfg.figures:
        return None
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for label, y in series.items():
        ax.plot(x, y, label=label)
    ax.set_xlabel(xlabel)
    ax.legend()
    fig.tight_layout()
    path = cfg.outdir() / name
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _finite_range(values) -> list:
    arr = np.asarray(values, dtype=float)
    arr = arr[np.isfinite(arr)]
    return [float(arr.min()), float(arr.max())] if arr.size else [None, None]


# ---------------------------------------------------------------- commands

def cmd_model(cfg: RunConfig) -> int:
    s = cfg.model()
    table = profile_table(s, cfg.npts)
    summary = {"model": s.describe(), "N": cfg.npts, "mu": s.mu, "lambda": s.qe_constant}
    if s.qe_constant is not None:
        prof = curvature_profile(s, s.grid(cfg.npts))
        lam = s.qe_constant
        with np.errstate(invalid="ignore"):
            res = np.maximum(np.abs(prof.Ricphi_rad - lam), np.abs(prof.Ricphi_sph - lam))
        table["qe_residual"] = np.where(prof.regular, res, np.nan)
        summary["qe_residual"] = float(np.nanmax(table["qe_residual"]))
        if s.m != 0:
            table["kim_kim_mu"] = kim_kim_mu(s, lam, s.grid(cfg.npts).r)
            summary["kim_kim_mu_range"] = _finite_range(table["kim_kim_mu"])
    _write(cfg, "profile.csv", csv_text(table))
    _write(cfg, "summary.json", dumps(summary))
    _figure(cfg, "profile.png", table["r"], {k: table[k] for k in ("K_rad", "K_sph", "R")})
    print(dumps(summary), end="")
    return EXIT_OK


def _energy_report(s, cfg: RunConfig) -> var.EnergyReport:
    if cfg.mu is not None and not cfg.optimize_tau:
        return var.minimize_mmu_energy(s, mu=cfg.mu, npts=cfg.npts, tol=cfg.tol, max_iter=cfg.max_iter)
    return var.minimize_m_energy(s, npts=cfg.npts, tol=cfg.tol, max_iter=cfg.max_iter)


def cmd_energy(cfg: RunConfig) -> int:
    s = cfg.model()
    if not s.finite:
        raise ConfigError("energy minimization needs finite m")
    if cfg.mu is not None and s.mu != cfg.mu:
        s = s.with_mu(cfg.mu)
    if cfg.mu is None and not cfg.optimize_tau and s.mu is not None:
        cfg = replace(cfg, optimize_tau=True)
    report = _energy_report(s, cfg)
    out = {"model": s.describe(), "N": cfg.npts,
           "mode": "m-energy" if cfg.optimize_tau or cfg.mu is None else "mmu-energy",
           **report.summary(), "constancy": report.constancy, "reason": report.reason}
    _write(cfg, "energy.json", dumps(out))
    _write(cfg, "minimizer.csv", csv_text(report.profile_columns()))
    _figure(cfg, "minimizer.png", report.r, {"w": report.w})
    print(dumps(out), end="")
    return EXIT_OK if report.converged else EXIT_NUMERICAL


def cmd_verify(cfg: RunConfig) -> int:
    suite = checks.SuiteConfig(seed=cfg.seed, trials=cfg.trials, samples=cfg.samples, npts=cfg.npts,
                               perturb=cfg.perturb, jobs=cfg.jobs)
    results = checks.run_suite(suite)
    _write(cfg, "verify.json", dumps([r.to_dict() for r in results]))
    table = checks.summary_table(results)
    _write(cfg, "verify.txt", table + "\n")
    print(table)
    return EXIT_NUMERICAL if checks.suite_failed(results) else EXIT_OK


def _solve(cfg: RunConfig, **solver):
    n, m = int(cfg.n), cfg.m
    if math.isinf(m) or not m > 1:
        raise ConfigError("qe-solve needs finite m > 1")
    mu, hess = cfg.mu, cfg.hess_f0
    if cfg.hyperbolic_gaussian:
        k2 = m + n - 1
        mu, hess = (m - 1) / k2, (m + n - 2) / k2
    if mu is None:
        raise ConfigError("qe-solve needs --mu (or --hyperbolic-gaussian)")
    if cfg.closed and not mu > 0:
        raise ConfigError(f"a closed solution needs mu > 0, got {mu:g}")
    if not cfg.closed and hess is None:
        raise ConfigError("an open solve needs --hess-f0")
    return solve_qe_ode(n, m, mu, hess, r_max=cfg.r_max, closed=cfg.closed, **solver)


REFINE_RTOLS = (1e-8, 1e-9, 1e-10, 1e-11)


def _tolerance_refinement(cfg: RunConfig) -> dict:
    """Scale-equation residual as the integrator tolerance is tightened decade by decade.

    The residual uses exact derivatives of the dense ODE output, so the
    integration error (not a grid) is what is being refined; successive
    reduction factors near 10 mean first order in the tolerance.
    """
    residuals = []
    for rtol in REFINE_RTOLS:
        sol = _solve(cfg, rtol=rtol, atol=10 * rtol, tol=math.inf)
        residuals.append(max(qe_scale_residual(sol.model, sol.u, sol.lam,
                                               RadialGrid(0.0, sol.r_end, cfg.npts))))
    factors = [a / b if b > 0 else math.inf for a, b in zip(residuals, residuals[1:])]
    return {"rtol": list(REFINE_RTOLS), "residuals": residuals, "reduction_per_decade": factors}


def cmd_qe_solve(cfg: RunConfig) -> int:
    sol = _solve(cfg)
    grid = RadialGrid(0.0, sol.r_end, cfg.npts)
    r = grid.r
    psi = sol.model.psi(r)
    f = sol.f(r)
    columns = {"r": r, "psi": psi, "f": f, "u": sol.u(r)}
    res = qe_scale_residual(sol.model, sol.u, sol.lam, grid)
    out = {"n": sol.model.n, "m": format_dim(sol.model.m), "mu": sol.mu, "hess_f0": sol.hess_f0,
           "lambda": sol.lam, "r_end": sol.r_end, "closed": sol.closed, "N": cfg.npts,
           "residual": {"tracefree": res[0], "lambda_equation": res[1], "mu_equation": res[2]}}
    if cfg.hyperbolic_gaussian:
        exact = hyperbolic_scale_potential(sol.model.n, sol.model.m, r)[0]
        k = math.sqrt(sol.model.m + sol.model.n - 1)
        columns["f_exact"] = exact
        out["hyperbolic_gaussian_error"] = {"f": float(np.max(np.abs(f - exact))),
                                            "psi": float(np.max(np.abs(psi - k * np.sinh(r / k))))}
    if cfg.refine:
        out["refinement"] = _tolerance_refinement(cfg)
    _write(cfg, "qe_solution.csv", csv_text(columns))
    _write(cfg, "qe_residual.json", dumps(out))
    _figure(cfg, "qe_solution.png", r, {"psi": psi, "f": f})
    print(dumps(out), end="")
    return EXIT_OK


def _sweep_point(args):
    cfg, value = args
    key = cfg.sweep_param
    if key == "m":
        point = replace(cfg, m=value)
    elif key == "n":
        point = replace(cfg, n=int(value))
    else:
        point = replace(cfg, params={**cfg.params, key: float(value)})
    s = point.model()
    if point.mu is not None:
        s = s.with_mu(point.mu)
    report = _energy_report(s, point)
    return {key: value, **report.summary()}


def cmd_sweep(cfg: RunConfig) -> int:
    if not cfg.values:
        raise ConfigError("sweep needs --values, e.g. --values 1,2,5")
    values = [parse_dim(v) if cfg.sweep_param == "m" else float(v) for v in cfg.values]
    for v in values:
        replace(cfg, **({"m": v} if cfg.sweep_param == "m" else {}))  # validates
    tasks = [(cfg, v) for v in values]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    keys = [cfg.sweep_param, "sigma", "lambda_mmu", "lambda_m", "lambda_bar", "tau_star", "el_residual",
            "iterations", "converged"]
    columns = {k: [np.nan if row[k] is None else float(row[k]) for row in rows] for k in keys}
    _write(cfg, "sweep.csv", csv_text(columns))
    _write(cfg, "sweep.json", dumps(rows))
    _figure(cfg, "sweep.png", columns[cfg.sweep_param],
            {k: columns[k] for k in ("lambda_m", "lambda_mmu") if np.any(np.isfinite(columns[k]))},
            xlabel=cfg.sweep_param)
    print(dumps(rows), end="")
    return EXIT_OK if all(row["converged"] for row in rows) else EXIT_NUMERICAL


HANDLERS = {"model": cmd_model, "energy": cmd_energy, "verify": cmd_verify, "qe-solve": cmd_qe_solve,
            "sweep": cmd_sweep}


# ------------------------------------------------------------------ parser

def _dim(text: str) -> float:
    try:
        return parse_dim(text)
    except ValueError as err:
        raise argparse.ArgumentTypeError(str(err)) from err


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="smms", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config; command-line flags take precedence")
    common.add_argument("--family", choices=FAMILIES)
    common.add_argument("--n", type=int)
    common.add_argument("--m", type=_dim, help="dimensional parameter, or 'inf'")
    common.add_argument("--param", action="append", metavar="KEY=VALUE", help="model family parameter")
    common.add_argument("--N", dest="npts", type=int, help=f"grid points (default {DEFAULT_N})")
    common.add_argument("--out", help="output directory")
    common.add_argument("--figures", action="store_true", help="also write PNG plots")
    common.add_argument("--jobs", type=int)
    energy = argparse.ArgumentParser(add_help=False)
    energy.add_argument("--mu", type=float, help="characteristic constant for the (m,mu)-energy")
    energy.add_argument("--optimize-tau", action="store_true", help="minimize the m-energy in (w, tau)")
    energy.add_argument("--max-iter", type=int)
    energy.add_argument("--tol", type=float)

    sub.add_parser("model", parents=[common], help="curvature profile and summary")
    sub.add_parser("energy", parents=[common, energy], help="minimize an energy")
    verify = sub.add_parser("verify", parents=[common], help="run the check suite")
    verify.add_argument("--seed", type=int)
    verify.add_argument("--trials", type=int)
    verify.add_argument("--samples", type=int)
    verify.add_argument("--perturb", type=float, help="also run negative controls of this size")
    qe = sub.add_parser("qe-solve", parents=[common], help="shoot a radial quasi-Einstein solution")
    qe.add_argument("--mu", type=float)
    qe.add_argument("--hess-f0", type=float)
    qe.add_argument("--r-max", type=float)
    qe.add_argument("--closed", action="store_true")
    qe.add_argument("--hyperbolic-gaussian", action="store_true",
                    help="use the constants of the hyperbolic Gaussian and compare with it")
    qe.add_argument("--refine", action="store_true", help="report the residual order under refinement")
    sweep = sub.add_parser("sweep", parents=[common, energy], help="energy over a parameter list")
    sweep.add_argument("--sweep-param", help="m, n or a family parameter (default m)")
    sweep.add_argument("--values", help="comma-separated values")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors exit 2, --help exits 0
        return int(exc.code or 0)
    try:
        cfg = build_config(args)
        return HANDLERS[cfg.command](cfg)
    except ConfigError as err:
        print(f"smms: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (QeSolveError, var.MinimizationError, var.NoInteriorMinimizer, FloatingPointError) as err:
        print(f"smms: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
