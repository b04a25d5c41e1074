"""Command-line front end: ``spiralflow <steady|evolve|annulus|verify|barriers>``.

Exit codes: 0 all selected checks pass, 2 a check failed, 3 configuration
or usage error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io
from .acceptance import (
    BY_NAME,
    PUBLISHED_LAMBDA,
    Context,
    annulus_sweep,
    barrier_report,
    run_suite,
)
from .errors import ConfigError, DomainError, NumericalError, SpiralFlowError, UsageError
from .evolution import (
    DiscreteReference,
    InitialData,
    cauchy_grid,
    run_cauchy,
)
from .evolution.checks import convergence_report, gradient_report
from .report import VerificationReport
from .steady import (
    ShootingConfig,
    bisect_lambda,
    build_profile,
    matched_trajectory,
    verify_profile,
)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3, 4
COMMANDS = ("steady", "evolve", "annulus", "verify", "barriers")

_SHOOTING_KEYS = tuple(f.name for f in dataclasses.fields(ShootingConfig))
DEFAULTS = {
    **{f.name: f.default for f in dataclasses.fields(ShootingConfig)},
    "r_max": 100.0,
    "r_max_ref": 100.0,
    "evolve_r_max": 50.0,
    "init": "bump:0.5,5,1",
    "t_end": 0.0,
    "r_obs": 20.0,
    "evolve_tol": 1e-6,
    "obs_dt": 1.0,
    "osc_tol": 1e-3,
    "R": "10,30,100",
    "samples": 1000,
    "seed": 7,
}


def parse_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected key = value")
        out[key.strip()] = val.strip()
    return out


def _coerce(key, value):
    if key not in DEFAULTS:
        raise ConfigError(f"unknown config key {key!r}")
    kind = type(DEFAULTS[key])
    if isinstance(value, kind) and not isinstance(value, bool):
        return value
    try:
        return kind(value) if kind is not int else int(str(value), 10)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot read {value!r} as {kind.__name__}") from exc


@dataclasses.dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict
    out: Path
    jobs: int = 1
    only: tuple = ()
    timing: bool = True

    def __post_init__(self):
        v = self.values
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        self.shooting  # validates the shooting fields
        if not v["r_max"] >= 50 or np.log(v["r_max"]) > v["x_max"]:
            raise ConfigError("r_max must lie in [50, exp(x_max)] so the asymptotic fit applies")
        if not v["r_max_ref"] >= 50 or np.log(v["r_max_ref"]) > v["x_max"]:
            raise ConfigError("r_max_ref must lie in [50, exp(x_max)]")
        if not 0 < v["r_obs"] < v["evolve_r_max"]:
            raise ConfigError("need 0 < r_obs < evolve_r_max")
        if np.log(v["evolve_r_max"]) > v["x_max"]:
            raise ConfigError("evolve_r_max exceeds exp(x_max)")
        if v["t_end"] < 0 or v["obs_dt"] <= 0 or v["evolve_tol"] <= 0 or v["osc_tol"] <= 0:
            raise ConfigError("t_end >= 0 and obs_dt, evolve_tol, osc_tol > 0 required")
        if v["samples"] < 1:
            raise ConfigError("samples must be positive")
        self.init_data
        radii = self.radii
        if any(not R > 1 for R in radii):
            raise ConfigError("annulus radii must exceed 1")
        unknown = [n for n in self.only if n not in BY_NAME]
        if unknown:
            raise ConfigError(f"unknown criterion {unknown[0]!r}; choose from {', '.join(BY_NAME)}")

    @property
    def shooting(self) -> ShootingConfig:
        return ShootingConfig(**{k: self.values[k] for k in _SHOOTING_KEYS})

    @property
    def init_data(self) -> InitialData:
        return InitialData.parse(self.values["init"])

    @property
    def radii(self) -> tuple:
        try:
            return tuple(float(x) for x in str(self.values["R"]).replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"bad radius list {self.values['R']!r}") from exc

    def to_dict(self) -> dict:
        d = dict(self.values)
        d["jobs"] = self.jobs
        if self.only:
            d["only"] = list(self.only)
        return d


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the configuration code, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="spiralflow", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file")
    common.add_argument("--out", help="output directory (default $SPIRALFLOW_OUT or ./spiralflow_out)")
    common.add_argument("--jobs", type=int, default=1, help="concurrent independent runs")
    common.add_argument("--seed", type=int, help="seed for randomized property sampling")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
    common.add_argument("--no-timing", action="store_true",
                        help="omit wall-clock values so outputs are byte-reproducible")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("steady", parents=[common], help="angular velocity and profile")
    p.add_argument("--lambda-bracket", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--r-max", type=float)

    p = sub.add_parser("evolve", parents=[common], help="Cauchy problem on [0, r_max]")
    p.add_argument("--init", help="bump:a,c,w or steepen:s")
    p.add_argument("--t-end", type=float)
    p.add_argument("--r-max", type=float)

    p = sub.add_parser("annulus", parents=[common], help="rotating waves on [1/R, R]")
    p.add_argument("--R", nargs="+", type=float)

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--only", action="append", default=[], help="criterion name (repeatable)")

    sub.add_parser("barriers", parents=[common], help="circle and lower barrier checks")
    return ap


def resolve_config(args) -> RunConfig:
    raw = dict(DEFAULTS)
    if args.config:
        raw.update(parse_config_file(args.config))
    for item in args.set:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        raw[key.strip()] = val.strip()
    if args.seed is not None:
        raw["seed"] = args.seed
    cmd = args.command
    if getattr(args, "lambda_bracket", None):
        raw["lambda_lo"], raw["lambda_hi"] = args.lambda_bracket
    if getattr(args, "r_max", None) is not None:
        raw["evolve_r_max" if cmd == "evolve" else "r_max"] = args.r_max
    if getattr(args, "init", None):
        raw["init"] = args.init
    if getattr(args, "t_end", None) is not None:
        raw["t_end"] = args.t_end
    if getattr(args, "R", None):
        raw["R"] = ",".join(repr(float(R)) for R in args.R)
    values = {k: _coerce(k, v) for k, v in raw.items()}
    out = args.out or os.environ.get("SPIRALFLOW_OUT") or "spiralflow_out"
    return RunConfig(cmd, values, Path(out), jobs=args.jobs,
                     only=tuple(getattr(args, "only", ()) or ()), timing=not args.no_timing)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


class _Timer:
    def __init__(self):
        self.ms = {}

    def __call__(self, name):
        timer = self

        class _Span:
            def __enter__(self):
                self.t0 = time.perf_counter()

            def __exit__(self, *exc):
                timer.ms[name] = 1e3 * (time.perf_counter() - self.t0)

        return _Span()


def _emit(rc: RunConfig, name, results, checks: dict, timer: _Timer):
    doc = io.summary(rc.command, rc.to_dict(), results, checks,
                     timer.ms if rc.timing else None)
    return io.write_json(rc.out / f"{name}.json", doc)


def _print_report(rep: VerificationReport):
    for c in rep:
        print("  " + c.line())


def cmd_steady(rc: RunConfig) -> int:
    timer = _Timer()
    cfg = rc.shooting
    with timer("bisection"):
        b = bisect_lambda(cfg)
    lam = b.lam
    r_max, r_ref = rc.values["r_max"], rc.values["r_max_ref"]
    if r_ref == r_max:
        r_ref = 2.0 * r_max if np.log(2.0 * r_max) <= cfg.x_max else r_max / 2.0
    with timer("profile"):
        prof = build_profile(lam, r_max, cfg)
    with timer("reference_profile"):
        ref = build_profile(lam, r_ref, cfg)
    rep = verify_profile(prof)
    err = abs(lam - PUBLISHED_LAMBDA)
    rep.add("lambda matches published value", err <= 1e-6, err, 1e-6,
            "published angular velocity of the steady spiral")
    rep.add("lambda in bracket", cfg.lambda_lo <= lam <= cfg.lambda_hi, lam, cfg.lambda_hi,
            "steady-state theorem: 1/4 <= lambda <= 1/2")
    da = abs(prof.a - ref.a)
    rep.add("a stable under change of r_max", da <= 1e-6, da, 1e-6,
            "asymptotic constant a in the far-field expansion",
            note=f"reference r_max = {r_ref:g}")
    print(f"lambda = {lam:.6f} ± 1e-06")
    print(f"a = {prof.a:.9f}  (|delta a| = {da:.2e} vs r_max = {r_ref:g})")
    _print_report(rep)
    io.write_csv(rc.out / "steady_profile.csv",
                 ["r", "phi", "phi_r", "phi_rr", "kappa", "residual"],
                 [prof.r, prof.phi, prof.phi_r, prof.phi_rr, prof.kappa, prof.residuals])
    results = {**prof.summary(), "lambda_bracket": [cfg.lambda_lo, cfg.lambda_hi],
               "bisection_iterations": b.iterations, "lo_classification": b.lo_class.value,
               "a_ref": ref.a, "r_max_ref": r_ref, "delta_a": da,
               "published_lambda": PUBLISHED_LAMBDA}
    _emit(rc, "steady", results, rep.to_dict(), timer)
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_evolve(rc: RunConfig) -> int:
    timer = _Timer()
    v = rc.values
    init = rc.init_data
    cfg = rc.shooting
    with timer("steady"):
        lam = bisect_lambda(cfg).lam
        traj = matched_trajectory(lam, cfg)
    grid = cauchy_grid(v["evolve_r_max"])
    steep = init.kind == "steepen"
    t_end = v["t_end"] if v["t_end"] > 0 else (50.0 if steep else 100.0)
    obs = np.arange(0.0, t_end + 0.5 * v["obs_dt"], v["obs_dt"])
    obs = obs[obs <= t_end]
    with timer("evolution"):
        ref = DiscreteReference.compute(traj, grid) if steep else None
        run = run_cauchy(traj, init, t_end, grid=grid, obs_times=obs, r_obs=v["r_obs"],
                         tol=v["evolve_tol"], ref=ref)
    io.write_csv(rc.out / "evolve_osc.csv", ["t", "osc", "mean"], [run.t, run.osc, run.mean])
    results = {"lambda": lam, "init": init.label(), "t_end": t_end, "r_obs": v["r_obs"],
               "n_nodes": len(grid), "steps": run.stats.steps, "rejected": run.stats.rejected,
               "osc_final": float(run.osc[-1]), "mean_final": float(run.mean[-1])}
    if steep:
        rep = gradient_report(run)
        g = run.grad
        io.write_csv(rc.out / "evolve_gradient.csv",
                     ["t", "max_Ur_minus_Phih_r", "max_Ur_minus_Phi_r", "max_Ur_plus_lambda"],
                     [g[:, 0], g[:, 1], g[:, 2], g[:, 3]])
        results["max_gradient_gap"] = float(g[:, 1].max())
        results["discrete_lambda"] = ref.lam_h
    else:
        rep = convergence_report(run, osc_tol=v["osc_tol"], tail_start=t_end / 2)
    print(f"lambda = {lam:.6f}; {init.label()} to t = {t_end:g}: osc = {run.osc[-1]:.3e}")
    _print_report(rep)
    _emit(rc, "evolve", results, rep.to_dict(), timer)
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_annulus(rc: RunConfig) -> int:
    timer = _Timer()
    ctx = Context(cfg=rc.shooting, jobs=rc.jobs, timing=rc.timing)
    with timer("steady"):
        lam = ctx.lam
    with timer("sweep"):
        runs = annulus_sweep(ctx, rc.radii)
    rep = VerificationReport()
    rows = []
    print(f"{'R':>8} {'lambda_R':>14} {'rel. error':>12} {'mismatch':>10}")
    for res, secs in runs:
        tag = f"R={res.R:g}"
        rep.add(f"{tag} shift mismatch", res.mismatch <= 1e-4, res.mismatch, 1e-4,
                "rotating waves on the annulus and lambda_R -> lambda")
        rep.add(f"{tag} lambda_R <= lambda_hat", res.lambda_R <= res.lambda_hat, res.lambda_R,
                res.lambda_hat, "upper velocity bound from the cut-off circle barrier")
        d = res.to_dict(lam)
        rows.append(d)
        stem = f"annulus_R{res.R:g}"
        io.write_csv(rc.out / f"{stem}_profile.csv", ["r", "U"], [res.grid.nodes, res.profile_R])
        timer.ms[f"R={res.R:g}"] = 1e3 * secs
        io.write_json(rc.out / f"{stem}.json",
                      io.summary("annulus", rc.to_dict(), d, {}, {"run": 1e3 * secs} if rc.timing else None))
        print(f"{res.R:8g} {res.lambda_R:14.9f} {d['relative_error']:12.3e} {res.mismatch:10.2e}")
    io.write_csv(rc.out / "annulus_table.csv",
                 ["R", "T_R", "lambda_R", "lambda_star", "relative_error", "shift_mismatch"],
                 [[d["R"] for d in rows], [d["T_R"] for d in rows], [d["lambda_R"] for d in rows],
                  [lam] * len(rows), [d["relative_error"] for d in rows],
                  [d["shift_mismatch"] for d in rows]])
    _print_report(rep)
    _emit(rc, "annulus", {"lambda_star": lam, "runs": rows}, rep.to_dict(), timer)
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_barriers(rc: RunConfig) -> int:
    timer = _Timer()
    with timer("barriers"):
        rep, res = barrier_report()
    io.write_csv(rc.out / "barrier_circle.csv", ["r", "residual"], [res["r"], res["circle_residual"]])
    io.write_csv(rc.out / "barrier_h_mu.csv", ["x", "h_mu"], [res["x"], res["h_mu"]])
    _print_report(rep)
    print(f"inf h_mu = {res['h_mu_inf']:.6f} at x = {res['h_mu_argmin']:.3f}; "
          f"lambda_hat = {res['lambda_hat']:.4f}")
    _emit(rc, "barriers", _scalars(res), rep.to_dict(), timer)
    return EXIT_OK if rep.passed else EXIT_CHECK


def _scalars(d: dict) -> dict:
    return {k: v for k, v in d.items() if not isinstance(v, np.ndarray)}


def cmd_verify(rc: RunConfig) -> int:
    timer = _Timer()
    ctx = Context(cfg=rc.shooting, seed=rc.values["seed"], jobs=rc.jobs, timing=rc.timing,
                  radii=rc.radii, samples=rc.values["samples"])

    def progress(r):
        print(r.line(), flush=True)
        timer.ms[r.criterion.name] = 1e3 * r.seconds

    out = run_suite(ctx, only=list(rc.only) or None, progress=progress)
    checks = {r.criterion.name: r.report.to_dict() for r in out}
    results = {r.criterion.name: _scalars(r.results) for r in out}
    _emit(rc, "verify", results, checks, timer)
    ok = all(r.passed for r in out)
    print(f"{sum(r.passed for r in out)}/{len(out)} criteria pass")
    return EXIT_OK if ok else EXIT_CHECK


HANDLERS = {
    "steady": cmd_steady,
    "evolve": cmd_evolve,
    "annulus": cmd_annulus,
    "verify": cmd_verify,
    "barriers": cmd_barriers,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help, --version and usage errors
        return int(exc.code or 0)
    try:
        rc = resolve_config(args)
        return HANDLERS[rc.command](rc)
    except (ConfigError, UsageError, DomainError) as exc:
        print(f"spiralflow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, SpiralFlowError) as exc:
        print(f"spiralflow: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
