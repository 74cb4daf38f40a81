"""Command-line entry point: simulate, evaluate, tune, sweep-bpoe, risk.

Every command writes CSV (to ``--out`` or stdout) and is deterministic for a
fixed config and seed.  Exit codes: 0 success, 2 invalid input, 3 runtime or
solver failure.  Error lines start with ``error:``.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import risk
from .config import ConfigError, ExperimentConfig, load_config, parse_floats, parse_policies
from .domain import COMPONENTS, DomainError
from .forecast import IngestionError
from .lp import LpValidationError
from .policy import PolicyError, Theta
from .sim import QUANTILE_LEVELS, EpisodeError, evaluate, run_scenario
from .tuning import (TuningError, TuningObjective, outcomes, quadratic_objective, simulation_objective,
                     tune_grid, tune_sgd)

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3

SIMULATE_HEADER = ["t", "demand", "wind", "price", "R_E", "R_H",
                   *(f"x_{c}" for c in COMPONENTS), "cost", "loss"]


def _fmt(v) -> str:
    return repr(float(v))


@contextmanager
def _sink(out: Optional[str]):
    if out is None:
        yield sys.stdout
        return
    try:
        fh = open(out, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write {out}: {exc.strerror}") from None
    with fh:
        yield fh


def _write(rows: Sequence[Sequence], out: Optional[str]) -> None:
    # build in memory first so a failing command leaves no partial file
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerows(rows)
    with _sink(out) as fh:
        fh.write(buf.getvalue())


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "scenarios", None) is not None:
        if args.scenarios < 1:
            raise ConfigError(f"--scenarios must be >= 1, got {args.scenarios}")
        changes["scenarios"] = args.scenarios
    if getattr(args, "policy", None) is not None:
        changes["policies"] = parse_policies(args.policy)
    if getattr(args, "theta", None) is not None:
        changes["thetas"] = parse_floats(args.theta, "--theta")
    if getattr(args, "zeta", None) is not None:
        changes["zetas"] = parse_floats(args.zeta, "--zeta")
    return dataclasses.replace(cfg, **changes)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> None:
    cfg = _config(args)
    policy = cfg.build_policy(cfg.policies[0])
    trace = run_scenario(policy, cfg.instance(), cfg.seed, 0)
    rows = [SIMULATE_HEADER]
    for rec in trace.steps:
        s = rec.state
        rows.append([s.t, *map(_fmt, (s.demand, s.wind, s.hydrogen_price, s.battery_level, s.hydrogen_level)),
                     *map(_fmt, rec.decision.as_array()), _fmt(rec.cost), _fmt(rec.loss)])
    _write(rows, args.out)


def cmd_evaluate(args) -> None:
    cfg = _config(args)
    inst = cfg.instance()
    header = ["policy", "mean", *(f"q{round(100 * a)}" for a in QUANTILE_LEVELS),
              *(f"bpoe@{z:g}" for z in cfg.zetas)]
    if args.timing:
        header.append("avg_decision_s")
    rows = [header]
    for spec in cfg.policies:
        policy = cfg.build_policy(spec)
        summary = evaluate(policy, inst, cfg.scenarios, cfg.seed, cfg.zetas[0])
        row = [policy.name, _fmt(summary.mean_cost), *(_fmt(summary.cost_quantiles[a]) for a in QUANTILE_LEVELS),
               *(_fmt(risk.bpoe(summary.losses, z)) for z in cfg.zetas)]
        if args.timing:
            row.append(f"{summary.mean_decision_seconds:.6f}")
        rows.append(row)
    _write(rows, args.out)


def cmd_tune(args) -> None:
    """Grid mode: one row per grid point (the first minimal row is the choice).
    SGD mode: one row per iteration; the last row holds the returned theta."""
    cfg = _config(args)
    ts = cfg.tuning
    width = cfg.params.horizon if ts.lookup else 1
    inst = cfg.instance() if ts.objective != "quadratic" else None
    if ts.objective != "quadratic":
        objective = TuningObjective(ts.objective, ts.alpha if ts.objective == "cvar_cost" else 0.0, ts.zeta)

    if ts.mode == "grid":
        thetas = [Theta.from_vector(np.full(width, g), ts.lookup) for g in ts.grid]
        if ts.objective == "quadratic":
            f = quadratic_objective(ts.target)
            trace = [(i, f(th.as_vector(), ())) for i, th in enumerate(thetas)]
        else:
            trace = tune_grid(objective, thetas, inst, ts.samples, cfg.seed, cfg.backend).objective_trace
        iterates = [th.as_vector() for th in thetas]
    else:
        sgd = dataclasses.replace(ts.sgd, seed=cfg.seed)
        if ts.objective == "quadratic":
            f = quadratic_objective(ts.target)
        else:
            f = simulation_objective(objective, inst, cfg.seed, ts.lookup, cfg.backend)
            # normalise so the schedules act on an O(1) objective
            ref = abs(f(np.asarray(sgd.theta0), range(sgd.batch_size)))
            sgd = dataclasses.replace(sgd, scale=ref if ref > 0 else 1.0)
        report = tune_sgd(f, sgd, ts.lookup)
        trace = report.objective_trace
        iterates = report.theta_trace[1:]
    rows = [["iteration", *(f"theta_{i + 1}" for i in range(width)), "objective"]]
    for (k, value), th in zip(trace, iterates):
        rows.append([k, *map(_fmt, th), _fmt(value)])
    _write(rows, args.out)


def cmd_sweep_bpoe(args) -> None:
    cfg = _config(args)
    inst = cfg.instance()
    rows = [["theta", "zeta", "bpoe"]]
    for th in cfg.thetas:
        _, losses = outcomes(Theta.constant(th), range(cfg.scenarios), inst, cfg.seed, cfg.backend)
        for z in cfg.zetas:
            rows.append([_fmt(th), _fmt(z), _fmt(risk.bpoe(losses, z))])
    _write(rows, args.out)


def read_sample(path) -> np.ndarray:
    """One number per line (first column); a non-numeric first line is a header."""
    path = Path(path)
    if not path.is_file():
        raise IngestionError(f"sample file not found: {path}")
    vals = []
    with path.open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[0].strip():
                continue
            try:
                v = float(row[0])
            except ValueError:
                if lineno == 1:
                    continue
                raise IngestionError(f"{path}:{lineno}: not a number: {row[0]!r}") from None
            if not math.isfinite(v):
                raise IngestionError(f"{path}:{lineno}: non-finite value")
            vals.append(v)
    if not vals:
        raise IngestionError(f"{path}: sample is empty")
    return np.array(vals)


def cmd_risk(args) -> None:
    x = read_sample(args.sample)
    alphas = parse_floats(args.alpha, "--alpha")
    zetas = parse_floats(args.zeta, "--zeta")
    rows = [["measure", "level", "value"]]
    for a in alphas:
        rows.append(["var", _fmt(a), _fmt(risk.var(x, a))])
        rows.append(["cvar", _fmt(a), _fmt(risk.cvar(x, a))])
    for z in zetas:
        rows.append(["poe", _fmt(z), _fmt(risk.poe(x, z))])
        rows.append(["bpoe", _fmt(z), _fmt(risk.bpoe(x, z))])
    _write(rows, args.out)


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riskcfa", description="Risk-aware dispatch policies for a "
                                     "wind/battery/hydrogen microgrid.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, policy=True, sweep=False):
        p.add_argument("--config", metavar="PATH", help="INI experiment config (defaults if omitted)")
        p.add_argument("--seed", type=int, metavar="N", help="override evaluation.seed")
        p.add_argument("--out", metavar="PATH", help="CSV output file (default: stdout)")
        p.add_argument("--scenarios", type=int, metavar="N", help="override evaluation.scenarios")
        if policy:
            p.add_argument("--policy", metavar="LIST",
                           help="comma list, e.g. 'dla=0.2,sla,scvar=0.9,sbpoe=5'")
        if sweep:
            p.add_argument("--theta", metavar="LIST", help="comma list of constant thetas")
        p.add_argument("--zeta", metavar="LIST", help="comma list of loss thresholds")

    p = sub.add_parser("simulate", help="one closed-loop episode, per-step CSV")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="out-of-sample cost statistics per policy")
    common(p)
    p.add_argument("--timing", action="store_true",
                   help="append mean decision time (makes output machine dependent)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("tune", help="tune the D-LA wind discount (grid or SGD)")
    common(p, policy=False)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("sweep-bpoe", help="bpoe of total unserved load over constant thetas")
    common(p, policy=False, sweep=True)
    p.set_defaults(func=cmd_sweep_bpoe)

    p = sub.add_parser("risk", help="VaR/CVaR/PoE/BPoE of a sample file")
    p.add_argument("sample", metavar="SAMPLE_CSV")
    p.add_argument("--alpha", default="0.9", metavar="LIST")
    p.add_argument("--zeta", default="0", metavar="LIST")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=cmd_risk)
    return parser


INVALID = (ConfigError, IngestionError, DomainError, LpValidationError, risk.RiskDomainError, ValueError)
RUNTIME = (EpisodeError, PolicyError, TuningError, RuntimeError, ArithmeticError)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except INVALID as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RUNTIME as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
