"""Experiment configuration: an INI file with sections mapped onto typed settings.

Schema (every key optional; defaults in brackets)::

    [system]      peak [100], episode_length [60], horizon [7],
                  battery_days [4], hydrogen_days [6], charge_eff, discharge_eff [0.98],
                  fuel_cell_eff [0.6], charge_limit, discharge_limit, fuel_cell_limit [peak],
                  loss_penalty [1000], curtail_penalty [800],
                  acquisition_every [7], acquisition_start [1],
                  battery_fraction, hydrogen_fraction [0.5]
    [forecast]    relative_std [0.3], initial_wind [0.8 * peak], clamp_max [none]
    [data]        series [synthetic], synthetic_seed [0], price_level [40]
    [policy]      policies [dla=0.2], fan_size [20], alpha [0.9], zeta [0],
                  big_m [1e6], backend [simplex]
    [evaluation]  scenarios [20], seed [0], zeta [0], theta [0.1, ..., 1.0]
    [tuning]      mode [grid], objective [expected_cost], alpha [0.9], zeta [0],
                  grid [0.1, ..., 1.0], samples [20], lookup [false],
                  iterations [2000], batch_size [10], theta0 [1.0],
                  smoothing [0.1 0.25 0], step [0.5 0.25 0], averaging [1 0.5 1],
                  target [1.0]

Schedules are ``scale power offset`` triples, lists are comma separated.
A ``series`` path is resolved relative to the config file.  When a series is
given, ``peak`` defaults to its maximum demand.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .domain import DomainError, SystemParams
from .forecast import ExogenousSeries, ForecastModel, load_series, synthesize_series
from .lp import BACKENDS
from .policy import DLAPolicy, RiskConfig, SBPoEPolicy, SCVaRPolicy, SLAPolicy, Theta
from .sim import Instance
from .tuning import ObjectiveKind, Schedule, SgdConfig

DEFAULT_THETAS = tuple(round(0.1 * i, 1) for i in range(1, 11))

_KNOWN = {
    "system": {"peak", "episode_length", "horizon", "battery_days", "hydrogen_days", "charge_eff",
               "discharge_eff", "fuel_cell_eff", "charge_limit", "discharge_limit", "fuel_cell_limit",
               "loss_penalty", "curtail_penalty", "acquisition_every", "acquisition_start",
               "battery_fraction", "hydrogen_fraction"},
    "forecast": {"relative_std", "initial_wind", "clamp_max"},
    "data": {"series", "synthetic_seed", "price_level"},
    "policy": {"policies", "fan_size", "alpha", "zeta", "big_m", "backend"},
    "evaluation": {"scenarios", "seed", "zeta", "theta"},
    "tuning": {"mode", "objective", "alpha", "zeta", "grid", "samples", "lookup", "iterations",
               "batch_size", "theta0", "smoothing", "step", "averaging", "target"},
}


class ConfigError(ValueError):
    pass


def parse_floats(text: str, what: str = "list") -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{what}: cannot parse number list {text!r}") from None
    if not vals:
        raise ConfigError(f"{what}: empty list")
    return vals


def _schedule(text: str, what: str) -> Schedule:
    parts = text.split()
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"{what}: expected 'scale [power [offset]]', got {text!r}") from None
    if not 1 <= len(nums) <= 3:
        raise ConfigError(f"{what}: expected 'scale [power [offset]]', got {text!r}")
    return Schedule(*nums)


@dataclass(frozen=True)
class PolicySpec:
    kind: str                       # dla | sla | scvar | sbpoe
    theta: Optional[Theta] = None
    value: Optional[float] = None   # alpha for scvar, zeta for sbpoe


def parse_policy(text: str) -> PolicySpec:
    """``dla=0.2``, ``dla=0.3/0.2/0.1`` (look-up table), ``sla``, ``scvar[=alpha]``, ``sbpoe[=zeta]``."""
    kind, _, arg = text.strip().partition("=")
    kind = kind.strip().lower()
    arg = arg.strip()
    try:
        if kind == "dla":
            if not arg:
                raise ConfigError("dla needs a theta, e.g. dla=0.2")
            vals = [float(v) for v in arg.split("/")]
            theta = Theta.table(vals) if "/" in arg else Theta.constant(vals[0])
            return PolicySpec(kind, theta=theta)
        if kind == "sla":
            if arg:
                raise ConfigError("sla takes no argument")
            return PolicySpec(kind)
        if kind in ("scvar", "sbpoe"):
            return PolicySpec(kind, value=float(arg) if arg else None)
    except ValueError as exc:
        raise ConfigError(f"policy {text!r}: {exc}") from None
    raise ConfigError(f"unknown policy {text!r} (expected dla=THETA, sla, scvar, sbpoe)")


def parse_policies(text: str) -> tuple[PolicySpec, ...]:
    specs = tuple(parse_policy(p) for p in text.split(",") if p.strip())
    if not specs:
        raise ConfigError("policy list is empty")
    return specs


@dataclass(frozen=True)
class TuningSettings:
    mode: str = "grid"
    objective: str = "expected_cost"
    alpha: float = 0.9
    zeta: float = 0.0
    grid: tuple = DEFAULT_THETAS
    samples: int = 20
    lookup: bool = False
    sgd: SgdConfig = SgdConfig()
    target: tuple = (1.0,)


@dataclass(frozen=True)
class ExperimentConfig:
    params: SystemParams
    exogenous: ExogenousSeries
    forecast: ForecastModel
    battery_fraction: float = 0.5
    hydrogen_fraction: float = 0.5
    policies: tuple = (PolicySpec("dla", theta=Theta.constant(0.2)),)
    fan_size: int = 20
    risk: RiskConfig = RiskConfig()
    backend: str = "simplex"
    scenarios: int = 20
    seed: int = 0
    zetas: tuple = (0.0,)
    thetas: tuple = DEFAULT_THETAS
    tuning: TuningSettings = field(default_factory=TuningSettings)

    def instance(self) -> Instance:
        return Instance.from_params(self.params, self.exogenous, self.forecast,
                                    self.battery_fraction, self.hydrogen_fraction)

    def build_policy(self, spec: PolicySpec):
        if spec.kind == "dla":
            if spec.theta.lookup and len(spec.theta.values) < self.params.horizon:
                raise ConfigError(f"look-up theta has {len(spec.theta.values)} entries, "
                                  f"horizon is {self.params.horizon}")
            return DLAPolicy(spec.theta, self.backend)
        if spec.kind == "sla":
            return SLAPolicy(self.fan_size, self.backend)
        if spec.kind == "scvar":
            alpha = self.risk.alpha if spec.value is None else spec.value
            return SCVaRPolicy(RiskConfig(alpha, self.risk.zeta, self.risk.big_m), self.fan_size, self.backend)
        zeta = self.risk.zeta if spec.value is None else spec.value
        return SBPoEPolicy(RiskConfig(self.risk.alpha, zeta, self.risk.big_m), self.fan_size, self.backend)


def _section(cp: configparser.ConfigParser, name: str) -> configparser.SectionProxy:
    if not cp.has_section(name):
        cp.add_section(name)
    return cp[name]


def load_config(path=None, text: Optional[str] = None) -> ExperimentConfig:
    """Read a config file (or ``text``); ``None`` for both yields the defaults."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    base = Path(".")
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            cp.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.parent
    elif text is not None:
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
    for sec in cp.sections():
        if sec not in _KNOWN:
            raise ConfigError(f"unknown section [{sec}]")
        unknown = set(cp[sec]) - _KNOWN[sec]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{sec}]: {', '.join(sorted(unknown))}")
    try:
        return _build(cp, base)
    except (ValueError, DomainError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def _build(cp: configparser.ConfigParser, base: Path) -> ExperimentConfig:
    sy, fc, da = _section(cp, "system"), _section(cp, "forecast"), _section(cp, "data")
    po, ev, tu = _section(cp, "policy"), _section(cp, "evaluation"), _section(cp, "tuning")

    T = sy.getint("episode_length", 60)
    H = sy.getint("horizon", 7)
    if T < 1:
        raise ConfigError(f"episode_length must be >= 1, got {T}")
    if not 0 <= H <= T:
        raise ConfigError(f"horizon must lie in [0, episode_length={T}], got {H}")

    series_path = da.get("series")
    if series_path:
        p = Path(series_path)
        p = p if p.is_absolute() else base / p
        probe = load_series(p, 0.0)
        peak = sy.getfloat("peak", float(probe.demand.max()))
        wind0 = fc.getfloat("initial_wind", 0.8 * peak)
        exo = ExogenousSeries(probe.demand, probe.hydrogen_price, wind0)
        if len(exo) < T:
            raise ConfigError(f"{p}: series has {len(exo)} steps, episode_length is {T}")
    else:
        peak = sy.getfloat("peak", 100.0)
        wind0 = fc.getfloat("initial_wind", 0.8 * peak)
        if not peak > 0:
            raise ConfigError(f"peak must be positive, got {peak}")
        exo = synthesize_series(peak, T, da.getint("synthetic_seed", 0), wind0, da.getfloat("price_level", 40.0))

    fuel = sy.getfloat("fuel_cell_eff", 0.6)
    params = SystemParams.from_peak(
        peak, T, H,
        loss_penalty=sy.getfloat("loss_penalty", 1000.0),
        curtail_penalty=sy.getfloat("curtail_penalty", 800.0),
        acquisition_every=sy.getint("acquisition_every", 7),
        acquisition_start=sy.getint("acquisition_start", 1),
        fuel_cell_eff=fuel,
        battery_capacity=sy.getfloat("battery_days", 4.0) * peak,
        hydrogen_capacity=sy.getfloat("hydrogen_days", 6.0) / fuel * peak,
        charge_eff=sy.getfloat("charge_eff", 0.98),
        discharge_eff=sy.getfloat("discharge_eff", 0.98),
        charge_limit=sy.getfloat("charge_limit", peak),
        discharge_limit=sy.getfloat("discharge_limit", peak),
        fuel_cell_limit=sy.getfloat("fuel_cell_limit", peak),
    )
    clamp = fc.get("clamp_max")
    forecast = ForecastModel(fc.getfloat("relative_std", 0.3), 0, float(clamp) if clamp else None)

    backend = po.get("backend", "simplex")
    if backend not in BACKENDS:
        raise ConfigError(f"unknown backend {backend!r} (expected one of {', '.join(BACKENDS)})")
    fan = po.getint("fan_size", 20)
    if fan < 1:
        raise ConfigError(f"fan_size must be >= 1, got {fan}")
    fractions = (sy.getfloat("battery_fraction", 0.5), sy.getfloat("hydrogen_fraction", 0.5))
    if not all(0 <= f <= 1 for f in fractions):
        raise ConfigError("initial storage fractions must lie in [0, 1]")

    mode = tu.get("mode", "grid")
    if mode not in ("grid", "sgd"):
        raise ConfigError(f"tuning mode must be grid or sgd, got {mode!r}")
    objective = tu.get("objective", "expected_cost")
    if objective != "quadratic":
        ObjectiveKind(objective)  # raises ValueError on unknown names
    lookup = tu.getboolean("lookup", False)
    theta0 = parse_floats(tu.get("theta0", "1.0"), "tuning.theta0")
    target = parse_floats(tu.get("target", "1.0"), "tuning.target")
    width = H if lookup else 1
    if len(theta0) == 1:
        theta0 = theta0 * width
    if len(target) == 1:
        target = target * width
    if len(theta0) != width or len(target) != width:
        raise ConfigError(f"tuning.theta0 and tuning.target need 1 or {width} entries")
    sgd = SgdConfig(
        iterations=tu.getint("iterations", 2000),
        batch_size=tu.getint("batch_size", 10),
        smoothing=_schedule(tu.get("smoothing", "0.1 0.25 0"), "tuning.smoothing"),
        step=_schedule(tu.get("step", "0.5 0.25 0"), "tuning.step"),
        averaging=_schedule(tu.get("averaging", "1 0.5 1"), "tuning.averaging"),
        theta0=theta0,
    )
    grid = parse_floats(tu.get("grid", ",".join(map(str, DEFAULT_THETAS))), "tuning.grid")
    tuning = TuningSettings(mode, objective, tu.getfloat("alpha", 0.9), tu.getfloat("zeta", 0.0), grid,
                            tu.getint("samples", 20), lookup, sgd, target)

    scenarios = ev.getint("scenarios", 20)
    if scenarios < 1:
        raise ConfigError(f"scenarios must be >= 1, got {scenarios}")
    return ExperimentConfig(
        params=params, exogenous=exo, forecast=forecast,
        battery_fraction=fractions[0], hydrogen_fraction=fractions[1],
        policies=parse_policies(po.get("policies", "dla=0.2")),
        fan_size=fan,
        risk=RiskConfig(po.getfloat("alpha", 0.9), po.getfloat("zeta", 0.0), po.getfloat("big_m", 1e6)),
        backend=backend,
        scenarios=scenarios,
        seed=ev.getint("seed", 0),
        zetas=parse_floats(ev.get("zeta", "0"), "evaluation.zeta"),
        thetas=parse_floats(ev.get("theta", ",".join(map(str, DEFAULT_THETAS))), "evaluation.theta"),
        tuning=tuning,
    )
