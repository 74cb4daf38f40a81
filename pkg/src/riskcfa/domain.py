"""Wind / battery / hydrogen energy system: state, decisions, constraints, costs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .lp import Affine, Sense

FEAS_TOL = 1e-6
LOSS_SNAP = 1e-9

# Order of the dispatch vector x_t.
COMPONENTS = ("wd", "rd", "hd", "wr", "hr", "h", "wx")


class DomainError(ValueError):
    pass


class StorageBoundsError(RuntimeError):
    """A transition left a storage level outside [0, capacity]."""


@dataclass(frozen=True)
class SystemParams:
    battery_capacity: float
    hydrogen_capacity: float
    charge_eff: float
    discharge_eff: float
    fuel_cell_eff: float
    charge_limit: float
    discharge_limit: float
    fuel_cell_limit: float
    loss_penalty: float
    curtail_penalty: float
    acquisition_schedule: tuple[bool, ...]
    horizon: int
    episode_length: int

    def __post_init__(self):
        object.__setattr__(self, "acquisition_schedule", tuple(bool(a) for a in self.acquisition_schedule))
        for name in ("battery_capacity", "hydrogen_capacity", "charge_limit", "discharge_limit",
                     "fuel_cell_limit", "loss_penalty", "curtail_penalty"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and nonnegative, got {v}")
        for name in ("charge_eff", "discharge_eff", "fuel_cell_eff"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise DomainError(f"{name} must lie in (0, 1], got {v}")
        if self.horizon < 0:
            raise DomainError(f"horizon must be >= 0, got {self.horizon}")
        if self.episode_length < 1:
            raise DomainError(f"episode_length must be >= 1, got {self.episode_length}")
        if len(self.acquisition_schedule) != self.episode_length:
            raise DomainError(f"acquisition_schedule has length {len(self.acquisition_schedule)}, "
                              f"expected {self.episode_length}")

    @classmethod
    def from_peak(cls, peak: float, episode_length: int = 365, horizon: int = 7, *,
                  loss_penalty: float = 1000.0, curtail_penalty: float = 800.0,
                  acquisition_every: int = 7, acquisition_start: int = 1, **overrides) -> "SystemParams":
        """Default dimensioning: every rating scales with peak demand."""
        fuel_cell_eff = overrides.pop("fuel_cell_eff", 0.6)
        kw = dict(
            battery_capacity=4.0 * peak,
            hydrogen_capacity=6.0 / fuel_cell_eff * peak,
            charge_eff=0.98,
            discharge_eff=0.98,
            fuel_cell_eff=fuel_cell_eff,
            charge_limit=peak,
            discharge_limit=peak,
            fuel_cell_limit=peak,
            loss_penalty=loss_penalty,
            curtail_penalty=curtail_penalty,
            acquisition_schedule=weekly_schedule(episode_length, acquisition_every, acquisition_start),
            horizon=horizon,
            episode_length=episode_length,
        )
        kw.update(overrides)
        return cls(**kw)

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


def weekly_schedule(length: int, every: int = 7, start: int = 1) -> tuple[bool, ...]:
    if every < 1:
        raise DomainError("acquisition interval must be >= 1")
    return tuple(t >= start and (t - start) % every == 0 for t in range(length))


@dataclass(frozen=True)
class SystemState:
    t: int
    demand: float
    wind: float
    hydrogen_price: float
    battery_level: float
    hydrogen_level: float

    def validate(self, params: SystemParams, tol: float = FEAS_TOL) -> None:
        if self.demand < 0 or self.wind < 0 or self.hydrogen_price < 0:
            raise DomainError(f"state at t={self.t} has negative exogenous data: {self}")
        if not -tol <= self.battery_level <= params.battery_capacity + tol:
            raise DomainError(f"battery level {self.battery_level} outside [0, {params.battery_capacity}]")
        if not -tol <= self.hydrogen_level <= params.hydrogen_capacity + tol:
            raise DomainError(f"hydrogen level {self.hydrogen_level} outside [0, {params.hydrogen_capacity}]")


@dataclass(frozen=True)
class Decision:
    wd: float = 0.0
    rd: float = 0.0
    hd: float = 0.0
    wr: float = 0.0
    hr: float = 0.0
    h: float = 0.0
    wx: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in COMPONENTS])

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "Decision":
        return cls(**{c: float(v) for c, v in zip(COMPONENTS, x)})

    def __add__(self, other: "Decision") -> "Decision":
        return Decision.from_array(self.as_array() + other.as_array())

    def scaled(self, k: float) -> "Decision":
        return Decision.from_array(k * self.as_array())


class Row(NamedTuple):
    name: str
    expr: Affine
    sense: Sense
    rhs: float


# -- generic row builders ---------------------------------------------------
# Each takes decision components as Affine expressions so the same algebra
# serves the numeric check below and every look-ahead LP.

def wind_budget_row(x: Mapping[str, Affine], budget: float) -> Row:
    return Row("wind_budget", x["wr"] + x["wd"] + x["wx"], Sense.LE, budget)


def supply_row(x: Mapping[str, Affine], demand: float, p: SystemParams) -> Row:
    return Row("supply", x["wd"] + p.discharge_eff * x["rd"] + p.fuel_cell_eff * x["hd"], Sense.LE, demand)


def storage_rows(x: Mapping[str, Affine], soc_e: Affine, soc_h: Affine, p: SystemParams,
                 purchase_allowed: bool) -> list[Row]:
    """Gating, draw, headroom and rating rows; storage levels may be constants or LP variables."""
    bc, bh = p.charge_eff, p.fuel_cell_eff
    return [
        Row("purchase_gate", x["h"], Sense.LE, p.hydrogen_capacity if purchase_allowed else 0.0),
        Row("battery_draw", x["rd"] - soc_e, Sense.LE, 0.0),
        Row("hydrogen_draw", x["hr"] + x["hd"] - soc_h, Sense.LE, 0.0),
        Row("hydrogen_headroom", x["h"] + soc_h, Sense.LE, p.hydrogen_capacity),
        Row("battery_headroom", bc * (x["wr"] + bh * x["hr"]) - x["rd"] + soc_e, Sense.LE, p.battery_capacity),
        Row("charge_rate", x["wr"] + bh * x["hr"], Sense.LE, p.charge_limit),
        Row("discharge_rate", x["rd"], Sense.LE, p.discharge_limit),
        Row("fuel_cell_rate", bh * (x["hr"] + x["hd"]), Sense.LE, p.fuel_cell_limit),
    ]


def battery_next(x: Mapping[str, Affine], soc_e, p: SystemParams):
    return soc_e - x["rd"] + p.charge_eff * (x["wr"] + p.fuel_cell_eff * x["hr"])


def hydrogen_next(x: Mapping[str, Affine], soc_h):
    return soc_h - x["hd"] - x["hr"] + x["h"]


def loss_expr(x: Mapping[str, Affine], demand: float, p: SystemParams) -> Affine:
    return demand - (x["wd"] + p.discharge_eff * x["rd"] + p.fuel_cell_eff * x["hd"])


def cost_expr(x: Mapping[str, Affine], demand: float, price: float, p: SystemParams) -> Affine:
    return p.loss_penalty * loss_expr(x, demand, p) + p.curtail_penalty * x["wx"] + price * x["h"]


# -- operations on concrete states ------------------------------------------

_UNIT = {c: Affine.var(i) for i, c in enumerate(COMPONENTS)}


def feasibility_rows(state: SystemState, params: SystemParams, acquisition_allowed: bool) -> list[Row]:
    """All per-step rows, nonnegativity included, at ``state``, as expressions over the 7-vector."""
    state.validate(params)
    soc_e, soc_h = Affine(const=state.battery_level), Affine(const=state.hydrogen_level)
    rows = [wind_budget_row(_UNIT, state.wind), supply_row(_UNIT, state.demand, params)]
    rows += storage_rows(_UNIT, soc_e, soc_h, params, acquisition_allowed)
    rows += [Row(f"nonneg_{c}", _UNIT[c], Sense.GE, 0.0) for c in COMPONENTS]
    return rows


def row_violation(row: Row, x: Sequence[float]) -> float:
    lhs = row.expr.value(x)
    if row.sense is Sense.LE:
        return max(0.0, lhs - row.rhs)
    if row.sense is Sense.GE:
        return max(0.0, row.rhs - lhs)
    return abs(lhs - row.rhs)


def violations(decision: Decision, state: SystemState, params: SystemParams,
               acquisition_allowed: bool, tol: float = FEAS_TOL) -> dict[str, float]:
    x = decision.as_array()
    out = {}
    for row in feasibility_rows(state, params, acquisition_allowed):
        v = row_violation(row, x)
        if v > tol:
            out[row.name] = v
    return out


def is_feasible(decision: Decision, state: SystemState, params: SystemParams,
                acquisition_allowed: bool, tol: float = FEAS_TOL) -> bool:
    return not violations(decision, state, params, acquisition_allowed, tol)


def unserved_load(state: SystemState, decision: Decision, params: SystemParams) -> float:
    """Demand left unmet; solver round-off below ``LOSS_SNAP`` (relative) counts as zero."""
    d = decision
    loss = state.demand - (d.wd + params.discharge_eff * d.rd + params.fuel_cell_eff * d.hd)
    return 0.0 if loss <= LOSS_SNAP * max(1.0, state.demand) else loss


def stage_cost(state: SystemState, decision: Decision, params: SystemParams) -> float:
    return (params.loss_penalty * unserved_load(state, decision, params)
            + params.curtail_penalty * decision.wx
            + state.hydrogen_price * decision.h)


def transition(state: SystemState, decision: Decision, params: SystemParams,
               next_exogenous: tuple[float, float, float], tol: float = FEAS_TOL) -> SystemState:
    """Advance storage levels one step; ``next_exogenous`` is (demand, wind, price)."""
    d = decision
    r_h = state.hydrogen_level - d.hd - d.hr + d.h
    r_e = state.battery_level - d.rd + params.charge_eff * (d.wr + params.fuel_cell_eff * d.hr)
    if not -tol <= r_e <= params.battery_capacity + tol:
        raise StorageBoundsError(f"t={state.t}: battery level {r_e} outside [0, {params.battery_capacity}]")
    if not -tol <= r_h <= params.hydrogen_capacity + tol:
        raise StorageBoundsError(f"t={state.t}: hydrogen level {r_h} outside [0, {params.hydrogen_capacity}]")
    demand, wind, price = next_exogenous
    return SystemState(state.t + 1, float(demand), float(wind), float(price), r_e, r_h)
