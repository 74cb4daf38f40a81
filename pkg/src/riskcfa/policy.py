"""Look-ahead policies: D-LA (parameter-modified), S-LA, S-CVaR and S-BPoE.

All four share one LP skeleton.  The here-and-now stage carries the full
constraint set at the observed state.  Each look-ahead stage has shared
storage, fuel-cell and purchase flows plus per-scenario wind-to-load and
curtailment copies; storage levels are substituted as affine expressions
of earlier flows, so the transition rows never appear explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import domain
from .domain import COMPONENTS, Decision, SystemParams, SystemState
from .forecast import ExogenousSeries, ScenarioFan
from .lp import Affine, LpModel, LpSolution, Sense, Status, add_row, solve
from .risk import bpoe_epigraph, cvar_epigraph

SHARED = ("rd", "hd", "wr", "hr", "h")
ADAPTIVE = ("wd", "wx")

DEFAULT_BIG_M = 1e6
GAMMA_GRID = tuple([0.0] + list(np.logspace(-4, 2, 33)))
GOLDEN_ITERATIONS = 25
GAMMA_CEILING = 1e8
POLISH_ROUNDS = 5


class PolicyError(RuntimeError):
    pass


@dataclass(frozen=True)
class Theta:
    """Wind-budget discount: one constant or one entry per lead time."""

    values: tuple[float, ...]
    lookup: bool = False

    def __post_init__(self):
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ValueError("theta needs at least one value")
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ValueError(f"theta entries must be finite and >= 0, got {vals}")
        if not self.lookup and len(vals) != 1:
            raise ValueError("a constant theta has exactly one value")

    @classmethod
    def constant(cls, value: float) -> "Theta":
        return cls((value,), False)

    @classmethod
    def table(cls, values: Sequence[float]) -> "Theta":
        return cls(tuple(values), True)

    @classmethod
    def from_vector(cls, vec, lookup: bool) -> "Theta":
        return cls(tuple(np.asarray(vec, dtype=float)), lookup)

    def as_vector(self) -> np.ndarray:
        return np.array(self.values)

    def factor(self, lead: int) -> float:
        """Discount for lead time ``lead`` (1-based)."""
        if not self.lookup:
            return self.values[0]
        if not 1 <= lead <= len(self.values):
            raise PolicyError(f"look-up table has {len(self.values)} entries, lead time {lead} requested")
        return self.values[lead - 1]

    def budgets(self, forecast: Sequence[float]) -> np.ndarray:
        return np.array([self.factor(k + 1) * f for k, f in enumerate(forecast)])

    def label(self) -> str:
        return "/".join(f"{v:g}" for v in self.values)


@dataclass(frozen=True)
class RiskConfig:
    alpha: float = 0.9
    zeta: float = 0.0
    big_m: float = DEFAULT_BIG_M

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.big_m > 0:
            raise ValueError(f"big M must be positive, got {self.big_m}")


@dataclass(frozen=True)
class Outlook:
    """Known future data for lead times 1..h."""

    demand: np.ndarray
    price: np.ndarray
    purchase_allowed: np.ndarray

    @property
    def horizon(self) -> int:
        return len(self.demand)

    @classmethod
    def at(cls, exogenous: ExogenousSeries, params: SystemParams, t: int) -> "Outlook":
        h = horizon_at(params, t)
        sl = slice(t + 1, t + 1 + h)
        return cls(exogenous.demand[sl], exogenous.hydrogen_price[sl],
                   np.array(params.acquisition_schedule[sl], dtype=bool))


def horizon_at(params: SystemParams, t: int) -> int:
    """Look-ahead length at step ``t``; never runs past the last step ``T-1``."""
    return max(0, min(params.horizon, params.episode_length - 1 - t))


@dataclass
class PolicyDecision:
    decision: Decision
    lookahead_objective: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class _Skeleton:
    model: LpModel
    here: dict            # component -> var index
    stage_cost: Affine
    costs: list           # per-scenario look-ahead cost (Affine)
    losses: list          # per-scenario look-ahead unserved load (Affine)


def _build(state: SystemState, params: SystemParams, outlook: Outlook, budgets: np.ndarray) -> _Skeleton:
    """``budgets`` has shape (n_scenarios, h): wind available per scenario/lead."""
    p = params
    h = outlook.horizon
    budgets = np.asarray(budgets, dtype=float)
    n_sc = budgets.shape[0] if budgets.ndim == 2 else 1
    budgets = budgets.reshape(n_sc, h)
    model = LpModel(f"lookahead_t{state.t}")

    def h2_ub(allowed: bool) -> float:
        # purchase gating carried as the variable bound
        return p.hydrogen_capacity if allowed else 0.0

    here_allowed = p.acquisition_schedule[state.t]
    here = {c: model.add_variable(0.0, h2_ub(here_allowed) if c == "h" else math.inf, f"{c}_t{state.t}")
            for c in COMPONENTS}
    x0 = {c: Affine.var(j) for c, j in here.items()}
    soc_e = Affine(const=state.battery_level)
    soc_h = Affine(const=state.hydrogen_level)
    for row in [domain.wind_budget_row(x0, state.wind), domain.supply_row(x0, state.demand, p)] \
            + domain.storage_rows(x0, soc_e, soc_h, p, here_allowed):
        if row.name != "purchase_gate":
            add_row(model, row.expr, row.sense, row.rhs, f"{row.name}_t{state.t}")
    stage_cost = domain.cost_expr(x0, state.demand, state.hydrogen_price, p)
    soc_e, soc_h = domain.battery_next(x0, soc_e, p), domain.hydrogen_next(x0, soc_h)

    # Scenario costs/losses split into a part common to all scenarios (shared
    # flows, demand, purchases) and the per-scenario wind-to-load/curtailment
    # terms, so scenario loops only touch two variables each.
    common_cost, common_loss = Affine(), Affine()
    own_cost = [Affine() for _ in range(n_sc)]
    own_loss = [Affine() for _ in range(n_sc)]
    cp, cw = p.loss_penalty, p.curtail_penalty
    for k in range(h):
        tp = state.t + k + 1
        allowed = bool(outlook.purchase_allowed[k])
        idx = {c: model.add_variable(0.0, h2_ub(allowed) if c == "h" else math.inf, f"{c}_t{tp}")
               for c in SHARED}
        shared = {c: Affine.var(j) for c, j in idx.items()}
        for row in domain.storage_rows(shared, soc_e, soc_h, p, allowed):
            if row.name != "purchase_gate":
                add_row(model, row.expr, row.sense, row.rhs, f"{row.name}_t{tp}")
        zero = {"wd": Affine(), "wx": Affine()}
        common_cost.iadd(domain.cost_expr({**shared, **zero}, outlook.demand[k], outlook.price[k], p))
        common_loss.iadd(domain.loss_expr({**shared, **zero}, outlook.demand[k], p))
        supply = {idx["rd"]: p.discharge_eff, idx["hd"]: p.fuel_cell_eff}
        for w in range(n_sc):
            wd = model.add_variable(0.0, math.inf, f"wd_t{tp}_s{w}")
            wx = model.add_variable(0.0, math.inf, f"wx_t{tp}_s{w}")
            # supply and wind budget for this scenario
            model.add_constraint({wd: 1.0, **supply}, Sense.LE, outlook.demand[k], f"supply_t{tp}_s{w}")
            model.add_constraint({idx["wr"]: 1.0, wd: 1.0, wx: 1.0}, Sense.LE, budgets[w, k], f"wind_budget_t{tp}_s{w}")
            own_cost[w].coef.update({wd: -cp, wx: cw})
            own_loss[w].coef[wd] = -1.0
        soc_e, soc_h = domain.battery_next(shared, soc_e, p), domain.hydrogen_next(shared, soc_h)
    costs = [Affine(common_cost.coef, common_cost.const).iadd(o) for o in own_cost]
    losses = [Affine(common_loss.coef, common_loss.const).iadd(o) for o in own_loss]
    return _Skeleton(model, here, stage_cost, costs, losses)


def _solve(sk: _Skeleton, objective: Affine, backend: str) -> tuple[LpSolution, float]:
    sk.model.set_objective(objective.coef)
    sol = solve(sk.model, backend)
    if sol.status is Status.INFEASIBLE:
        raise PolicyError(f"{sk.model.name}: look-ahead LP infeasible")
    if sol.status is Status.UNBOUNDED:
        raise PolicyError(f"{sk.model.name}: look-ahead LP unbounded (model construction bug)")
    return sol, sol.objective + objective.const


def _result(sk: _Skeleton, sol: LpSolution, value: float, **extra) -> PolicyDecision:
    x = sol.primal
    decision = Decision(**{c: max(0.0, float(x[j])) for c, j in sk.here.items()})
    diag = {
        "stage_cost": sk.stage_cost.value(x),
        "scenario_costs": np.array([c.value(x) for c in sk.costs]),
        "scenario_losses": np.array([l.value(x) for l in sk.losses]),
        "lp_iterations": sol.iterations,
    }
    diag.update(extra)
    return PolicyDecision(decision, value, diag)


def _mean(exprs: Sequence[Affine]) -> Affine:
    out = Affine()
    for e in exprs:
        out.iadd(e, 1.0 / len(exprs))
    return out


def decide_dla(state: SystemState, point_forecast: Sequence[float], theta: Theta, params: SystemParams,
               outlook: Outlook, backend: str = "simplex") -> PolicyDecision:
    """Deterministic look-ahead on the discounted point forecast."""
    point_forecast = np.asarray(point_forecast, dtype=float)
    if point_forecast.size != outlook.horizon:
        raise PolicyError(f"point forecast has {point_forecast.size} entries, horizon is {outlook.horizon}")
    sk = _build(state, params, outlook, theta.budgets(point_forecast)[None, :])
    sol, value = _solve(sk, sk.stage_cost + sk.costs[0], backend)
    return _result(sk, sol, value)


def _fan_paths(fan: ScenarioFan, outlook: Outlook) -> np.ndarray:
    if len(fan) < 1:
        raise PolicyError("scenario fan is empty")
    if fan.horizon != outlook.horizon:
        raise PolicyError(f"fan horizon {fan.horizon} does not match outlook horizon {outlook.horizon}")
    return fan.paths


def decide_sla(state: SystemState, fan: ScenarioFan, params: SystemParams, outlook: Outlook,
               backend: str = "simplex") -> PolicyDecision:
    sk = _build(state, params, outlook, _fan_paths(fan, outlook))
    sol, value = _solve(sk, sk.stage_cost + _mean(sk.costs), backend)
    return _result(sk, sol, value)


def decide_scvar(state: SystemState, fan: ScenarioFan, params: SystemParams, outlook: Outlook,
                 risk: RiskConfig, backend: str = "simplex") -> PolicyDecision:
    sk = _build(state, params, outlook, _fan_paths(fan, outlook))
    frag = cvar_epigraph(sk.model, sk.costs, risk.alpha)
    sol, value = _solve(sk, sk.stage_cost + frag.objective, backend)
    return _result(sk, sol, value, cvar_z=float(sol.primal[frag.z]))


def _sbpoe_at(state, paths, params, outlook, risk, gamma, backend):
    sk = _build(state, params, outlook, paths)
    frag = bpoe_epigraph(sk.model, sk.losses, risk.zeta, gamma)
    sol, value = _solve(sk, sk.stage_cost + _mean(sk.costs) + risk.big_m * frag.objective, backend)
    return sk, sol, value


def decide_sbpoe(state: SystemState, fan: ScenarioFan, params: SystemParams, outlook: Outlook,
                 risk: RiskConfig, backend: str = "simplex", gammas: Sequence[float] = GAMMA_GRID,
                 refine: int = GOLDEN_ITERATIONS) -> PolicyDecision:
    """S-LA plus ``M * mean(eta)`` BPoE penalty on cumulative unserved load.

    The scalar ``gamma`` multiplies decision-dependent losses, so it is fixed
    per inner LP and searched outside: a log-spaced grid, then golden-section
    refinement (in log space) between the incumbent's grid neighbours.
    If the largest grid value wins, the grid is extended by decades up to
    ``GAMMA_CEILING``.  Finally the incumbent's breakpoints are tried.  With
    ``refine=0`` or a single grid value only the given grid is searched.
    """
    paths = _fan_paths(fan, outlook)
    grid = sorted(set(float(g) for g in gammas))
    if not grid or grid[0] < 0:
        raise PolicyError("gamma grid must be nonempty and nonnegative")
    cache = {}

    def inner(g):
        if g not in cache:
            cache[g] = _sbpoe_at(state, paths, params, outlook, risk, g, backend)
        return cache[g][2]

    vals = [inner(g) for g in grid]
    i = int(np.argmin(vals))
    # the top of the grid won: keep going up a decade at a time
    top = grid[-1]
    searching = refine > 0 and len(grid) > 1
    while searching and i == len(grid) - 1 and top < GAMMA_CEILING:
        top *= 10.0
        grid.append(top)
        vals.append(inner(top))
        if vals[-1] >= min(vals[:-1]):
            break
        i = len(grid) - 1
    if searching:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, len(grid) - 1)]
        if lo == 0.0:
            # linear search near zero, log search elsewhere
            fwd, inv = (lambda g: g), (lambda u: u)
        else:
            fwd, inv = math.log, math.exp
        a, b = fwd(lo), fwd(hi)
        r = (math.sqrt(5) - 1) / 2
        c, d = b - r * (b - a), a + r * (b - a)
        fc, fd = inner(inv(c)), inner(inv(d))
        for _ in range(refine):
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - r * (b - a)
                fc = inner(inv(c))
            else:
                a, c, fc = c, d, fd
                d = a + r * (b - a)
                fd = inner(inv(d))
    # For a fixed dispatch the best gamma is a kink 1/(zeta - L_w); try the
    # kinks of the incumbent until they stop helping.
    for _ in range(POLISH_ROUNDS if searching else 0):
        best = min(cache, key=lambda g: (cache[g][2], g))
        sk, sol, value = cache[best]
        x = sol.primal
        kinks = {1.0 / (risk.zeta - l.value(x)) for l in sk.losses if l.value(x) < risk.zeta}
        fresh = [g for g in kinks if g not in cache and g <= GAMMA_CEILING]
        if not fresh:
            break
        if min(inner(g) for g in fresh) >= value:
            break
    # ties resolved towards the smallest gamma
    best = min(cache, key=lambda g: (cache[g][2], g))
    sk, sol, value = cache[best]
    eta = np.array(_eta_values(sk, sol, risk, best))
    return _result(sk, sol, value, gamma=best, eta=eta, lp_solves=len(cache))


def _eta_values(sk, sol, risk, gamma):
    x = sol.primal
    return [max(0.0, gamma * (l.value(x) - risk.zeta) + 1.0) for l in sk.losses]


# ---------------------------------------------------------------------------
# policy objects driven by the simulator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DLAPolicy:
    theta: Theta
    backend: str = "simplex"
    needs_fan = False

    @property
    def name(self) -> str:
        return f"D-LA(theta={self.theta.label()})"

    def decide(self, state, point_forecast, fan, params, outlook) -> PolicyDecision:
        return decide_dla(state, point_forecast, self.theta, params, outlook, self.backend)


@dataclass(frozen=True)
class SLAPolicy:
    fan_size: int = 20
    backend: str = "simplex"
    needs_fan = True
    name = "S-LA"

    def decide(self, state, point_forecast, fan, params, outlook) -> PolicyDecision:
        return decide_sla(state, fan, params, outlook, self.backend)


@dataclass(frozen=True)
class SCVaRPolicy:
    risk: RiskConfig
    fan_size: int = 20
    backend: str = "simplex"
    needs_fan = True

    @property
    def name(self) -> str:
        return f"S-CVaR(alpha={self.risk.alpha:g})"

    def decide(self, state, point_forecast, fan, params, outlook) -> PolicyDecision:
        return decide_scvar(state, fan, params, outlook, self.risk, self.backend)


@dataclass(frozen=True)
class SBPoEPolicy:
    risk: RiskConfig
    fan_size: int = 20
    backend: str = "simplex"
    refine: int = GOLDEN_ITERATIONS
    needs_fan = True

    @property
    def name(self) -> str:
        return f"S-BPoE(zeta={self.risk.zeta:g})"

    def decide(self, state, point_forecast, fan, params, outlook) -> PolicyDecision:
        return decide_sbpoe(state, fan, params, outlook, self.risk, self.backend, refine=self.refine)


Policy = Union[DLAPolicy, SLAPolicy, SCVaRPolicy, SBPoEPolicy]
