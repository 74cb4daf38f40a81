"""Closed-loop rolling-horizon simulation and out-of-sample evaluation."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import domain, risk
from .domain import Decision, SystemParams, SystemState
from .forecast import FAN, TRUTH, ExogenousSeries, ForecastModel, sample_fan, stream, truth_path
from .policy import Outlook, PolicyDecision

QUANTILE_LEVELS = (0.80, 0.90, 0.95)


class EpisodeError(RuntimeError):
    def __init__(self, step: int, message: str, seed: Optional[int] = None, scenario: Optional[int] = None):
        self.step = step
        self.detail = message
        self.seed = seed
        self.scenario = scenario
        where = f"step {step}" if seed is None else f"seed {seed}, scenario {scenario}, step {step}"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Instance:
    """Everything a closed-loop run needs besides the policy and the seed."""

    params: SystemParams
    exogenous: ExogenousSeries
    forecast: ForecastModel
    initial_battery: float
    initial_hydrogen: float

    @classmethod
    def from_params(cls, params: SystemParams, exogenous: ExogenousSeries, forecast: ForecastModel,
                    battery_fraction: float = 0.5, hydrogen_fraction: float = 0.5) -> "Instance":
        if len(exogenous) < params.episode_length:
            raise ValueError(f"exogenous series has {len(exogenous)} steps, "
                             f"episode needs {params.episode_length}")
        return cls(params, exogenous.head(params.episode_length), forecast,
                   battery_fraction * params.battery_capacity,
                   hydrogen_fraction * params.hydrogen_capacity)

    @property
    def T(self) -> int:
        return self.params.episode_length

    def initial_state(self, wind0: float) -> SystemState:
        ex = self.exogenous
        return SystemState(0, float(ex.demand[0]), float(wind0), float(ex.hydrogen_price[0]),
                           self.initial_battery, self.initial_hydrogen)

    def truth(self, seed: int, index: int) -> np.ndarray:
        return truth_path(self.forecast, self.exogenous.initial_wind, self.T, stream(seed, TRUTH, index))


@dataclass(frozen=True)
class StepRecord:
    state: SystemState
    decision: Decision
    cost: float
    loss: float
    seconds: float

    @property
    def curtailment(self) -> float:
        return self.decision.wx

    @property
    def purchase(self) -> float:
        return self.decision.h


@dataclass
class EpisodeTrace:
    steps: list = field(default_factory=list)
    final_state: Optional[SystemState] = None

    @property
    def total_cost(self) -> float:
        return float(sum(s.cost for s in self.steps))

    @property
    def total_loss(self) -> float:
        return float(sum(s.loss for s in self.steps))

    @property
    def mean_decision_seconds(self) -> float:
        return float(np.mean([s.seconds for s in self.steps]))

    def __len__(self) -> int:
        return len(self.steps)


def run_episode(policy, truth: Sequence[float], instance: Instance,
                fan_rng: Optional[Callable[[int], np.random.Generator]] = None,
                fan_size: Optional[int] = None) -> EpisodeTrace:
    """Roll ``policy`` forward along the realised wind path ``truth``.

    At step ``t`` only ``truth[t]`` is revealed; the point forecast for all
    lead times is that value and scenario fans are sampled forward from it
    with ``fan_rng(t)``.  Infeasible decisions abort the episode.
    """
    params, ex = instance.params, instance.exogenous
    T = instance.T
    truth = np.asarray(truth, dtype=float)
    if truth.size != T:
        raise ValueError(f"truth path has {truth.size} steps, episode has {T}")
    needs_fan = getattr(policy, "needs_fan", False)
    if needs_fan and fan_rng is None:
        raise ValueError(f"{policy.name} needs scenario fans but no fan stream was given")
    n_fan = fan_size or getattr(policy, "fan_size", 1)

    trace = EpisodeTrace()
    state = instance.initial_state(truth[0])
    for t in range(T):
        outlook = Outlook.at(ex, params, t)
        h = outlook.horizon
        point = np.full(h, state.wind)
        fan = sample_fan(state.wind, h, n_fan, instance.forecast, fan_rng(t)) if needs_fan else None
        tic = time.perf_counter()
        try:
            pd: PolicyDecision = policy.decide(state, point, fan, params, outlook)
        except Exception as exc:  # surfaced with the step index
            raise EpisodeError(t, f"policy failed: {exc}") from exc
        seconds = time.perf_counter() - tic
        x = pd.decision
        bad = domain.violations(x, state, params, params.acquisition_schedule[t])
        if bad:
            raise EpisodeError(t, f"infeasible decision {x}: {bad}")
        cost = domain.stage_cost(state, x, params)
        loss = domain.unserved_load(state, x, params)
        trace.steps.append(StepRecord(state, x, cost, loss, seconds))
        if t + 1 < T:
            nxt = (ex.demand[t + 1], truth[t + 1], ex.hydrogen_price[t + 1])
        else:
            nxt = (0.0, 0.0, 0.0)
        try:
            state = domain.transition(state, x, params, nxt)
        except domain.StorageBoundsError as exc:
            raise EpisodeError(t, str(exc)) from exc
    trace.final_state = state
    return trace


def run_scenario(policy, instance: Instance, seed: int, index: int) -> EpisodeTrace:
    """Episode ``index`` of the seed set: truth and fans from split streams."""
    truth = instance.truth(seed, index)
    return run_episode(policy, truth, instance, lambda t: stream(seed, FAN, index, t))


@dataclass(frozen=True)
class EvaluationSummary:
    policy: str
    mean_cost: float
    cost_quantiles: dict
    zeta: float
    bpoe_loss: float
    mean_decision_seconds: float
    costs: np.ndarray = field(repr=False)
    losses: np.ndarray = field(repr=False)


def summarize(name: str, costs, losses, zeta: float, seconds: float = float("nan")) -> EvaluationSummary:
    costs = np.asarray(costs, dtype=float)
    losses = np.asarray(losses, dtype=float)
    q = {a: risk.var(costs, a) for a in QUANTILE_LEVELS}
    return EvaluationSummary(name, float(costs.mean()), q, float(zeta), risk.bpoe(losses, zeta),
                             seconds, costs, losses)


def evaluate(policy, instance: Instance, scenario_count: int, seed: int, zeta: float = 0.0) -> EvaluationSummary:
    """Run ``scenario_count`` seeded episodes; equal seeds mean equal truth paths."""
    if scenario_count < 1:
        raise ValueError("scenario_count must be >= 1")
    costs, losses, secs = [], [], []
    for i in range(scenario_count):
        try:
            tr = run_scenario(policy, instance, seed, i)
        except EpisodeError as exc:
            raise EpisodeError(exc.step, exc.detail, seed=seed, scenario=i) from exc
        costs.append(tr.total_cost)
        losses.append(tr.total_loss)
        secs.append(tr.mean_decision_seconds)
    return summarize(policy.name, costs, losses, zeta, float(np.mean(secs)))
