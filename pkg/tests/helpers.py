"""Small instance builders shared by the tests."""
from __future__ import annotations

import numpy as np

from riskcfa.domain import SystemParams, SystemState, weekly_schedule
from riskcfa.forecast import ExogenousSeries, ForecastModel, ScenarioFan
from riskcfa.policy import Outlook
from riskcfa.sim import Instance


def params(T=10, H=3, peak=10.0, **kw) -> SystemParams:
    return SystemParams.from_peak(peak, episode_length=T, horizon=H, **kw)


def tiny_problem(inst: dict):
    """Two-step, two-scenario problem without a battery (see ``oracles.tiny_grid``)."""
    big = 1e3
    p = SystemParams(
        battery_capacity=0.0, hydrogen_capacity=inst["Hc"], charge_eff=1.0, discharge_eff=1.0,
        fuel_cell_eff=inst["bh"], charge_limit=big, discharge_limit=big, fuel_cell_limit=big,
        loss_penalty=inst["Cp"], curtail_penalty=0.8 * inst["Cp"], acquisition_schedule=(True, False),
        horizon=1, episode_length=2)
    state = SystemState(0, inst["D0"], inst["E0"], inst["P0"], 0.0, inst["RH0"])
    outlook = Outlook(np.array([inst["D1"]]), np.array([inst["P0"]]), np.array([False]))
    fan = ScenarioFan(np.array([np.mean(inst["E1"])]), np.array(inst["E1"], float).reshape(2, 1))
    return state, fan, p, outlook


def random_tiny(rng: np.random.Generator) -> dict:
    """Data on a 0.002 grid so every LP vertex sits on the 1e-3 search grid."""
    g = lambda lo, hi: 0.002 * rng.integers(int(lo / 0.002), int(hi / 0.002) + 1)  # noqa: E731
    return dict(D0=g(0.05, 0.2), E0=g(0.0, 0.2), P0=g(0.05, 0.6), RH0=g(0.0, 0.1), Hc=0.2, bh=0.5,
                D1=g(0.1, 0.3), E1=[g(0.0, 0.3), g(0.0, 0.3)], Cp=1.0)


def random_state(rng: np.random.Generator, p: SystemParams, t: int = 0, peak: float = 10.0) -> SystemState:
    return SystemState(t, float(rng.uniform(0, peak)), float(rng.uniform(0, 1.5 * peak)),
                       float(rng.uniform(10, 80)), float(rng.uniform(0, p.battery_capacity)),
                       float(rng.uniform(0, p.hydrogen_capacity)))


def random_outlook(rng: np.random.Generator, p: SystemParams, t: int = 0, peak: float = 10.0) -> Outlook:
    h = min(p.horizon, p.episode_length - 1 - t)
    return Outlook(rng.uniform(0, peak, h), rng.uniform(10, 80, h),
                   np.array(p.acquisition_schedule[t + 1:t + 1 + h], dtype=bool))


def flat_instance(T=5, H=5, demand=5.0, wind=8.0, price=40.0, rho=0.0, peak=10.0, **kw) -> Instance:
    p = params(T=T, H=H, peak=peak, **kw)
    ex = ExogenousSeries(np.full(T, demand), np.full(T, price), wind)
    return Instance.from_params(p, ex, ForecastModel(rho))


def schedule(T, every=7, start=1):
    return weekly_schedule(T, every, start)
