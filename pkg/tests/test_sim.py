import math

import numpy as np
import pytest

from helpers import flat_instance, params
from oracles import clairvoyant_cost
from riskcfa.domain import Decision, stage_cost
from riskcfa.forecast import ExogenousSeries, ForecastModel
from riskcfa.policy import DLAPolicy, PolicyDecision, SLAPolicy, Theta
from riskcfa.sim import EpisodeError, Instance, evaluate, run_episode, run_scenario


class ShedAll:
    name = "shed"
    needs_fan = False

    def decide(self, state, point, fan, params, outlook):
        return PolicyDecision(Decision(), 0.0)


class Greedy:
    """Overdraws the battery on purpose."""
    name = "bad"
    needs_fan = False

    def decide(self, state, point, fan, params, outlook):
        return PolicyDecision(Decision(rd=state.battery_level + 1.0), 0.0)


class Recorder:
    def __init__(self):
        self.winds = []
        self.name = "rec"
        self.needs_fan = False

    def decide(self, state, point, fan, params, outlook):
        self.winds.append(state.wind)
        return PolicyDecision(Decision(), 0.0)


def series_instance(demand, wind0, rho=0.3, H=3, price=40.0, **kw):
    T = len(demand)
    p = params(T=T, H=H, **kw)
    ex = ExogenousSeries(np.asarray(demand, float), np.full(T, price), wind0)
    return Instance.from_params(p, ex, ForecastModel(rho))


def test_single_step_episode():
    inst = flat_instance(T=1, H=1)
    tr = run_scenario(DLAPolicy(Theta.constant(1.0)), inst, 0, 0)
    assert len(tr) == 1
    assert tr.total_cost == pytest.approx(stage_cost(tr.steps[0].state, tr.steps[0].decision, inst.params))


def test_shed_all_loses_all_demand():
    inst = series_instance([3.0, 4.0, 5.0, 6.0], 2.0)
    tr = run_scenario(ShedAll(), inst, 1, 0)
    assert tr.total_loss == pytest.approx(18.0)


def test_infeasible_policy_reports_step():
    inst = series_instance([3.0, 4.0], 2.0)
    with pytest.raises(EpisodeError) as info:
        run_scenario(Greedy(), inst, 0, 0)
    assert info.value.step == 0


def test_truth_length_checked():
    inst = flat_instance(T=4)
    with pytest.raises(ValueError):
        run_episode(ShedAll(), np.ones(3), inst)


@pytest.mark.parametrize("T, wind", [(6, 4.0), (8, 7.0), (5, 2.0)])
def test_deterministic_dla_is_clairvoyant(T, wind):
    rng = np.random.default_rng(T)
    demand = rng.uniform(2.0, 9.0, T)
    inst = series_instance(demand, wind, rho=0.0, H=T, price=30.0)
    tr = run_scenario(DLAPolicy(Theta.constant(1.0)), inst, 0, 0)
    ref = clairvoyant_cost(inst.params, demand, np.full(T, wind), inst.exogenous.hydrogen_price,
                           inst.initial_battery, inst.initial_hydrogen)
    assert tr.total_cost == pytest.approx(ref, abs=1e-5)


def test_trace_accounting():
    inst = series_instance(np.random.default_rng(0).uniform(2, 9, 20), 6.0, rho=0.4, H=4)
    p = inst.params
    tr = run_scenario(DLAPolicy(Theta.constant(0.6)), inst, 3, 1)
    assert tr.total_cost == pytest.approx(sum(s.cost for s in tr.steps), abs=1e-9)
    r_e, r_h = inst.initial_battery, inst.initial_hydrogen
    for rec in tr.steps:
        d = rec.decision
        r_e += -d.rd + p.charge_eff * (d.wr + p.fuel_cell_eff * d.hr)
        r_h += d.h - d.hd - d.hr
        assert rec.seconds > 0 and math.isfinite(rec.seconds)
    assert tr.final_state.battery_level == pytest.approx(r_e, abs=1e-7)
    assert tr.final_state.hydrogen_level == pytest.approx(r_h, abs=1e-9)


def test_evaluate_single_scenario_summary():
    inst = series_instance([3.0, 4.0, 5.0], 1.0)
    s = evaluate(DLAPolicy(Theta.constant(0.5)), inst, 1, 4, zeta=0.0)
    assert s.mean_cost == s.cost_quantiles[0.8] == s.cost_quantiles[0.9] == s.cost_quantiles[0.95]


def test_evaluate_bpoe_at_zero_and_quantile_order():
    inst = series_instance(np.full(6, 8.0), 1.0, battery_capacity=1.0, hydrogen_capacity=1.0)
    s = evaluate(ShedAll(), inst, 4, 0, zeta=0.0)
    assert s.losses.mean() > 0 and s.bpoe_loss == 1.0
    q = s.cost_quantiles
    assert q[0.8] <= q[0.9] <= q[0.95]


def test_paired_truth_paths():
    inst = series_instance(np.full(8, 5.0), 5.0, rho=0.5)
    a, b = Recorder(), Recorder()
    for i in range(3):
        run_scenario(a, inst, 9, i)
        run_scenario(b, inst, 9, i)
    assert a.winds == b.winds
    c = Recorder()
    run_scenario(c, inst, 10, 0)
    assert c.winds != a.winds[:8]


def test_evaluate_names_failing_scenario():
    inst = series_instance([3.0, 4.0], 2.0)
    with pytest.raises(EpisodeError, match="seed 5, scenario 0"):
        evaluate(Greedy(), inst, 2, 5)


def test_stochastic_policy_runs_closed_loop():
    inst = series_instance(np.random.default_rng(2).uniform(2, 9, 8), 6.0, rho=0.3, H=3)
    s = evaluate(SLAPolicy(fan_size=4), inst, 2, 0)
    assert s.costs.shape == (2,) and np.all(np.isfinite(s.costs))
