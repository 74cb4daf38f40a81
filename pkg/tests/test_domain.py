import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import params
from riskcfa import domain
from riskcfa.domain import (Decision, DomainError, StorageBoundsError, SystemParams, SystemState, stage_cost,
                            transition, unserved_load, violations, weekly_schedule)

P = params(T=10, H=3, peak=10.0)


def state(**kw):
    base = dict(t=0, demand=10.0, wind=5.0, hydrogen_price=60.0, battery_level=5.0, hydrogen_level=3.0)
    base.update(kw)
    return SystemState(**base)


def test_from_peak_dimensioning():
    p = SystemParams.from_peak(1913.0, episode_length=365)
    assert p.battery_capacity == pytest.approx(4 * 1913.0)
    assert p.hydrogen_capacity == pytest.approx(6 / 0.6 * 1913.0)
    assert p.charge_limit == p.discharge_limit == p.fuel_cell_limit == 1913.0
    assert p.acquisition_schedule[:9] == (False, True, False, False, False, False, False, False, True)


@pytest.mark.parametrize("kw", [dict(charge_eff=0.0), dict(loss_penalty=-1.0), dict(horizon=-1),
                                dict(acquisition_schedule=(True,))])
def test_param_validation(kw):
    with pytest.raises(DomainError):
        P.with_(**kw)


def test_state_validation():
    with pytest.raises(DomainError):
        state(battery_level=P.battery_capacity + 1).validate(P)
    with pytest.raises(DomainError):
        state(wind=-1).validate(P)


def test_zero_wind_forces_wind_flows_to_zero():
    s = state(wind=0.0)
    for comp in ("wd", "wr", "wx"):
        bad = violations(Decision(**{comp: 0.1}), s, P, True)
        assert "wind_budget" in bad


def test_purchase_gate():
    s = state()
    assert "purchase_gate" in violations(Decision(h=0.5), s, P, False)
    assert not violations(Decision(h=0.5), s, P, True)


def test_full_battery_has_no_headroom():
    s = state(battery_level=P.battery_capacity)
    assert "battery_headroom" in violations(Decision(wr=0.1), s, P, True)
    assert "battery_headroom" in violations(Decision(hr=0.1), s, P, True)


def test_transition_examples():
    p = P.with_(charge_eff=1.0)
    s = state(battery_level=5.0, hydrogen_level=3.0)
    nxt = transition(s, Decision(rd=2, wr=1, hr=0), p, (1, 2, 3))
    assert nxt.battery_level == 4.0
    nxt = transition(s, Decision(hd=1, hr=1, h=2), p, (1, 2, 3))
    assert nxt.hydrogen_level == 3.0
    nxt = transition(s, Decision(), p, (1, 2, 3))
    assert (nxt.battery_level, nxt.hydrogen_level, nxt.t) == (5.0, 3.0, 1)
    assert (nxt.demand, nxt.wind, nxt.hydrogen_price) == (1, 2, 3)


def test_transition_rejects_out_of_bounds():
    with pytest.raises(StorageBoundsError):
        transition(state(battery_level=1.0), Decision(rd=2.0), P, (0, 0, 0))


def test_stage_cost_examples():
    p = P.with_(loss_penalty=1000.0, curtail_penalty=800.0)
    assert stage_cost(state(demand=10), Decision(wd=10), p) == 0.0
    assert stage_cost(state(demand=10), Decision(), p) == 10000.0
    # L = 2 from wd = 8
    assert stage_cost(state(demand=10, hydrogen_price=60), Decision(wd=8, wx=1, h=3), p) == pytest.approx(2980)


def test_unserved_load_examples():
    p = P.with_(discharge_eff=1.0, fuel_cell_eff=0.6)
    assert unserved_load(state(demand=10), Decision(wd=4, rd=3, hd=5), p) == pytest.approx(0.0)
    assert unserved_load(state(demand=10), Decision(), p) == 10.0
    assert unserved_load(state(demand=0), Decision(), p) == 0.0


def test_weekly_schedule():
    assert weekly_schedule(9) == (False, True, False, False, False, False, False, False, True)


decisions = st.builds(lambda v: Decision.from_array(v),
                      st.lists(st.floats(0, 20, allow_nan=False), min_size=7, max_size=7))


@settings(max_examples=200, deadline=None)
@given(decisions, decisions, st.floats(0, 30), st.floats(0, 100))
def test_stage_cost_affine_identity(x, y, demand, price):
    s = state(demand=demand, hydrogen_price=price)
    raw = lambda d: (P.loss_penalty * (s.demand - d.wd - P.discharge_eff * d.rd - P.fuel_cell_eff * d.hd)  # noqa
                     + P.curtail_penalty * d.wx + price * d.h)
    # the affine identity holds for the formula; stage_cost equals it away from the snap region
    assert raw(x) + raw(y) - raw(x + y) == pytest.approx(P.loss_penalty * demand, rel=1e-9, abs=1e-6)
    if unserved_load(s, x, P) > 0:
        assert stage_cost(s, x, P) == pytest.approx(raw(x), rel=1e-12, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_feasible_decisions_keep_storage_in_bounds(seed):
    rng = np.random.default_rng(seed)
    s = SystemState(0, rng.uniform(0, 10), rng.uniform(0, 15), 40.0,
                    rng.uniform(0, P.battery_capacity), rng.uniform(0, P.hydrogen_capacity))
    x = Decision.from_array(rng.uniform(0, 10, 7) * (rng.uniform(size=7) < 0.5))
    allowed = bool(rng.integers(2))
    if violations(x, s, P, allowed):
        return
    assert unserved_load(s, x, P) >= -1e-6
    nxt = transition(s, x, P, (0, 0, 0))
    assert -1e-6 <= nxt.battery_level <= P.battery_capacity + 1e-6
    assert -1e-6 <= nxt.hydrogen_level <= P.hydrogen_capacity + 1e-6


def test_feasibility_rows_cover_all_groups():
    names = {r.name for r in domain.feasibility_rows(state(), P, True)}
    for prefix in ("wind_budget", "supply", "purchase_gate", "battery_draw", "hydrogen_draw",
                   "hydrogen_headroom", "battery_headroom", "charge_rate", "discharge_rate", "fuel_cell_rate", "nonneg"):
        assert any(n.startswith(prefix) for n in names)
