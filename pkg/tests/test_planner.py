from decimal import Decimal

import pytest
from hypothesis import given, settings, strategies as st

from oracles import schedule_oracle
from vencoord.config import load_fixture
from vencoord.domain import BomEdge, Conditions, CostModel, DemandLine, Scenario
from vencoord.planner import (
    ContractViolation, InfeasibleByTime, PlannerAgent, PlannerProtocolError, ProductionLot, Schedule, check_capacity,
    check_profile, evaluate_scenarios, explode_requirements, generate_scenarios, kit_availability, net_requirement,
    plan_cost, split_order_id,
)
from vencoord.protocol import MessageKind as K, PlanRequest, Proposal

TAP_BOM = (BomEdge("PF", "SCBBA", 1, 4), BomEdge("PF", "SCBA", 2, 4), BomEdge("PF", "SCA", 1, 4))
TAP_IDLE = {148: 20, 149: 30, 150: 30, 151: 30, 152: 0}


def tap(name="case2"):
    ven = load_fixture(name).network.ven("tap")
    return PlannerAgent(ven, dict(ven.stocks), ven.idle())


def test_net_requirement():
    assert net_requirement(100, 20) == 80
    assert net_requirement(10, 20) == 0
    with pytest.raises(ValueError):
        net_requirement(-1, 0)


def test_explosion_with_lead_offset():
    stocks = {"SCA": 20, "SCBA": 160, "SCBBA": 80}
    exp = explode_requirements(ProductionLot("o1", "PF", 152, 80), TAP_BOM, stocks, 148)
    assert exp.lines == (DemandLine("SCA", 148, 60),)
    assert exp.consumed == {"SCBBA": 80, "SCBA": 160, "SCA": 20}
    assert stocks["SCA"] == 20  # untouched


def test_explosion_before_horizon():
    with pytest.raises(InfeasibleByTime):
        explode_requirements(ProductionLot("o", "PF", 150, 100), TAP_BOM, {}, 148)


def test_kit_availability_next_day_rule():
    avail = kit_availability("PF", TAP_BOM, {"SCA": 20, "SCBA": 160, "SCBBA": 80},
                             {"SCA": (DemandLine("SCA", 148, 60),)}, 80)
    assert avail == {0: 20, 149: 60}


def test_check_capacity_feasible_schedule():
    res = check_capacity(ProductionLot("o", "PF", 152, 80), TAP_IDLE, {0: 20, 149: 60})
    assert res.feasible and res.schedule.production == {148: 20, 149: 30, 150: 30}


def test_check_capacity_shortfall_and_cause():
    res = check_capacity(ProductionLot("o", "PF", 152, 80), TAP_IDLE, {0: 20, 151: 60})
    assert not res.feasible and res.shortfall == 30 and res.cause == "components"
    res = check_capacity(ProductionLot("o", "P", 2, 30), {0: 5, 1: 5, 2: 5, 3: 10, 4: 10}, {0: 30})
    assert (res.shortfall, res.completion, res.cause) == (15, 4, "capacity")


def test_overtime_and_subcontract():
    idle = {0: 5, 1: 5, 2: 5}
    res = check_profile([DemandLine("P", 2, 21)], idle, {0: 100}, Conditions(overtime_cap=2))
    assert res.feasible and res.schedule.overtime == {1: 2, 2: 2, 0: 2} and res.schedule.produced == 21
    res = check_profile([DemandLine("P", 2, 20)], idle, {0: 100}, Conditions(subcontract_cap=5))
    assert res.feasible and res.schedule.subcontracted == 5


def test_generate_scenarios_blister():
    idle = {d: 10 for d in range(145, 161)}
    out = generate_scenarios(DemandLine("SCA", 148, 60), idle, {0: 60})
    assert [s.lines for s in out] == [
        (DemandLine("SCA", 148, 40), DemandLine("SCA", 150, 20)), (DemandLine("SCA", 150, 60),)]
    assert [s.label for s in generate_scenarios(DemandLine("SCA", 148, 60), idle, {0: 60}, ("delayed",))] == ["delayed"]
    with pytest.raises(ContractViolation):
        generate_scenarios(DemandLine("SCA", 160, 60), idle, {0: 60})
    assert generate_scenarios(DemandLine("SCA", 148, 600), idle, {0: 600}) == []


def test_plan_cost():
    c = plan_cost(Schedule({1: 10}, {1: 2}, 3), CostModel("2", "3", "4", "0.5"), late_unit_days=4)
    assert (c.production, c.overtime, c.subcontract, c.lateness_penalty) == (
        Decimal("20.00"), Decimal("6.00"), Decimal("12.00"), Decimal("2.00"))
    assert c.total == Decimal("40.00")


def test_split_order_id():
    assert split_order_id("o1/SCA") == ("o1", "SCA")
    assert split_order_id("o1") == ("o1", None)


def test_agent_new_order_and_assessment():
    pa = tap()
    kind, reply = pa.handle(K.D_PA_N, PlanRequest("o1", (DemandLine("PF", 152, 80),)))
    assert kind == K.R_PA_US and reply.accepted and reply.needs == (DemandLine("SCA", 148, 60),)
    split = Scenario((DemandLine("SCA", 148, 40), DemandLine("SCA", 150, 20)), "split")
    delayed = Scenario((DemandLine("SCA", 150, 60),), "delayed")
    kind, verdict = pa.handle(K.D_PA_A, Proposal("o1/SCA", (split, delayed)))
    assert kind == K.R_PA_DS and verdict.accepted and verdict.scenario == split
    assert pa.ledger["o1"].schedule.production == {148: 20, 149: 30, 150: 10, 151: 20}


def test_agent_rejects_delayed_only():
    pa = tap()
    pa.handle(K.D_PA_N, PlanRequest("o1", (DemandLine("PF", 152, 80),)))
    _, verdict = pa.handle(K.D_PA_A, Proposal("o1/SCA", (Scenario((DemandLine("SCA", 150, 60),), "delayed"),)))
    assert not verdict.accepted


def test_agent_protocol_errors():
    pa = tap()
    pa.handle(K.D_PA_N, PlanRequest("o1", (DemandLine("PF", 152, 80),)))
    with pytest.raises(PlannerProtocolError):
        pa.handle(K.D_PA_N, PlanRequest("o1", (DemandLine("PF", 152, 80),)))
    with pytest.raises(PlannerProtocolError):
        pa.handle(K.D_PA_M, PlanRequest("zz", (DemandLine("PF", 152, 80),)))
    with pytest.raises(PlannerProtocolError):
        pa.handle(K.R_PA_US, None)


def test_modification_releases_capacity():
    pa = tap()
    before = dict(pa.idle)
    pa.handle(K.D_PA_N, PlanRequest("o1", (DemandLine("PF", 152, 80),)))
    pa.handle(K.D_PA_M, PlanRequest("o1", (DemandLine("PF", 152, 10),)))
    assert sum(before.values()) - sum(pa.idle.values()) == 10


def test_evaluate_scenarios_returns_none_when_nothing_fits():
    pa = tap("case3")
    pa.handle(K.D_PA_N, PlanRequest("o1", (DemandLine("PF", 152, 80),)))
    ctx = pa.context("o1")
    assert evaluate_scenarios(ctx, "SCA", [Scenario((DemandLine("SCA", 150, 60),))]) is None


@settings(max_examples=300, deadline=None)
@given(st.dictionaries(st.integers(0, 9), st.integers(0, 10), min_size=1, max_size=10),
       st.dictionaries(st.integers(0, 10), st.integers(0, 30), max_size=3),
       st.integers(0, 50), st.integers(0, 10))
def test_check_capacity_matches_exhaustive_search(idle, avail, qty, due):
    res = check_capacity(ProductionLot("x", "P", due, qty), idle, avail)
    feasible, completion = schedule_oracle(qty, due, idle, avail)
    assert res.feasible == feasible
    if qty:
        assert res.completion == completion
    if res.feasible:
        assert all(res.schedule.production[d] <= idle[d] for d in res.schedule.production)
        assert res.schedule.produced == qty
