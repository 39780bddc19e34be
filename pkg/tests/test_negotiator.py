import pytest

from conftest import run_case
from vencoord.config import load_fixture
from vencoord.domain import DemandLine, Scenario
from vencoord.negotiator import NegotiatorAgent, na_step, snapshot_state
from vencoord.planner import PlannerAgent
from vencoord.protocol import (
    Message, MessageKind as K, NaState as S, OrderLines, PlanReply, PlanRequest, Probe, Proposal, ProtocolViolation,
    Reply,
)


def agent(case, vid):
    net = load_fixture(case).network
    ven = net.ven(vid)
    return NegotiatorAgent(ven, net, PlannerAgent(ven, dict(ven.stocks), ven.idle()))


def msg(kind, payload, sender, to, seq=1):
    return Message(seq, 140, sender, to, kind, payload)


def test_new_order_nets_finished_goods():
    na = agent("case1", "tap")
    state, out = na_step(na, msg(K.C_US, OrderLines("o1", (DemandLine("PF", 152, 100),)), "client", "tap.NA"))
    assert state == S.AWAITING_PLANNER
    assert [(p.to, p.kind, p.payload.lines) for p in out] == [("tap.PA", K.D_PA_N, (DemandLine("PF", 152, 80),))]


def test_planner_yes_orders_components_then_delivery_concludes():
    na = agent("case1", "tap")
    na.receive(msg(K.C_US, OrderLines("o1", (DemandLine("PF", 152, 100),)), "client", "tap.NA"))
    na.planner.handle(K.D_PA_N, PlanRequest("o1", (DemandLine("PF", 152, 80),)))
    out = na.receive(msg(K.R_PA_US, PlanReply("o1", True, (DemandLine("SCA", 148, 60),)), "tap.PA", "tap.NA"))
    assert [(p.to, p.kind) for p in out] == [("blister.NA", K.C_DS)]
    assert na.state_of("o1") == S.AWAITING_SUPPLIER
    state, out = na_step(na, msg(K.A_DS, OrderLines("o1/SCA", (DemandLine("SCA", 148, 60),)), "blister.NA", "tap.NA"))
    assert state == S.DONE
    assert [(p.to, p.kind, p.payload.lines) for p in out] == [("client", K.A_US, (DemandLine("PF", 152, 100),))]
    assert na.state_of("o1") == S.DONE and na.convs["o1"].outcome == "contracted"


def test_stock_covers_order_directly():
    na = agent("case1", "tap")
    out = na.receive(msg(K.C_US, OrderLines("o9", (DemandLine("PF", 152, 5),)), "client", "tap.NA"))
    assert [p.kind for p in out] == [K.A_US] and na.stock["PF"] == 15


def test_counter_proposal_and_refusal_escalates():
    na = agent("case3", "blister")
    na.receive(msg(K.C_DS, OrderLines("o1/SCA", (DemandLine("SCA", 148, 60),)), "tap.NA", "blister.NA"))
    _, reply = na.planner.handle(K.D_PA_N, PlanRequest("o1/SCA", (DemandLine("SCA", 148, 60),)))
    out = na.receive(msg(K.R_PA_US, reply, "blister.PA", "blister.NA"))
    assert [p.kind for p in out] == [K.N_DS]
    assert [s.lines for s in out[0].payload.scenarios] == [(DemandLine("SCA", 150, 60),)]
    out = na.receive(msg(K.RN_DS, Reply("o1/SCA", False), "tap.NA", "blister.NA"))
    assert [(p.to, p.kind) for p in out] == [("TNA2", K.HELP)]
    assert out[0].payload.shortfall == (DemandLine("SCA", 148, 20),) and out[0].payload.refused_by == "tap"
    assert na.state_of("o1/SCA") == S.BLOCKED
    snap = na.snapshot()
    assert snap.blocked == (("o1/SCA", (DemandLine("SCA", 148, 20),)),)


def test_supplier_counter_goes_to_planner():
    na = agent("case2", "tap")
    na.receive(msg(K.C_US, OrderLines("o1", (DemandLine("PF", 152, 100),)), "client", "tap.NA"))
    na.receive(msg(K.R_PA_US, PlanReply("o1", True, (DemandLine("SCA", 148, 60),)), "tap.PA", "tap.NA"))
    sc = Scenario((DemandLine("SCA", 150, 60),), "delayed")
    out = na.receive(msg(K.N_DS, Proposal("o1/SCA", (sc,)), "blister.NA", "tap.NA"))
    assert [(p.to, p.kind) for p in out] == [("tap.PA", K.D_PA_A)]
    out = na.receive(msg(K.R_PA_DS, Reply("o1/SCA", False), "tap.PA", "tap.NA"))
    assert [(p.to, p.kind, p.payload.accepted) for p in out] == [("blister.NA", K.RN_DS, False)]
    assert na.state_of("o1/SCA") == S.AWAITING_SUPPLIER


def test_illegal_inbound_is_a_violation():
    na = agent("case1", "tap")
    with pytest.raises(ProtocolViolation):
        na.receive(msg(K.R_PA_US, PlanReply("o1", True), "tap.PA", "tap.NA"))
    with pytest.raises(ProtocolViolation):
        na.receive(msg(K.A_DS, OrderLines("o1/SCA", ()), "blister.NA", "tap.NA"))


def test_probe_answers_with_snapshot():
    na = agent("case1", "blister")
    out = na.receive(msg(K.D_TNA, Probe("p"), "TNA2", "blister.NA"))
    assert [(p.to, p.kind) for p in out] == [("TNA2", K.R_TNA)]
    assert out[0].payload.blocked == () and sum(q for _, q in out[0].payload.load) == 0


def test_snapshot_state_full_capacity():
    ven = load_fixture("case1").network.ven("blister")
    snap = snapshot_state(ven, {d: 0 for d in ven.capacity.days})
    assert snap.idle_through(10 ** 6) == 0
    assert all(load == ven.capacity.at(d) for d, load in snap.load)


def test_golden_runs_emit_only_legal_messages():
    for case in ("case1", "case2", "case3", "case3b", "case4"):
        _, result = run_case(case)
        assert result.violations == []


def test_every_client_order_concludes_once():
    for case in ("case1", "case2", "case3b", "case4"):
        _, result = run_case(case)
        closing = [m for m in result.trace if m.to == "client" and m.kind in (K.A_US, K.N_US)]
        assert len(closing) == 1
