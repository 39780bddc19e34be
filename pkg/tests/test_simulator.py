import dataclasses
import io

import pytest

from conftest import run_case
from vencoord.config import FIXTURES, load_fixture
from vencoord.domain import DemandLine
from vencoord.protocol import EncodeError, MessageKind as K, OrderLines, Post, decode_trace
from vencoord.simulator import (
    Bus, OrderScript, export_trace, kind_label, replay_trace, run_to_quiescence, view_of,
)


def post(kind=K.C_US, to="x"):
    return Post(to, kind, OrderLines("o", (DemandLine("P", 1, 1),)))


def test_same_day_posts_deliver_in_seq_order():
    bus = Bus()
    a = bus.post("s", post(to="a"))
    b = bus.post("s", post(to="b"))
    assert [bus.pop().seq, bus.pop().seq] == [a, b]


def test_delay_moves_delivery_day():
    bus = Bus()
    bus.now = 100
    bus.post("s", post(), delay=2)
    ev = bus.pop()
    assert ev.deliver_at == 102 and bus.now == 102
    assert ev.message.payload == post().payload


def test_malformed_post_rejected():
    bus = Bus()
    with pytest.raises(EncodeError):
        bus.post("s", Post("x", K.N_DS, OrderLines("o", ())))
    assert bus.rejected and bus.seq == 0


def test_export_empty_run():
    assert export_trace([]) == ""
    sink = io.StringIO()
    _, result = run_case("case1")
    text = export_trace(result.trace, sink)
    assert sink.getvalue() == text and text.count("\n") == len(result.trace)


def test_goldens_match_fresh_runs():
    for name in ("case1", "case2", "case3", "case3b", "case4"):
        _, result = run_case(name)
        assert export_trace(result.trace) == (FIXTURES / "golden" / f"{name}.trace").read_text()


def test_causality():
    for name in ("case2", "case3b"):
        _, result = run_case(name)
        seqs = [m.seq for m in result.trace]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        # each reply comes after the request it answers
        first = {}
        for m in result.trace:
            first.setdefault((m.kind, m.order_id), m.seq)
        assert first[(K.R_PA_US, "o1")] > first[(K.D_PA_N, "o1")]


def test_replay_detects_tampering():
    cfg = load_fixture("case1")
    trace = decode_trace((FIXTURES / "golden" / "case1.trace").read_text().splitlines())
    assert replay_trace(cfg.network, trace) == []
    bad = list(trace)
    last = bad[-1]
    bad[-1] = dataclasses.replace(last, payload=OrderLines("o1", (DemandLine("PF", 152, 99),)))
    assert replay_trace(cfg.network, bad)


def test_counter_offer_accepted_by_client():
    cfg = load_fixture("case1")
    orders = (OrderScript(140, "o2", "client", "tap", "PF", 152, 140),)
    result = run_to_quiescence(cfg.network, orders)
    kinds = [kind_label(m) for m in view_of(result.trace, "tap")]
    assert kinds[:4] == ["C_US", "D_PA_N", "R_PA_US(n)", "N_US"]
    assert "RN_US(y)" in kinds and "A_US" not in kinds
    assert result.outcomes == {"o2": "counter-accepted"} and result.status == "ok"


def test_lenient_mode_drops_and_continues():
    cfg = load_fixture("case1")
    # an order to an agent that does not exist
    orders = (OrderScript(140, "o1", "client", "nobody", "PF", 152, 10),
              OrderScript(141, "o2", "client", "tap", "PF", 152, 10))
    strict = run_to_quiescence(cfg.network, orders)
    assert strict.status == "violation"
    lenient = run_to_quiescence(cfg.network, orders, strict=False)
    assert lenient.status == "ok" and len(lenient.violations) == 1
    assert lenient.outcomes["o2"] == "contracted"


def test_step_budget():
    cfg = load_fixture("case1")
    result = run_to_quiescence(cfg.network, cfg.orders, budget=3)
    assert result.status == "budget"


def test_orders_injected_by_day():
    cfg = load_fixture("case1")
    orders = (OrderScript(150, "late", "client", "tap", "PF", 160, 5),
              OrderScript(140, "early", "client", "tap", "PF", 160, 5))
    result = run_to_quiescence(cfg.network, orders)
    injected = [m for m in result.trace if m.kind == K.C_US]
    assert [(m.order_id, m.sent_at) for m in injected] == [("early", 140), ("late", 150)]
