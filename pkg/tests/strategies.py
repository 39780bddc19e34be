"""Hypothesis strategies for protocol values."""

from hypothesis import strategies as st

from vencoord.domain import DemandLine, Scenario
from vencoord.protocol import (
    PAYLOAD_TYPE, Help, Message, MessageKind, OrderLines, PlanReply, PlanRequest, Probe, Proposal, Reply, Snapshot,
    TnaOrder,
)

names = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789._/-", min_size=1, max_size=8)
products = st.sampled_from(["PF", "SCA", "SCAA", "SCBA", "SCBBA"])
days = st.integers(0, 400)
qtys = st.integers(0, 1000)
lines = st.lists(st.builds(DemandLine, products, days, qtys), max_size=4).map(tuple)


@st.composite
def scenarios(draw):
    product = draw(products)
    dues = draw(st.lists(days, min_size=1, max_size=4, unique=True))
    qs = draw(st.lists(st.integers(1, 500), min_size=len(dues), max_size=len(dues)))
    label = draw(st.sampled_from(["split", "delayed", "delivered", ""]))
    return Scenario(tuple(DemandLine(product, d, q) for d, q in zip(sorted(dues), qs)), label)


@st.composite
def replies(draw, order):
    if draw(st.booleans()):
        return Reply(order, True, draw(scenarios()))
    return Reply(order, False, draw(st.none() | scenarios()))


pairs = st.lists(st.tuples(days, st.integers(0, 100)), max_size=5).map(tuple)


@st.composite
def payload_for(draw, kind):
    typ = PAYLOAD_TYPE[kind]
    order = draw(names)
    if typ is OrderLines:
        return OrderLines(order, draw(lines))
    if typ is Proposal:
        return Proposal(order, tuple(draw(st.lists(scenarios(), max_size=3))))
    if typ is Reply:
        return draw(replies(order))
    if typ is PlanRequest:
        return PlanRequest(order, draw(lines), draw(st.integers(0, 20)), draw(st.integers(0, 50)))
    if typ is PlanReply:
        return PlanReply(order, draw(st.booleans()), draw(lines), tuple(draw(st.lists(scenarios(), max_size=2))))
    if typ is Probe:
        return Probe(order)
    if typ is Snapshot:
        blocked = tuple(draw(st.lists(st.tuples(names, lines), max_size=2)))
        return Snapshot(order, draw(pairs), draw(pairs), blocked)
    if typ is TnaOrder:
        return TnaOrder(order, draw(lines), draw(names), draw(st.integers(0, 20)), draw(st.integers(0, 50)))
    return Help(order, draw(lines), draw(names), draw(lines))


@st.composite
def messages(draw):
    kind = draw(st.sampled_from(list(MessageKind)))
    sender = draw(names)
    to = draw(names.filter(lambda n: n != sender))
    return Message(draw(st.integers(1, 10 ** 6)), draw(days), sender, to, kind, draw(payload_for(kind)))
