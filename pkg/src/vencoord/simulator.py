"""Deterministic discrete-event bus and run controller.

Events are delivered in ``(deliver_at, seq)`` order.  ``seq`` is handed out
when a message is posted, so the trace (kept in seq order) is also the order
in which messages were produced.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Optional, TextIO

from .domain import CENT, DemandLine, ExternalParty, NetworkConfig
from .mediator import NetworkAccounts, global_benefit
from .negotiator import NegotiatorAgent
from .planner import PlannerAgent, PlannerProtocolError, split_order_id
from .protocol import (
    ESCALATION_KINDS, EncodeError, Message, MessageKind as K, OrderLines, Post, ProtocolViolation, Reply,
    check_transition, encode, na_addr, pa_addr,
)
from .tier_negotiator import EscalationChain, TierNegotiator

STEP_BUDGET = 10 ** 6


@dataclass(frozen=True)
class OrderScript:
    """One injected customer order."""

    day: int
    order_id: str
    customer: str
    supplier: str
    product: str
    due: int
    qty: int


@dataclass(order=True)
class Event:
    deliver_at: int
    seq: int
    message: Message = field(compare=False)


class Bus:
    def __init__(self):
        self.queue: list[Event] = []
        self.seq = 0
        self.now = 0
        self.trace: list[Message] = []
        self.rejected: list[str] = []

    def post(self, sender: str, post: Post, delay: int = 0) -> int:
        if delay < 0:
            raise ValueError("negative delay")
        msg = Message(self.seq + 1, self.now, sender, post.to, post.kind, post.payload)
        try:
            encode(msg)
        except EncodeError as exc:
            self.rejected.append(f"{sender} -> {post.to} {post.kind.value}: {exc}")
            raise
        self.seq += 1
        self.trace.append(msg)
        heapq.heappush(self.queue, Event(self.now + delay, msg.seq, msg))
        return msg.seq

    def pop(self) -> Event:
        ev = heapq.heappop(self.queue)
        self.now = max(self.now, ev.deliver_at)
        return ev

    def __len__(self):
        return len(self.queue)


class PlannerPort:
    """Bus face of a PA: one reply per request, back to its NA."""

    def __init__(self, agent: PlannerAgent):
        self.agent = agent

    def receive(self, msg: Message) -> list[Post]:
        try:
            kind, payload = self.agent.handle(msg.kind, msg.payload)
        except PlannerProtocolError as exc:
            raise ProtocolViolation(pa_addr(self.agent.ven.id), msg.kind, str(exc)) from None
        return [Post(msg.sender, kind, payload)]


class ClientStub:
    """Scripted tier-0 customer: takes the first counter-proposal when allowed to."""

    def __init__(self, party: ExternalParty):
        self.party = party
        self.contracts: dict = {}
        self.countered: set = set()

    def receive(self, msg: Message) -> list[Post]:
        p = msg.payload
        if msg.kind == K.N_US:
            self.countered.add(p.order_id)
            if self.party.accept_counter and p.scenarios:
                self.contracts[p.order_id] = p.scenarios[0].lines
                return [Post(msg.sender, K.RN_US, Reply(p.order_id, True, p.scenarios[0]))]
            return [Post(msg.sender, K.RN_US, Reply(p.order_id, False))]
        if msg.kind == K.A_US:
            self.contracts[p.order_id] = p.lines
        return []


class SupplierStub:
    """Scripted last-tier supplier: confirms every order as asked."""

    def __init__(self, party: ExternalParty):
        self.party = party
        self.orders: dict = {}

    def receive(self, msg: Message) -> list[Post]:
        p = msg.payload
        if msg.kind == K.C_DS:
            self.orders[p.order_id] = p.lines
            return [Post(msg.sender, K.A_DS, OrderLines(p.order_id, p.lines))]
        if msg.kind == K.N_DS:  # pragma: no cover - stubs never counter
            return []
        return []


@dataclass
class Network:
    config: NetworkConfig
    accounts: NetworkAccounts
    negotiators: dict
    planners: dict
    agents: dict
    chain: EscalationChain
    tnas: dict
    clients: dict
    suppliers: dict


def build_network(config: NetworkConfig, quantum: Decimal = CENT) -> Network:
    accounts = NetworkAccounts()
    agents, negotiators, planners = {}, {}, {}
    for ven in config.vens:
        pa = PlannerAgent(ven, dict(ven.stocks), ven.idle())
        na = NegotiatorAgent(ven, config, pa, accounts)
        accounts.account(ven.id)
        planners[ven.id], negotiators[ven.id] = pa, na
        agents[na_addr(ven.id)] = na
        agents[pa_addr(ven.id)] = PlannerPort(pa)
    chain = EscalationChain(config, negotiators, accounts, quantum)
    tnas = {}
    for tier in range(1, len(config.tiers) + 1):
        tna = TierNegotiator(tier, config, chain)
        tnas[tier] = tna
        agents[tna.addr] = tna
    chain.tnas = tnas
    clients = {c.id: ClientStub(c) for c in config.clients}
    suppliers = {s.id: SupplierStub(s) for s in config.external_suppliers}
    agents.update(clients)
    agents.update(suppliers)
    return Network(config, accounts, negotiators, planners, agents, chain, tnas, clients, suppliers)


@dataclass
class RunResult:
    trace: list
    status: str                       # ok | deadlock | violation | budget
    violations: list
    outcomes: dict                    # order id -> contracted | counter-accepted | escalated | deadlocked
    accounts: NetworkAccounts
    steps: list                       # escalation chain
    diagnosis: str = ""
    network: Optional[Network] = None

    @property
    def benefit(self):
        return global_benefit(self.accounts)


def _outcomes(net: Network, orders: Iterable[OrderScript], status: str) -> dict:
    out = {}
    helped = set()
    for na in net.negotiators.values():
        helped.update(split_order_id(h.order_id)[0].split("/")[0] for h in na.help_sent)
    for o in orders:
        client = net.clients.get(o.customer)
        na = net.negotiators.get(o.supplier)
        conv = na.convs.get(o.order_id) if na else None
        if conv is not None and conv.outcome in ("contracted", "counter-accepted") and conv.state.value == "Done":
            out[o.order_id] = conv.outcome
        elif client is not None and o.order_id in client.contracts and conv is None:
            out[o.order_id] = "contracted"
        elif o.order_id in helped:
            out[o.order_id] = "escalated"
        else:
            out[o.order_id] = "deadlocked" if status != "ok" else "open"
    return out


def run_to_quiescence(config: NetworkConfig, orders: Iterable[OrderScript], strict: bool = True,
                      budget: int = STEP_BUDGET, quantum: Decimal = CENT) -> RunResult:
    net = build_network(config, quantum)
    bus = Bus()
    pending = sorted(orders, key=lambda o: (o.day, o.order_id))
    script = list(pending)
    violations: list[str] = []
    status, diagnosis = "ok", ""
    delivered = 0
    while bus.queue or pending:
        if pending and (not bus.queue or pending[0].day <= bus.queue[0].deliver_at):
            o = pending.pop(0)
            bus.now = max(bus.now, o.day)
            bus.post(o.customer, Post(na_addr(o.supplier), K.C_US,
                                      OrderLines(o.order_id, (DemandLine(o.product, o.due, o.qty),))))
            continue
        if delivered >= budget:
            status, diagnosis = "budget", f"step budget of {budget} deliveries exhausted"
            break
        ev = bus.pop()
        delivered += 1
        msg = ev.message
        agent = net.agents.get(msg.to)
        try:
            if agent is None:
                raise ProtocolViolation(msg.to, msg.kind, "no such agent")
            posts = agent.receive(msg)
        except ProtocolViolation as exc:
            violations.append(f"seq {msg.seq}: {exc}")
            if strict:
                status, diagnosis = "violation", violations[-1]
                break
            continue
        for post in posts:
            try:
                bus.post(msg.to, post)
            except EncodeError as exc:
                violations.append(f"after seq {msg.seq}: malformed {post.kind.value} from {msg.to}: {exc}")
        if net.chain.deadlock:
            status, diagnosis = "deadlock", net.chain.deadlock
            break
    return RunResult(bus.trace, status, violations, _outcomes(net, script, status), net.accounts,
                     list(net.chain.steps), diagnosis, net)


# ---- trace files -----------------------------------------------------------

def export_trace(trace: Iterable[Message], sink: Optional[TextIO] = None) -> str:
    text = "".join(encode(m) + "\n" for m in trace)
    if sink is not None:
        sink.write(text)
    return text


def view_of(trace: Iterable[Message], ven: str) -> list[Message]:
    """Messages with ``ven``'s NA or PA at one end, plus every HELP."""
    mine = {na_addr(ven), pa_addr(ven)}
    return [m for m in trace if m.sender in mine or m.to in mine or m.kind == K.HELP]


def escalation_messages(trace: Iterable[Message]) -> list[Message]:
    return [m for m in trace if m.kind in ESCALATION_KINDS]


def kind_label(m: Message) -> str:
    """Kind with the verdict for planner and counter replies, e.g. ``R_PA_US(y)``."""
    verdict = getattr(m.payload, "accepted", None)
    if verdict is None:
        return m.kind.value
    return f"{m.kind.value}({'y' if verdict else 'n'})"


def replay_trace(config: NetworkConfig, trace: list[Message]) -> list[str]:
    """Feed a trace's deliveries to fresh agents and compare what they emit.

    Every delivery is first checked against the receiving conversation's
    statechart.  Returns a list of problems; empty means the trace replays
    exactly.
    """
    net = build_network(config)
    client_ids = set(net.clients)
    injected = [m for m in trace if m.kind == K.C_US and m.sender in client_ids]
    expected = [m for m in trace if m not in injected]
    produced: list[tuple[str, str, object, object]] = []
    problems = []
    for m in sorted(trace, key=lambda x: (x.sent_at, x.seq)):
        agent = net.agents.get(m.to)
        if isinstance(agent, NegotiatorAgent) and m.kind != K.D_TNA:
            verdict = check_transition(agent.state_of(m.order_id), m.kind, "in")
            if not verdict:
                problems.append(f"seq {m.seq}: {verdict.reason}")
                continue
        elif isinstance(agent, PlannerPort):
            verdict = check_transition(agent.agent.state, m.kind, "in")
            if not verdict:
                problems.append(f"seq {m.seq}: {verdict.reason}")
                continue
        try:
            posts = agent.receive(m) if agent is not None else []
        except ProtocolViolation as exc:
            problems.append(f"seq {m.seq}: {exc}")
            continue
        produced.extend((m.to, p.to, p.kind, p.payload) for p in posts)
    want = [(m.sender, m.to, m.kind, m.payload) for m in expected]
    for n, (a, b) in enumerate(zip(want, produced)):
        if a != b:
            problems.append(f"output {n + 1}: trace has {a[2].value} {a[0]}->{a[1]}, replay gives {b[2].value} {b[0]}->{b[1]}")
            break
    if len(want) != len(produced):
        problems.append(f"trace has {len(want)} generated messages, replay gives {len(produced)}")
    return problems
