"""Negotiator agent: the VEN's only external face.

Each order the VEN sells, and each component sub-order it buys, is a
conversation with its own statechart position.  Sub-orders are named
``f"{parent}/{component}"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .domain import Conditions, DemandLine, NetworkConfig, Scenario, VenConfig, money
from .mediator import NetworkAccounts
from .planner import PlannerAgent, split_order_id
from .protocol import (
    Help, MessageKind as K, Message, NaState as S, OrderLines, PlanReply, PlanRequest, Post, Probe, Proposal,
    ProtocolViolation, Reply, Snapshot, TnaOrder, check_transition, na_addr, party_of, tna_addr,
)

US_FAMILY = {"order": K.C_US, "counter": K.N_US, "reply": K.RN_US, "accept": K.A_US}
DS_FAMILY = {"order": K.C_DS, "counter": K.N_DS, "reply": K.RN_DS, "accept": K.A_DS}


@dataclass
class Conversation:
    order_id: str
    role: str                                   # sell | buy
    peer: str                                   # customer (sell) or supplier (buy) address
    lines: tuple[DemandLine, ...]               # what the peer asked for / what we asked for
    state: S = S.IDLE
    family: dict = field(default_factory=lambda: DS_FAMILY)
    planned: tuple[DemandLine, ...] = ()        # lines handed to the PA after finished-goods netting
    fg_used: int = 0
    offered: dict = field(default_factory=dict)  # scenario label -> planner lines
    contract: tuple[DemandLine, ...] = ()
    received: list = field(default_factory=list)
    subs: list = field(default_factory=list)
    conditions: Conditions = field(default_factory=Conditions)
    via_tna: bool = False
    after_counter: bool = False
    late_eval: bool = False
    outcome: str = "open"                       # open | contracted | counter-accepted | escalated
    booked_sale: object = None

    @property
    def product(self) -> str:
        return self.lines[0].product


def _total(lines) -> int:
    return sum(l.qty for l in lines)


def _covers(got, wanted) -> bool:
    """Cumulative deliveries ``got`` meet every due of ``wanted``."""
    for ln in wanted:
        need = sum(w.qty for w in wanted if w.due <= ln.due)
        if sum(g.qty for g in got if g.due <= ln.due) < need:
            return False
    return True


def snapshot_state(ven: VenConfig, idle: dict, blocked=()) -> Snapshot:
    """R_TNA payload: per-day committed load, idle capacity and blocked orders."""
    load = tuple((d, ven.capacity.at(d) - idle.get(d, 0)) for d in ven.capacity.days)
    free = tuple((d, idle.get(d, 0)) for d in ven.capacity.days)
    return Snapshot(ven.id, load, free, tuple(blocked))


class NegotiatorAgent:
    def __init__(self, ven: VenConfig, network: NetworkConfig, planner: PlannerAgent,
                 accounts: Optional[NetworkAccounts] = None):
        self.ven = ven
        self.network = network
        self.planner = planner
        self.stock = planner.stock
        self.accounts = accounts if accounts is not None else NetworkAccounts()
        self.addr = na_addr(ven.id)
        self.pa = f"{ven.id}.PA"
        self.tna = tna_addr(ven.tier)
        self.convs: dict[str, Conversation] = {}
        self.help_sent: list[Help] = []

    # -- legality
    def _emit(self, conv: Optional[Conversation], state: S, to: str, kind: K, payload) -> Post:
        verdict = check_transition(state, kind, "out")
        if not verdict:
            raise ProtocolViolation(self.addr, kind, verdict.reason)
        return Post(to, kind, payload)

    def state_of(self, order_id: str) -> S:
        conv = self.convs.get(order_id)
        return conv.state if conv else S.IDLE

    # -- entry point
    def receive(self, msg: Message) -> list[Post]:
        kind, p = msg.kind, msg.payload
        if kind == K.D_TNA:
            return [self._emit(None, S.SERVING_TNA, msg.sender, K.R_TNA, self.snapshot())]
        conv = self.convs.get(p.order_id)
        state = conv.state if conv else S.IDLE
        verdict = check_transition(state, kind, "in")
        if not verdict:
            raise ProtocolViolation(self.addr, kind, f"{p.order_id}: {verdict.reason}")
        handler = {
            K.C_US: self._on_order, K.C_DS: self._on_order, K.C_TNA: self._on_tna_order,
            K.R_PA_US: self._on_plan, K.R_PA_DS: self._on_assessment,
            K.A_DS: self._on_delivery, K.N_DS: self._on_counter,
            K.RN_US: self._on_reply, K.RN_DS: self._on_reply,
        }[kind]
        return handler(msg, conv)

    # -- sell side
    def _net_finished(self, conv: Conversation):
        if conv.fg_used:
            self.stock[conv.product] = self.stock.get(conv.product, 0) + conv.fg_used
        free = self.stock.get(conv.product, 0)
        planned = []
        used = 0
        for ln in sorted(conv.lines, key=lambda l: l.due):
            take = min(free - used, ln.qty)
            used += take
            if ln.qty - take:
                planned.append(DemandLine(ln.product, ln.due, ln.qty - take))
        self.stock[conv.product] = free - used
        conv.fg_used, conv.planned = used, tuple(planned)

    def _start_planning(self, conv: Conversation, kind: K, state: S) -> list[Post]:
        self._net_finished(conv)
        if not conv.planned:
            conv.contract = conv.lines
            return self._conclude(conv, state)
        req = PlanRequest(conv.order_id, conv.planned, conv.conditions.overtime_cap, conv.conditions.subcontract_cap)
        out = [self._emit(conv, state, self.pa, kind, req)]
        conv.state = S.AWAITING_PLANNER
        return out

    def _on_order(self, msg: Message, conv: Optional[Conversation]) -> list[Post]:
        p: OrderLines = msg.payload
        family = US_FAMILY if msg.kind == K.C_US else DS_FAMILY
        if conv is None:
            conv = Conversation(p.order_id, "sell", msg.sender, p.lines, family=family,
                                conditions=self.ven.conditions)
            self.convs[p.order_id] = conv
            return self._start_planning(conv, K.D_PA_N, S.IDLE)
        if conv.role != "sell":
            raise ProtocolViolation(self.addr, msg.kind, f"{p.order_id} is one of our own purchases")
        # modification of a concluded order
        conv.lines, conv.after_counter, conv.contract = p.lines, False, ()
        return self._start_planning(conv, K.D_PA_M, conv.state)

    def _on_tna_order(self, msg: Message, conv: Optional[Conversation]) -> list[Post]:
        p: TnaOrder = msg.payload
        family = US_FAMILY if p.customer in {c.id for c in self.network.clients} else DS_FAMILY
        customer = p.customer if self.network.is_external(p.customer) else na_addr(p.customer)
        cond = Conditions(p.overtime_cap, p.subcontract_cap)
        if conv is None:
            conv = Conversation(p.order_id, "sell", customer, p.lines, family=family, conditions=cond, via_tna=True)
            self.convs[p.order_id] = conv
            return self._start_planning(conv, K.D_PA_N, S.IDLE)
        state = conv.state
        conv.lines, conv.peer, conv.conditions, conv.contract = p.lines, customer, cond, ()
        conv.via_tna, conv.after_counter, conv.outcome = True, False, "open"
        if p.order_id not in self.planner.ledger:
            return self._start_planning(conv, K.D_PA_N, state)
        return self._start_planning(conv, K.D_PA_M, state)

    def _on_plan(self, msg: Message, conv: Conversation) -> list[Post]:
        p: PlanReply = msg.payload
        if conv.role != "sell":
            raise ProtocolViolation(self.addr, msg.kind, f"{p.order_id} has no planner request")
        if p.accepted:
            return self._buy_components(conv, p.needs)
        if not p.scenarios or conv.via_tna or conv.after_counter:
            return self._ask_help(conv, S.AWAITING_PLANNER)
        extra = conv.fg_used
        first_due = min(l.due for l in conv.lines)
        shown, conv.offered = [], {}
        for sc in p.scenarios:
            view = Scenario.from_lines([*sc.lines, DemandLine(sc.product, first_due, extra)], sc.label)
            conv.offered[sc.label] = sc.lines
            shown.append(view)
        out = [self._emit(conv, S.AWAITING_PLANNER, conv.peer, conv.family["counter"],
                          Proposal(conv.order_id, tuple(shown)))]
        conv.state = S.AWAITING_CUSTOMER_REPLY
        return out

    def _buy_components(self, conv: Conversation, needs) -> list[Post]:
        by_product: dict = {}
        for ln in needs:
            by_product.setdefault(ln.product, []).append(ln)
        out = []
        conv.subs = []
        for product, lines in by_product.items():
            supplier = self._preferred_supplier(product)
            sub_id = f"{conv.order_id}/{product}"
            addr = supplier if self.network.is_external(supplier) else na_addr(supplier)
            sub = Conversation(sub_id, "buy", addr, tuple(lines))
            self.convs[sub_id] = sub
            conv.subs.append(sub_id)
            out.append(self._emit(sub, S.IDLE, addr, K.C_DS, OrderLines(sub_id, tuple(lines))))
            sub.state = S.AWAITING_SUPPLIER
        if not conv.contract:
            conv.contract = conv.lines
        if not out:
            return self._conclude(conv, S.AWAITING_PLANNER)
        conv.state = S.AWAITING_SUPPLIER
        return out

    def _preferred_supplier(self, product: str) -> str:
        makers = set(self.network.makers(product))
        for sup in self.ven.suppliers:
            if sup in makers:
                return sup
        raise ProtocolViolation(self.addr, K.C_DS, f"no supplier of {product}")

    def _conclude(self, conv: Conversation, state: S) -> list[Post]:
        out = []
        if not conv.after_counter:
            out.append(self._emit(conv, state, conv.peer, conv.family["accept"],
                                  OrderLines(conv.order_id, conv.contract)))
        if conv.outcome != "counter-accepted":
            conv.outcome = "contracted"
        self._book_sale(conv)
        conv.state = S.DONE
        return out

    def _book_sale(self, conv: Conversation):
        sale = money(_total(conv.contract) * self.ven.costs.selling_price)
        rec = self.planner.ledger.get(conv.order_id)
        cost = rec.cost.total if rec is not None and rec.status == "committed" else money(0)
        prev_sale, prev_cost = conv.booked_sale or (money(0), money(0))
        self.accounts.account(self.ven.id)
        if sale > prev_sale:
            self.accounts.book_sale(self.ven.id, sale - prev_sale)
        if cost > prev_cost:
            self.accounts.book_cost(self.ven.id, cost - prev_cost)
        conv.booked_sale = (max(sale, prev_sale), max(cost, prev_cost))

    def _ask_help(self, conv: Conversation, state: S, refused_by: str = "") -> list[Post]:
        rec = self.planner.ledger.get(conv.order_id)
        shortfall = rec.shortfall if rec is not None and rec.shortfall else conv.planned
        help_ = Help(conv.order_id, tuple(shortfall), refused_by or party_of(conv.peer), conv.lines)
        out = [self._emit(conv, state, self.tna, K.HELP, help_)]
        self.help_sent.append(help_)
        conv.state, conv.outcome = S.BLOCKED, "escalated"
        return out

    def _on_reply(self, msg: Message, conv: Conversation) -> list[Post]:
        p: Reply = msg.payload
        if not p.accepted:
            return self._ask_help(conv, S.AWAITING_CUSTOMER_REPLY, party_of(msg.sender))
        planned = conv.offered.get(p.scenario.label)
        if planned is None:
            raise ProtocolViolation(self.addr, msg.kind, f"{p.order_id}: unknown scenario {p.scenario.label!r}")
        conv.planned, conv.contract = tuple(planned), p.scenario.lines
        conv.after_counter, conv.outcome = True, "counter-accepted"
        req = PlanRequest(conv.order_id, conv.planned, conv.conditions.overtime_cap, conv.conditions.subcontract_cap)
        out = [self._emit(conv, S.AWAITING_CUSTOMER_REPLY, self.pa, K.D_PA_M, req)]
        conv.state = S.AWAITING_PLANNER
        return out

    # -- buy side
    def _supplier_price(self, addr: str):
        return self.network.price(party_of(addr))

    def _on_delivery(self, msg: Message, conv: Conversation) -> list[Post]:
        p: OrderLines = msg.payload
        conv.received.extend(p.lines)
        self.accounts.book_cost(self.ven.id, _total(p.lines) * self._supplier_price(msg.sender))
        if _total(conv.received) < _total(conv.lines):
            return []
        if _covers(conv.received, conv.lines):
            conv.state = S.DONE
            return self._parent_check(conv)
        # late delivery imposed from above: ask our PA whether the order survives it
        conv.late_eval = True
        sc = Scenario.from_lines(conv.received, "delivered")
        out = [self._emit(conv, S.AWAITING_SUPPLIER, self.pa, K.D_PA_A, Proposal(conv.order_id, (sc,)))]
        conv.state = S.AWAITING_PLANNER
        return out

    def _on_counter(self, msg: Message, conv: Conversation) -> list[Post]:
        p: Proposal = msg.payload
        out = [self._emit(conv, S.AWAITING_SUPPLIER, self.pa, K.D_PA_A, p)]
        conv.state = S.AWAITING_PLANNER
        return out

    def _on_assessment(self, msg: Message, conv: Conversation) -> list[Post]:
        p: Reply = msg.payload
        if conv.role != "buy":
            raise ProtocolViolation(self.addr, msg.kind, f"{p.order_id} has no scenario assessment")
        if conv.late_eval:
            conv.state = S.DONE if p.accepted else S.AWAITING_SUPPLIER
            return self._parent_check(conv) if p.accepted else []
        out = [self._emit(conv, S.AWAITING_PLANNER, conv.peer, K.RN_DS, p)]
        if p.accepted:
            self.accounts.book_cost(self.ven.id, p.scenario.total * self._supplier_price(conv.peer))
            conv.received = list(p.scenario.lines)
            conv.state = S.DONE
            out += self._parent_check(conv)
        else:
            conv.state = S.AWAITING_SUPPLIER
        return out

    def _parent_check(self, sub: Conversation) -> list[Post]:
        parent_id, _ = split_order_id(sub.order_id)
        parent = self.convs.get(parent_id)
        if parent is None or parent.state != S.AWAITING_SUPPLIER:
            return []
        if all(self.convs[s].state == S.DONE for s in parent.subs):
            return self._conclude(parent, S.AWAITING_SUPPLIER)
        return []

    # -- tier probe
    def blocked_orders(self) -> list:
        out = []
        for oid, conv in sorted(self.convs.items()):
            if conv.state == S.BLOCKED:
                rec = self.planner.ledger.get(oid)
                out.append((oid, tuple(rec.shortfall) if rec is not None else conv.planned))
        return out

    def snapshot(self) -> Snapshot:
        return snapshot_state(self.ven, self.planner.idle, self.blocked_orders())


def na_step(agent: NegotiatorAgent, msg: Message) -> tuple[S, list[Post]]:
    """Run one message through ``agent``; returns the conversation's new state and the posts."""
    out = agent.receive(msg)
    oid = getattr(msg.payload, "order_id", None)
    return (agent.state_of(oid) if oid is not None else S.IDLE), out
