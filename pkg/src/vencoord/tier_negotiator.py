"""Tier negotiator agents and the escalation chain above them.

A TNA sleeps until a HELP arrives.  It then probes every VEN of its tier
(D_TNA / R_TNA), tries to spread the shortfall over the tier, and otherwise
hands the problem to the neighbouring tiers and finally to the network mediator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

from .domain import CENT, ZERO, DemandLine, NetworkConfig, Scenario, VenId, money
from .mediator import NetworkAccounts, Relaxation, Resolution, Unsolvable, relax_allocate
from .planner import ContractViolation, ProductionLot, evaluate_scenarios, generate_scenarios, split_order_id
from .protocol import (
    Help, MessageKind as K, Message, NaState, Post, Probe, Snapshot, TnaOrder, na_addr, party_of,
)


@dataclass
class TierProblem:
    order_id: str
    product: str
    shortfall: tuple[DemandLine, ...]
    blocked: VenId
    customer: VenId
    demand: tuple[DemandLine, ...] = ()
    snapshots: dict = field(default_factory=dict)

    @property
    def units(self) -> int:
        return sum(l.qty for l in self.shortfall)


@dataclass(frozen=True)
class Redistribution:
    assignment: dict          # ven -> tuple of DemandLines
    residual: int

    @property
    def ok(self) -> bool:
        return self.residual == 0


@dataclass(frozen=True)
class Step:
    """One hop of the escalation chain, for the run report."""

    agent: str
    action: str
    result: str

    def __str__(self):
        return f"{self.agent}: {self.action} -> {self.result}"


def redistribute_load(problem: TierProblem, makers: dict) -> Redistribution:
    """Greedy spread of the shortfall over same-tier makers.

    ``makers`` maps VenId -> earliest day that VEN can deliver (lead feasibility).
    Most idle capacity up to the due date first; VenId breaks ties.
    """
    used: dict = {}
    assignment: dict = {}
    residual = 0
    for ln in sorted(problem.shortfall, key=lambda l: l.due):
        need = ln.qty
        room = {}
        for ven, earliest in makers.items():
            snap = problem.snapshots.get(ven)
            if ven == problem.blocked or snap is None or earliest > ln.due:
                continue
            room[ven] = snap.idle_through(ln.due) - used.get(ven, 0)
        for ven in sorted(room, key=lambda v: (-room[v], v)):
            if need == 0:
                break
            take = min(room[ven], need)
            if take <= 0:
                continue
            used[ven] = used.get(ven, 0) + take
            assignment.setdefault(ven, []).append(DemandLine(ln.product, ln.due, take))
            need -= take
        residual += need
    return Redistribution({v: tuple(ls) for v, ls in sorted(assignment.items())}, residual)


def remaining_demand(demand, shortfall) -> tuple[DemandLine, ...]:
    """``demand`` minus ``shortfall``, line by line (matching dues)."""
    cut = {}
    for ln in shortfall:
        cut[ln.due] = cut.get(ln.due, 0) + ln.qty
    out = []
    for ln in sorted(demand, key=lambda l: l.due):
        take = min(cut.get(ln.due, 0), ln.qty)
        cut[ln.due] = cut.get(ln.due, 0) - take
        if ln.qty - take:
            out.append(DemandLine(ln.product, ln.due, ln.qty - take))
    return tuple(out)


class TierNegotiator:
    """One per managed tier.  Bus agent at address ``TNA{tier}``."""

    def __init__(self, tier: int, network: NetworkConfig, chain: "EscalationChain"):
        self.tier = tier
        self.network = network
        self.chain = chain
        self.addr = f"TNA{tier}"
        self.vens = [v.id for v in network.tiers[tier - 1]]
        self.active: Optional[TierProblem] = None
        self.queue: list[TierProblem] = []
        self.waiting: set = set()
        self.probes = 0

    def receive(self, msg: Message) -> list[Post]:
        if msg.kind == K.HELP:
            h: Help = msg.payload
            blocked = party_of(msg.sender)
            product = (h.demand or h.shortfall)[0].product
            problem = TierProblem(h.order_id, product, h.shortfall, blocked, h.refused_by, h.demand)
            if self.active is not None:
                self.queue.append(problem)
                return []
            return self._start(problem)
        if msg.kind == K.R_TNA:
            snap: Snapshot = msg.payload
            if self.active is None or snap.ven not in self.waiting:
                return []
            self.active.snapshots[snap.ven] = snap
            self.waiting.discard(snap.ven)
            if self.waiting:
                return []
            out = self._resolve(self.active)
            self.active = None
            if self.queue:
                out += self._start(self.queue.pop(0))
            return out
        return []

    def collect_states(self, problem: TierProblem) -> list[Post]:
        self.probes += 1
        self.waiting = set(self.vens)
        probe = Probe(f"{self.addr}/{self.probes}")
        return [Post(na_addr(v), K.D_TNA, probe) for v in self.vens]

    def _start(self, problem: TierProblem) -> list[Post]:
        self.active = problem
        return self.collect_states(problem)

    def makers(self, product: str) -> dict:
        out = {}
        for vid in self.vens:
            ven = self.network.ven(vid)
            if product in ven.products_made:
                offsets = [e.lead_offset for e in ven.bom if e.parent == product]
                out[vid] = ven.capacity.start + (max(offsets) if offsets else 0)
        return out

    def _resolve(self, problem: TierProblem) -> list[Post]:
        if problem.units == 0:
            self.chain.record(Step(self.addr, f"redistribute {problem.order_id}", "nothing to place"))
            return []
        red = redistribute_load(problem, self.makers(problem.product))
        if red.ok:
            self.chain.record(Step(self.addr, f"redistribute {problem.order_id}",
                                   "placed on " + ", ".join(red.assignment)))
            return self.orders_for(problem, red.assignment)
        self.chain.record(Step(self.addr, f"redistribute {problem.order_id}", f"{red.residual} units unplaced"))
        return self.chain.escalate(self, problem)

    def orders_for(self, problem: TierProblem, assignment: dict, caps: Optional[dict] = None,
                   blocked_lines=None) -> list[Post]:
        """Binding C_TNA orders: the blocked VEN keeps what it can do, the rest goes to ``assignment``."""
        caps = caps or {}
        out = []
        keep = blocked_lines if blocked_lines is not None else remaining_demand(problem.demand, problem.shortfall)
        targets = dict(assignment)
        if keep:
            targets[problem.blocked] = tuple(keep)
        for ven in sorted(targets):
            ot, sub = caps.get(ven, (0, 0))
            out.append(Post(na_addr(ven), K.C_TNA, TnaOrder(problem.order_id, tuple(targets[ven]),
                                                            problem.customer, ot, sub)))
        return out


class EscalationChain:
    """Synchronous escalation between TNAs and up to the mediator.

    There is no message kind for TNA-to-TNA or TNA-to-mediator traffic, so
    these hops are direct calls recorded as report steps.
    """

    def __init__(self, network: NetworkConfig, negotiators: dict, accounts: NetworkAccounts,
                 quantum: Decimal = CENT):
        self.network = network
        self.negotiators = negotiators        # ven id -> NegotiatorAgent
        self.accounts = accounts
        self.quantum = quantum
        self.tnas: dict = {}
        self.steps: list[Step] = []
        self.resolutions: list[Resolution] = []
        self.deadlock: Optional[str] = None

    def record(self, step: Step):
        self.steps.append(step)

    def escalate(self, origin: TierNegotiator, problem: TierProblem) -> list[Post]:
        visited = {origin.tier}
        below = origin.tier + 1
        if below not in visited:
            visited.add(below)
            tna = self.tnas.get(below)
            if tna is None:
                self.record(Step(f"TNA{below}", f"supplier side {problem.order_id}", "no managed tier"))
            elif tna.makers(problem.product):
                red = redistribute_load(problem, tna.makers(problem.product))
                self.record(Step(tna.addr, f"supplier side {problem.order_id}",
                                 "placed" if red.ok else f"{red.residual} units unplaced"))
            else:
                self.record(Step(tna.addr, f"supplier side {problem.order_id}", f"no maker of {problem.product}"))
        above = origin.tier - 1
        if above not in visited:
            visited.add(above)
            posts = self._customer_side(origin, problem, above)
            if posts is not None:
                return posts
        return self._mediate(origin, problem)

    def _customer_side(self, origin: TierNegotiator, problem: TierProblem, tier: int):
        """Due-date relaxation: can the refusing customer live with the tier's best late profile?"""
        name = f"TNA{tier}"
        customer = self.negotiators.get(problem.customer)
        blocked = self.negotiators.get(problem.blocked)
        if tier not in self.tnas or customer is None or blocked is None:
            self.record(Step(name, f"customer side {problem.order_id}", "customer is outside the managed tiers"))
            return None
        parent, component = split_order_id(problem.order_id)
        if component is None or parent not in customer.planner.ledger:
            self.record(Step(name, f"customer side {problem.order_id}", "no customer plan to relax"))
            return None
        profile = self._late_profile(blocked, problem)
        if profile is None:
            self.record(Step(name, f"customer side {problem.order_id}", "blocked tier cannot complete the order"))
            return None
        found = evaluate_scenarios(customer.planner.context(parent), component, [profile])
        if found is None:
            self.record(Step(name, f"customer side {problem.order_id}",
                             f"{problem.customer} rejects {_fmt(profile.lines)}"))
            return None
        self.record(Step(name, f"customer side {problem.order_id}", f"{problem.customer} accepts {_fmt(profile.lines)}"))
        return origin.orders_for(problem, {}, blocked_lines=profile.lines)

    @staticmethod
    def _late_profile(blocked, problem: TierProblem) -> Optional[Scenario]:
        lines = sorted(problem.demand, key=lambda l: l.due)
        if len(lines) != 1:
            return None
        ln = lines[0]
        avail = blocked.planner.assumed_availability(ProductionLot(problem.order_id, ln.product, ln.due, ln.qty))
        try:
            options = generate_scenarios(ln, dict(blocked.planner.idle), avail, ("split",))
        except ContractViolation:
            return None
        return options[0] if options else None

    def candidates(self, problem: TierProblem) -> list[Relaxation]:
        """Relief options of same-tier makers, priced for the units they would actually cover."""
        out = []
        due = max(l.due for l in problem.shortfall)
        for ven in self.network.tiers[self.network.tier_of(problem.blocked) - 1]:
            if problem.product not in ven.products_made:
                continue
            days = sum(1 for d in ven.capacity.days if d <= due)
            ot = min(ven.relief.overtime_per_day * days, problem.units)
            if ot > 0:
                out.append(Relaxation(ven.id, "overtime", ot, ot * ven.costs.overtime_cost))
            sub = min(ven.relief.subcontract_units, problem.units)
            if sub > 0:
                out.append(Relaxation(ven.id, "subcontract", sub, sub * ven.costs.subcontract_cost))
        return out

    def prospective_accounts(self) -> NetworkAccounts:
        """Booked accounts plus what pending orders are expected to bring."""
        acc = self.accounts.copy()
        for vid, na in sorted(self.negotiators.items()):
            acc.account(vid)
            for oid, conv in sorted(na.convs.items()):
                if conv.state == NaState.DONE:
                    continue
                if conv.role == "sell":
                    qty = sum(l.qty for l in conv.lines)
                    acc.book_sale(vid, qty * na.ven.costs.selling_price)
                    acc.book_cost(vid, sum(l.qty for l in conv.planned) * na.ven.costs.unit_production_cost)
                else:
                    got = sum(l.qty for l in conv.received)
                    qty = max(0, sum(l.qty for l in conv.lines) - got)
                    acc.book_cost(vid, qty * self.network.price(party_of(conv.peer)))
        return acc

    def _mediate(self, origin: TierNegotiator, problem: TierProblem) -> list[Post]:
        cands = self.candidates(problem)
        partners = [v.id for v in self.network.vens]
        caps = {v.id: v.deficit_cap for v in self.network.vens if v.deficit_cap is not None}
        res = relax_allocate(problem.units, self.prospective_accounts(), cands, partners, caps or None, self.quantum)
        if isinstance(res, Unsolvable):
            self.record(Step("SCMA", f"relax {problem.order_id}", f"unsolvable: {res.reason}"))
            self.deadlock = f"{problem.order_id}: {res.reason}"
            return []
        self.resolutions.append(res)
        for ven, share in res.allocation.items():
            self.accounts.account(ven).absorbed += share
        picked = ", ".join(f"{r.mode} {r.units} on {r.ven}" for r in res.relaxations)
        self.record(Step("SCMA", f"relax {problem.order_id}", f"{picked}; deficit {res.deficit}"))
        return self._relief_orders(origin, problem, res)

    def _relief_orders(self, origin: TierNegotiator, problem: TierProblem, res: Resolution) -> list[Post]:
        caps: dict = {}
        assignment: dict = {}
        left = sorted(problem.shortfall, key=lambda l: l.due)
        keep = list(remaining_demand(problem.demand, problem.shortfall))
        for r in res.relaxations:
            ven = self.network.ven(r.ven)
            ot, sub = caps.get(r.ven, (0, 0))
            if r.mode == "overtime":
                ot = ven.relief.overtime_per_day
            else:
                sub = ven.relief.subcontract_units
            caps[r.ven] = (ot, sub)
            units, taken = r.units, []
            while units and left:
                ln = left[0]
                take = min(units, ln.qty)
                taken.append(DemandLine(ln.product, ln.due, take))
                units -= take
                left[0] = DemandLine(ln.product, ln.due, ln.qty - take)
                if left[0].qty == 0:
                    left.pop(0)
            if r.ven == problem.blocked:
                keep += taken
            else:
                assignment[r.ven] = tuple(assignment.get(r.ven, ())) + tuple(taken)
        keep = Scenario.from_lines(keep).lines if keep else ()
        assignment = {v: Scenario.from_lines(ls).lines for v, ls in assignment.items()}
        return origin.orders_for(problem, assignment, caps, blocked_lines=keep)


def _fmt(lines) -> str:
    return "[" + ", ".join(f"({l.due},{l.qty})" for l in lines) + "]"


def deficit_total(resolutions) -> Decimal:
    return money(sum((r.deficit for r in resolutions), ZERO))
