"""Independent recomputation of the network accounts from a trace.

Uses only the messages and the configured prices and cost rates; none of the
agents' internal bookkeeping.  Production is what each VEN asked its PA to
build for a concluded sale; overtime is whatever a mediated order needed
beyond the idle capacity the VEN itself reported in its last snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal

from .domain import ZERO, NetworkConfig, money
from .protocol import MessageKind as K, Message, party_of


@dataclass
class AuditLine:
    selling: Decimal = ZERO
    purchases: Decimal = ZERO
    production: Decimal = ZERO
    overtime: Decimal = ZERO
    subcontract: Decimal = ZERO

    @property
    def costs(self) -> Decimal:
        return self.purchases + self.production + self.overtime + self.subcontract


@dataclass
class Audit:
    lines: dict = field(default_factory=dict)

    @property
    def benefit(self) -> Decimal:
        return money(sum((l.selling - l.costs for l in self.lines.values()), ZERO))


def _qty(lines) -> int:
    return sum(l.qty for l in lines)


def audit_trace(trace: list[Message], network: NetworkConfig) -> Audit:
    managed = {v.id: v for v in network.vens}
    out = Audit({v: AuditLine() for v in managed})
    planned: dict = {}        # (ven, order) -> lines last handed to the PA
    tna_caps: dict = {}       # (ven, order) -> (overtime_cap, subcontract_cap)
    idle_seen: dict = {}      # ven -> latest snapshot
    concluded: dict = {}      # (ven, order) -> contracted qty

    for m in trace:
        src, dst = party_of(m.sender), party_of(m.to)
        p = m.payload
        if m.kind in (K.D_PA_N, K.D_PA_M):
            planned[(src, p.order_id)] = p.lines
        elif m.kind == K.C_TNA:
            tna_caps[(dst, p.order_id)] = (p.overtime_cap, p.subcontract_cap)
            planned.pop((dst, p.order_id), None)
        elif m.kind == K.R_TNA:
            idle_seen[src] = p
        elif m.kind in (K.A_US, K.A_DS) and src in managed:
            out.lines[src].selling += _qty(p.lines) * managed[src].costs.selling_price
            concluded[(src, p.order_id)] = _qty(planned.get((src, p.order_id), ()))
        if m.kind == K.A_DS and dst in managed:
            out.lines[dst].purchases += _qty(p.lines) * network.price(src)
        if m.kind in (K.RN_US, K.RN_DS) and p.accepted and dst in managed:
            out.lines[dst].selling += p.scenario.total * managed[dst].costs.selling_price
            concluded[(dst, p.order_id)] = None    # production known once the re-plan is issued
            if src in managed:
                out.lines[src].purchases += p.scenario.total * network.price(dst)

    # a counter-accepted sale is produced on the lines of its last re-plan
    for key, qty in concluded.items():
        ven_id, oid = key
        ven = managed[ven_id]
        units = qty if qty is not None else _qty(planned.get(key, ()))
        out.lines[ven_id].production += units * ven.costs.unit_production_cost
        ot_cap, sub_cap = tna_caps.get(key, (0, 0))
        if (ot_cap or sub_cap) and ven_id in idle_seen:
            lines = planned.get(key, ())
            due = max((l.due for l in lines), default=0)
            beyond = max(0, units - idle_seen[ven_id].idle_through(due))
            days = sum(1 for d in ven.capacity.days if d <= due)
            ot = min(beyond, ot_cap * days)
            sub = min(beyond - ot, sub_cap)
            out.lines[ven_id].overtime += ot * ven.costs.overtime_cost
            out.lines[ven_id].subcontract += sub * ven.costs.subcontract_cost
    for line in out.lines.values():
        for name in ("selling", "purchases", "production", "overtime", "subcontract"):
            setattr(line, name, money(getattr(line, name)))
    return out
