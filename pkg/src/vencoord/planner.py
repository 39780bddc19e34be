"""Planner agent: stock netting, BOM explosion with lead offsets, bottleneck
loading, scenario generation/evaluation and cost evaluation.

Availability curves are ``{first usable day: units}`` increments.  A supply
delivered on day ``d`` is usable from ``d + 1``; reserved stock is usable from
day 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Iterable, Optional, Sequence

from .domain import (
    ZERO, BomEdge, Conditions, CostModel, Day, DemandLine, ProductId, Scenario, VenConfig, bom_children, money,
)
from .protocol import (
    MessageKind as K, PaState, PlanReply, PlanRequest, Proposal, Reply, check_transition,
)


class InfeasibleByTime(ValueError):
    """A lead offset pushes a component date before the VEN's planning horizon."""


class ContractViolation(ValueError):
    pass


class PlannerProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class ProductionLot:
    order_id: str
    product: ProductId
    due: Day
    qty: int

    def __post_init__(self):
        if self.qty < 0:
            raise ValueError("negative lot")


@dataclass(frozen=True)
class Schedule:
    production: dict = field(default_factory=dict)   # day -> units (regular + overtime)
    overtime: dict = field(default_factory=dict)     # day -> units beyond idle capacity
    subcontracted: int = 0
    late_unit_days: int = 0

    @property
    def produced(self) -> int:
        return sum(self.production.values())

    @property
    def total(self) -> int:
        return self.produced + self.subcontracted

    @property
    def overtime_units(self) -> int:
        return sum(self.overtime.values())


@dataclass(frozen=True)
class CapacityResult:
    feasible: bool
    schedule: Schedule
    shortfall: int
    completion: Optional[Day]      # day the full qty is done with regular capacity, ignoring the due date
    produced_by_due: int           # regular-capacity output by the due date
    cause: str = ""                # "capacity" | "components" when infeasible


@dataclass(frozen=True)
class CostBreakdown:
    production: Decimal = ZERO
    overtime: Decimal = ZERO
    subcontract: Decimal = ZERO
    lateness_penalty: Decimal = ZERO

    @property
    def total(self) -> Decimal:
        return self.production + self.overtime + self.subcontract + self.lateness_penalty

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(self.production + other.production, self.overtime + other.overtime,
                             self.subcontract + other.subcontract, self.lateness_penalty + other.lateness_penalty)


def net_requirement(demanded: int, stock: int) -> int:
    if demanded < 0 or stock < 0:
        raise ValueError("quantities must be non-negative")
    return max(0, demanded - stock)


@dataclass(frozen=True)
class Explosion:
    lines: tuple[DemandLine, ...]
    consumed: dict            # child -> stock units reserved for the lot
    gross: dict               # child -> gross units required


def explode_requirements(lots: Sequence[ProductionLot] | ProductionLot, bom: Iterable[BomEdge], stocks: dict,
                         horizon_start: Day = 0) -> Explosion:
    """Component lines still to be bought after netting against ``stocks``.

    ``stocks`` is not mutated; the reservation is returned in ``consumed``.
    """
    if isinstance(lots, ProductionLot):
        lots = [lots]
    remaining = dict(stocks)
    lines, consumed, gross = [], {}, {}
    for lot in sorted(lots, key=lambda l: l.due):
        if lot.qty == 0:
            continue
        for edge in bom:
            if edge.parent != lot.product:
                continue
            need = lot.qty * edge.qty_per
            have = remaining.get(edge.child, 0)
            net = net_requirement(need, have)
            used = need - net
            remaining[edge.child] = have - used
            consumed[edge.child] = consumed.get(edge.child, 0) + used
            gross[edge.child] = gross.get(edge.child, 0) + need
            if net > 0:
                date = lot.due - edge.lead_offset
                if date < horizon_start:
                    raise InfeasibleByTime(f"{edge.child} needed on day {date}, before horizon start {horizon_start}")
                lines.append(DemandLine(edge.child, date, net))
    return Explosion(tuple(lines), consumed, gross)


def kit_availability(product: ProductId, bom: Iterable[BomEdge], reserved: dict,
                     supplies: dict, ceiling: int) -> dict:
    """Cumulative finished-unit availability implied by components, as increments.

    ``supplies`` maps child -> DemandLines delivered on their due day.
    """
    edges = [e for e in bom if e.parent == product]
    if not edges:
        return {0: ceiling}
    days = {0}
    for e in edges:
        days.update(ln.due + 1 for ln in supplies.get(e.child, ()))
    out, prev = {}, 0
    for day in sorted(days):
        kits = ceiling
        for e in edges:
            have = reserved.get(e.child, 0) + sum(ln.qty for ln in supplies.get(e.child, ()) if ln.due + 1 <= day)
            kits = min(kits, have // e.qty_per)
        if kits > prev:
            out[day] = kits - prev
            prev = kits
    return out


def _cum(avail: dict, day: Day) -> int:
    return sum(q for d, q in avail.items() if d <= day)


def _earliest_loading(total: int, idle: dict, avail: dict, last_day: Optional[Day] = None) -> dict:
    prod, cum = {}, 0
    for day in sorted(idle):
        if last_day is not None and day > last_day:
            break
        if cum >= total:
            break
        p = min(idle[day], _cum(avail, day) - cum, total - cum)
        if p > 0:
            prod[day] = p
            cum += p
    return prod


def check_profile(lines: Sequence[DemandLine], idle: dict, avail: dict, conditions: Conditions = Conditions()
                  ) -> CapacityResult:
    """Earliest-loading feasibility of a dated demand profile on one bottleneck."""
    lines = sorted(lines, key=lambda l: l.due)
    total = sum(l.qty for l in lines)
    if total == 0:
        return CapacityResult(True, Schedule(), 0, None, 0)
    last_due = lines[-1].due
    regular = _earliest_loading(total, idle, avail, last_due)

    def short_by_due(prod: dict, extra_sub: int = 0) -> int:
        worst, need = 0, 0
        for ln in lines:
            need += ln.qty
            done = sum(q for d, q in prod.items() if d <= ln.due) + extra_sub
            worst = max(worst, need - done)
        return worst

    produced = dict(regular)
    overtime: dict = {}
    if short_by_due(produced) > 0 and conditions.overtime_cap > 0:
        # overtime is packed as late as the dues allow so regular capacity stays preferred
        for ln_idx in range(len(lines)):
            due = lines[ln_idx].due
            need = sum(l.qty for l in lines[: ln_idx + 1]) - sum(q for d, q in produced.items() if d <= due)
            for day in sorted((d for d in idle if d <= due), reverse=True):
                if need <= 0:
                    break
                room = conditions.overtime_cap - overtime.get(day, 0)
                slack = min(_cum(avail, t) - sum(q for d, q in produced.items() if d <= t)
                            for t in idle if day <= t <= last_due)
                add = max(0, min(room, need, slack, total - sum(produced.values())))
                if add:
                    produced[day] = produced.get(day, 0) + add
                    overtime[day] = overtime.get(day, 0) + add
                    need -= add
    sub = 0
    gap = short_by_due(produced)
    if gap > 0 and conditions.subcontract_cap > 0:
        sub = min(conditions.subcontract_cap, total - sum(produced.values()))
        gap = short_by_due(produced, sub)
    full = _earliest_loading(total, idle, avail)
    completion = max(full) if sum(full.values()) == total else None
    by_due = sum(regular.values())
    schedule = Schedule(dict(sorted(produced.items())), dict(sorted(overtime.items())), sub)
    if gap == 0:
        return CapacityResult(True, schedule, 0, completion, by_due)
    unlimited = _earliest_loading(total, idle, {0: total}, last_due)
    cause = "components" if short_by_due(unlimited) == 0 else "capacity"
    return CapacityResult(False, schedule, gap, completion, by_due, cause)


def check_capacity(lot: ProductionLot, idle: dict, availability: dict,
                   conditions: Conditions = Conditions()) -> CapacityResult:
    """Earliest-loading schedule for one lot, or the shortfall and earliest completion."""
    return check_profile([DemandLine(lot.product, lot.due, lot.qty)], idle, availability, conditions)


def generate_scenarios(demand: DemandLine, idle: dict, availability: dict,
                       families: Sequence[str] = ("split", "delayed")) -> list[Scenario]:
    result = check_capacity(ProductionLot("", demand.product, demand.due, demand.qty), idle, availability)
    if result.feasible:
        raise ContractViolation(f"{demand} is feasible as stated; nothing to counter-propose")
    if result.completion is None:
        return []
    on_time = min(result.produced_by_due, demand.qty)
    split = Scenario.from_lines([DemandLine(demand.product, demand.due, on_time),
                                 DemandLine(demand.product, result.completion, demand.qty - on_time)], "split")
    delayed = Scenario.from_lines([DemandLine(demand.product, result.completion, demand.qty)], "delayed")
    out = []
    if "split" in families:
        out.append(split)
    if "delayed" in families and not (out and out[0].lines == delayed.lines):
        out.append(delayed)
    return out


@dataclass(frozen=True)
class OrderContext:
    """What a PA committed for an order: enough to re-test alternative component supplies."""

    product: ProductId
    lines: tuple[DemandLine, ...]
    bom: tuple[BomEdge, ...]
    reserved: dict
    supplies: dict
    idle: dict                  # idle capacity with this order's own load released
    conditions: Conditions = Conditions()


def evaluate_scenarios(ctx: OrderContext, component: ProductId, scenarios: Sequence[Scenario]):
    """First scenario whose supply keeps the committed obligation feasible, or None."""
    total = sum(l.qty for l in ctx.lines)
    for sc in scenarios:
        supplies = dict(ctx.supplies)
        supplies[component] = sc.lines
        avail = kit_availability(ctx.product, ctx.bom, ctx.reserved, supplies, total)
        res = check_profile(ctx.lines, ctx.idle, avail, ctx.conditions)
        if res.feasible:
            return sc, res.schedule
    return None


def plan_cost(schedule: Schedule, costs: CostModel, late_unit_days: int = 0) -> CostBreakdown:
    return CostBreakdown(
        production=money(schedule.produced * costs.unit_production_cost),
        overtime=money(schedule.overtime_units * costs.overtime_cost),
        subcontract=money(schedule.subcontracted * costs.subcontract_cost),
        lateness_penalty=money((late_unit_days + schedule.late_unit_days) * costs.penalty_rate),
    )


# ---- the agent -----------------------------------------------------------

@dataclass
class PlanRecord:
    order_id: str
    product: ProductId
    lines: tuple[DemandLine, ...]
    conditions: Conditions
    status: str = "proposed"          # proposed | committed
    reserved: dict = field(default_factory=dict)
    supplies: dict = field(default_factory=dict)
    schedule: Schedule = field(default_factory=Schedule)
    shortfall: tuple[DemandLine, ...] = ()
    cost: CostBreakdown = field(default_factory=CostBreakdown)


def split_order_id(order_id: str) -> tuple[str, Optional[str]]:
    """``"o1/SCA"`` -> ``("o1", "SCA")``: the buyer-side id of a component request."""
    if "/" in order_id:
        parent, _, product = order_id.rpartition("/")
        return parent, product
    return order_id, None


class PlannerAgent:
    """One PA per VEN.  Never initiates; answers each D_PA_* with one R_PA_*."""

    def __init__(self, ven: VenConfig, stock: dict, idle: dict):
        self.ven = ven
        self.stock = stock          # shared with the NA (it nets finished goods, we net components)
        self.idle = idle
        self.state = PaState.IDLE
        self.ledger: dict[str, PlanRecord] = {}

    # -- helpers
    def _release(self, rec: PlanRecord):
        if rec.status != "committed":
            return
        for child, units in rec.reserved.items():
            self.stock[child] = self.stock.get(child, 0) + units
        for day, units in rec.schedule.production.items():
            self.idle[day] = self.idle.get(day, 0) + units - rec.schedule.overtime.get(day, 0)
        rec.status = "proposed"
        rec.reserved, rec.schedule = {}, Schedule()

    def _commit(self, rec: PlanRecord, schedule: Schedule):
        for child, units in rec.reserved.items():
            self.stock[child] = self.stock.get(child, 0) - units
        for day, units in schedule.production.items():
            self.idle[day] -= units - schedule.overtime.get(day, 0)
        rec.schedule = schedule
        rec.status = "committed"
        rec.shortfall = ()
        rec.cost = plan_cost(schedule, self.ven.costs)

    def _plan(self, order_id: str, lines: tuple[DemandLine, ...], conditions: Conditions) -> PlanReply:
        lines = tuple(l for l in lines if l.qty > 0)
        product = lines[0].product if lines else ""
        if any(l.product != product for l in lines):
            raise PlannerProtocolError(f"{order_id}: mixed products in one order")
        rec = PlanRecord(order_id, product, lines, conditions)
        self.ledger[order_id] = rec
        if not lines:
            rec.status = "committed"
            return PlanReply(order_id, True)
        bom_children(self.ven, product)  # raises on misrouted orders
        lots = [ProductionLot(order_id, product, l.due, l.qty) for l in lines]
        try:
            exp = explode_requirements(lots, self.ven.bom, self.stock, self.ven.capacity.start)
        except InfeasibleByTime:
            exp = None
        if exp is not None:
            supplies: dict = {}
            for ln in exp.lines:
                supplies.setdefault(ln.product, []).append(ln)
            supplies = {k: tuple(v) for k, v in supplies.items()}
            total = sum(l.qty for l in lines)
            avail = kit_availability(product, self.ven.bom, exp.consumed, supplies, total)
            res = check_profile(lines, self.idle, avail, conditions)
            if res.feasible:
                rec.reserved, rec.supplies = dict(exp.consumed), supplies
                self._commit(rec, res.schedule)
                return PlanReply(order_id, True, exp.lines)
        # infeasible: counter-propose per line with components assumed on time
        scenario_lines, short = [], []
        idle = dict(self.idle)
        ok = True
        for ln in sorted(lines, key=lambda l: l.due):
            lot = ProductionLot(order_id, product, ln.due, ln.qty)
            avail = self.assumed_availability(lot)
            res = check_capacity(lot, idle, avail, conditions)
            if res.feasible:
                scenario_lines.append(([ln], [ln]))
                for d, q in res.schedule.production.items():
                    idle[d] -= q - res.schedule.overtime.get(d, 0)
                continue
            short.append(DemandLine(product, ln.due, res.shortfall))
            options = generate_scenarios(ln, idle, avail, self.ven.scenario_families)
            if not options:
                ok = False
                continue
            split = next((s for s in options if s.label == "split"), None)
            delayed = next((s for s in options if s.label == "delayed"), None)
            scenario_lines.append((list(split.lines) if split else None, list(delayed.lines) if delayed else None))
        rec.shortfall = tuple(short)
        scenarios = []
        if ok:
            for fam, pick in (("split", 0), ("delayed", 1)):
                if fam not in self.ven.scenario_families:
                    continue
                chosen = [pair[pick] if pair[pick] is not None else pair[1 - pick] for pair in scenario_lines]
                sc = Scenario.from_lines([l for part in chosen for l in part], fam)
                if not any(s.lines == sc.lines for s in scenarios):
                    scenarios.append(sc)
        return PlanReply(order_id, False, (), tuple(scenarios))

    def assumed_availability(self, lot: ProductionLot) -> dict:
        try:
            exp = explode_requirements(lot, self.ven.bom, self.stock, self.ven.capacity.start)
        except InfeasibleByTime:
            return {}
        supplies: dict = {}
        for ln in exp.lines:
            supplies.setdefault(ln.product, []).append(ln)
        return kit_availability(lot.product, self.ven.bom, exp.consumed, supplies, lot.qty)

    def context(self, order_id: str) -> OrderContext:
        rec = self.ledger[order_id]
        idle = dict(self.idle)
        for day, units in rec.schedule.production.items():
            idle[day] = idle.get(day, 0) + units - rec.schedule.overtime.get(day, 0)
        return OrderContext(rec.product, rec.lines, self.ven.bom, rec.reserved, rec.supplies, idle, rec.conditions)

    def _assess(self, order_id: str, scenarios: Sequence[Scenario]) -> Reply:
        parent, component = split_order_id(order_id)
        rec = self.ledger.get(parent)
        if rec is None or component is None:
            raise PlannerProtocolError(f"D_PA_A for unknown order {order_id}")
        if rec.status != "committed":
            return Reply(order_id, False)
        found = evaluate_scenarios(self.context(parent), component, scenarios)
        if found is None:
            return Reply(order_id, False)
        scenario, schedule = found
        reserved, supplies = rec.reserved, dict(rec.supplies)
        supplies[component] = scenario.lines
        self._release(rec)
        rec.reserved, rec.supplies = reserved, supplies
        self._commit(rec, schedule)
        return Reply(order_id, True, scenario)

    # -- message entry point
    def handle(self, kind: K, payload) -> tuple[K, object]:
        """Answer one planner request; returns (reply kind, reply payload)."""
        verdict = check_transition(self.state, kind, "in")
        if not verdict:
            raise PlannerProtocolError(verdict.reason)
        self.state = PaState.PLANNING
        try:
            if kind == K.D_PA_N:
                if payload.order_id in self.ledger:
                    raise PlannerProtocolError(f"duplicate new order {payload.order_id}")
                cond = Conditions(payload.overtime_cap, payload.subcontract_cap)
                return K.R_PA_US, self._plan(payload.order_id, payload.lines, cond)
            if kind == K.D_PA_M:
                rec = self.ledger.get(payload.order_id)
                if rec is None:
                    raise PlannerProtocolError(f"D_PA_M for unknown order {payload.order_id}")
                self._release(rec)
                cond = Conditions(payload.overtime_cap, payload.subcontract_cap)
                return K.R_PA_US, self._plan(payload.order_id, payload.lines, cond)
            if kind == K.D_PA_A:
                return K.R_PA_DS, self._assess(payload.order_id, payload.scenarios)
            raise PlannerProtocolError(kind.value)  # pragma: no cover
        finally:
            self.state = PaState.IDLE


def pa_handle(agent: PlannerAgent, request: PlanRequest | Proposal, kind: K):
    """Functional face of :meth:`PlannerAgent.handle`."""
    return agent.handle(kind, request)
