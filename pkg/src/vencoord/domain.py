"""Core value types shared by every agent: products, days, demands, topology, costs."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Optional

Day = int
ProductId = str
VenId = str

CENT = Decimal("0.01")
ZERO = Decimal("0.00")


def money(value) -> Decimal:
    """Coerce to a 2-digit fixed-point amount."""
    if isinstance(value, float):
        value = repr(value)
    return Decimal(value).quantize(CENT, rounding=ROUND_HALF_UP)


@dataclass(frozen=True, order=True)
class DemandLine:
    product: ProductId
    due: Day
    qty: int

    def __post_init__(self):
        if self.qty < 0:
            raise ValueError(f"negative quantity in {self}")
        if self.due < 0:
            raise ValueError(f"negative day in {self}")


@dataclass(frozen=True)
class Scenario:
    """An alternative delivery profile for a single product."""

    lines: tuple[DemandLine, ...]
    label: str = ""

    def __post_init__(self):
        if not self.lines:
            raise ValueError("scenario without lines")
        products = {ln.product for ln in self.lines}
        if len(products) != 1:
            raise ValueError(f"scenario mixes products {sorted(products)}")
        dues = [ln.due for ln in self.lines]
        if any(b <= a for a, b in zip(dues, dues[1:])):
            raise ValueError(f"scenario dates not strictly increasing: {dues}")
        if any(ln.qty == 0 for ln in self.lines):
            raise ValueError("scenario carries a zero-quantity line")

    @property
    def product(self) -> ProductId:
        return self.lines[0].product

    @property
    def total(self) -> int:
        return sum(ln.qty for ln in self.lines)

    @classmethod
    def from_lines(cls, lines: Iterable[DemandLine], label: str = "") -> "Scenario":
        """Merge same-day lines, drop zero lines, sort by date."""
        merged: dict[tuple[str, int], int] = {}
        for ln in lines:
            key = (ln.product, ln.due)
            merged[key] = merged.get(key, 0) + ln.qty
        out = tuple(
            DemandLine(p, d, q) for (p, d), q in sorted(merged.items(), key=lambda kv: kv[0][1]) if q > 0
        )
        return cls(out, label)


@dataclass(frozen=True)
class BomEdge:
    parent: ProductId
    child: ProductId
    qty_per: int = 1
    lead_offset: int = 0

    def __post_init__(self):
        if self.qty_per < 1:
            raise ValueError(f"qty_per must be >= 1: {self}")
        if self.lead_offset < 0:
            raise ValueError(f"negative lead offset: {self}")


@dataclass(frozen=True)
class CapacityCalendar:
    """Bottleneck capacity per day over an inclusive horizon."""

    start: Day
    end: Day
    per_day: tuple[int, ...]

    def __post_init__(self):
        if self.end < self.start:
            raise ValueError("capacity horizon ends before it starts")
        if len(self.per_day) != self.end - self.start + 1:
            raise ValueError("capacity must be defined for every day of the horizon")
        if any(c < 0 for c in self.per_day):
            raise ValueError("negative capacity")

    @classmethod
    def uniform(cls, start: Day, end: Day, units: int, overrides: Optional[dict] = None) -> "CapacityCalendar":
        overrides = overrides or {}
        return cls(start, end, tuple(int(overrides.get(d, units)) for d in range(start, end + 1)))

    @property
    def days(self) -> range:
        return range(self.start, self.end + 1)

    def at(self, day: Day) -> int:
        if self.start <= day <= self.end:
            return self.per_day[day - self.start]
        return 0

    def as_dict(self) -> dict[Day, int]:
        return {d: self.at(d) for d in self.days}


@dataclass(frozen=True)
class CostModel:
    unit_production_cost: Decimal = ZERO
    overtime_cost: Decimal = ZERO
    subcontract_cost: Decimal = ZERO
    penalty_rate: Decimal = ZERO
    selling_price: Decimal = ZERO

    def __post_init__(self):
        for name in ("unit_production_cost", "overtime_cost", "subcontract_cost", "penalty_rate", "selling_price"):
            value = money(getattr(self, name))
            if value < 0:
                raise ValueError(f"{name} must be >= 0")
            object.__setattr__(self, name, value)


@dataclass(frozen=True)
class Conditions:
    """Planning conditions an NA hands to its PA: overtime units/day and subcontracted units."""

    overtime_cap: int = 0
    subcontract_cap: int = 0


@dataclass(frozen=True)
class ReliefOptions:
    """Emergency capacity the mediator may authorise on this VEN."""

    overtime_per_day: int = 0
    subcontract_units: int = 0


@dataclass(frozen=True)
class VenConfig:
    id: VenId
    tier: int
    products_made: frozenset
    bom: tuple[BomEdge, ...]
    stocks: dict
    capacity: CapacityCalendar
    costs: CostModel = field(default_factory=CostModel)
    customers: tuple[VenId, ...] = ()
    suppliers: tuple[VenId, ...] = ()
    committed_load: dict = field(default_factory=dict)
    conditions: Conditions = field(default_factory=Conditions)
    relief: ReliefOptions = field(default_factory=ReliefOptions)
    scenario_families: tuple[str, ...] = ("split", "delayed")
    deficit_cap: Optional[Decimal] = None

    def idle(self) -> dict[Day, int]:
        """Unused bottleneck capacity per day, before any order of the run."""
        return {d: max(0, self.capacity.at(d) - self.committed_load.get(d, 0)) for d in self.capacity.days}


@dataclass(frozen=True)
class ExternalParty:
    """Scripted partner outside the managed network (tier-0 client or last-tier supplier)."""

    id: VenId
    tier: int
    products: frozenset = frozenset()
    selling_price: Decimal = ZERO
    accept_counter: bool = True


@dataclass(frozen=True)
class NetworkConfig:
    tiers: tuple[tuple[VenConfig, ...], ...]
    clients: tuple[ExternalParty, ...] = ()
    external_suppliers: tuple[ExternalParty, ...] = ()

    @property
    def vens(self) -> list[VenConfig]:
        return [v for tier in self.tiers for v in tier]

    def ven(self, ven_id: VenId) -> VenConfig:
        for v in self.vens:
            if v.id == ven_id:
                return v
        raise KeyError(ven_id)

    def party(self, pid: VenId):
        for p in (*self.clients, *self.external_suppliers):
            if p.id == pid:
                return p
        return self.ven(pid)

    def tier_of(self, pid: VenId) -> int:
        return self.party(pid).tier

    def is_external(self, pid: VenId) -> bool:
        return any(p.id == pid for p in (*self.clients, *self.external_suppliers))

    def price(self, pid: VenId) -> Decimal:
        party = self.party(pid)
        return party.costs.selling_price if isinstance(party, VenConfig) else party.selling_price

    def makers(self, product: ProductId) -> list[VenId]:
        out = [v.id for v in self.vens if product in v.products_made]
        out += [p.id for p in self.external_suppliers if product in p.products]
        return out


@dataclass(frozen=True, order=True)
class Violation:
    kind: str
    subject: str
    detail: str

    def __str__(self):
        return f"{self.kind}: {self.subject}: {self.detail}"


class MisroutedOrder(KeyError):
    pass


def bom_children(cfg: VenConfig, product: ProductId) -> list[BomEdge]:
    if product not in cfg.products_made:
        raise MisroutedOrder(f"{cfg.id} does not make {product}")
    return [e for e in cfg.bom if e.parent == product]


def _find_cycle(graph: dict[str, list[str]]) -> list[list[str]]:
    color: dict[str, int] = {}
    cycles = []

    def visit(node, path):
        color[node] = 1
        path.append(node)
        for nxt in graph.get(node, ()):
            if color.get(nxt, 0) == 1:
                cycles.append(path[path.index(nxt):] + [nxt])
            elif color.get(nxt, 0) == 0:
                visit(nxt, path)
        path.pop()
        color[node] = 2

    for node in sorted(graph):
        if color.get(node, 0) == 0:
            visit(node, [])
    return cycles


def validate_network(cfg: NetworkConfig) -> list[Violation]:
    """Every violation of the network invariants, sorted. Empty means valid."""
    out: set[Violation] = set()
    tier_of: dict[str, int] = {}
    seen: dict[str, int] = {}
    parties = [(v.id, v.tier) for v in cfg.vens]
    parties += [(p.id, p.tier) for p in (*cfg.clients, *cfg.external_suppliers)]
    for pid, tier in parties:
        seen[pid] = seen.get(pid, 0) + 1
        tier_of.setdefault(pid, tier)
    for pid, count in seen.items():
        if count > 1:
            out.add(Violation("duplicate", pid, f"declared {count} times"))

    for idx, tier in enumerate(cfg.tiers, start=1):
        for v in tier:
            if v.tier != idx:
                out.add(Violation("tier", v.id, f"declared tier {v.tier} but listed in tier {idx}"))
    last = len(cfg.tiers) + 1
    for c in cfg.clients:
        if c.tier != 0:
            out.add(Violation("tier", c.id, "external clients live on tier 0"))
    for s in cfg.external_suppliers:
        if s.tier != last:
            out.add(Violation("tier", s.id, f"external suppliers live on tier {last}"))

    graph: dict[str, list[str]] = {}
    for v in cfg.vens:
        for sup in v.suppliers:
            graph.setdefault(v.id, []).append(sup)
            if sup not in tier_of:
                out.add(Violation("dangling", v.id, f"unknown supplier {sup}"))
            elif tier_of[sup] != v.tier + 1 and sup != v.id:
                out.add(Violation("adjacency", v.id, f"supplier {sup} on tier {tier_of[sup]}, expected {v.tier + 1}"))
        for cus in v.customers:
            graph.setdefault(cus, []).append(v.id)
            if cus not in tier_of:
                out.add(Violation("dangling", v.id, f"unknown customer {cus}"))
            elif tier_of[cus] != v.tier - 1 and cus != v.id:
                out.add(Violation("adjacency", v.id, f"customer {cus} on tier {tier_of[cus]}, expected {v.tier - 1}"))
        for sup in v.suppliers:
            if sup in tier_of and not cfg.is_external(sup) and sup != v.id:
                if v.id not in cfg.ven(sup).customers:
                    out.add(Violation("asymmetric", v.id, f"{sup} does not list {v.id} as customer"))
        for cus in v.customers:
            if cus in tier_of and not cfg.is_external(cus) and cus != v.id:
                if v.id not in cfg.ven(cus).suppliers:
                    out.add(Violation("asymmetric", v.id, f"{cus} does not list {v.id} as supplier"))

    graph = {k: sorted(set(vs)) for k, vs in graph.items()}
    for cyc in _find_cycle(graph):
        out.add(Violation("cycle", cyc[0], " -> ".join(cyc)))

    for v in cfg.vens:
        bom_graph: dict[str, list[str]] = {}
        for e in v.bom:
            bom_graph.setdefault(e.parent, []).append(e.child)
        for cyc in _find_cycle({k: sorted(vs) for k, vs in bom_graph.items()}):
            out.add(Violation("bom-cycle", v.id, " -> ".join(cyc)))
    return sorted(out)
