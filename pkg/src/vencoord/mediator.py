"""Network-level mediation: the global benefit constraint, relaxation search and
long-run fair (min-max) distribution of authorised deficits."""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Optional, Sequence

from .domain import CENT, ZERO, money


@dataclass
class VenAccount:
    selling: Decimal = ZERO
    costs: Decimal = ZERO
    absorbed: Decimal = ZERO


@dataclass
class NetworkAccounts:
    """Cumulative selling, costs and absorbed deficit per VEN."""

    vens: dict = field(default_factory=dict)

    def account(self, ven: str) -> VenAccount:
        return self.vens.setdefault(ven, VenAccount())

    def book_sale(self, ven: str, amount) -> None:
        amount = money(amount)
        if amount < 0:
            raise ValueError("sales only grow")
        self.account(ven).selling += amount

    def book_cost(self, ven: str, amount) -> None:
        amount = money(amount)
        if amount < 0:
            raise ValueError("costs only grow")
        self.account(ven).costs += amount

    def copy(self) -> "NetworkAccounts":
        return NetworkAccounts({k: VenAccount(v.selling, v.costs, v.absorbed) for k, v in self.vens.items()})

    def histories(self) -> dict:
        return {k: v.absorbed for k, v in sorted(self.vens.items())}


def global_benefit(accounts: NetworkAccounts) -> Decimal:
    selling = sum((a.selling for a in accounts.vens.values()), ZERO)
    costs = sum((a.costs for a in accounts.vens.values()), ZERO)
    return money(selling - costs)


@dataclass(frozen=True)
class Relaxation:
    """One option for clearing a shortfall at extra cost."""

    ven: str
    mode: str            # overtime | subcontract | lateness
    units: int
    extra_cost: Decimal

    def __post_init__(self):
        object.__setattr__(self, "extra_cost", money(self.extra_cost))


@dataclass(frozen=True)
class Resolution:
    relaxations: tuple[Relaxation, ...]
    deficit: Decimal
    allocation: dict       # ven -> share of the deficit

    @property
    def empty(self) -> bool:
        return not self.relaxations and self.deficit == 0


@dataclass(frozen=True)
class Unsolvable:
    reason: str


def water_fill(deficit: Decimal, histories: dict, caps: Optional[dict] = None, quantum: Decimal = CENT) -> Optional[dict]:
    """Split ``deficit`` in ``quantum`` steps so the largest resulting history is minimal.

    Lowest history first, VEN id breaking ties.  Returns None when the caps
    cannot absorb the deficit.
    """
    deficit, quantum = money(deficit), Decimal(quantum)
    caps = caps or {}
    if deficit == 0:
        return {}
    if deficit % quantum != 0:
        raise ValueError("deficit is not a multiple of the allocation quantum")
    steps = int(deficit / quantum)
    vens = sorted(histories)
    alloc = {v: ZERO for v in vens}
    heap = [(Decimal(histories[v]), v) for v in vens]
    heapq.heapify(heap)
    while steps:
        while heap:
            level, v = heap[0]
            cap = caps.get(v)
            if cap is not None and alloc[v] + quantum > Decimal(cap):
                heapq.heappop(heap)  # full
                continue
            break
        if not heap:
            return None
        level, v = heapq.heappop(heap)
        alloc[v] += quantum
        heapq.heappush(heap, (level + quantum, v))
        steps -= 1
    return {v: money(a) for v, a in alloc.items() if a > 0}


def relax_allocate(shortfall: int, accounts: NetworkAccounts, candidates: Sequence[Relaxation],
                   partners: Optional[Iterable[str]] = None, caps: Optional[dict] = None,
                   quantum: Decimal = CENT, extra_deficit: Decimal = ZERO):
    """Cheapest relaxation set covering ``shortfall`` that keeps the network benefit non-negative.

    ``extra_deficit`` is a deficit imposed directly (no candidates needed);
    the allocation water-fills the total deficit over ``partners``.
    """
    margin = global_benefit(accounts)
    partners = sorted(partners if partners is not None else accounts.vens)
    best = None
    if shortfall <= 0:
        best = ((), ZERO)
    else:
        cands = sorted(candidates, key=lambda c: (c.extra_cost, c.ven, c.mode))[:16]
        for r in range(1, len(cands) + 1):
            for combo in itertools.combinations(cands, r):
                if sum(c.units for c in combo) < shortfall:
                    continue
                cost = sum((c.extra_cost for c in combo), ZERO)
                key = (cost, len(combo), [(c.ven, c.mode) for c in combo])
                if best is None or key < (best[1], len(best[0]), [(c.ven, c.mode) for c in best[0]]):
                    best = (combo, cost)
        if best is None:
            return Unsolvable(f"no relaxation set covers a shortfall of {shortfall} units")
    combo, cost = best
    deficit = money(cost + money(extra_deficit))
    if margin - deficit < 0:
        return Unsolvable(f"deficit {deficit} exceeds the network margin {margin}")
    hist = {p: accounts.vens[p].absorbed if p in accounts.vens else ZERO for p in partners}
    allocation = water_fill(deficit, hist, caps, quantum)
    if allocation is None:
        return Unsolvable(f"partners cannot absorb a deficit of {deficit}")
    return Resolution(tuple(combo), deficit, allocation)


def record_history(accounts: NetworkAccounts, resolution: Resolution) -> NetworkAccounts:
    """New accounts with each partner's absorbed deficit raised by its share."""
    out = accounts.copy()
    for ven, share in resolution.allocation.items():
        out.account(ven).absorbed += share
    return out
