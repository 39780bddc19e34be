"""JSON run configuration: network, order script and mode.

Schema (all days are integer day indices)::

    {
      "tiers": [[<ven>, ...], ...],           # tier 1 first
      "clients": [<party>], "external_suppliers": [<party>],
      "orders": [{"day", "id", "customer", "supplier", "product", "due", "qty"}],
      "mode": "strict" | "lenient"
    }
    <ven>   = {"id", "tier", "products_made", "bom": [{"parent", "child", "qty_per", "lead_offset"}],
               "stocks": {product: units},
               "capacity": {"start", "end", "per_day": int | [int], "overrides": {day: units}},
               "costs": {"unit_production_cost", "overtime_cost", "subcontract_cost",
                         "penalty_rate", "selling_price"},
               "customers", "suppliers", "committed_load": {day: units},
               "conditions": {"overtime_cap", "subcontract_cap"},
               "relief": {"overtime_per_day", "subcontract_units"},
               "scenario_families": ["split", "delayed"], "deficit_cap": "12.50" | null}
    <party> = {"id", "tier", "products", "selling_price", "accept_counter"}

Money is written as a decimal string.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .domain import (
    BomEdge, CapacityCalendar, Conditions, CostModel, ExternalParty, NetworkConfig, ReliefOptions, VenConfig, money,
)
from .simulator import OrderScript


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    network: NetworkConfig
    orders: tuple[OrderScript, ...]
    mode: str = "strict"


def _days(raw: dict) -> dict:
    return {int(k): int(v) for k, v in (raw or {}).items()}


def _capacity(raw: dict) -> CapacityCalendar:
    start, end = int(raw["start"]), int(raw["end"])
    per_day = raw.get("per_day", 0)
    if isinstance(per_day, list):
        return CapacityCalendar(start, end, tuple(int(x) for x in per_day))
    return CapacityCalendar.uniform(start, end, int(per_day), _days(raw.get("overrides")))


def _ven(raw: dict) -> VenConfig:
    cap = raw.get("deficit_cap")
    return VenConfig(
        id=raw["id"],
        tier=int(raw["tier"]),
        products_made=frozenset(raw.get("products_made", ())),
        bom=tuple(BomEdge(e["parent"], e["child"], int(e.get("qty_per", 1)), int(e.get("lead_offset", 0)))
                  for e in raw.get("bom", ())),
        stocks={k: int(v) for k, v in raw.get("stocks", {}).items()},
        capacity=_capacity(raw["capacity"]),
        costs=CostModel(**raw.get("costs", {})),
        customers=tuple(raw.get("customers", ())),
        suppliers=tuple(raw.get("suppliers", ())),
        committed_load=_days(raw.get("committed_load")),
        conditions=Conditions(**raw.get("conditions", {})),
        relief=ReliefOptions(**raw.get("relief", {})),
        scenario_families=tuple(raw.get("scenario_families", ("split", "delayed"))),
        deficit_cap=money(cap) if cap is not None else None,
    )


def _party(raw: dict) -> ExternalParty:
    return ExternalParty(raw["id"], int(raw["tier"]), frozenset(raw.get("products", ())),
                         money(raw.get("selling_price", "0")), bool(raw.get("accept_counter", True)))


def parse_config(obj) -> RunConfig:
    try:
        network = NetworkConfig(
            tiers=tuple(tuple(_ven(v) for v in tier) for tier in obj["tiers"]),
            clients=tuple(_party(c) for c in obj.get("clients", ())),
            external_suppliers=tuple(_party(s) for s in obj.get("external_suppliers", ())),
        )
        orders = tuple(OrderScript(int(o["day"]), o["id"], o["customer"], o["supplier"], o["product"],
                                   int(o["due"]), int(o["qty"])) for o in obj.get("orders", ()))
        mode = obj.get("mode", "strict")
    except (KeyError, TypeError, ValueError, ArithmeticError) as exc:
        raise ConfigError(f"bad configuration: {type(exc).__name__}: {exc}") from None
    if mode not in ("strict", "lenient"):
        raise ConfigError(f"unknown mode {mode!r}")
    return RunConfig(network, orders, mode)


def load_config(path: Union[str, Path]) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(obj)


FIXTURES = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / f"{name}.json"


def load_fixture(name: str) -> RunConfig:
    return load_config(fixture_path(name))
