"""Regenerate the bundled case fixtures (JSON) from one base network.

Days are indices: 148 = 05/28, 150 = 05/30, 152 = 06/01.
"""

import copy
import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "vencoord" / "fixtures"


def plant(id_, products, bom, stocks, start, per_day, suppliers=(), customers=("tap",), **extra):
    ven = {
        "id": id_, "tier": 2, "products_made": products, "bom": bom, "stocks": stocks,
        "capacity": {"start": start, "end": 160, "per_day": per_day},
        "costs": {"unit_production_cost": "0.50", "overtime_cost": "1.00", "subcontract_cost": "1.20",
                  "penalty_rate": "0.10", "selling_price": "1.50"},
        "customers": list(customers), "suppliers": list(suppliers),
    }
    ven.update(extra)
    return ven


def base():
    tap = {
        "id": "tap", "tier": 1, "products_made": ["PF"],
        "bom": [
            {"parent": "PF", "child": "SCBBA", "qty_per": 1, "lead_offset": 4},
            {"parent": "PF", "child": "SCBA", "qty_per": 2, "lead_offset": 4},
            {"parent": "PF", "child": "SCA", "qty_per": 1, "lead_offset": 4},
        ],
        "stocks": {"PF": 20, "SCA": 20, "SCBA": 160, "SCBBA": 80},
        "capacity": {"start": 148, "end": 160, "per_day": 30},
        "committed_load": {"148": 10, "152": 30},
        "costs": {"unit_production_cost": "2.00", "overtime_cost": "3.00", "subcontract_cost": "4.00",
                  "penalty_rate": "0.50", "selling_price": "10.00"},
        "customers": ["client"], "suppliers": ["blister", "oring", "body"],
    }
    blister = plant("blister", ["SCA"], [{"parent": "SCA", "child": "SCAA", "qty_per": 1, "lead_offset": 2}],
                    {"SCAA": 1000}, 145, 20, suppliers=["cardboard"])
    oring = plant("oring", ["SCBA"], [], {}, 145, 40)
    body = plant("body", ["SCBBA"], [], {}, 145, 40)
    return {
        "tiers": [[tap], [blister, oring, body]],
        "clients": [{"id": "client", "tier": 0, "products": ["PF"], "selling_price": "0.00"}],
        "external_suppliers": [{"id": "cardboard", "tier": 3, "products": ["SCAA"], "selling_price": "0.20"}],
        "orders": [{"day": 140, "id": "o1", "customer": "client", "supplier": "tap",
                    "product": "PF", "due": 152, "qty": 100}],
        "mode": "strict",
    }


def ven(cfg, id_):
    return next(v for tier in cfg["tiers"] for v in tier if v["id"] == id_)


def cases():
    case1 = base()

    case2 = base()
    ven(case2, "blister")["capacity"]["per_day"] = 10

    case3 = copy.deepcopy(case2)
    ven(case3, "tap")["committed_load"]["151"] = 30
    ven(case3, "blister")["scenario_families"] = ["delayed"]

    case3b = copy.deepcopy(case3)
    sibling = plant("blister2", ["SCA"], [{"parent": "SCA", "child": "SCAA", "qty_per": 1, "lead_offset": 2}],
                    {"SCAA": 1000}, 145, 10, suppliers=["cardboard"])
    case3b["tiers"][1].insert(1, sibling)
    ven(case3b, "tap")["suppliers"] = ["blister", "blister2", "oring", "body"]

    case4 = copy.deepcopy(case3)
    ven(case4, "blister")["relief"] = {"overtime_per_day": 5, "subcontract_units": 0}

    return {"case1": case1, "case2": case2, "case3": case3, "case3b": case3b, "case4": case4}


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, cfg in cases().items():
        (OUT / f"{name}.json").write_text(json.dumps(cfg, indent=2) + "\n")
        print(f"wrote {name}.json")


if __name__ == "__main__":
    main()
