"""Seeded synthetic datasets for demos and end-to-end testing.

The generator draws a decreasing true demand curve per category, walks
daily prices around a base level, and emits transactions whose volumes
follow the curve plus noise, so every downstream stage (fitting,
forecasting, planning, auditing) has realistic structure to find.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date
from datetime import time as Time
from datetime import timedelta

import numpy as np

from .dataio import (
    CatalogEntry,
    Dataset,
    LossEntry,
    Transaction,
    WholesaleQuote,
    build_dataset,
)

# six category blueprints: (code, name, base retail price, curve family)
_CATEGORY_SPECS = (
    ("Q01", "花叶类", 8.0, "log"),
    ("Q02", "花菜类", 13.0, "linear"),
    ("Q03", "水生根茎类", 16.0, "log"),
    ("Q04", "茄类", 10.0, "linear"),
    ("Q05", "辣椒类", 9.0, "log"),
    ("Q06", "食用菌", 12.0, "linear"),
)


@dataclass(frozen=True)
class TrueCurve:
    """The generating demand curve of one synthetic category."""

    category: str
    family: str
    params: tuple[float, ...]

    def demand(self, price: float) -> float:
        if self.family == "linear":
            a, b = self.params
            return max(0.0, a * price + b)
        a, b, c = self.params
        return max(0.0, a * np.log(price - b) + c)


def generate_dataset(
    seed: int = 0,
    n_days: int = 40,
    items_per_category: int = 7,
    start: Date = Date(2023, 5, 20),
) -> tuple[Dataset, dict[str, TrueCurve]]:
    """Build a Dataset plus the true curves it was generated from."""
    rng = np.random.default_rng(seed)
    catalog: list[CatalogEntry] = []
    curves: dict[str, TrueCurve] = {}
    item_meta: list[tuple[str, str, float, float]] = []  # code, cat, base_w, share
    idx = 0
    for cat_code, cat_name, base_price, family in _CATEGORY_SPECS:
        scale = float(rng.uniform(25.0, 90.0))  # demand kg at base price
        if family == "linear":
            # zero-demand point well above the base price
            root = base_price * float(rng.uniform(1.9, 2.4))
            a = -scale / (root - base_price)
            curves[cat_name] = TrueCurve(cat_name, "linear", (a, -a * root))
        else:
            shift = base_price * float(rng.uniform(0.1, 0.25))
            amp = -scale / float(rng.uniform(0.8, 1.4))
            zero_at = base_price * float(rng.uniform(1.9, 2.4))
            c = -amp * np.log(zero_at - shift)
            curves[cat_name] = TrueCurve(cat_name, "log", (amp, shift, float(c)))
        shares = rng.dirichlet(np.full(items_per_category, 3.0))
        for k in range(items_per_category):
            code = f"V{idx:03d}"
            name = f"{cat_name}{k + 1:02d}号"
            catalog.append(CatalogEntry(code, name, cat_code, cat_name))
            base_w = base_price * float(rng.uniform(0.42, 0.58))
            item_meta.append((code, cat_name, base_w, float(shares[k])))
            idx += 1

    losses = {
        code: LossEntry(code, round(float(rng.uniform(4.0, 18.0)), 2) / 100.0)
        for code, _, _, _ in item_meta
    }

    transactions: list[Transaction] = []
    quotes: list[WholesaleQuote] = []
    by_cat: dict[str, list[tuple[str, float, float]]] = {}
    for code, cat, base_w, share in item_meta:
        by_cat.setdefault(cat, []).append((code, base_w, share))

    wholesale_level = {code: base_w for code, _, base_w, _ in item_meta}
    for day_no in range(n_days):
        day = start + timedelta(days=day_no)
        for cat_code, cat_name, base_price, _family in _CATEGORY_SPECS:
            price_today = base_price * float(rng.uniform(0.78, 1.28))
            demand_today = curves[cat_name].demand(price_today) * float(
                rng.lognormal(0.0, 0.06)
            )
            for code, base_w, share in by_cat[cat_name]:
                # wholesale level wanders slowly around its base
                level = wholesale_level[code]
                level = 0.9 * level + 0.1 * base_w + float(rng.normal(0.0, 0.02 * base_w))
                wholesale_level[code] = min(max(level, 0.3 * base_w), 0.85 * price_today)
                if day_no == 0 or rng.uniform() > 0.03:
                    quotes.append(
                        WholesaleQuote(day, code, round(wholesale_level[code], 2))
                    )
                kg = demand_today * share * float(rng.uniform(0.85, 1.15))
                if kg < 0.05:
                    continue
                item_price = price_today * float(rng.uniform(0.92, 1.08))
                n_rows = 1 + (rng.uniform() < 0.3)
                split = rng.dirichlet(np.full(n_rows, 2.0)) * kg
                for piece in split:
                    hh = int(rng.integers(8, 21))
                    mm = int(rng.integers(0, 60))
                    discounted = rng.uniform() < 0.05
                    price = item_price * (0.8 if discounted else 1.0)
                    transactions.append(
                        Transaction(
                            date=day,
                            time=Time(hh, mm, int(rng.integers(0, 60))),
                            item_code=code,
                            quantity_kg=round(float(piece), 3),
                            unit_price=round(float(price), 2),
                            is_return=False,
                            is_discount=discounted,
                        )
                    )
                if rng.uniform() < 0.02:
                    transactions.append(
                        Transaction(
                            date=day,
                            time=Time(int(rng.integers(8, 21)), 30, 0),
                            item_code=code,
                            quantity_kg=round(float(kg) * 0.05 + 0.01, 3),
                            unit_price=round(float(item_price), 2),
                            is_return=True,
                            is_discount=False,
                        )
                    )
    transactions.sort(key=lambda t: (t.date, t.time))
    dataset = build_dataset(
        tuple(sorted(catalog, key=lambda e: e.item_code)),
        tuple(transactions),
        tuple(sorted(quotes, key=lambda q: (q.date, q.item_code))),
        losses,
    )
    return dataset, curves
