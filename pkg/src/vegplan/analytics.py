"""Descriptive statistics over a Dataset.

Per-period sales aggregates with revenue-weighted average prices, category
profit, Pearson correlation of per-period volumes, and top-seller rankings.
Quarters are calendar quarters (Jan-Mar, Apr-Jun, Jul-Sep, Oct-Dec).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date as Date
from typing import Iterable, Sequence

import numpy as np

from .dataio import Dataset
from .errors import (
    EmptyDatasetError,
    InsufficientPeriodsError,
    LengthMismatchError,
    ZeroVarianceError,
)

GRANULARITIES = ("day", "month", "quarter")
LEVELS = ("category", "item")


@dataclass(frozen=True, order=True)
class PeriodKey:
    """A calendar period at day, month or quarter granularity.

    ``index`` is the ISO-style label ("2023-07-01", "2023-07", "2023Q3");
    lexicographic order on (granularity, index) is chronological within one
    granularity.
    """

    granularity: str
    index: str

    @classmethod
    def from_date(cls, day: Date, granularity: str) -> "PeriodKey":
        if granularity == "day":
            return cls("day", day.isoformat())
        if granularity == "month":
            return cls("month", f"{day.year:04d}-{day.month:02d}")
        if granularity == "quarter":
            quarter = (day.month - 1) // 3 + 1
            return cls("quarter", f"{day.year:04d}Q{quarter}")
        raise ValueError(f"unknown granularity {granularity!r}")


@dataclass(frozen=True)
class SalesAggregate:
    """Net volume, revenue and weighted average price of one group-period."""

    period: PeriodKey
    group: str
    total_kg: float
    revenue: float
    avg_unit_price: float | None


@dataclass(frozen=True)
class ProfitRow:
    period: PeriodKey
    category: str
    profit: float


@dataclass(frozen=True)
class ProfitReport:
    """Profit rows plus the sale rows dropped for lack of any wholesale quote."""

    rows: tuple[ProfitRow, ...]
    excluded: tuple[tuple[Date, str], ...]


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pairwise Pearson coefficients over per-period volume series."""

    labels: tuple[str, ...]
    values: np.ndarray
    dropped: tuple[str, ...]

    def entry(self, a: str, b: str) -> float:
        i, j = self.labels.index(a), self.labels.index(b)
        return float(self.values[i, j])


@dataclass(frozen=True)
class TopSeller:
    item_code: str
    item_name: str
    total_kg: float


def _group_of(dataset: Dataset, level: str):
    if level == "category":
        return dataset.category_of
    if level == "item":
        return lambda code: code
    raise ValueError(f"unknown level {level!r}")


def aggregate_sales(
    dataset: Dataset, granularity: str = "quarter", level: str = "category"
) -> list[SalesAggregate]:
    """Net kg, revenue and revenue-weighted average price per group-period.

    A group-period with only returns is emitted with total_kg 0 and no
    price.  total_kg never goes negative.
    """
    if not dataset.transactions:
        raise EmptyDatasetError("no transactions to aggregate")
    group_of = _group_of(dataset, level)
    sold: dict[tuple[PeriodKey, str], float] = {}
    returned: dict[tuple[PeriodKey, str], float] = {}
    sale_revenue: dict[tuple[PeriodKey, str], float] = {}
    for t in dataset.transactions:
        key = (PeriodKey.from_date(t.date, granularity), group_of(t.item_code))
        if t.is_return:
            returned[key] = returned.get(key, 0.0) + t.quantity_kg
        else:
            sold[key] = sold.get(key, 0.0) + t.quantity_kg
            sale_revenue[key] = sale_revenue.get(key, 0.0) + t.quantity_kg * t.unit_price
    out: list[SalesAggregate] = []
    for key in sorted(set(sold) | set(returned)):
        gross = sold.get(key, 0.0)
        if gross <= 0:
            out.append(SalesAggregate(key[0], key[1], 0.0, 0.0, None))
            continue
        avg_price = sale_revenue[key] / gross
        total = max(0.0, gross - returned.get(key, 0.0))
        out.append(SalesAggregate(key[0], key[1], total, avg_price * total, avg_price))
    return out


def category_profit(dataset: Dataset, granularity: str = "quarter") -> ProfitReport:
    """Per-category, per-period profit.

    profit = sum(price*kg over sales) - sum(price*kg over returns)
             - sum(wholesale*(1+loss)*kg over sales)

    The wholesale price of a sale row is the most recent quote on or before
    the sale date; rows whose item has no quote by then are excluded from
    all three sums and reported.
    """
    if not dataset.transactions:
        raise EmptyDatasetError("no transactions")
    profit: dict[tuple[PeriodKey, str], float] = {}
    excluded: set[tuple[Date, str]] = set()
    for t in dataset.transactions:
        key = (PeriodKey.from_date(t.date, granularity), dataset.category_of(t.item_code))
        if t.is_return:
            profit[key] = profit.get(key, 0.0) - t.unit_price * t.quantity_kg
            continue
        wholesale = dataset.wholesale_recent(t.item_code, t.date)
        if wholesale is None:
            excluded.add((t.date, t.item_code))
            continue
        loss = dataset.loss_rate(t.item_code)
        value = (t.unit_price - wholesale * (1.0 + loss)) * t.quantity_kg
        profit[key] = profit.get(key, 0.0) + value
    rows = tuple(ProfitRow(k[0], k[1], v) for k, v in sorted(profit.items()))
    return ProfitReport(rows=rows, excluded=tuple(sorted(excluded)))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient of two equal-length series.

    The denominator is sqrt(sum_sq_x * sum_sq_y) in one square root, so a
    series correlated with itself gives exactly 1.0.
    """
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise LengthMismatchError(f"series lengths differ: {xa.shape} vs {ya.shape}")
    if xa.size < 2:
        raise LengthMismatchError("need at least two observations")
    dx = xa - xa.mean()
    dy = ya - ya.mean()
    sx = float(dx @ dx)
    sy = float(dy @ dy)
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("a series has zero variance")
    return float((dx @ dy) / math.sqrt(sx * sy))


def _volume_series(
    dataset: Dataset, granularity: str, level: str
) -> tuple[list[PeriodKey], dict[str, np.ndarray]]:
    aggregates = aggregate_sales(dataset, granularity, level)
    periods = sorted({a.period for a in aggregates})
    groups = sorted({a.group for a in aggregates})
    pos = {p: i for i, p in enumerate(periods)}
    series = {g: np.zeros(len(periods)) for g in groups}
    for a in aggregates:
        series[a.group][pos[a.period]] = a.total_kg
    return periods, series


def correlation_matrix(
    dataset: Dataset,
    level: str = "category",
    granularity: str = "quarter",
    top_n: int | None = None,
) -> CorrelationMatrix:
    """Pearson matrix of per-period net volumes.

    top_n keeps only the n highest-volume groups.  Groups whose series has
    zero variance are dropped and listed in ``dropped``.
    """
    periods, series = _volume_series(dataset, granularity, level)
    if len(periods) < 2:
        raise InsufficientPeriodsError(
            f"need at least 2 periods, found {len(periods)}"
        )
    labels = sorted(series)
    if top_n is not None:
        # highest total volume first, item_code ascending on ties
        ranked = sorted(labels, key=lambda g: (-float(series[g].sum()), g))
        labels = sorted(ranked[:top_n])
    dropped = tuple(g for g in labels if float(np.ptp(series[g])) == 0.0)
    labels = [g for g in labels if g not in set(dropped)]
    n = len(labels)
    values = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            r = pearson(series[labels[i]], series[labels[j]])
            values[i, j] = r
            values[j, i] = r
    return CorrelationMatrix(labels=tuple(labels), values=values, dropped=dropped)


def top_sellers(dataset: Dataset, n: int) -> list[TopSeller]:
    """Items ranked by net sold kg, descending; ties by item_code ascending."""
    if n < 1:
        raise ValueError("n must be >= 1")
    totals: dict[str, float] = {}
    for t in dataset.transactions:
        delta = -t.quantity_kg if t.is_return else t.quantity_kg
        totals[t.item_code] = totals.get(t.item_code, 0.0) + delta
    ranked = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    return [
        TopSeller(code, dataset.entry(code).item_name, max(0.0, kg))
        for code, kg in ranked[:n]
    ]
