"""Parse, validate and index the four input tables.

The package consumes four CSV files:

* ``catalog.csv``      -- ``item_code,item_name,category_code,category_name``
* ``transactions.csv`` -- ``date,time,item_code,quantity_kg,unit_price,is_return,is_discount``
* ``wholesale.csv``    -- ``date,item_code,wholesale_price``
* ``loss.csv``         -- ``item_code,item_name,loss_rate_percent``

Dates are ISO ``YYYY-MM-DD``, times ``HH:MM:SS``, booleans ``0``/``1``, and
loss rates are given in percent ("13.65" means a fraction of 0.1365).

Everything is parsed into immutable records collected in a :class:`Dataset`.
Returns are kept as separate rows (``is_return=1``) and never netted here;
analytics subtracts them where the formulas require it.
"""

from __future__ import annotations

import csv
import math
import os
from bisect import bisect_right
from dataclasses import dataclass, field
from datetime import date as Date
from datetime import time as Time

from .errors import (
    CategoryCountMismatchError,
    DuplicateItemCodeError,
    DuplicateQuoteError,
    EmptyFileError,
    MalformedDateError,
    MalformedRowError,
    MissingColumnError,
    NegativePriceError,
    NegativeQuantityError,
    NonpositivePriceError,
    OutOfRangeLossError,
    UnknownItemCodeError,
)

REQUIRED_CATEGORY_COUNT = 6

CATALOG_COLUMNS = ("item_code", "item_name", "category_code", "category_name")
TRANSACTION_COLUMNS = (
    "date", "time", "item_code", "quantity_kg", "unit_price", "is_return", "is_discount",
)
WHOLESALE_COLUMNS = ("date", "item_code", "wholesale_price")
LOSS_COLUMNS = ("item_code", "item_name", "loss_rate_percent")


@dataclass(frozen=True)
class CatalogEntry:
    """One sellable item and the category it belongs to."""

    item_code: str
    item_name: str
    category_code: str
    category_name: str


@dataclass(frozen=True)
class Transaction:
    """One scanner line: a sale or a return of one item."""

    date: Date
    time: Time
    item_code: str
    quantity_kg: float
    unit_price: float
    is_return: bool
    is_discount: bool


@dataclass(frozen=True)
class WholesaleQuote:
    """The wholesale buy-in price of one item on one day."""

    date: Date
    item_code: str
    wholesale_price: float


@dataclass(frozen=True)
class LossEntry:
    """Shrinkage fraction of one item, in [0, 1)."""

    item_code: str
    loss_rate: float


@dataclass(frozen=True)
class DatasetReport:
    """Informational cross-reference report; nothing in it is fatal."""

    missing_loss: tuple[str, ...]
    missing_wholesale: tuple[tuple[Date, str], ...]
    date_span: tuple[Date, Date]
    n_transactions: int
    n_items: int
    n_categories: int

    def to_dict(self) -> dict:
        return {
            "missing_loss": list(self.missing_loss),
            "missing_wholesale": [
                [d.isoformat(), code] for d, code in self.missing_wholesale
            ],
            "date_span": [self.date_span[0].isoformat(), self.date_span[1].isoformat()],
            "n_transactions": self.n_transactions,
            "n_items": self.n_items,
            "n_categories": self.n_categories,
        }


@dataclass(frozen=True)
class Dataset:
    """The four parsed tables plus lookup indexes.

    Immutable after construction; safe for unrestricted shared reads.
    Equality compares only the four public tables.
    """

    catalog: tuple[CatalogEntry, ...]
    transactions: tuple[Transaction, ...]
    wholesale: tuple[WholesaleQuote, ...]
    losses: dict[str, LossEntry]

    _by_code: dict = field(default_factory=dict, compare=False, repr=False)
    _by_category: dict = field(default_factory=dict, compare=False, repr=False)
    _quote_index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        by_code = {e.item_code: e for e in self.catalog}
        by_cat: dict[str, list[str]] = {}
        for e in self.catalog:
            by_cat.setdefault(e.category_name, []).append(e.item_code)
        quotes: dict[str, tuple[list[Date], list[float]]] = {}
        for q in sorted(self.wholesale, key=lambda q: (q.item_code, q.date)):
            dates, prices = quotes.setdefault(q.item_code, ([], []))
            dates.append(q.date)
            prices.append(q.wholesale_price)
        object.__setattr__(self, "_by_code", by_code)
        object.__setattr__(
            self, "_by_category", {c: tuple(sorted(v)) for c, v in by_cat.items()}
        )
        object.__setattr__(self, "_quote_index", quotes)

    # -- lookups ------------------------------------------------------------

    def entry(self, item_code: str) -> CatalogEntry:
        try:
            return self._by_code[item_code]
        except KeyError:
            raise UnknownItemCodeError(f"item code {item_code!r} not in catalog") from None

    def category_of(self, item_code: str) -> str:
        return self.entry(item_code).category_name

    def categories(self) -> tuple[str, ...]:
        return tuple(sorted(self._by_category))

    def items_in(self, category_name: str) -> tuple[str, ...]:
        return self._by_category.get(category_name, ())

    def wholesale_on(self, item_code: str, day: Date) -> float | None:
        """Quote for exactly this day, or None."""
        dates, prices = self._quote_index.get(item_code, ((), ()))
        i = bisect_right(dates, day) - 1
        if i >= 0 and dates[i] == day:
            return prices[i]
        return None

    def wholesale_recent(self, item_code: str, day: Date) -> float | None:
        """Most recent quote on or before this day (forward fill), or None."""
        dates, prices = self._quote_index.get(item_code, ((), ()))
        i = bisect_right(dates, day) - 1
        return prices[i] if i >= 0 else None

    def quotes_for(self, item_code: str, until: Date | None = None):
        """(dates, prices) of the item's quotes, optionally cut at a day."""
        dates, prices = self._quote_index.get(item_code, ([], []))
        if until is None:
            return list(dates), list(prices)
        cut = bisect_right(dates, until)
        return list(dates[:cut]), list(prices[:cut])

    def loss_rate(self, item_code: str, default: float = 0.0) -> float:
        entry = self.losses.get(item_code)
        return entry.loss_rate if entry is not None else default

    def date_span(self) -> tuple[Date, Date]:
        return self.transactions[0].date, self.transactions[-1].date


# --- low-level CSV helpers ---------------------------------------------------

def _read_rows(path: str | os.PathLike, required: tuple[str, ...]):
    """Yield (line_number, row_dict); validate header; reject empty files."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyFileError(f"{path}: file is empty")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise MissingColumnError(f"{path}: missing column(s) {', '.join(missing)}")
        n = 0
        for row in reader:
            n += 1
            yield reader.line_num, row
        if n == 0:
            raise EmptyFileError(f"{path}: no data rows")


def _parse_float(text: str, what: str, where: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise MalformedRowError(f"{where}: bad {what} {text!r}") from None
    if not math.isfinite(value):
        raise MalformedRowError(f"{where}: non-finite {what} {text!r}")
    return value


def _parse_date(text: str, where: str) -> Date:
    try:
        return Date.fromisoformat(text)
    except (TypeError, ValueError):
        raise MalformedDateError(f"{where}: bad date {text!r}") from None


def _parse_time(text: str, where: str) -> Time:
    try:
        return Time.fromisoformat(text)
    except (TypeError, ValueError):
        raise MalformedDateError(f"{where}: bad time {text!r}") from None


def _parse_bool(text: str, what: str, where: str) -> bool:
    if text == "0":
        return False
    if text == "1":
        return True
    raise MalformedRowError(f"{where}: bad {what} {text!r} (expected 0 or 1)")


# --- parsers -----------------------------------------------------------------

def parse_catalog(path: str | os.PathLike) -> tuple[CatalogEntry, ...]:
    """Parse the item catalog; exactly six distinct categories are required."""
    entries: list[CatalogEntry] = []
    seen: set[str] = set()
    cat_names: dict[str, str] = {}
    for line, row in _read_rows(path, CATALOG_COLUMNS):
        where = f"{path}:{line}"
        code = row["item_code"].strip()
        if not code:
            raise MalformedRowError(f"{where}: empty item_code")
        if code in seen:
            raise DuplicateItemCodeError(f"{where}: duplicate item code {code!r}")
        seen.add(code)
        cat_code = row["category_code"].strip()
        cat_name = row["category_name"].strip()
        prior = cat_names.setdefault(cat_code, cat_name)
        if prior != cat_name:
            raise CategoryCountMismatchError(
                f"{where}: category code {cat_code!r} maps to both "
                f"{prior!r} and {cat_name!r}"
            )
        entries.append(CatalogEntry(code, row["item_name"].strip(), cat_code, cat_name))
    distinct = {e.category_name for e in entries}
    if len(distinct) != REQUIRED_CATEGORY_COUNT:
        raise CategoryCountMismatchError(
            f"{path}: expected {REQUIRED_CATEGORY_COUNT} categories, "
            f"found {len(distinct)}"
        )
    return tuple(sorted(entries, key=lambda e: e.item_code))


def parse_transactions(
    path: str | os.PathLike, catalog: tuple[CatalogEntry, ...]
) -> tuple[Transaction, ...]:
    """Parse the scanner log and join it against the catalog.

    Output is sorted ascending by (date, time); ties keep file order.
    """
    known = {e.item_code for e in catalog}
    out: list[Transaction] = []
    for line, row in _read_rows(path, TRANSACTION_COLUMNS):
        where = f"{path}:{line}"
        code = row["item_code"].strip()
        if code not in known:
            raise UnknownItemCodeError(f"{where}: unknown item code {code!r}")
        qty = _parse_float(row["quantity_kg"], "quantity_kg", where)
        if qty < 0:
            raise NegativeQuantityError(f"{where}: negative quantity {qty}")
        price = _parse_float(row["unit_price"], "unit_price", where)
        if price <= 0:
            raise NegativePriceError(f"{where}: unit price must be positive, got {price}")
        out.append(
            Transaction(
                date=_parse_date(row["date"], where),
                time=_parse_time(row["time"], where),
                item_code=code,
                quantity_kg=qty,
                unit_price=price,
                is_return=_parse_bool(row["is_return"], "is_return", where),
                is_discount=_parse_bool(row["is_discount"], "is_discount", where),
            )
        )
    out.sort(key=lambda t: (t.date, t.time))  # stable: file order breaks ties
    return tuple(out)


def parse_wholesale(path: str | os.PathLike) -> tuple[WholesaleQuote, ...]:
    """Parse daily wholesale quotes; one quote per (date, item)."""
    out: list[WholesaleQuote] = []
    seen: set[tuple[Date, str]] = set()
    for line, row in _read_rows(path, WHOLESALE_COLUMNS):
        where = f"{path}:{line}"
        day = _parse_date(row["date"], where)
        code = row["item_code"].strip()
        key = (day, code)
        if key in seen:
            raise DuplicateQuoteError(
                f"{where}: duplicate quote for {code!r} on {day.isoformat()}"
            )
        seen.add(key)
        price = _parse_float(row["wholesale_price"], "wholesale_price", where)
        if price <= 0:
            raise NonpositivePriceError(
                f"{where}: wholesale price must be positive, got {price}"
            )
        out.append(WholesaleQuote(day, code, price))
    out.sort(key=lambda q: (q.date, q.item_code))
    return tuple(out)


def parse_loss_rates(path: str | os.PathLike) -> dict[str, LossEntry]:
    """Parse per-item loss rates; file values are percent, stored as fractions."""
    out: dict[str, LossEntry] = {}
    for line, row in _read_rows(path, LOSS_COLUMNS):
        where = f"{path}:{line}"
        code = row["item_code"].strip()
        if code in out:
            raise DuplicateItemCodeError(f"{where}: duplicate loss entry for {code!r}")
        percent = _parse_float(row["loss_rate_percent"], "loss_rate_percent", where)
        if percent < 0 or percent >= 100:
            raise OutOfRangeLossError(
                f"{where}: loss rate must be in [0, 100) percent, got {percent}"
            )
        out[code] = LossEntry(code, percent / 100.0)
    return out


def build_dataset(
    catalog: tuple[CatalogEntry, ...],
    transactions: tuple[Transaction, ...],
    wholesale: tuple[WholesaleQuote, ...],
    losses: dict[str, LossEntry],
) -> Dataset:
    """Assemble a Dataset, checking that every foreign key resolves."""
    known = {e.item_code for e in catalog}
    for q in wholesale:
        if q.item_code not in known:
            raise UnknownItemCodeError(
                f"wholesale quote references unknown item {q.item_code!r}"
            )
    for code in losses:
        if code not in known:
            raise UnknownItemCodeError(f"loss entry references unknown item {code!r}")
    if not transactions:
        raise EmptyFileError("dataset has no transactions")
    return Dataset(
        catalog=tuple(catalog),
        transactions=tuple(transactions),
        wholesale=tuple(wholesale),
        losses=dict(losses),
    )


def load_dataset(
    catalog_path: str | os.PathLike,
    transactions_path: str | os.PathLike,
    wholesale_path: str | os.PathLike,
    loss_path: str | os.PathLike,
) -> Dataset:
    """Parse all four files and assemble the cross-checked Dataset."""
    catalog = parse_catalog(catalog_path)
    transactions = parse_transactions(transactions_path, catalog)
    wholesale = parse_wholesale(wholesale_path)
    losses = parse_loss_rates(loss_path)
    return build_dataset(catalog, transactions, wholesale, losses)


def validate_dataset(dataset: Dataset) -> DatasetReport:
    """Cross-reference the tables and report gaps; never raises."""
    sold_items = sorted({t.item_code for t in dataset.transactions if not t.is_return})
    missing_loss = tuple(c for c in sold_items if c not in dataset.losses)
    sale_days = sorted(
        {(t.date, t.item_code) for t in dataset.transactions if not t.is_return}
    )
    missing_wholesale = tuple(
        (d, c) for d, c in sale_days if dataset.wholesale_on(c, d) is None
    )
    return DatasetReport(
        missing_loss=missing_loss,
        missing_wholesale=missing_wholesale,
        date_span=dataset.date_span(),
        n_transactions=len(dataset.transactions),
        n_items=len(dataset.catalog),
        n_categories=len(dataset.categories()),
    )


# --- writers (round-trip serialization) --------------------------------------

def _fmt(value: float) -> str:
    """Shortest decimal that parses back to the identical float."""
    return repr(float(value))


def _fmt_percent(fraction: float) -> str:
    """Percent string whose parse, divided by 100, recovers the fraction.

    fl(fl(f*100)/100) can land one ulp off, so probe the neighbours of
    f*100 for a representation that inverts exactly.
    """
    base = fraction * 100.0
    for candidate in (base, math.nextafter(base, 0.0), math.nextafter(base, math.inf)):
        if float(repr(candidate)) / 100.0 == fraction:
            return repr(candidate)
    return repr(base)


def write_dataset(dataset: Dataset, out_dir: str | os.PathLike) -> dict[str, str]:
    """Write the four CSV files; re-parsing them yields an equal Dataset."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "catalog": os.path.join(out_dir, "catalog.csv"),
        "transactions": os.path.join(out_dir, "transactions.csv"),
        "wholesale": os.path.join(out_dir, "wholesale.csv"),
        "loss": os.path.join(out_dir, "loss.csv"),
    }
    with open(paths["catalog"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(CATALOG_COLUMNS)
        for e in dataset.catalog:
            w.writerow([e.item_code, e.item_name, e.category_code, e.category_name])
    with open(paths["transactions"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRANSACTION_COLUMNS)
        for t in dataset.transactions:
            w.writerow(
                [
                    t.date.isoformat(),
                    t.time.isoformat(),
                    t.item_code,
                    _fmt(t.quantity_kg),
                    _fmt(t.unit_price),
                    int(t.is_return),
                    int(t.is_discount),
                ]
            )
    with open(paths["wholesale"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(WHOLESALE_COLUMNS)
        for q in dataset.wholesale:
            w.writerow([q.date.isoformat(), q.item_code, _fmt(q.wholesale_price)])
    with open(paths["loss"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(LOSS_COLUMNS)
        for code in sorted(dataset.losses):
            name = dataset._by_code[code].item_name if code in dataset._by_code else ""
            w.writerow([code, name, _fmt_percent(dataset.losses[code].loss_rate)])
    return paths
