"""Single-day item-level assortment and pricing.

Pick between min_items and max_items items covering all required
categories, give each a price and a supply of at least min_display_kg,
and maximize total profit.  Item demand comes from the item's category
curve, either verbatim ("literal" mode) or scaled by the item's
historical share of its category ("share" mode, the default).

Because per-item profits are additive once each item's price is fixed,
the per-item price optimization happens once up front; the combinatorial
part is a greedy start plus first-improvement hill climbing over
add/drop/swap moves, with seeded randomized restarts.  A brute-force
enumerator over small pools serves as the test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date as Date
from typing import Mapping, Sequence

import numpy as np

from .dataio import Dataset
from .demand import DemandModel, evaluate
from .errors import (
    CategoryUncoverableError,
    DomainViolationError,
    EmptyFeasibleIntervalError,
    EmptyWindowError,
    LossOutOfRangeError,
    NotDecreasingError,
    PoolTooLargeError,
    PoolTooSmallError,
)
from .forecast import PriceSeries, mean_forecast
from .golden import golden_max
from .planner_category import (
    PRICE_FLOOR_MARGIN,
    effective_unit_cost,
    feasible_price_interval,
)

DEMAND_MODES = ("share", "literal")

_BRUTE_FORCE_LIMIT = 16
_PROFIT_EPS = 1e-9


@dataclass(frozen=True)
class ItemCandidate:
    """One stockable item with its forecast cost and demand share."""

    item_code: str
    item_name: str
    category: str
    wholesale_forecast: float
    loss_rate: float
    share: float


@dataclass(frozen=True)
class SelectionConfig:
    """Assortment constraints and search parameters."""

    min_items: int = 27
    max_items: int = 33
    min_display_kg: float = 2.5
    required_categories: int = 6
    demand_mode: str = "share"
    restarts: int = 16
    seed: int = 0
    max_stale_moves: int = 2000
    stocking_threshold: float | None = None
    initializer: str = "greedy"

    def __post_init__(self) -> None:
        if self.min_items > self.max_items:
            raise ValueError("min_items must not exceed max_items")
        if self.min_display_kg <= 0:
            raise ValueError("min_display_kg must be positive")
        if self.demand_mode not in DEMAND_MODES:
            raise ValueError(f"demand_mode must be one of {DEMAND_MODES}")
        if self.initializer not in ("greedy", "random"):
            raise ValueError("initializer must be greedy or random")

    def threshold_for(self, candidate: ItemCandidate) -> float:
        """Minimum acceptable per-item profit before the item is dropped."""
        if self.stocking_threshold is not None:
            return self.stocking_threshold
        return -self.min_display_kg * candidate.wholesale_forecast


@dataclass(frozen=True)
class ItemPricing:
    """Solved price point for one candidate."""

    price: float
    supply_kg: float
    profit: float
    predicted_sales_kg: float


@dataclass(frozen=True)
class ItemPlanRow:
    """One pool item in the final plan; unselected rows are all zeros."""

    item_code: str
    item_name: str
    category: str
    selected: bool
    supply_kg: float
    price: float
    expected_profit: float
    predicted_sales_kg: float
    wholesale: float
    loss_rate: float
    share: float


@dataclass(frozen=True)
class AssortmentPlan:
    rows: tuple[ItemPlanRow, ...]
    total_profit: float
    selected_count: int
    categories_covered: int


def candidate_pool(
    dataset: Dataset, window: tuple[Date, Date], forecast_window: int = 7
) -> list[ItemCandidate]:
    """Items sellable tomorrow: everything sold inside the lookback window.

    share is the item's fraction of its category's sold kg over the
    window.  wholesale_forecast is the trailing mean of the item's last
    `forecast_window` quotes on or before the window end; items with no
    quote history by then cannot be priced and are left out.
    """
    start, end = window
    if start > end:
        raise EmptyWindowError(f"window start {start} is after end {end}")
    kg_item: dict[str, float] = {}
    for t in dataset.transactions:
        if t.is_return or not start <= t.date <= end:
            continue
        kg_item[t.item_code] = kg_item.get(t.item_code, 0.0) + t.quantity_kg
    sold = sorted(code for code, kg in kg_item.items() if kg > 0)
    if not sold:
        raise EmptyWindowError(f"no sales between {start} and {end}")
    kg_cat: dict[str, float] = {}
    for code in sold:
        cat = dataset.category_of(code)
        kg_cat[cat] = kg_cat.get(cat, 0.0) + kg_item[code]
    pool: list[ItemCandidate] = []
    for code in sold:
        dates, prices = dataset.quotes_for(code, until=end)
        if not dates:
            continue
        series = PriceSeries(label=code, dates=tuple(dates), prices=tuple(prices))
        entry = dataset.entry(code)
        cat = entry.category_name
        pool.append(
            ItemCandidate(
                item_code=code,
                item_name=entry.item_name,
                category=cat,
                wholesale_forecast=mean_forecast(series, forecast_window),
                loss_rate=dataset.loss_rate(code),
                share=kg_item[code] / kg_cat[cat],
            )
        )
    return pool


def item_demand(
    category_model: DemandModel,
    candidate: ItemCandidate,
    price: float,
    mode: str = "share",
) -> float:
    """Item kg at a price: the category curve, scaled by share in share mode."""
    if mode not in DEMAND_MODES:
        raise ValueError(f"mode must be one of {DEMAND_MODES}")
    value = evaluate(category_model, price)
    return candidate.share * value if mode == "share" else value


def optimal_item_price(
    candidate: ItemCandidate, category_model: DemandModel, config: SelectionConfig
) -> ItemPricing | None:
    """Best price for one item, honoring the minimum display quantity.

    supply(p) = max(min_display_kg, demand(p)/(1-loss)) puts one kink in
    the profit; each side of the kink is unimodal, so both sides are
    solved by golden-section and the better one taken.  Returns None when
    even the best price earns less than the stocking threshold.
    """
    w = candidate.wholesale_forecast
    if w <= 0:
        raise ValueError(f"wholesale forecast must be positive, got {w}")
    lam = candidate.loss_rate
    if not 0.0 <= lam < 1.0:
        raise LossOutOfRangeError(f"loss rate must be in [0, 1), got {lam}")
    cost = effective_unit_cost(w, lam)
    floor = w * (1.0 + PRICE_FLOOR_MARGIN)
    lo, hi = feasible_price_interval(category_model, floor, cost)
    if lo >= hi:
        raise EmptyFeasibleIntervalError(
            f"item {candidate.item_code}: floor {lo:.6f} >= demand bound {hi:.6f}"
        )
    mode = config.demand_mode
    scale = candidate.share if mode == "share" else 1.0
    if scale <= 0:
        return None
    min_display = config.min_display_kg

    def demand_at(p: float) -> float:
        return scale * evaluate(category_model, p)

    def profit_at(p: float) -> float:
        q = demand_at(p)
        return p * q - w * max(min_display, q / (1.0 - lam))

    # kink price: demand(p)/(1-lam) = min_display; demand is decreasing
    target = min_display * (1.0 - lam)
    best_price, best_profit = None, -np.inf
    if demand_at(lo) <= target:
        kink_lo, kink_hi = None, None  # display bound binds everywhere
    elif demand_at(hi) >= target:
        kink_lo, kink_hi = hi, hi  # demand branch covers the whole interval
    else:
        a, b = lo, hi
        for _ in range(100):
            mid = 0.5 * (a + b)
            if demand_at(mid) > target:
                a = mid
            else:
                b = mid
        kink_lo, kink_hi = a, b
    if kink_lo is not None:
        price, profit = golden_max(profit_at, lo, kink_lo, 1e-6)
        if profit > best_profit:
            best_price, best_profit = price, profit
    display_lo = kink_hi if kink_hi is not None else lo
    if display_lo < hi:
        price, profit = golden_max(profit_at, display_lo, hi, 1e-6)
        if profit > best_profit:
            best_price, best_profit = price, profit
    if best_price is None:
        return None
    if best_profit < config.threshold_for(candidate):
        return None
    q = demand_at(best_price)
    supply = max(min_display, q / (1.0 - lam))
    return ItemPricing(
        price=best_price,
        supply_kg=supply,
        profit=best_price * q - w * supply,
        predicted_sales_kg=q,
    )


def pool_optima(
    pool: Sequence[ItemCandidate],
    models: Mapping[str, DemandModel],
    config: SelectionConfig,
) -> list[ItemPricing | None]:
    """Per-item optimal pricings; None marks unpriceable or unprofitable items."""
    out: list[ItemPricing | None] = []
    for cand in pool:
        model = models.get(cand.category)
        if model is None:
            out.append(None)
            continue
        try:
            out.append(optimal_item_price(cand, model, config))
        except (EmptyFeasibleIntervalError, NotDecreasingError, DomainViolationError):
            out.append(None)
    return out


def evaluate_selection(
    selection: Sequence[bool],
    optima: Sequence[ItemPricing | None],
    pool: Sequence[ItemCandidate],
    config: SelectionConfig,
) -> float | None:
    """Total profit of a selection, or None when any constraint fails."""
    chosen = [i for i, s in enumerate(selection) if s]
    if not config.min_items <= len(chosen) <= config.max_items:
        return None
    if any(optima[i] is None for i in chosen):
        return None
    covered = {pool[i].category for i in chosen}
    if len(covered) < config.required_categories:
        return None
    return float(sum(optima[i].profit for i in chosen))


def _precheck(
    pool: Sequence[ItemCandidate],
    optima: Sequence[ItemPricing | None],
    config: SelectionConfig,
) -> list[int]:
    """Indices of stockable items; raises if no feasible selection can exist."""
    if len(pool) < config.min_items:
        raise PoolTooSmallError(
            f"pool has {len(pool)} candidates, need at least {config.min_items}"
        )
    feasible = [i for i, opt in enumerate(optima) if opt is not None]
    if len(feasible) < config.min_items:
        raise PoolTooSmallError(
            f"only {len(feasible)} stockable candidates, need {config.min_items}"
        )
    cats = {pool[i].category for i in feasible}
    if len(cats) < config.required_categories:
        raise CategoryUncoverableError(
            f"stockable candidates cover {len(cats)} categories, "
            f"need {config.required_categories}"
        )
    if config.required_categories > config.max_items:
        raise CategoryUncoverableError(
            "cannot cover required categories within max_items"
        )
    return feasible


def _selection_key(selection: set[int], pool: Sequence[ItemCandidate]) -> tuple[str, ...]:
    return tuple(sorted(pool[i].item_code for i in selection))


def _improves(
    profit: float,
    key: tuple[str, ...],
    best_profit: float | None,
    best_key: tuple[str, ...],
) -> bool:
    """Strictly higher profit wins; near-ties go to the smaller code set."""
    if best_profit is None:
        return True
    eps = _PROFIT_EPS * max(1.0, abs(best_profit))
    if profit > best_profit + eps:
        return True
    return abs(profit - best_profit) <= eps and key < best_key


def _greedy_init(
    feasible: list[int],
    pool: Sequence[ItemCandidate],
    optima: Sequence[ItemPricing | None],
    config: SelectionConfig,
) -> set[int]:
    """Best item per category, then fill to min_items by descending profit."""
    by_cat: dict[str, list[int]] = {}
    for i in feasible:
        by_cat.setdefault(pool[i].category, []).append(i)
    selected: set[int] = set()
    ranked_cats = sorted(
        by_cat,
        key=lambda c: (-max(optima[i].profit for i in by_cat[c]), c),
    )
    for cat in ranked_cats[: config.required_categories]:
        best = min(by_cat[cat], key=lambda i: (-optima[i].profit, pool[i].item_code))
        selected.add(best)
    rest = sorted(
        (i for i in feasible if i not in selected),
        key=lambda i: (-optima[i].profit, pool[i].item_code),
    )
    for i in rest:
        if len(selected) >= config.min_items:
            break
        selected.add(i)
    return selected


def _random_init(
    feasible: list[int],
    pool: Sequence[ItemCandidate],
    optima: Sequence[ItemPricing | None],
    config: SelectionConfig,
    rng: np.random.Generator,
) -> set[int]:
    """Random 0/1 start, repaired to a feasible selection."""
    selected = {i for i in feasible if rng.integers(0, 2) == 1}
    by_cat: dict[str, list[int]] = {}
    for i in feasible:
        by_cat.setdefault(pool[i].category, []).append(i)
    covered = {pool[i].category for i in selected}
    missing = sorted(
        (c for c in by_cat if c not in covered),
        key=lambda c: (-max(optima[i].profit for i in by_cat[c]), c),
    )
    needed = config.required_categories - len(covered)
    for cat in missing[: max(0, needed)]:
        best = min(by_cat[cat], key=lambda i: (-optima[i].profit, pool[i].item_code))
        selected.add(best)
    while len(selected) > config.max_items:
        droppable = [
            i
            for i in selected
            if sum(1 for j in selected if pool[j].category == pool[i].category) > 1
            or len({pool[j].category for j in selected}) > config.required_categories
        ]
        if not droppable:
            droppable = list(selected)
        worst = min(droppable, key=lambda i: (optima[i].profit, pool[i].item_code))
        selected.discard(worst)
    fill = sorted(
        (i for i in feasible if i not in selected),
        key=lambda i: (-optima[i].profit, pool[i].item_code),
    )
    for i in fill:
        if len(selected) >= config.min_items:
            break
        selected.add(i)
    return selected


def _hill_climb(
    start: set[int],
    feasible: list[int],
    pool: Sequence[ItemCandidate],
    optima: Sequence[ItemPricing | None],
    config: SelectionConfig,
    rng: np.random.Generator,
) -> set[int]:
    """First-improvement local search over add/drop/swap moves.

    Stops at a local optimum (a full pass with no improving move) or
    after max_stale_moves non-improving move evaluations.
    """
    selected = set(start)
    cat_count: dict[str, int] = {}
    for i in selected:
        cat = pool[i].category
        cat_count[cat] = cat_count.get(cat, 0) + 1
    stale = 0

    def can_drop(i: int) -> bool:
        if len(selected) <= config.min_items:
            return False
        cat = pool[i].category
        if cat_count[cat] > 1:
            return True
        return len(cat_count) - 1 >= config.required_categories

    def swap_ok(i_out: int, j_in: int) -> bool:
        cat_out, cat_in = pool[i_out].category, pool[j_in].category
        if cat_out == cat_in:
            return True
        if cat_count[cat_out] > 1:
            return True
        # dropping the only item of cat_out: fine only if coverage survives
        covered_after = len(cat_count) - 1 + (0 if cat_in in cat_count else 1)
        return covered_after >= config.required_categories

    while stale < config.max_stale_moves:
        unselected = [i for i in feasible if i not in selected]
        moves: list[tuple] = []
        if len(selected) < config.max_items:
            moves.extend(("add", i) for i in unselected)
        moves.extend(("drop", i) for i in selected)
        moves.extend(("swap", i, j) for i in selected for j in unselected)
        rng.shuffle(moves)
        improved = False
        for move in moves:
            if move[0] == "add":
                delta = optima[move[1]].profit
                legal = True
            elif move[0] == "drop":
                delta = -optima[move[1]].profit
                legal = can_drop(move[1])
            else:
                _, i_out, j_in = move
                delta = optima[j_in].profit - optima[i_out].profit
                legal = swap_ok(i_out, j_in)
            if legal and delta > _PROFIT_EPS:
                if move[0] == "add":
                    selected.add(move[1])
                    cat = pool[move[1]].category
                    cat_count[cat] = cat_count.get(cat, 0) + 1
                elif move[0] == "drop":
                    selected.discard(move[1])
                    cat = pool[move[1]].category
                    cat_count[cat] -= 1
                    if cat_count[cat] == 0:
                        del cat_count[cat]
                else:
                    _, i_out, j_in = move
                    selected.discard(i_out)
                    selected.add(j_in)
                    cat_o, cat_i = pool[i_out].category, pool[j_in].category
                    cat_count[cat_o] -= 1
                    if cat_count[cat_o] == 0:
                        del cat_count[cat_o]
                    cat_count[cat_i] = cat_count.get(cat_i, 0) + 1
                improved = True
                stale = 0
                break
            stale += 1
            if stale >= config.max_stale_moves:
                break
        if not improved:
            break
    return selected


def _build_plan(
    selection: set[int],
    pool: Sequence[ItemCandidate],
    optima: Sequence[ItemPricing | None],
) -> AssortmentPlan:
    rows = []
    total = 0.0
    for i in sorted(range(len(pool)), key=lambda i: pool[i].item_code):
        cand = pool[i]
        if i in selection:
            opt = optima[i]
            rows.append(
                ItemPlanRow(
                    item_code=cand.item_code,
                    item_name=cand.item_name,
                    category=cand.category,
                    selected=True,
                    supply_kg=opt.supply_kg,
                    price=opt.price,
                    expected_profit=opt.profit,
                    predicted_sales_kg=opt.predicted_sales_kg,
                    wholesale=cand.wholesale_forecast,
                    loss_rate=cand.loss_rate,
                    share=cand.share,
                )
            )
            total += opt.profit
        else:
            rows.append(
                ItemPlanRow(
                    item_code=cand.item_code,
                    item_name=cand.item_name,
                    category=cand.category,
                    selected=False,
                    supply_kg=0.0,
                    price=0.0,
                    expected_profit=0.0,
                    predicted_sales_kg=0.0,
                    wholesale=cand.wholesale_forecast,
                    loss_rate=cand.loss_rate,
                    share=cand.share,
                )
            )
    return AssortmentPlan(
        rows=tuple(rows),
        total_profit=total,
        selected_count=len(selection),
        categories_covered=len({pool[i].category for i in selection}),
    )


def optimize_assortment(
    pool: Sequence[ItemCandidate],
    models: Mapping[str, DemandModel],
    config: SelectionConfig,
) -> AssortmentPlan:
    """Randomized-restart local search for the best feasible assortment.

    Deterministic for a given config.seed: restart generators are spawned
    from one root SeedSequence, and equal-profit plans break ties toward
    the lexicographically smallest selected item-code set.
    """
    optima = pool_optima(pool, models, config)
    feasible = _precheck(pool, optima, config)
    root = np.random.SeedSequence(config.seed)
    children = root.spawn(max(1, config.restarts))
    best_sel: set[int] | None = None
    best_profit: float | None = None
    best_key: tuple[str, ...] = ()
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        if config.initializer == "random" or r > 0:
            start = _random_init(feasible, pool, optima, config, rng)
        else:
            start = _greedy_init(feasible, pool, optima, config)
        sel = _hill_climb(start, feasible, pool, optima, config, rng)
        profit = evaluate_selection(
            [i in sel for i in range(len(pool))], optima, pool, config
        )
        if profit is None:
            continue
        key = _selection_key(sel, pool)
        if _improves(profit, key, best_profit, best_key):
            best_sel, best_profit, best_key = sel, profit, key
    if best_sel is None:
        raise PoolTooSmallError("no restart produced a feasible selection")
    return _build_plan(best_sel, pool, optima)


def brute_force_assortment(
    pool: Sequence[ItemCandidate],
    models: Mapping[str, DemandModel],
    config: SelectionConfig,
) -> AssortmentPlan:
    """Exact optimum by enumerating every subset; pools of at most 16."""
    if len(pool) > _BRUTE_FORCE_LIMIT:
        raise PoolTooLargeError(
            f"{len(pool)} candidates exceed the enumeration limit "
            f"{_BRUTE_FORCE_LIMIT}"
        )
    optima = pool_optima(pool, models, config)
    _precheck(pool, optima, config)
    n = len(pool)
    best_sel: set[int] | None = None
    best_profit: float | None = None
    best_key: tuple[str, ...] = ()
    for mask in range(1 << n):
        selection = [bool(mask >> i & 1) for i in range(n)]
        profit = evaluate_selection(selection, optima, pool, config)
        if profit is None:
            continue
        sel = {i for i in range(n) if selection[i]}
        key = _selection_key(sel, pool)
        if _improves(profit, key, best_profit, best_key):
            best_sel, best_profit, best_key = sel, profit, key
    if best_sel is None:
        raise PoolTooSmallError("no feasible selection exists")
    return _build_plan(best_sel, pool, optima)
