"""Per-category daily pricing and replenishment over a 7-day horizon.

Each (category, day) solve is independent.  Supply above predicted
sales / (1 - loss) only adds cost, so the supply constraint is taken at
equality and the problem reduces to one price variable, maximized by
golden-section search:

    profit(p) = (p - w/(1-loss)) * Q(p),   supply = Q(p) / (1 - loss)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .demand import DemandModel, domain_lower_bound, evaluate, zero_demand_price
from .errors import (
    EmptyIntervalError,
    LossOutOfRangeError,
    NoProfitablePriceError,
    NotDecreasingError,
)
from .golden import golden_max

# strict ">" constraints realized with a 0.1% margin on the price floor
PRICE_FLOOR_MARGIN = 1e-3
# keep golden-section evaluations strictly inside the open domain
BOUND_EPS = 1e-6
PRICE_TOL = 1e-6

_STATUS_OK = "ok"


@dataclass(frozen=True)
class PriceSolution:
    """Optimal price, the demand there, and the per-sold-kg margin profit."""

    price: float
    quantity: float
    profit: float


@dataclass(frozen=True)
class CategoryInputs:
    """Everything needed to plan one category for the horizon."""

    category: str
    demand: DemandModel
    loss_rate: float
    wholesale_forecasts: tuple[float, ...]


@dataclass(frozen=True)
class CategoryPlanRow:
    """One (day, category) plan line; zero rows carry a non-ok status."""

    day_index: int
    category: str
    supply_kg: float
    price: float
    predicted_sales_kg: float
    expected_profit: float
    wholesale: float
    loss_rate: float
    status: str

    @property
    def stocked(self) -> bool:
        return self.status == _STATUS_OK


def effective_unit_cost(wholesale: float, loss: float) -> float:
    """Cost per kilogram actually sold: wholesale / (1 - loss)."""
    if not 0.0 <= loss < 1.0:
        raise LossOutOfRangeError(f"loss rate must be in [0, 1), got {loss}")
    if wholesale <= 0:
        raise ValueError(f"wholesale must be positive, got {wholesale}")
    return wholesale / (1.0 - loss)


def feasible_price_interval(
    demand: DemandModel, price_floor: float, cost: float
) -> tuple[float, float]:
    """Price interval searched by the planner: (floor, zero-demand price).

    When the curve never reaches zero demand, the upper end falls back to
    10x the largest of the observed price range, the cost and the floor.
    """
    upper = zero_demand_price(demand)
    if upper is None:
        upper = 10.0 * max(demand.price_hi or 0.0, cost, price_floor, 1.0)
    lo = max(price_floor, domain_lower_bound(demand) + BOUND_EPS)
    hi = upper - BOUND_EPS
    return lo, hi


def optimal_price(
    demand: DemandModel, cost: float, price_floor: float, tol: float = PRICE_TOL
) -> PriceSolution:
    """Maximize (p - cost) * Q(p) over the feasible price interval."""
    lo, hi = feasible_price_interval(demand, price_floor, cost)
    if lo >= hi:
        raise EmptyIntervalError(
            f"no feasible price: floor {lo:.6f} >= zero-demand bound {hi:.6f}"
        )

    def margin_profit(p: float) -> float:
        return (p - cost) * evaluate(demand, p)

    price, profit = golden_max(margin_profit, lo, hi, tol)
    if profit <= 0.0:
        raise NoProfitablePriceError(
            f"max profit {profit:.6g} at price {price:.6f} is not positive"
        )
    return PriceSolution(price=price, quantity=evaluate(demand, price), profit=profit)


def _zero_row(day: int, inp: CategoryInputs, wholesale: float, status: str) -> CategoryPlanRow:
    return CategoryPlanRow(
        day_index=day,
        category=inp.category,
        supply_kg=0.0,
        price=0.0,
        predicted_sales_kg=0.0,
        expected_profit=0.0,
        wholesale=wholesale,
        loss_rate=inp.loss_rate,
        status=status,
    )


def plan_category_week(
    inputs: Sequence[CategoryInputs], horizon: int = 7
) -> list[CategoryPlanRow]:
    """Independent per-(category, day) solves, sorted by (day, category).

    Categories that cannot be planned profitably on a day get a zero row
    with a status flag; the rest of the plan is unaffected.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    for inp in inputs:
        if len(inp.wholesale_forecasts) < horizon:
            raise ValueError(
                f"category {inp.category!r} has {len(inp.wholesale_forecasts)} "
                f"forecasts, horizon needs {horizon}"
            )
    rows: list[CategoryPlanRow] = []
    for day in range(1, horizon + 1):
        for inp in sorted(inputs, key=lambda i: i.category):
            wholesale = inp.wholesale_forecasts[day - 1]
            cost = effective_unit_cost(wholesale, inp.loss_rate)
            floor = wholesale * (1.0 + PRICE_FLOOR_MARGIN)
            try:
                sol = optimal_price(inp.demand, cost, floor)
            except NoProfitablePriceError:
                rows.append(_zero_row(day, inp, wholesale, "no_profitable_price"))
                continue
            except EmptyIntervalError:
                rows.append(_zero_row(day, inp, wholesale, "empty_interval"))
                continue
            except NotDecreasingError:
                rows.append(_zero_row(day, inp, wholesale, "not_decreasing"))
                continue
            supply = sol.quantity / (1.0 - inp.loss_rate)
            rows.append(
                CategoryPlanRow(
                    day_index=day,
                    category=inp.category,
                    supply_kg=supply,
                    price=sol.price,
                    predicted_sales_kg=sol.quantity,
                    expected_profit=sol.price * sol.quantity - wholesale * supply,
                    wholesale=wholesale,
                    loss_rate=inp.loss_rate,
                    status=_STATUS_OK,
                )
            )
    return rows
