"""Price -> daily demand curves fitted per category.

Three candidate families:

* linear   Q = a*p + b
* log      Q = A*ln(p - B) + C   (shifted logarithm, needs p > B)
* power    Q = a*p^b + c

Fitting minimizes the sum of squared errors.  The linear family is solved
in closed form.  The other two are solved by profiling: for a fixed value
of the single nonlinear parameter (B, or the exponent b) the remaining two
coefficients are a linear least-squares problem, so the search is a
multi-start one-dimensional Nelder-Mead over that parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .dataio import Dataset
from .errors import (
    AllFitsFailedError,
    DomainViolationError,
    FitDivergedError,
    NotDecreasingError,
    TooFewPointsError,
    UnknownFamilyError,
)

FAMILIES = ("linear", "log", "power")

_N_PARAMS = {"linear": 2, "log": 3, "power": 3}

# keep B strictly below the cheapest observed price
_B_MARGIN = 0.1
# zero-demand search is capped at 10x the highest observed price
_ZERO_PRICE_CAP_FACTOR = 10.0


@dataclass(frozen=True)
class PricePoint:
    """One day of one category: average sale price and total kg sold."""

    price: float
    quantity: float


@dataclass(frozen=True)
class DemandModel:
    """A fitted curve plus fit diagnostics.

    price_lo/price_hi record the observed price range of the fitting data
    when known; they bound downstream price searches.
    """

    family: str
    params: tuple[float, ...]
    fit_sse: float
    n_points: int
    price_lo: float | None = None
    price_hi: float | None = None

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": list(self.params),
            "fit_sse": self.fit_sse,
            "n_points": self.n_points,
            "price_lo": self.price_lo,
            "price_hi": self.price_hi,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DemandModel":
        return cls(
            family=data["family"],
            params=tuple(float(v) for v in data["params"]),
            fit_sse=float(data["fit_sse"]),
            n_points=int(data["n_points"]),
            price_lo=data.get("price_lo"),
            price_hi=data.get("price_hi"),
        )


def build_price_points(dataset: Dataset, category: str) -> list[PricePoint]:
    """One (average price, total kg) point per day with sales in the category.

    The average is revenue-weighted over sale rows; returns are excluded
    from both the numerator and the denominator.  Needs at least 4 such
    days.
    """
    if category not in dataset.categories():
        raise KeyError(f"unknown category {category!r}")
    items = set(dataset.items_in(category))
    kg: dict = {}
    revenue: dict = {}
    for t in dataset.transactions:
        if t.is_return or t.item_code not in items:
            continue
        kg[t.date] = kg.get(t.date, 0.0) + t.quantity_kg
        revenue[t.date] = revenue.get(t.date, 0.0) + t.quantity_kg * t.unit_price
    points = [
        PricePoint(price=revenue[d] / kg[d], quantity=kg[d])
        for d in sorted(kg)
        if kg[d] > 0
    ]
    if len(points) < 4:
        raise TooFewPointsError(
            f"category {category!r} has {len(points)} sale days, need at least 4"
        )
    return points


def _as_arrays(points: Sequence[PricePoint]) -> tuple[np.ndarray, np.ndarray]:
    p = np.array([pt.price for pt in points], dtype=float)
    q = np.array([pt.quantity for pt in points], dtype=float)
    return p, q


def _lstsq_two(col: np.ndarray, q: np.ndarray) -> tuple[float, float, float]:
    """Fit q ~ u*col + v; return (u, v, sse)."""
    design = np.column_stack([col, np.ones_like(col)])
    coef, _, _, _ = np.linalg.lstsq(design, q, rcond=None)
    resid = q - design @ coef
    return float(coef[0]), float(coef[1]), float(resid @ resid)


def _fit_linear(p: np.ndarray, q: np.ndarray) -> tuple[tuple[float, ...], float]:
    a, b, sse = _lstsq_two(p, q)
    return (a, b), sse


def _profile_log(p: np.ndarray, q: np.ndarray, b_shift: float):
    if not math.isfinite(b_shift) or b_shift >= p.min() - 1e-9:
        return None
    u = np.log(p - b_shift)
    a, c, sse = _lstsq_two(u, q)
    return (a, b_shift, c), sse


def _profile_power(p: np.ndarray, q: np.ndarray, exponent: float):
    if not math.isfinite(exponent) or abs(exponent) > 8.0:
        return None
    with np.errstate(over="ignore", invalid="ignore"):
        v = np.power(p, exponent)
    if not np.all(np.isfinite(v)):
        return None
    a, c, sse = _lstsq_two(v, q)
    if not math.isfinite(sse):
        return None
    return (a, exponent, c), sse


def _multistart_1d(profile, starts: Sequence[float]):
    """Nelder-Mead from each start on the profiled SSE; best finite result."""

    def objective(theta: np.ndarray) -> float:
        result = profile(float(theta[0]))
        return result[1] if result is not None else 1e300

    best = None
    for start in starts:
        res = minimize(
            objective,
            np.array([start], dtype=float),
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 400},
        )
        candidate = profile(float(res.x[0]))
        if candidate is None:
            continue
        if best is None or candidate[1] < best[1]:
            best = candidate
    return best


def fit(points: Sequence[PricePoint], family: str) -> DemandModel:
    """Least-squares fit of one family to the points."""
    if family not in FAMILIES:
        raise UnknownFamilyError(f"unknown family {family!r}")
    n_params = _N_PARAMS[family]
    if len(points) < n_params:
        raise TooFewPointsError(
            f"{family} needs at least {n_params} points, got {len(points)}"
        )
    p, q = _as_arrays(points)
    if family == "linear":
        params, sse = _fit_linear(p, q)
    elif family == "log":
        p_min = float(p.min())
        hi = p_min - _B_MARGIN if p_min > 2 * _B_MARGIN else p_min / 2.0
        starts = list(np.linspace(min(0.0, hi), hi, 8)) + [-1.0, -10.0]
        best = _multistart_1d(lambda b: _profile_log(p, q, b), starts)
        if best is None:
            raise FitDivergedError("no feasible shift B found for log family")
        params, sse = best
    else:
        starts = [-3.0, -2.0, -1.0, -0.5, 0.5, 1.0, 2.0, 3.0]
        best = _multistart_1d(lambda e: _profile_power(p, q, e), starts)
        if best is None:
            raise FitDivergedError("no finite-SSE exponent found for power family")
        params, sse = best
    return DemandModel(
        family=family,
        params=tuple(float(v) for v in params),
        fit_sse=max(0.0, float(sse)),
        n_points=len(points),
        price_lo=float(p.min()),
        price_hi=float(p.max()),
    )


def select_best(points: Sequence[PricePoint]) -> DemandModel:
    """Fit all three families, return the lowest-SSE model.

    SSE ties (within 1e-9 relative, with a small absolute floor so that
    exact fits compare as equal) go to the model with fewer parameters,
    then to family order linear < log < power.
    """
    candidates: list[DemandModel] = []
    failures: list[str] = []
    for family in FAMILIES:
        try:
            candidates.append(fit(points, family))
        except (TooFewPointsError, FitDivergedError) as exc:
            failures.append(f"{family}: {exc}")
    if not candidates:
        raise AllFitsFailedError("; ".join(failures))
    _, q = _as_arrays(points)
    abs_floor = 1e-12 * float(q @ q)
    best_sse = min(m.fit_sse for m in candidates)
    order = {f: i for i, f in enumerate(FAMILIES)}
    tied = [
        m
        for m in candidates
        if m.fit_sse - best_sse <= 1e-9 * max(best_sse, m.fit_sse) + abs_floor
    ]
    tied.sort(key=lambda m: (len(m.params), order[m.family]))
    return tied[0]


def evaluate(model: DemandModel, price: float) -> float:
    """Predicted kg at a price; negative predictions clamp to 0."""
    if model.family == "linear":
        a, b = model.params
        value = a * price + b
    elif model.family == "log":
        a, b, c = model.params
        if price <= b:
            raise DomainViolationError(
                f"price {price} outside domain p > {b} of log model"
            )
        value = a * math.log(price - b) + c
    elif model.family == "power":
        a, b, c = model.params
        if price <= 0:
            raise DomainViolationError("power model needs price > 0")
        value = a * price**b + c
    else:
        raise UnknownFamilyError(f"unknown family {model.family!r}")
    return max(0.0, value)


def domain_lower_bound(model: DemandModel) -> float:
    """Prices must stay strictly above this value."""
    if model.family == "log":
        return model.params[1]
    return 0.0


def _check_decreasing(model: DemandModel) -> None:
    if model.family == "linear":
        if model.params[0] >= 0:
            raise NotDecreasingError("linear slope is nonnegative")
    elif model.family == "log":
        if model.params[0] >= 0:
            raise NotDecreasingError("log coefficient is nonnegative")
    else:
        a, b, _ = model.params
        if a * b >= 0:
            raise NotDecreasingError("power model is not decreasing")


def zero_demand_price(model: DemandModel) -> float | None:
    """Smallest price at which predicted demand hits 0, or None.

    When the fitting price range is known, prices beyond 10x the highest
    observed price are treated as out of reach and give None.
    """
    _check_decreasing(model)
    if model.family == "linear":
        a, b = model.params
        root = -b / a
    elif model.family == "log":
        a, b, c = model.params
        root = b + math.exp(-c / a)
    else:
        a, b, c = model.params
        if a > 0:
            # decreasing toward asymptote c; never hits 0 unless c < 0
            if c >= 0:
                return None
            root = (-c / a) ** (1.0 / b)
        else:
            # decreasing from c at p->0+
            if c <= 0:
                return 0.0
            root = (c / -a) ** (1.0 / b)
    if model.price_hi is not None and root > _ZERO_PRICE_CAP_FACTOR * model.price_hi:
        return None
    return float(root)
