"""Demand curve fitting, family selection and evaluation."""

import math
from datetime import date, time, timedelta

import numpy as np
import pytest

from vegplan.dataio import (
    CatalogEntry,
    LossEntry,
    Transaction,
    WholesaleQuote,
    build_dataset,
)
from vegplan.demand import (
    DemandModel,
    PricePoint,
    build_price_points,
    evaluate,
    fit,
    select_best,
    zero_demand_price,
)
from vegplan.errors import (
    DomainViolationError,
    NotDecreasingError,
    TooFewPointsError,
    UnknownFamilyError,
)

# fitted category curves used as recovery targets throughout the suite
REFERENCE_CURVES = {
    "水生根茎类": ("log", (-26.11035516, 2.51727164, 83.60511972)),
    "花叶类": ("log", (-36.00775817, 2.35435122, 209.756959)),
    "花菜类": ("linear", (-2.89165146, 64.2021206)),
    "茄类": ("log", (-8.16177241, 1.62367199, 36.4701182)),
    "辣椒类": ("log", (-17.07560033, 3.10816607, 105.16379865)),
    "食用菌": ("linear", (-3.28878025, 92.53732638)),
}


def curve_value(family, params, p):
    if family == "linear":
        a, b = params
        return a * p + b
    if family == "log":
        A, B, C = params
        return A * math.log(p - B) + C
    a, b, c = params
    return a * p**b + c


def points_from(family, params, prices, noise=0.0, seed=0):
    rng = np.random.default_rng(seed)
    pts = []
    for p in prices:
        q = curve_value(family, params, p)
        if noise:
            q *= 1.0 + noise * rng.standard_normal()
        pts.append(PricePoint(price=p, quantity=max(q, 0.0)))
    return pts


def price_grid(family, params, n=25):
    """Prices spanning the decreasing, positive-demand part of the curve."""
    if family == "linear":
        a, b = params
        root = -b / a
        return np.linspace(0.3 * root, 0.95 * root, n)
    if family == "log":
        A, B, C = params
        root = B + math.exp(-C / A)
        return np.linspace(B + 0.2 * (root - B), 0.95 * root, n)
    return np.linspace(1.0, 10.0, n)


def test_fit_recovers_every_reference_curve_noiselessly():
    for name, (family, params) in REFERENCE_CURVES.items():
        pts = points_from(family, params, price_grid(family, params))
        model = fit(pts, family)
        total = sum(pt.quantity**2 for pt in pts)
        assert model.fit_sse <= 1e-8 * total, name
        for got, want in zip(model.params, params):
            assert got == pytest.approx(want, rel=1e-3), name


def test_fit_linear_is_exact_to_machine_precision():
    pts = points_from("linear", (-2.89165146, 64.2021206),
                      np.linspace(5, 20, 12))
    model = fit(pts, "linear")
    assert model.params[0] == pytest.approx(-2.89165146, rel=1e-9)
    assert model.params[1] == pytest.approx(64.2021206, rel=1e-9)


def test_fit_power_recovery():
    pts = points_from("power", (5.0, -1.0, 2.0), np.linspace(1, 9, 20))
    model = fit(pts, "power")
    for got, want in zip(model.params, (5.0, -1.0, 2.0)):
        assert got == pytest.approx(want, rel=1e-3)


def test_fit_random_decreasing_curves_recovered():
    rng = np.random.default_rng(77)
    for trial in range(15):
        a = -float(rng.uniform(0.5, 8.0))
        b = float(rng.uniform(30.0, 120.0))
        pts = points_from("linear", (a, b), np.linspace(2, 0.9 * (-b / a), 10))
        model = fit(pts, "linear")
        assert model.params[0] == pytest.approx(a, rel=1e-6)
        assert model.params[1] == pytest.approx(b, rel=1e-6)


def test_fit_two_point_line_interpolates():
    pts = [PricePoint(4.0, 10.0), PricePoint(8.0, 2.0)]
    model = fit(pts, "linear")
    assert model.fit_sse == pytest.approx(0.0, abs=1e-18)
    assert evaluate(model, 4.0) == pytest.approx(10.0)
    assert evaluate(model, 8.0) == pytest.approx(2.0)


def test_fit_rejects_too_few_points():
    with pytest.raises(TooFewPointsError):
        fit([PricePoint(4.0, 10.0)], "linear")
    with pytest.raises(TooFewPointsError):
        fit([PricePoint(4.0, 10.0), PricePoint(5.0, 8.0)], "log")


def test_fit_rejects_unknown_family():
    pts = points_from("linear", (-2.0, 10.0), [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(UnknownFamilyError):
        fit(pts, "cubic")


def test_select_best_picks_generating_family():
    cases = [
        ("log", (-26.11035516, 2.51727164, 83.60511972)),
        ("power", (5.0, -1.2, 1.0)),
    ]
    for family, params in cases:
        pts = points_from(family, params, price_grid(family, params))
        assert select_best(pts).family == family


def test_select_best_breaks_exact_tie_by_parameter_count():
    # a straight line is fit exactly by both linear and power (b=1);
    # the 2-parameter family must win the tie
    pts = points_from("linear", (-3.0, 30.0), np.linspace(1, 9, 9))
    model = select_best(pts)
    assert model.family == "linear"


def test_select_best_sse_never_above_single_family_fit():
    rng = np.random.default_rng(123)
    for trial in range(10):
        params = (-float(rng.uniform(1, 5)), float(rng.uniform(40, 90)))
        pts = points_from("linear", params, np.linspace(3, 12, 10),
                          noise=0.05, seed=trial)
        best = select_best(pts)
        for family in ("linear", "log", "power"):
            assert best.fit_sse <= fit(pts, family).fit_sse + 1e-12


def test_evaluate_reference_values():
    linear = DemandModel("linear", (-2.89165146, 64.2021206), 0.0, 10)
    assert evaluate(linear, 15.75169) == pytest.approx(18.6537, abs=1e-3)
    log = DemandModel("log", (-26.11035516, 2.51727164, 83.60511972), 0.0, 10)
    assert evaluate(log, 19.62878) == pytest.approx(9.4582, abs=1e-3)
    root = 64.2021206 / 2.89165146
    assert evaluate(linear, root) == pytest.approx(0.0, abs=1e-10)


def test_evaluate_clamps_negative_prediction_to_zero():
    linear = DemandModel("linear", (-2.0, 10.0), 0.0, 5)
    assert evaluate(linear, 100.0) == 0.0


def test_evaluate_rejects_log_domain_violation():
    log = DemandModel("log", (-5.0, 3.0, 10.0), 0.0, 5)
    with pytest.raises(DomainViolationError):
        evaluate(log, 3.0)
    with pytest.raises(DomainViolationError):
        evaluate(log, 2.0)


def test_evaluate_is_nonincreasing_for_planner_models():
    for name, (family, params) in REFERENCE_CURVES.items():
        model = DemandModel(family, params, 0.0, 10)
        grid = price_grid(family, params, n=100)
        values = [evaluate(model, float(p)) for p in grid]
        assert all(a >= b - 1e-9 for a, b in zip(values, values[1:])), name


def test_zero_demand_price_closed_forms():
    assert zero_demand_price(DemandModel("linear", (-2.0, 10.0), 0.0, 5)) == 5.0
    a, b, c = -26.11035516, 2.51727164, 83.60511972
    want = b + math.exp(-c / a)
    got = zero_demand_price(DemandModel("log", (a, b, c), 0.0, 10))
    assert got == pytest.approx(want, rel=1e-9)


def test_zero_demand_price_none_when_demand_never_dies():
    model = DemandModel("power", (5.0, -1.0, 2.0), 0.0, 5, price_lo=1.0, price_hi=9.0)
    assert zero_demand_price(model) is None


def test_increasing_model_rejected():
    with pytest.raises(NotDecreasingError):
        zero_demand_price(DemandModel("linear", (1.0, 5.0), 0.0, 5))


# --- price point construction ------------------------------------------------

def day_dataset(rows):
    """rows: list of (day_offset, item_code, kg, price, is_return)."""
    catalog = tuple(
        CatalogEntry(f"V{i:03d}", f"item{i}", f"Q{i:02d}", f"cat{i}")
        for i in range(6)
    )
    base = date(2023, 7, 1)
    txs = tuple(
        Transaction(base + timedelta(days=off), time(9, 0), code, kg, price, ret, False)
        for off, code, kg, price, ret in rows
    )
    quotes = (WholesaleQuote(base, "V000", 1.0),)
    return build_dataset(catalog, txs, quotes, {"V000": LossEntry("V000", 0.1)})


def test_build_price_points_weighted_mean_and_exclusions():
    ds = day_dataset([
        (0, "V000", 2.0, 4.0, False),
        (0, "V000", 2.0, 6.0, False),
        (0, "V000", 1.0, 9.0, True),   # return: excluded entirely
        (1, "V000", 1.0, 7.0, False),
        (2, "V000", 3.0, 5.0, False),
        (3, "V000", 2.0, 6.0, False),
    ])
    pts = build_price_points(ds, "cat0")
    assert pts[0].price == pytest.approx(5.0)
    assert pts[0].quantity == pytest.approx(4.0)
    assert pts[1].price == 7.0 and pts[1].quantity == 1.0
    assert len(pts) == 4


def test_build_price_points_needs_four_days():
    ds = day_dataset([
        (0, "V000", 2.0, 4.0, False),
        (1, "V000", 1.0, 7.0, False),
        (2, "V000", 3.0, 5.0, False),
    ])
    with pytest.raises(TooFewPointsError):
        build_price_points(ds, "cat0")


def test_build_price_points_unknown_category(dataset):
    with pytest.raises(KeyError):
        build_price_points(dataset, "nope")
