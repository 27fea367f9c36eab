"""Item assortment selection and pricing."""

from datetime import date, timedelta

import numpy as np
import pytest

from vegplan.demand import DemandModel, evaluate
from vegplan.errors import (
    CategoryUncoverableError,
    EmptyFeasibleIntervalError,
    PoolTooLargeError,
    PoolTooSmallError,
)
from vegplan.planner_items import (
    ItemCandidate,
    SelectionConfig,
    brute_force_assortment,
    candidate_pool,
    evaluate_selection,
    item_demand,
    optimal_item_price,
    optimize_assortment,
    pool_optima,
)

BIG_LINEAR = DemandModel("linear", (-4.0, 80.0), 0.0, 12)


def cand(code="X01", category="c0", w=4.0, loss=0.1, share=0.5):
    return ItemCandidate(code, f"name-{code}", category, w, loss, share)


def small_config(**kw):
    defaults = dict(min_items=3, max_items=5, required_categories=3,
                    min_display_kg=2.5, restarts=6, seed=0)
    defaults.update(kw)
    return SelectionConfig(**defaults)


def random_instance(seed, n=10, n_cats=3):
    """One enumerable pool with one linear demand model per category."""
    rng = np.random.default_rng(seed)
    models = {}
    for c in range(n_cats):
        a = -float(rng.uniform(1.0, 6.0))
        b = float(rng.uniform(30.0, 90.0))
        models[f"c{c}"] = DemandModel("linear", (a, b), 0.0, 9)
    pool = []
    for i in range(n):
        c = f"c{i % n_cats}"
        root = -models[c].params[1] / models[c].params[0]
        pool.append(
            ItemCandidate(
                item_code=f"X{i:02d}",
                item_name=f"item{i}",
                category=c,
                wholesale_forecast=float(rng.uniform(0.15, 0.55)) * root,
                loss_rate=float(rng.uniform(0.0, 0.2)),
                share=float(rng.uniform(0.05, 0.5)),
            )
        )
    return pool, models


def test_item_demand_modes():
    model = DemandModel("linear", (-2.0, 10.0), 0.0, 5)
    c = cand(share=0.25)
    assert item_demand(model, c, 3.0, "literal") == 4.0
    assert item_demand(model, c, 3.0, "share") == 1.0
    assert item_demand(model, cand(share=0.0), 3.0, "share") == 0.0
    with pytest.raises(ValueError):
        item_demand(model, c, 3.0, "bogus")


def test_high_demand_item_matches_category_planner():
    # with a share this large the display minimum never binds, so the
    # solution must match the plain margin maximizer
    from vegplan.planner_category import optimal_price

    config = small_config(demand_mode="share")
    c = cand(share=0.9, w=5.0, loss=0.1)
    got = optimal_item_price(c, BIG_LINEAR, config)
    # on the demand branch profit is share * (p - w/(1-loss)) * Q(p), so
    # the argmax coincides with the unscaled margin maximizer
    ref = optimal_price(BIG_LINEAR, 5.0 / (1 - 0.1), price_floor=5.0 * 1.001)
    assert got.price == pytest.approx(ref.price, abs=1e-5)
    assert got.supply_kg == pytest.approx(
        got.predicted_sales_kg / (1 - 0.1), rel=1e-9
    )
    assert got.supply_kg > config.min_display_kg


def test_tiny_demand_item_lands_on_display_minimum():
    config = small_config()
    c = cand(share=0.01, w=4.0, loss=0.0)
    got = optimal_item_price(c, BIG_LINEAR, config)
    assert got is not None
    assert got.supply_kg == config.min_display_kg
    # dense-grid oracle over both branches
    lo, hi = 4.0 * 1.001, 20.0 - 1e-9
    grid = np.linspace(lo, hi, 40000)
    def profit(p):
        q = 0.01 * evaluate(BIG_LINEAR, float(p))
        return p * q - 4.0 * max(2.5, q)
    best = max(profit(p) for p in grid)
    assert got.profit == pytest.approx(best, abs=1e-4)


def test_item_above_choke_price_is_infeasible():
    config = small_config()
    c = cand(w=25.0)  # choke price of BIG_LINEAR is 20
    with pytest.raises(EmptyFeasibleIntervalError):
        optimal_item_price(c, BIG_LINEAR, config)
    assert pool_optima([c], {"c0": BIG_LINEAR}, config) == [None]


def test_zero_share_item_unpriceable_in_share_mode():
    config = small_config(demand_mode="share")
    assert optimal_item_price(cand(share=0.0), BIG_LINEAR, config) is None


def test_stocking_threshold_rejects_loss_makers():
    config = small_config(stocking_threshold=0.0)
    c = cand(share=0.004, w=8.0, loss=0.0)  # revenue can't cover 2.5 kg at cost
    assert optimal_item_price(c, BIG_LINEAR, config) is None
    lenient = small_config()  # default allows a bounded loss
    got = optimal_item_price(c, BIG_LINEAR, lenient)
    assert got is not None and got.profit < 0.0
    assert got.profit >= -config.min_display_kg * c.wholesale_forecast - 1e-9


def test_evaluate_selection_constraints():
    pool, models = random_instance(1)
    config = small_config()
    optima = pool_optima(pool, models, config)
    n = len(pool)
    assert evaluate_selection([False] * n, optima, pool, config) is None
    full = [True] * n  # count 10 > max 5
    assert evaluate_selection(full, optima, pool, config) is None
    one_cat = [c.category == "c0" for c in pool]
    if 3 <= sum(one_cat) <= 5:
        assert evaluate_selection(one_cat, optima, pool, config) is None
    chosen = [i for i, o in enumerate(optima) if o is not None][:4]
    if len({pool[i].category for i in chosen}) == 3:
        sel = [i in chosen for i in range(n)]
        want = sum(optima[i].profit for i in chosen)
        assert evaluate_selection(sel, optima, pool, config) == pytest.approx(want)


def test_optimizer_matches_brute_force_on_enumerable_instances():
    matched = 0
    for seed in range(6):
        pool, models = random_instance(seed)
        config = small_config(seed=seed)
        best = optimize_assortment(pool, models, config)
        exact = brute_force_assortment(pool, models, config)
        if best.total_profit == pytest.approx(exact.total_profit, rel=1e-9):
            matched += 1
    assert matched >= 5


def test_optimizer_is_deterministic():
    pool, models = random_instance(3)
    config = small_config(seed=9)
    a = optimize_assortment(pool, models, config)
    b = optimize_assortment(pool, models, config)
    assert a == b


def test_local_search_never_degrades_greedy_start():
    for seed in range(5):
        pool, models = random_instance(seed)
        greedy_only = optimize_assortment(
            pool, models, small_config(seed=seed, restarts=1, max_stale_moves=0)
        )
        full = optimize_assortment(pool, models, small_config(seed=seed))
        assert full.total_profit >= greedy_only.total_profit - 1e-9


def test_plan_row_conventions():
    pool, models = random_instance(2)
    plan = optimize_assortment(pool, models, small_config(seed=2))
    assert small_config().min_items <= plan.selected_count <= small_config().max_items
    assert plan.categories_covered == 3
    codes = [r.item_code for r in plan.rows]
    assert codes == sorted(codes)
    total = 0.0
    for r in plan.rows:
        if r.selected:
            assert r.supply_kg >= 2.5 - 1e-9
            assert r.price > r.wholesale
            total += r.expected_profit
        else:
            assert r.supply_kg == r.price == 0.0
            assert r.expected_profit == r.predicted_sales_kg == 0.0
    assert plan.total_profit == pytest.approx(total, rel=1e-12)


def test_pool_too_small_and_uncoverable():
    pool, models = random_instance(4, n=4)
    with pytest.raises(PoolTooSmallError):
        optimize_assortment(pool[:2], models, small_config())
    two_cat_pool = [c for c in pool if c.category != "c2"]
    config = small_config(min_items=2)
    with pytest.raises(CategoryUncoverableError):
        optimize_assortment(two_cat_pool, models, config)


def test_brute_force_size_limit():
    pool, models = random_instance(5, n=17)
    with pytest.raises(PoolTooLargeError):
        brute_force_assortment(pool, models, small_config())


def test_candidate_pool_window_shares_and_exclusions(dataset):
    hi = dataset.date_span()[1]
    window = (hi - timedelta(days=6), hi)
    pool = candidate_pool(dataset, window)
    by_cat: dict[str, float] = {}
    for c in pool:
        assert 0.0 <= c.share <= 1.0
        assert c.wholesale_forecast > 0.0
        by_cat[c.category] = by_cat.get(c.category, 0.0) + c.share
    for cat, total in by_cat.items():
        assert total == pytest.approx(1.0, rel=1e-9), cat
    # every pool member really sold inside the window
    sold = {
        t.item_code
        for t in dataset.transactions
        if not t.is_return and window[0] <= t.date <= window[1]
    }
    assert {c.item_code for c in pool} <= sold


def test_candidate_pool_trailing_mean_wholesale(dataset):
    hi = dataset.date_span()[1]
    pool = candidate_pool(dataset, (hi - timedelta(days=6), hi))
    probe = pool[0]
    dates, prices = dataset.quotes_for(probe.item_code, until=hi)
    want = sum(prices[-7:]) / len(prices[-7:])
    assert probe.wholesale_forecast == pytest.approx(want, rel=1e-12)
