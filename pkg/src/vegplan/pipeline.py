"""Staged orchestration: ingest → analyze → fit → forecast → plan → audit.

Every run is a pure function of (input files, config, seed).  Artifacts
embed the config hash and root seed; each stage derives its own seed by
hashing (root seed, stage name), so reordering or skipping stages never
shifts another stage's randomness.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import date as Date
from datetime import timedelta

from . import analytics, demand
from .dataio import Dataset, load_dataset, validate_dataset
from .errors import ConfigError, DemandError, StageError
from .forecast import category_wholesale_series, fit_arima, forecast, select_order
from .planner_category import CategoryInputs, CategoryPlanRow, plan_category_week
from .planner_items import (
    AssortmentPlan,
    SelectionConfig,
    candidate_pool,
    optimize_assortment,
)

STAGES = (
    "ingest",
    "analyze",
    "fit-demand",
    "forecast-wholesale",
    "plan-categories",
    "plan-items",
    "audit",
)

# wholesale forecasts are floored here before planning; ARIMA itself
# does not clamp
WHOLESALE_FLOOR = 0.01


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on besides the input files' contents."""

    catalog: str
    transactions: str
    wholesale: str
    loss: str
    out_dir: str = "out"
    seed: int = 0
    plan_date: str | None = None  # ISO date; None = day after last sale
    horizon: int = 7
    granularity: str = "day"
    top_n: int = 15
    demand_family: str = "auto"
    arima_order: str = "auto"  # "auto" or "p,d,q"
    item_window_days: int = 7
    min_items: int = 27
    max_items: int = 33
    min_display_kg: float = 2.5
    required_categories: int = 6
    demand_mode: str = "share"
    restarts: int = 16
    max_stale_moves: int = 2000
    initializer: str = "greedy"

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.item_window_days < 1:
            raise ConfigError("item_window_days must be >= 1")
        if self.granularity not in analytics.GRANULARITIES:
            raise ConfigError(f"granularity must be one of {analytics.GRANULARITIES}")
        if self.demand_family not in ("auto",) + demand.FAMILIES:
            raise ConfigError(f"unknown demand family {self.demand_family!r}")
        parse_order(self.arima_order)
        if self.plan_date is not None:
            try:
                Date.fromisoformat(self.plan_date)
            except ValueError as exc:
                raise ConfigError(f"bad plan_date {self.plan_date!r}") from exc

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"catalog", "transactions", "wholesale", "loss"} - set(raw)
        if missing:
            raise ConfigError(f"config missing required keys: {sorted(missing)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def with_overrides(self, **kwargs) -> "RunConfig":
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates) if updates else self

    def selection_config(self, seed: int) -> SelectionConfig:
        return SelectionConfig(
            min_items=self.min_items,
            max_items=self.max_items,
            min_display_kg=self.min_display_kg,
            required_categories=self.required_categories,
            demand_mode=self.demand_mode,
            restarts=self.restarts,
            seed=seed,
            max_stale_moves=self.max_stale_moves,
            initializer=self.initializer,
        )


def parse_order(text: str) -> tuple[int, int, int] | None:
    """`"auto"` → None, `"p,d,q"` → the tuple."""
    if text == "auto":
        return None
    parts = text.split(",")
    try:
        p, d, q = (int(s) for s in parts)
    except ValueError:
        raise ConfigError(f"arima_order must be 'auto' or 'p,d,q', got {text!r}")
    if min(p, d, q) < 0:
        raise ConfigError(f"arima_order components must be nonnegative: {text!r}")
    return p, d, q


def config_hash(config: RunConfig) -> str:
    """Digest of every run-affecting field; out_dir is excluded."""
    payload = asdict(config)
    payload.pop("out_dir")
    canon = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def stage_seed(root_seed: int, stage: str) -> int:
    """Stable per-stage seed derived from the root seed."""
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


@dataclass
class RunContext:
    """Mutable state threaded through the stages of one run."""

    config: RunConfig
    hash: str = ""
    dataset: Dataset | None = None
    models: dict = field(default_factory=dict)
    model_errors: dict = field(default_factory=dict)
    forecasts: dict = field(default_factory=dict)
    category_rows: list = field(default_factory=list)
    item_plan: AssortmentPlan | None = None
    artifacts: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.hash = config_hash(self.config)

    def provenance(self, stage: str) -> dict:
        return {"config_hash": self.hash, "seed": self.config.seed, "stage": stage}

    def out_path(self, *parts: str) -> str:
        path = os.path.join(self.config.out_dir, *parts)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        return path

    def plan_date(self) -> Date:
        if self.config.plan_date is not None:
            return Date.fromisoformat(self.config.plan_date)
        return self.dataset.date_span()[1] + timedelta(days=1)


def _write_json(ctx: RunContext, name: str, stage: str, payload: dict, *parts) -> str:
    path = ctx.out_path(*parts, name)
    body = {"provenance": ctx.provenance(stage)}
    body.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def _write_csv(ctx, name, stage, header, rows, *parts, extra_comment=None) -> str:
    path = ctx.out_path(*parts, name)
    prov = ctx.provenance(stage)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(
            f"# config_hash={prov['config_hash']} seed={prov['seed']}"
            f" stage={prov['stage']}\n"
        )
        if extra_comment:
            fh.write(f"# {extra_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def stage_ingest(ctx: RunContext) -> None:
    cfg = ctx.config
    ctx.dataset = load_dataset(cfg.catalog, cfg.transactions, cfg.wholesale, cfg.loss)
    report = validate_dataset(ctx.dataset)
    ctx.artifacts["dataset_report"] = _write_json(
        ctx, "dataset_report.json", "ingest", {"report": report.to_dict()}
    )


def stage_analyze(ctx: RunContext) -> None:
    ds, gran = ctx.dataset, ctx.config.granularity
    for level in ("category", "item"):
        aggs = analytics.aggregate_sales(ds, gran, level)
        ctx.artifacts[f"aggregates_{level}"] = _write_csv(
            ctx,
            f"aggregates_{level}.csv",
            "analyze",
            ("period", "group", "total_kg", "revenue", "avg_unit_price"),
            [
                (a.period.index, a.group, _fmt(a.total_kg), _fmt(a.revenue),
                 _fmt(a.avg_unit_price))
                for a in aggs
            ],
            "analytics",
        )
    corr_info = {}
    for level, top_n in (("category", None), ("item", ctx.config.top_n)):
        matrix = analytics.correlation_matrix(ds, level, gran, top_n)
        rows = [
            (label,) + tuple(_fmt(v) for v in matrix.values[i])
            for i, label in enumerate(matrix.labels)
        ]
        ctx.artifacts[f"correlation_{level}"] = _write_csv(
            ctx,
            f"correlation_{level}.csv",
            "analyze",
            ("",) + matrix.labels,
            rows,
            "analytics",
        )
        corr_info[level] = {"labels": list(matrix.labels), "dropped": list(matrix.dropped)}
    profit = analytics.category_profit(ds, gran)
    ctx.artifacts["profit_category"] = _write_csv(
        ctx,
        "profit_category.csv",
        "analyze",
        ("period", "category", "profit"),
        [(r.period.index, r.category, _fmt(r.profit)) for r in profit.rows],
        "analytics",
    )
    sellers = analytics.top_sellers(ds, ctx.config.top_n)
    ctx.artifacts["top_sellers"] = _write_csv(
        ctx,
        "top_sellers.csv",
        "analyze",
        ("item_code", "item_name", "total_kg"),
        [(s.item_code, s.item_name, _fmt(s.total_kg)) for s in sellers],
        "analytics",
    )
    ctx.artifacts["analytics_summary"] = _write_json(
        ctx,
        "summary.json",
        "analyze",
        {
            "granularity": gran,
            "correlations": corr_info,
            "profit_excluded_rows": [
                [d.isoformat(), code] for d, code in profit.excluded
            ],
            "top_sellers": [s.item_code for s in sellers],
        },
        "analytics",
    )


def stage_fit_demand(ctx: RunContext) -> None:
    cfg = ctx.config
    entries: dict[str, dict] = {}
    for category in sorted(ctx.dataset.categories()):
        try:
            points = demand.build_price_points(ctx.dataset, category)
            if cfg.demand_family == "auto":
                model = demand.select_best(points)
            else:
                model = demand.fit(points, cfg.demand_family)
            ctx.models[category] = model
            entries[category] = model.to_dict()
        except DemandError as exc:
            # planners skip categories without a usable curve
            ctx.model_errors[category] = f"{type(exc).__name__}: {exc}"
            entries[category] = {"error": ctx.model_errors[category]}
    ctx.artifacts["demand_models"] = _write_json(
        ctx,
        "demand_models.json",
        "fit-demand",
        {"family_requested": cfg.demand_family, "models": entries},
    )


def category_loss_rates(dataset: Dataset) -> dict[str, float]:
    """Sold-kg-weighted mean item loss rate per category."""
    kg: dict[str, float] = {}
    weighted: dict[str, float] = {}
    for t in dataset.transactions:
        if t.is_return:
            continue
        cat = dataset.category_of(t.item_code)
        kg[cat] = kg.get(cat, 0.0) + t.quantity_kg
        weighted[cat] = (
            weighted.get(cat, 0.0) + t.quantity_kg * dataset.loss_rate(t.item_code)
        )
    return {cat: weighted[cat] / kg[cat] for cat in kg if kg[cat] > 0}


def stage_forecast(ctx: RunContext, only_category: str | None = None) -> None:
    cfg = ctx.config
    order_override = parse_order(cfg.arima_order)
    seed = stage_seed(cfg.seed, "forecast-wholesale")
    plan_date = ctx.plan_date()
    days = [plan_date + timedelta(days=i) for i in range(cfg.horizon)]
    entries: dict[str, dict] = {}
    for category in sorted(ctx.dataset.categories()):
        if only_category is not None and category != only_category:
            continue
        series = category_wholesale_series(ctx.dataset, category)
        order = order_override
        if order is None:
            order = select_order(series.prices, seed=seed)
        fit = fit_arima(series.prices, order, seed=seed)
        raw = forecast(fit, cfg.horizon)
        prices = [max(WHOLESALE_FLOOR, float(v)) for v in raw]
        ctx.forecasts[category] = prices
        entries[category] = {
            "order": list(fit.order),
            "aic": fit.aic,
            "sigma2": fit.sigma2,
            "n_obs": fit.n_obs,
            "forecast": [
                {"date": d.isoformat(), "price": p} for d, p in zip(days, prices)
            ],
        }
    ctx.artifacts["wholesale_forecasts"] = _write_json(
        ctx,
        "wholesale_forecasts.json",
        "forecast-wholesale",
        {"plan_date": plan_date.isoformat(), "horizon": cfg.horizon,
         "categories": entries},
    )


def stage_plan_categories(ctx: RunContext) -> None:
    losses = category_loss_rates(ctx.dataset)
    inputs = [
        CategoryInputs(
            category=cat,
            demand=ctx.models[cat],
            loss_rate=losses[cat],
            wholesale_forecasts=tuple(ctx.forecasts[cat]),
        )
        for cat in sorted(ctx.dataset.categories())
        if cat in ctx.models and cat in ctx.forecasts
    ]
    ctx.category_rows = plan_category_week(inputs, ctx.config.horizon)
    ctx.artifacts["category_plan"] = _write_csv(
        ctx,
        "category_plan.csv",
        "plan-categories",
        ("day_index", "category", "supply_kg", "price", "predicted_sales_kg",
         "expected_profit", "wholesale", "loss_rate", "status"),
        [
            (r.day_index, r.category, _fmt(r.supply_kg), _fmt(r.price),
             _fmt(r.predicted_sales_kg), _fmt(r.expected_profit),
             _fmt(r.wholesale), _fmt(r.loss_rate), r.status)
            for r in ctx.category_rows
        ],
    )


def _selection_params_comment(cfg: RunConfig) -> str:
    return (
        f"params min_items={cfg.min_items} max_items={cfg.max_items}"
        f" min_display_kg={_fmt(cfg.min_display_kg)}"
        f" required_categories={cfg.required_categories}"
        f" demand_mode={cfg.demand_mode}"
    )


def stage_plan_items(ctx: RunContext) -> None:
    cfg = ctx.config
    plan_date = ctx.plan_date()
    window = (plan_date - timedelta(days=cfg.item_window_days),
              plan_date - timedelta(days=1))
    pool = candidate_pool(ctx.dataset, window)
    pool = [c for c in pool if c.category in ctx.models]
    sel = cfg.selection_config(stage_seed(cfg.seed, "plan-items"))
    ctx.item_plan = optimize_assortment(pool, ctx.models, sel)
    ctx.artifacts["item_plan"] = _write_csv(
        ctx,
        "item_plan.csv",
        "plan-items",
        ("item_code", "item_name", "selected", "supply_kg", "price",
         "expected_profit", "category", "predicted_sales_kg", "wholesale",
         "loss_rate", "share"),
        [
            (r.item_code, r.item_name, int(r.selected), _fmt(r.supply_kg),
             _fmt(r.price), _fmt(r.expected_profit), r.category,
             _fmt(r.predicted_sales_kg), _fmt(r.wholesale), _fmt(r.loss_rate),
             _fmt(r.share))
            for r in ctx.item_plan.rows
        ],
        extra_comment=_selection_params_comment(cfg),
    )


def stage_audit(ctx: RunContext):
    from .audit import audit_run_dir

    report = audit_run_dir(ctx.config.out_dir)
    ctx.artifacts["audit"] = _write_json(
        ctx, "audit.json", "audit", report.to_dict()
    )
    return report


@dataclass(frozen=True)
class PipelineResult:
    artifacts: dict[str, str]
    audit_ok: bool
    elapsed: float


def run_pipeline(config: RunConfig) -> PipelineResult:
    """Run every stage in order; wraps failures in StageError(stage)."""
    t0 = time.perf_counter()
    ctx = RunContext(config)
    steps = (
        ("ingest", stage_ingest),
        ("analyze", stage_analyze),
        ("fit-demand", stage_fit_demand),
        ("forecast-wholesale", stage_forecast),
        ("plan-categories", stage_plan_categories),
        ("plan-items", stage_plan_items),
    )
    for name, step in steps:
        try:
            step(ctx)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
    try:
        report = stage_audit(ctx)
    except StageError:
        raise
    except Exception as exc:
        raise StageError("audit", exc) from exc
    return PipelineResult(
        artifacts=dict(ctx.artifacts),
        audit_ok=report.ok,
        elapsed=time.perf_counter() - t0,
    )
