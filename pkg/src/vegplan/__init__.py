"""Perishable-vegetable sales analytics, demand fitting and replenishment planning."""

from .analytics import (
    aggregate_sales,
    category_profit,
    correlation_matrix,
    pearson,
    top_sellers,
)
from .audit import AuditIssue, AuditReport, audit_plan, audit_run_dir
from .dataio import Dataset, load_dataset, validate_dataset, write_dataset
from .demand import (
    DemandModel,
    build_price_points,
    evaluate,
    fit,
    select_best,
    zero_demand_price,
)
from .errors import VegplanError
from .forecast import (
    ArimaFit,
    PriceSeries,
    category_wholesale_series,
    fit_arima,
    forecast,
    mean_forecast,
    select_order,
)
from .pipeline import PipelineResult, RunConfig, config_hash, run_pipeline, stage_seed
from .planner_category import (
    CategoryInputs,
    CategoryPlanRow,
    effective_unit_cost,
    optimal_price,
    plan_category_week,
)
from .planner_items import (
    AssortmentPlan,
    ItemCandidate,
    SelectionConfig,
    brute_force_assortment,
    candidate_pool,
    item_demand,
    optimal_item_price,
    optimize_assortment,
)
from .synthetic import generate_dataset

__version__ = "0.1.0"

__all__ = [
    "AssortmentPlan",
    "ArimaFit",
    "AuditIssue",
    "AuditReport",
    "CategoryInputs",
    "CategoryPlanRow",
    "Dataset",
    "DemandModel",
    "ItemCandidate",
    "PipelineResult",
    "PriceSeries",
    "RunConfig",
    "SelectionConfig",
    "VegplanError",
    "aggregate_sales",
    "audit_plan",
    "audit_run_dir",
    "brute_force_assortment",
    "build_price_points",
    "candidate_pool",
    "category_profit",
    "category_wholesale_series",
    "config_hash",
    "correlation_matrix",
    "effective_unit_cost",
    "evaluate",
    "fit",
    "fit_arima",
    "forecast",
    "generate_dataset",
    "item_demand",
    "load_dataset",
    "mean_forecast",
    "optimal_item_price",
    "optimal_price",
    "optimize_assortment",
    "pearson",
    "plan_category_week",
    "run_pipeline",
    "select_best",
    "select_order",
    "stage_seed",
    "top_sellers",
    "validate_dataset",
    "write_dataset",
    "zero_demand_price",
]
