"""Independent re-check of emitted plans against every planner constraint.

The auditor trusts nothing in memory: it re-reads the plan CSVs and the
demand-model JSON from disk, re-evaluates the curves, and verifies each
row-level constraint at 1e-6 relative tolerance.  Anything the pipeline
emits must pass here (emit-then-audit closure).
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

from .demand import DemandModel, evaluate
from .errors import DomainViolationError, MalformedPlanFileError

REL_TOL = 1e-6

CATEGORY_PLAN_COLUMNS = (
    "day_index", "category", "supply_kg", "price", "predicted_sales_kg",
    "expected_profit", "wholesale", "loss_rate", "status",
)
ITEM_PLAN_COLUMNS = (
    "item_code", "item_name", "selected", "supply_kg", "price",
    "expected_profit", "category", "predicted_sales_kg", "wholesale",
    "loss_rate", "share",
)


@dataclass(frozen=True)
class AuditIssue:
    constraint: str
    location: str
    message: str

    def to_dict(self) -> dict:
        return {"constraint": self.constraint, "location": self.location,
                "message": self.message}


@dataclass(frozen=True)
class AuditReport:
    ok: bool
    n_checks: int
    issues: tuple[AuditIssue, ...]
    summary: dict

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "n_checks": self.n_checks,
            "issues": [i.to_dict() for i in self.issues],
            "summary": self.summary,
        }


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


def _eval(model: DemandModel, price: float) -> float | None:
    """Curve value, or None when the price is outside the model domain."""
    try:
        return evaluate(model, price)
    except DomainViolationError:
        return None


def _read_plan_csv(path: str, required: tuple[str, ...]) -> tuple[list[dict], dict]:
    """Rows plus the key=value pairs from leading # comment lines."""
    if not os.path.exists(path):
        raise MalformedPlanFileError(f"plan file not found: {path}")
    meta: dict[str, str] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, _, value = token.partition("=")
                        meta[key] = value
            else:
                lines.append(line)
    if not lines:
        raise MalformedPlanFileError(f"{path} has no header row")
    reader = csv.DictReader(lines)
    missing = set(required) - set(reader.fieldnames or ())
    if missing:
        raise MalformedPlanFileError(f"{path} lacks columns: {sorted(missing)}")
    return list(reader), meta


def _num(row: dict, column: str, where: str) -> float:
    try:
        return float(row[column])
    except (TypeError, ValueError) as exc:
        raise MalformedPlanFileError(
            f"{where}: column {column!r} is not numeric: {row[column]!r}"
        ) from exc


def load_demand_models(path: str) -> dict[str, DemandModel]:
    if not os.path.exists(path):
        raise MalformedPlanFileError(f"demand model file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedPlanFileError(f"{path} is not valid JSON: {exc}") from exc
    models: dict[str, DemandModel] = {}
    for category, body in data.get("models", {}).items():
        if "error" in body:
            continue
        try:
            models[category] = DemandModel.from_dict(body)
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedPlanFileError(
                f"{path}: bad model entry for {category!r}: {exc}"
            ) from exc
    return models


class _Checker:
    def __init__(self) -> None:
        self.n_checks = 0
        self.issues: list[AuditIssue] = []

    def check(self, passed: bool, constraint: str, location: str, message: str):
        self.n_checks += 1
        if not passed:
            self.issues.append(AuditIssue(constraint, location, message))


def _audit_category_rows(rows, models, checker: _Checker) -> dict:
    stocked = flagged = 0
    for row in rows:
        where = f"category_plan day {row['day_index']} {row['category']}"
        supply = _num(row, "supply_kg", where)
        price = _num(row, "price", where)
        pred = _num(row, "predicted_sales_kg", where)
        profit = _num(row, "expected_profit", where)
        wholesale = _num(row, "wholesale", where)
        loss = _num(row, "loss_rate", where)
        if row["status"] != "ok":
            flagged += 1
            checker.check(
                supply == price == pred == profit == 0.0,
                "category_flagged_zero_row", where,
                "flagged row must be all zeros",
            )
            continue
        stocked += 1
        checker.check(
            _close(supply * (1.0 - loss), pred),
            "category_supply_balance", where,
            f"supply*(1-loss)={supply * (1 - loss)!r} != predicted={pred!r}",
        )
        checker.check(
            price > wholesale,
            "category_price_above_wholesale", where,
            f"price {price!r} not above wholesale {wholesale!r}",
        )
        checker.check(
            supply > 0.0 and price > 0.0,
            "category_positive_plan", where,
            f"supply {supply!r} and price {price!r} must be positive",
        )
        model = models.get(row["category"])
        checker.check(model is not None, "category_model_known", where,
                      "no demand model for this category")
        if model is not None:
            curve = _eval(model, price)
            checker.check(
                curve is not None and _close(pred, curve),
                "category_demand_consistency", where,
                f"predicted {pred!r} != curve value at price {price!r}: {curve!r}",
            )
        checker.check(
            _close(profit, price * pred - wholesale * supply),
            "category_profit_consistency", where,
            f"profit {profit!r} != price*pred - wholesale*supply",
        )
    return {"rows": len(rows), "stocked": stocked, "flagged": flagged}


def _audit_item_rows(rows, meta, models, checker: _Checker) -> dict:
    try:
        min_items = int(meta["min_items"])
        max_items = int(meta["max_items"])
        min_display = float(meta["min_display_kg"])
        required_categories = int(meta["required_categories"])
        mode = meta["demand_mode"]
    except KeyError as exc:
        raise MalformedPlanFileError(
            f"item plan lacks a params comment entry for {exc}"
        ) from exc
    selected = [r for r in rows if r["selected"] == "1"]
    covered = {r["category"] for r in selected}
    checker.check(
        min_items <= len(selected) <= max_items,
        "item_count_range", "item_plan",
        f"selected {len(selected)} outside [{min_items}, {max_items}]",
    )
    checker.check(
        len(covered) == required_categories,
        "item_category_coverage", "item_plan",
        f"covers {len(covered)} categories, need {required_categories}",
    )
    cat_pred: dict[str, float] = {}
    cat_min_price: dict[str, float] = {}
    cat_share: dict[str, float] = {}
    for row in rows:
        where = f"item_plan {row['item_code']}"
        supply = _num(row, "supply_kg", where)
        price = _num(row, "price", where)
        profit = _num(row, "expected_profit", where)
        pred = _num(row, "predicted_sales_kg", where)
        wholesale = _num(row, "wholesale", where)
        loss = _num(row, "loss_rate", where)
        share = _num(row, "share", where)
        if row["selected"] != "1":
            checker.check(
                supply == price == profit == pred == 0.0,
                "item_unselected_zero_row", where,
                "unselected row must be all zeros",
            )
            continue
        checker.check(
            supply * (1.0 - loss) >= pred - REL_TOL * max(1.0, pred),
            "item_supply_balance", where,
            f"supply*(1-loss)={supply * (1 - loss)!r} below predicted {pred!r}",
        )
        checker.check(
            price > wholesale,
            "item_price_above_wholesale", where,
            f"price {price!r} not above wholesale {wholesale!r}",
        )
        checker.check(
            supply >= min_display - 1e-9,
            "item_min_display", where,
            f"supply {supply!r} below minimum display {min_display!r}",
        )
        checker.check(
            supply > 0.0 and price > 0.0,
            "item_positive_plan", where,
            f"supply {supply!r} and price {price!r} must be positive",
        )
        model = models.get(row["category"])
        checker.check(model is not None, "item_model_known", where,
                      f"no demand model for category {row['category']!r}")
        if model is not None:
            curve = _eval(model, price)
            expected = None if curve is None else (
                share * curve if mode == "share" else curve
            )
            checker.check(
                expected is not None and _close(pred, expected),
                "item_demand_rule", where,
                f"predicted {pred!r} != {mode} rule value {expected!r}",
            )
            if curve is not None:
                cat = row["category"]
                cat_pred[cat] = cat_pred.get(cat, 0.0) + pred
                cat_min_price[cat] = min(cat_min_price.get(cat, price), price)
                cat_share[cat] = cat_share.get(cat, 0.0) + share
        checker.check(
            _close(profit, price * pred - wholesale * supply),
            "item_profit_consistency", where,
            f"profit {profit!r} != price*pred - wholesale*supply",
        )
    if mode == "share":
        for cat, total in cat_share.items():
            checker.check(
                total <= 1.0 + 1e-9,
                "item_share_cap", f"item_plan category {cat}",
                f"selected shares sum to {total!r} > 1",
            )
    # ratio of summed item demand to the category curve at the lowest
    # selected price; can exceed 1 in literal mode (reported, not failed)
    overshoot = {}
    for cat, total in cat_pred.items():
        cap = _eval(models[cat], cat_min_price[cat])
        if cap:
            overshoot[cat] = total / cap
    return {
        "rows": len(rows),
        "selected": len(selected),
        "categories_covered": len(covered),
        "demand_mode": mode,
        "category_demand_ratio": overshoot,
    }


def audit_plan(category_plan: str, item_plan: str, demand_models: str) -> AuditReport:
    """Audit one run's plan files; all three paths must exist."""
    models = load_demand_models(demand_models)
    cat_rows, _ = _read_plan_csv(category_plan, CATEGORY_PLAN_COLUMNS)
    item_rows, item_meta = _read_plan_csv(item_plan, ITEM_PLAN_COLUMNS)
    checker = _Checker()
    summary = {
        "category_plan": _audit_category_rows(cat_rows, models, checker),
        "item_plan": _audit_item_rows(item_rows, item_meta, models, checker),
    }
    return AuditReport(
        ok=not checker.issues,
        n_checks=checker.n_checks,
        issues=tuple(checker.issues),
        summary=summary,
    )


def audit_run_dir(run_dir: str) -> AuditReport:
    """Audit the standard artifact layout under one output directory."""
    return audit_plan(
        os.path.join(run_dir, "category_plan.csv"),
        os.path.join(run_dir, "item_plan.csv"),
        os.path.join(run_dir, "demand_models.json"),
    )
