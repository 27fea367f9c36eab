"""Input parsing, validation and round-trip serialization."""

import random
from datetime import date, timedelta

import pytest

from vegplan.dataio import (
    Dataset,
    load_dataset,
    parse_catalog,
    parse_loss_rates,
    parse_transactions,
    parse_wholesale,
    validate_dataset,
    write_dataset,
)
from vegplan.errors import (
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

CATALOG_6 = "\n".join(
    ["item_code,item_name,category_code,category_name"]
    + [f"V{i:03d},item{i},Q{i:02d},cat{i}" for i in range(6)]
)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_round_trip_preserves_everything(dataset, disk_paths, tmp_path):
    loaded = load_dataset(
        disk_paths["catalog"],
        disk_paths["transactions"],
        disk_paths["wholesale"],
        disk_paths["loss"],
    )
    assert loaded.catalog == dataset.catalog
    assert loaded.transactions == dataset.transactions
    assert loaded.wholesale == dataset.wholesale
    assert loaded.losses == dataset.losses
    # writing the loaded copy gives byte-identical files
    again = write_dataset(loaded, tmp_path / "again")
    for key in disk_paths:
        assert (
            open(again[key], "rb").read() == open(disk_paths[key], "rb").read()
        ), key


def test_unicode_names_survive_round_trip(dataset):
    names = {e.category_name for e in dataset.catalog}
    assert "水生根茎类" in names and "食用菌" in names


def test_loss_percent_round_trip_is_exact(tmp_path):
    """Two-decimal percents must come back as the same float."""
    rng = random.Random(5)
    rows = ["item_code,item_name,loss_rate_percent"]
    want = {}
    for i in range(500):
        pct = round(rng.uniform(0.0, 99.99), 2)
        rows.append(f"V{i:03d},x,{pct}")
        want[f"V{i:03d}"] = pct / 100.0
    path = write(tmp_path / "loss.csv", "\n".join(rows))
    got = parse_loss_rates(path)
    for code, fraction in want.items():
        assert got[code].loss_rate == fraction


def test_missing_column_rejected(tmp_path):
    path = write(tmp_path / "c.csv", "item_code,item_name,category_code\nV000,x,Q01")
    with pytest.raises(MissingColumnError, match="category_name"):
        parse_catalog(path)


def test_empty_and_headerless_files_rejected(tmp_path):
    with pytest.raises(EmptyFileError):
        parse_catalog(write(tmp_path / "empty.csv", ""))
    with pytest.raises(EmptyFileError):
        parse_catalog(
            write(tmp_path / "hdr.csv", "item_code,item_name,category_code,category_name\n")
        )


def test_duplicate_item_code_rejected(tmp_path):
    text = CATALOG_6 + "\nV000,dup,Q01,cat1"
    with pytest.raises(DuplicateItemCodeError, match="V000"):
        parse_catalog(write(tmp_path / "c.csv", text))


def test_category_code_name_mismatch_rejected(tmp_path):
    text = CATALOG_6 + "\nV900,x,Q01,wrong-name"
    with pytest.raises(CategoryCountMismatchError):
        parse_catalog(write(tmp_path / "c.csv", text))


def test_exactly_six_categories_required(tmp_path):
    five = "\n".join(CATALOG_6.splitlines()[:-1])
    with pytest.raises(CategoryCountMismatchError, match="6"):
        parse_catalog(write(tmp_path / "c.csv", five))


@pytest.fixture
def catalog(tmp_path):
    return parse_catalog(write(tmp_path / "cat.csv", CATALOG_6))


def tx_file(tmp_path, *rows):
    header = "date,time,item_code,quantity_kg,unit_price,is_return,is_discount"
    return write(tmp_path / "tx.csv", "\n".join((header,) + rows))


def test_transaction_parsing_and_sorting(tmp_path, catalog):
    path = tx_file(
        tmp_path,
        "2023-07-02,09:00:00,V001,1.5,4.0,0,0",
        "2023-07-01,10:30:00,V000,2.0,3.5,0,1",
        "2023-07-01,08:15:00,V000,0.0,3.5,1,0",
    )
    txs = parse_transactions(path, catalog)
    assert [t.date.isoformat() for t in txs] == ["2023-07-01", "2023-07-01", "2023-07-02"]
    assert txs[0].is_return and not txs[0].is_discount
    assert txs[1].is_discount
    assert txs[0].quantity_kg == 0.0  # zero quantity is allowed


def test_transaction_rejections(tmp_path, catalog):
    cases = [
        ("2023-07-01,09:00:00,V000,-1.0,4.0,0,0", NegativeQuantityError),
        ("2023-07-01,09:00:00,V000,1.0,0.0,0,0", NegativePriceError),
        ("2023-07-01,09:00:00,V000,1.0,-2.0,0,0", NegativePriceError),
        ("2023-07-01,09:00:00,V999,1.0,4.0,0,0", UnknownItemCodeError),
        ("2023-13-01,09:00:00,V000,1.0,4.0,0,0", MalformedDateError),
        ("2023-07-01,09:00:00,V000,1.0,4.0,2,0", MalformedRowError),
        ("2023-07-01,09:00:00,V000,abc,4.0,0,0", MalformedRowError),
    ]
    for i, (row, exc) in enumerate(cases):
        with pytest.raises(exc):
            parse_transactions(tx_file(tmp_path, row), catalog)


def test_wholesale_duplicates_and_prices(tmp_path):
    header = "date,item_code,wholesale_price"
    good = write(tmp_path / "w.csv", f"{header}\n2023-07-01,V000,3.0\n2023-07-02,V000,3.1")
    assert len(parse_wholesale(good)) == 2
    dup = write(tmp_path / "wd.csv", f"{header}\n2023-07-01,V000,3.0\n2023-07-01,V000,3.1")
    with pytest.raises(DuplicateQuoteError):
        parse_wholesale(dup)
    bad = write(tmp_path / "wb.csv", f"{header}\n2023-07-01,V000,0.0")
    with pytest.raises(NonpositivePriceError):
        parse_wholesale(bad)


def test_loss_rate_range(tmp_path):
    header = "item_code,item_name,loss_rate_percent"
    with pytest.raises(OutOfRangeLossError):
        parse_loss_rates(write(tmp_path / "l1.csv", f"{header}\nV000,x,100.0"))
    with pytest.raises(OutOfRangeLossError):
        parse_loss_rates(write(tmp_path / "l2.csv", f"{header}\nV000,x,-0.5"))
    got = parse_loss_rates(write(tmp_path / "l3.csv", f"{header}\nV000,x,0"))
    assert got["V000"].loss_rate == 0.0


def test_wholesale_forward_fill(dataset):
    # find a (day, item) pair without a same-day quote; the most recent
    # earlier quote must be used
    report = validate_dataset(dataset)
    assert report.missing_wholesale, "fixture should contain quote gaps"
    day, code = report.missing_wholesale[0]
    assert dataset.wholesale_on(code, day) is None
    price = dataset.wholesale_recent(code, day)
    earlier = [
        q.wholesale_price
        for q in dataset.wholesale
        if q.item_code == code and q.date <= day
    ]
    assert price == earlier[-1]


def test_wholesale_recent_before_first_quote_is_none(dataset):
    code = dataset.catalog[0].item_code
    assert dataset.wholesale_recent(code, date(2000, 1, 1)) is None


def test_validate_reports_span_and_counts(dataset):
    report = validate_dataset(dataset)
    lo, hi = report.date_span
    assert lo <= hi
    assert report.n_transactions == len(dataset.transactions)
    assert report.n_items == len(dataset.catalog)
    assert report.n_categories == 6
    assert report.missing_loss == ()
    d = report.to_dict()
    assert d["date_span"] == [lo.isoformat(), hi.isoformat()]


def test_category_index(dataset):
    assert sorted(dataset.categories()) == sorted(
        {e.category_name for e in dataset.catalog}
    )
    for cat in dataset.categories():
        for code in dataset.items_in(cat):
            assert dataset.category_of(code) == cat


def test_date_span_matches_transactions(dataset):
    lo, hi = dataset.date_span()
    tx_dates = [t.date for t in dataset.transactions]
    assert lo == min(tx_dates)
    assert hi == max(tx_dates)
