import json

import pytest

from core.cpmm import swap_out
from core.errors import DataFormatError, InputFileError, MissingPriceError, UnmappedBlockError
from core.schemas import Direction, ReserveRecord, SwapEvent
from src.ingest import (
    SnapshotProvider,
    filter_independent_swaps,
    parse_blocks,
    parse_events,
    parse_graph,
    parse_prices,
    parse_reserves,
    serialize_jsonl,
    validate_consistency,
)

from builders import DAY, USDC, ETH, calendar_for, make_pool, price_table, units


def write_lines(path, rows):
    path.write_text("".join(json.dumps(row) + "\n" for row in rows), encoding="utf-8")
    return path


def event_row(block=10, tx_index=0, log_index=0, tx_hash=None, **overrides):
    row = {
        "block": block, "tx_hash": tx_hash or f"0x{block:x}{tx_index:x}", "tx_index": tx_index,
        "log_index": log_index, "pool_id": "uni-usdc-eth", "token_in": "USDC", "token_out": "ETH",
        "amount_in": "1000000", "amount_out": "2500000000000000",
    }
    row.update(overrides)
    return row


def event(**overrides):
    return SwapEvent.model_validate(event_row(**overrides))


# ══════════════════════════════════════════════════════════════════════════════
#  PARSING
# ══════════════════════════════════════════════════════════════════════════════

def test_events_read_decimal_strings_and_sort(tmp_path):
    path = write_lines(tmp_path / "events.jsonl", [event_row(block=12), event_row(block=10, log_index=3), event_row(block=10)])
    events = parse_events(path)
    assert [e.ordering_key for e in events] == [(10, 0, 0), (10, 0, 3), (12, 0, 0)]
    assert events[0].amount_out == 2_500_000_000_000_000


def test_amounts_beyond_double_precision_survive(tmp_path):
    big = str(2**80 + 1)
    path = write_lines(tmp_path / "reserves.jsonl", [{"block": 1, "pool_id": "p", "reserve0": big, "reserve1": "7"}])
    record = parse_reserves(path)[0]
    assert record.reserve0 == 2**80 + 1
    assert serialize_jsonl([record]) == f'{{"block":1,"pool_id":"p","reserve0":"{big}","reserve1":"7"}}\n'


def test_malformed_line_reports_location(tmp_path):
    path = tmp_path / "events.jsonl"
    path.write_text(json.dumps(event_row()) + "\n{not json\n", encoding="utf-8")
    with pytest.raises(DataFormatError) as info:
        parse_events(path)
    assert info.value.line == 2
    assert info.value.exit_code == 5


def test_missing_field_names_the_field(tmp_path):
    row = event_row()
    del row["amount_in"]
    with pytest.raises(DataFormatError) as info:
        parse_events(write_lines(tmp_path / "events.jsonl", [row]))
    assert info.value.field == "amount_in"


def test_negative_reserve_rejected(tmp_path):
    path = write_lines(tmp_path / "reserves.jsonl", [{"block": 1, "pool_id": "p", "reserve0": "-1", "reserve1": "7"}])
    with pytest.raises(DataFormatError):
        parse_reserves(path)


@pytest.mark.parametrize("parser, rows", [
    (parse_events, [event_row(), event_row(tx_hash="0xother")]),
    (parse_reserves, [{"block": 1, "pool_id": "p", "reserve0": "1", "reserve1": "1"}] * 2),
    (parse_prices, [{"token": "ETH", "day": "2020-11-01", "price": 400.0}] * 2),
    (parse_blocks, [{"block": 1, "timestamp": 1604232000}] * 2),
])
def test_duplicates_rejected(tmp_path, parser, rows):
    with pytest.raises(DataFormatError):
        parser(write_lines(tmp_path / "input.jsonl", rows))


def test_missing_file_is_input_error(tmp_path):
    with pytest.raises(InputFileError) as info:
        parse_events(tmp_path / "absent.jsonl")
    assert info.value.exit_code == 4


def test_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "blocks.jsonl"
    path.write_text('{"block": 1, "timestamp": 1604232000}\n\n{"block": 2, "timestamp": "1604232013"}\n', encoding="utf-8")
    calendar = parse_blocks(path)
    assert calendar.blocks == [1, 2]
    assert calendar.day_of(2) == DAY


def test_price_lookup_and_volatility_range(tmp_path):
    path = write_lines(tmp_path / "prices.jsonl", [
        {"token": "ETH", "day": "2020-11-01", "price": 400.0, "high": 410.0, "low": 390.0},
        {"token": "USDC", "day": "2020-11-01", "price": 1.0},
    ])
    prices = parse_prices(path)
    assert prices.price("ETH", DAY) == 400.0
    assert prices.high_low("ETH", DAY) == (410.0, 390.0)
    assert prices.high_low("USDC", DAY) is None
    with pytest.raises(MissingPriceError) as info:
        prices.price("DAI", DAY)
    assert info.value.exit_code == 6


def test_high_without_low_rejected(tmp_path):
    path = write_lines(tmp_path / "prices.jsonl", [{"token": "ETH", "day": "2020-11-01", "price": 400.0, "high": 410.0}])
    with pytest.raises(DataFormatError):
        parse_prices(path)


def test_unmapped_block():
    with pytest.raises(UnmappedBlockError) as info:
        calendar_for({1: DAY}).day_of(2)
    assert info.value.exit_code == 5


def test_shipped_graph_parses(shipped_graph_config):
    assert set(shipped_graph_config.path_networks) == {"more_liquid", "less_liquid"}
    assert set(shipped_graph_config.cycle_networks) == {"uniswap_triangle", "period_1", "period_2"}
    assert len(shipped_graph_config.cycle_network("period_1").pools) == 9
    assert len(shipped_graph_config.cycle_network("period_2").pools) == 12


def test_graph_with_unknown_token_rejected(tmp_path):
    document = {
        "tokens": [{"symbol": "ETH", "decimals": 18}, {"symbol": "USDC", "decimals": 6}],
        "pools": [{"id": "p", "venue": "uniswap", "token0": "USDC", "token1": "DAI"}],
    }
    path = tmp_path / "graph.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(DataFormatError):
        parse_graph(path)


# ══════════════════════════════════════════════════════════════════════════════
#  SNAPSHOTS
# ══════════════════════════════════════════════════════════════════════════════

def test_snapshot_uses_strict_predecessor():
    provider = SnapshotProvider([
        ReserveRecord(block=10, pool_id="p", reserve0=1, reserve1=1),
        ReserveRecord(block=20, pool_id="p", reserve0=2, reserve1=2),
    ])
    assert provider.snapshot(10).reserves == {}
    assert provider.snapshot(11).reserves["p"] == (1, 1)
    assert provider.snapshot(20).reserves["p"] == (1, 1)
    assert provider.snapshot(21).reserves["p"] == (2, 2)


def test_snapshot_restricted_to_requested_pools():
    provider = SnapshotProvider([
        ReserveRecord(block=1, pool_id="p", reserve0=1, reserve1=1),
        ReserveRecord(block=1, pool_id="q", reserve0=5, reserve1=5),
    ])
    assert set(provider.snapshot(2, ["q", "absent"]).reserves) == {"q"}


def test_drained_pool_is_unavailable():
    provider = SnapshotProvider([ReserveRecord(block=1, pool_id="p", reserve0=0, reserve1=9)])
    assert not provider.snapshot(2).has_active("p")


def test_multi_swap_transactions_dropped():
    events = [
        event(tx_hash="0xa", log_index=0),
        event(tx_hash="0xa", log_index=1),
        event(tx_hash="0xb", tx_index=1),
    ]
    assert [e.tx_hash for e in filter_independent_swaps(events)] == ["0xb"]


# ══════════════════════════════════════════════════════════════════════════════
#  CONSISTENCY
# ══════════════════════════════════════════════════════════════════════════════

def replayed_market():
    """Two swaps on one pool in block 10 with the end-of-block reserves that follow."""
    pool = make_pool("uni-usdc-eth", USDC, ETH)
    start = (units(USDC, 1_000_000), units(ETH, 2_500))
    current = pool.with_reserves(*start)
    events = []
    for log_index, amount in enumerate((units(USDC, 40_000), units(USDC, 5_000))):
        out = swap_out(current, Direction.ZERO_FOR_ONE, amount)
        events.append(event(tx_hash=f"0x{log_index}", log_index=log_index, amount_in=amount, amount_out=out))
        current = current.after_swap(Direction.ZERO_FOR_ONE, amount, out)
    records = [
        ReserveRecord(block=9, pool_id=pool.id, reserve0=start[0], reserve1=start[1]),
        ReserveRecord(block=10, pool_id=pool.id, reserve0=current.reserve0, reserve1=current.reserve1),
    ]
    return pool, events, records


def test_replayed_swaps_are_consistent():
    pool, events, records = replayed_market()
    report = validate_consistency(events, SnapshotProvider(records), {pool.id: pool})
    assert report.ok
    assert report.checked == 2
    assert report.closure_checked == 1


def test_tampered_output_is_flagged():
    pool, events, records = replayed_market()
    tampered = events[1].model_copy(update={"amount_out": events[1].amount_out * 2})
    report = validate_consistency([events[0], tampered], SnapshotProvider(records), {pool.id: pool})
    assert [flag.log_index for flag in report.flags] == [1]
    assert report.flags[0].deviation == pytest.approx(0.5)
    assert not report.ok


def test_closure_mismatch_and_opt_out():
    pool, events, records = replayed_market()
    records[1] = records[1].model_copy(update={"reserve0": records[1].reserve0 + 10})
    report = validate_consistency(events, SnapshotProvider(records), {pool.id: pool})
    assert not report.flags
    assert [m.block for m in report.closure_mismatches] == [10]
    assert validate_consistency(events, SnapshotProvider(records), {pool.id: pool}, check_closure=False).ok


def test_output_that_drains_the_pool_is_reported():
    pool, events, records = replayed_market()
    drained = events[0].model_copy(update={"amount_out": records[0].reserve1 + 1})
    report = validate_consistency([drained, events[1]], SnapshotProvider(records), {pool.id: pool})
    assert [(flag.log_index, flag.reason) for flag in report.flags] == [(0, "output")]
    assert (report.checked, report.skipped) == (1, 1)
    assert report.closure_mismatches
    assert not report.ok


def test_foreign_token_is_flagged_not_replayed():
    pool, events, records = replayed_market()
    foreign = events[0].model_copy(update={"token_in": "DAI"})
    report = validate_consistency([foreign, events[1]], SnapshotProvider(records), {pool.id: pool})
    assert report.checked == 2
    assert report.flags[0].reason == "token"
    assert report.flags[0].expected_output is None
    assert not report.ok


def test_swaps_without_prior_reserves_are_skipped():
    pool, events, records = replayed_market()
    report = validate_consistency(events, SnapshotProvider(records[1:]), {pool.id: pool})
    assert report.checked == 0
    assert report.skipped == 2


def test_price_table_fixture_covers_every_token():
    prices = price_table()
    assert ("ETH", DAY) in prices and len(prices) == 5
