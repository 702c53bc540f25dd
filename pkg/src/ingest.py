"""
File ingestion, beginning-of-block snapshots and dataset checks.

Every input except the graph config is UTF-8 JSON lines, one record per
line, with integers written as decimal strings.
"""

import bisect
import json
from collections import Counter, defaultdict
from datetime import date
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Type, TypeVar

from loguru import logger
from pydantic import BaseModel, ValidationError

from core.cpmm import swap_out
from core.errors import DataFormatError, DomainError, InputFileError, MissingPriceError, UnmappedBlockError
from core.output_writer import dumps_record
from core.schemas import BlockRecord, BlockSnapshot, Pool, PriceRecord, ReserveRecord, SwapEvent

from .graph import PoolGraphConfig

RecordT = TypeVar("RecordT", bound=BaseModel)


# ══════════════════════════════════════════════════════════════════════════════
#  PARSING
# ══════════════════════════════════════════════════════════════════════════════

def _validation_failure(source: str, line: int, exc: ValidationError) -> DataFormatError:
    error = exc.errors()[0]
    field = ".".join(str(part) for part in error["loc"]) or "<record>"
    return DataFormatError(source, line, field, error["msg"])


def read_jsonl(path: Path, model: Type[RecordT]) -> Iterator[Tuple[int, RecordT]]:
    """Yield (line number, record); blank lines are skipped."""
    path = Path(path)
    try:
        handle = path.open(encoding="utf-8")
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(str(path), lineno, "<line>", exc.msg) from exc
            try:
                yield lineno, model.model_validate(raw)
            except ValidationError as exc:
                raise _validation_failure(str(path), lineno, exc) from exc


def serialize_jsonl(records: Iterable[BaseModel]) -> str:
    """Canonical JSONL text for records (the writer's format)."""
    return "".join(dumps_record(record) + "\n" for record in records)


def parse_events(path: Path) -> List[SwapEvent]:
    """Swap events sorted by (block, tx_index, log_index)."""
    seen: Dict[Tuple[int, int, int], int] = {}
    events = []
    for lineno, event in read_jsonl(path, SwapEvent):
        if event.ordering_key in seen:
            raise DataFormatError(
                str(path), lineno, "log_index",
                f"duplicate (block, tx_index, log_index) {event.ordering_key}, first on line {seen[event.ordering_key]}",
            )
        seen[event.ordering_key] = lineno
        events.append(event)
    events.sort(key=lambda e: e.ordering_key)
    logger.info(f"Loaded {len(events)} swap events from {path}")
    return events


def parse_reserves(path: Path) -> List[ReserveRecord]:
    seen: Dict[Tuple[int, str], int] = {}
    records = []
    for lineno, record in read_jsonl(path, ReserveRecord):
        key = (record.block, record.pool_id)
        if key in seen:
            raise DataFormatError(str(path), lineno, "pool_id", f"second record for {key}, first on line {seen[key]}")
        seen[key] = lineno
        records.append(record)
    logger.info(f"Loaded {len(records)} reserve records from {path}")
    return records


class PriceTable:
    """Day-granular USD prices, with daily high/low for volatility tokens."""

    def __init__(self, records: Iterable[PriceRecord] = ()):
        self._entries: Dict[Tuple[str, date], PriceRecord] = {}
        for record in records:
            self._entries[(record.token, record.day)] = record

    def __contains__(self, key: Tuple[str, date]) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, token: str, day: date) -> Optional[float]:
        record = self._entries.get((token, day))
        return record.price if record else None

    def price(self, token: str, day: date) -> float:
        record = self._entries.get((token, day))
        if record is None:
            raise MissingPriceError(token, day)
        return record.price

    def high_low(self, token: str, day: date) -> Optional[Tuple[float, float]]:
        record = self._entries.get((token, day))
        if record is None or record.high is None:
            return None
        return record.high, record.low

    def records(self) -> List[PriceRecord]:
        return [self._entries[key] for key in sorted(self._entries)]


def parse_prices(path: Path) -> PriceTable:
    seen: Dict[Tuple[str, date], int] = {}
    records = []
    for lineno, record in read_jsonl(path, PriceRecord):
        key = (record.token, record.day)
        if key in seen:
            raise DataFormatError(str(path), lineno, "day", f"second price for {record.token} on {record.day}")
        seen[key] = lineno
        records.append(record)
    logger.info(f"Loaded {len(records)} prices from {path}")
    return PriceTable(records)


class BlockCalendar:
    """Block number to UTC day."""

    def __init__(self, records: Iterable[BlockRecord] = ()):
        self._days: Dict[int, date] = {record.block: record.day for record in records}

    def __contains__(self, block: int) -> bool:
        return block in self._days

    def __len__(self) -> int:
        return len(self._days)

    @property
    def blocks(self) -> List[int]:
        return sorted(self._days)

    def day_of(self, block: int) -> date:
        try:
            return self._days[block]
        except KeyError:
            raise UnmappedBlockError(block) from None


def parse_blocks(path: Path) -> BlockCalendar:
    seen = set()
    records = []
    for lineno, record in read_jsonl(path, BlockRecord):
        if record.block in seen:
            raise DataFormatError(str(path), lineno, "block", f"duplicate block {record.block}")
        seen.add(record.block)
        records.append(record)
    logger.info(f"Loaded {len(records)} block timestamps from {path}")
    return BlockCalendar(records)


def read_json(path: Path) -> dict:
    """One JSON document (graph config or a results meta file)."""
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(str(path), exc.lineno, "<document>", exc.msg) from exc


def parse_graph(path: Path) -> PoolGraphConfig:
    """Read the graph config JSON document."""
    path = Path(path)
    document = read_json(path)
    try:
        config = PoolGraphConfig.model_validate(document)
    except ValidationError as exc:
        raise _validation_failure(str(path), 1, exc) from exc
    logger.info(f"Loaded graph {path.name}: {len(config.tokens)} tokens, {len(config.pools)} pools")
    return config


# ══════════════════════════════════════════════════════════════════════════════
#  SNAPSHOTS
# ══════════════════════════════════════════════════════════════════════════════

class SnapshotProvider:
    """
    Beginning-of-block reserves from end-of-block records.

    snapshot(n) holds, per pool, the latest record at a block strictly
    before n. Pools with no earlier record are left out and therefore
    unavailable at n.
    """

    def __init__(self, records: Iterable[ReserveRecord]):
        per_pool: Dict[str, List[ReserveRecord]] = defaultdict(list)
        for record in records:
            per_pool[record.pool_id].append(record)
        self._blocks: Dict[str, List[int]] = {}
        self._states: Dict[str, List[Tuple[int, int]]] = {}
        for pool_id, pool_records in per_pool.items():
            pool_records.sort(key=lambda r: r.block)
            self._blocks[pool_id] = [r.block for r in pool_records]
            self._states[pool_id] = [(r.reserve0, r.reserve1) for r in pool_records]

    @property
    def pool_ids(self) -> List[str]:
        return sorted(self._blocks)

    def reserves_before(self, pool_id: str, block: int) -> Optional[Tuple[int, int]]:
        blocks = self._blocks.get(pool_id)
        if not blocks:
            return None
        index = bisect.bisect_left(blocks, block)
        if index == 0:
            return None
        return self._states[pool_id][index - 1]

    def snapshot(self, block: int, pool_ids: Optional[Iterable[str]] = None) -> BlockSnapshot:
        wanted = self.pool_ids if pool_ids is None else pool_ids
        reserves = {}
        for pool_id in wanted:
            state = self.reserves_before(pool_id, block)
            if state is None:
                logger.debug(f"pool {pool_id} has no reserve record before block {block}")
                continue
            reserves[pool_id] = state
        return BlockSnapshot(block=block, reserves=reserves)


def build_snapshots(records: Iterable[ReserveRecord]) -> SnapshotProvider:
    return SnapshotProvider(records)


# ══════════════════════════════════════════════════════════════════════════════
#  FILTERS AND CHECKS
# ══════════════════════════════════════════════════════════════════════════════

def filter_independent_swaps(events: Sequence[SwapEvent]) -> List[SwapEvent]:
    """Drop every swap whose transaction carries more than one swap."""
    per_tx = Counter(event.tx_hash for event in events)
    kept = [event for event in events if per_tx[event.tx_hash] == 1]
    dropped = len(events) - len(kept)
    logger.info(f"Multi-swap filter: kept {len(kept)}, dropped {dropped} swaps")
    return kept


class ConsistencyFlag(BaseModel):
    block: int
    tx_hash: str
    log_index: int
    pool_id: str
    recorded_output: int
    # "output": the recomputed amount deviates; "token": token_in is not one of the pool's tokens
    reason: str = "output"
    expected_output: Optional[int] = None
    deviation: Optional[float] = None


class ClosureMismatch(BaseModel):
    block: int
    pool_id: str
    replayed: Tuple[int, int]
    next_snapshot: Tuple[int, int]


class ConsistencyReport(BaseModel):
    checked: int = 0
    skipped: int = 0
    flags: List[ConsistencyFlag] = []
    closure_checked: int = 0
    closure_mismatches: List[ClosureMismatch] = []

    @property
    def ok(self) -> bool:
        return not self.flags and not self.closure_mismatches


def _events_by_block_pool(events: Sequence[SwapEvent]) -> Dict[Tuple[int, str], List[SwapEvent]]:
    grouped: Dict[Tuple[int, str], List[SwapEvent]] = defaultdict(list)
    for event in sorted(events, key=lambda e: e.ordering_key):
        grouped[(event.block, event.pool_id)].append(event)
    return grouped


def validate_consistency(
    events: Sequence[SwapEvent],
    snapshots: SnapshotProvider,
    pools: Mapping[str, Pool],
    tolerance: float = 1e-6,
    check_closure: bool = True,
) -> ConsistencyReport:
    """
    Recompute every swap from the beginning-of-block reserves.

    Later swaps on the same pool in the same block are checked against the
    reserves left by the earlier ones. With check_closure, the reserves left
    after a block's last swap are compared with the next block's snapshot.

    Corrupt rows never raise: a foreign token_in is flagged and not replayed,
    and once recorded outputs drain a pool the rest of its block is skipped.
    """
    report = ConsistencyReport()
    for (block, pool_id), pool_events in sorted(_events_by_block_pool(events).items()):
        pool = pools.get(pool_id)
        state = snapshots.reserves_before(pool_id, block)
        if pool is None or state is None or min(state) <= 0:
            report.skipped += len(pool_events)
            continue
        current = pool.with_reserves(*state)
        for position, event in enumerate(pool_events):
            if not current.active:
                report.skipped += len(pool_events) - position
                logger.warning(f"block {block} pool {pool_id}: replayed reserves drained, skipping {len(pool_events) - position} swaps")
                break
            try:
                direction = current.direction_from(event.token_in)
            except DomainError:
                report.checked += 1
                report.flags.append(ConsistencyFlag(
                    block=block, tx_hash=event.tx_hash, log_index=event.log_index, pool_id=pool_id,
                    recorded_output=event.amount_out, reason="token",
                ))
                logger.warning(f"block {block} tx {event.tx_hash}: {event.token_in} is not traded in {pool_id}")
                continue
            expected = swap_out(current, direction, event.amount_in)
            deviation = abs(expected - event.amount_out) / max(event.amount_out, 1)
            report.checked += 1
            if deviation > tolerance:
                report.flags.append(ConsistencyFlag(
                    block=block, tx_hash=event.tx_hash, log_index=event.log_index, pool_id=pool_id,
                    expected_output=expected, recorded_output=event.amount_out, deviation=deviation,
                ))
                logger.warning(f"block {block} tx {event.tx_hash}: output {event.amount_out} deviates {deviation:.3g} from {expected}")
            current = current.after_swap(direction, event.amount_in, event.amount_out)
        if not check_closure:
            continue
        following = snapshots.reserves_before(pool_id, block + 1)
        report.closure_checked += 1
        replayed = (current.reserve0, current.reserve1)
        if following is None or any(abs(x - y) > 1 for x, y in zip(replayed, following)):
            report.closure_mismatches.append(ClosureMismatch(
                block=block, pool_id=pool_id, replayed=replayed, next_snapshot=following or (0, 0),
            ))
    logger.info(
        f"Consistency: {report.checked} checked, {len(report.flags)} flagged, {report.skipped} skipped, "
        f"{len(report.closure_mismatches)} closure mismatches"
    )
    return report
