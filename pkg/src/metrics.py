"""
Aggregate statistics over audit and scan results, and the report files.

Daily series are pandas Series indexed by UTC date and contiguous over
their range; days without data hold zero counts or NaN measurements.
"""

import math
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel

from core import OutputWriter
from core.errors import CorrelationUndefinedError, DomainError
from core.schemas import AuditResult, CycleOpportunity, OpportunityRun, Pool

from .config import PeriodSpec
from .ingest import BlockCalendar, PriceTable
from .report_templates import render_summary

SCHEMA_VERSION = 1
PATH_BUCKETS = ("1", "2", "3", ">=4")

DAILY_COLUMNS = ["day", "arb_blocks", "price_movement_pct"]
GAIN_COLUMNS = [
    "network", "block", "tx_index", "log_index", "tx_hash", "pool_id", "token_in", "token_out",
    "amount_in", "original_output", "optimal_output", "gain_tokens", "gain_pct", "gain_usd",
    "paths_available", "paths_used", "optimizable",
]
OPPORTUNITY_COLUMNS = [
    "block", "cycle_key", "base_token", "pools", "alpha_star", "profit", "exact_profit",
    "relative_profit_pct", "profit_usd",
]
RUN_COLUMNS = ["cycle_key", "start_block", "end_block", "duration_blocks", "ended_by_gap"]


# ══════════════════════════════════════════════════════════════════════════════
#  DAILY SERIES
# ══════════════════════════════════════════════════════════════════════════════

def price_movement(p_high: float, p_low: float) -> float:
    """Intraday range as a percentage of the low."""
    if p_low <= 0:
        raise DomainError("p_low must be positive")
    if p_high < p_low:
        raise DomainError("p_high must not be below p_low")
    return 100.0 * (p_high - p_low) / p_low


def _day_index(days: Iterable[date]) -> pd.Index:
    days = sorted(set(days))
    if not days:
        return pd.Index([], name="day", dtype=object)
    span = pd.date_range(days[0], days[-1], freq="D")
    return pd.Index([stamp.date() for stamp in span], name="day", dtype=object)


def daily_arb_blocks(
    opportunity_blocks: Iterable[int],
    calendar: BlockCalendar,
    scanned_blocks: Iterable[int] = (),
) -> pd.Series:
    """
    Distinct blocks with at least one opportunity, per UTC day.

    The index spans every day of the scanned blocks and of the
    opportunities, so quiet days appear with a zero count.
    """
    per_day: Counter = Counter(calendar.day_of(block) for block in set(opportunity_blocks))
    days = set(per_day) | {calendar.day_of(block) for block in scanned_blocks}
    index = _day_index(days)
    return pd.Series([per_day.get(day, 0) for day in index], index=index, name="arb_blocks", dtype="int64")


def daily_price_movement(prices: PriceTable, token: str, days: Iterable[date]) -> pd.Series:
    """Price movement of `token` per day; NaN where the day has no high/low."""
    index = _day_index(days)
    values = []
    for day in index:
        high_low = prices.high_low(token, day)
        values.append(price_movement(*high_low) if high_low else math.nan)
    return pd.Series(values, index=index, name="price_movement_pct", dtype="float64")


def pearson(x: pd.Series, y: pd.Series) -> float:
    """Sample Pearson correlation of two series over the same days."""
    if len(x) != len(y) or not x.index.equals(y.index):
        raise CorrelationUndefinedError("series cover different days")
    if len(x) < 2:
        raise CorrelationUndefinedError("correlation needs at least two days")
    xs = x.to_numpy(dtype=float)
    ys = y.to_numpy(dtype=float)
    if np.isnan(xs).any() or np.isnan(ys).any():
        raise CorrelationUndefinedError("series contain missing days")
    if np.ptp(xs) == 0 or np.ptp(ys) == 0:
        raise CorrelationUndefinedError("correlation of a constant series is undefined")
    return float(np.clip(np.corrcoef(xs, ys)[0, 1], -1.0, 1.0))


def _aligned_correlation(x: pd.Series, y: pd.Series) -> Optional[float]:
    both = pd.concat([x, y], axis=1).dropna()
    try:
        return pearson(both.iloc[:, 0], both.iloc[:, 1])
    except CorrelationUndefinedError as exc:
        logger.warning(f"Correlation undefined: {exc}")
        return None


# ══════════════════════════════════════════════════════════════════════════════
#  ROUTING STATISTICS
# ══════════════════════════════════════════════════════════════════════════════

class GainStats(BaseModel):
    """Gain percentages over optimizable trades; `empty` marks n == 0."""
    n: int
    mean_pct: Optional[float] = None
    median_pct: Optional[float] = None
    top5_mean_pct: Optional[float] = None
    empty: bool = False


class OptimizableShare(BaseModel):
    analyzed: int
    optimizable: int
    share: Optional[float] = None


def _optimizable(audits: Iterable[AuditResult]) -> List[AuditResult]:
    return [audit for audit in audits if audit.auditable and audit.optimizable]


def gain_stats(audits: Iterable[AuditResult]) -> GainStats:
    gains = np.array([audit.gain_pct for audit in _optimizable(audits)], dtype=float)
    if gains.size == 0:
        return GainStats(n=0, empty=True)
    top = math.ceil(0.05 * gains.size)
    return GainStats(
        n=int(gains.size),
        mean_pct=float(gains.mean()),
        median_pct=float(np.median(gains)),
        top5_mean_pct=float(np.sort(gains)[::-1][:top].mean()),
    )


def path_distribution(audits: Iterable[AuditResult]) -> Dict[str, int]:
    """Optimizable trades by number of paths used."""
    counts = {bucket: 0 for bucket in PATH_BUCKETS}
    for audit in _optimizable(audits):
        counts[str(audit.paths_used) if audit.paths_used < 4 else ">=4"] += 1
    return counts


def optimizable_share(audits: Iterable[AuditResult]) -> OptimizableShare:
    analyzed = [audit for audit in audits if audit.auditable]
    optimizable = sum(1 for audit in analyzed if audit.optimizable)
    share = optimizable / len(analyzed) if analyzed else None
    return OptimizableShare(analyzed=len(analyzed), optimizable=optimizable, share=share)


def pool_trade_counts(audits: Iterable[AuditResult], pools: Optional[Mapping[str, Pool]] = None) -> Dict[str, Dict[str, int]]:
    """Audited trades per pool and, when pools are known, per venue."""
    per_pool = Counter(audit.pool_id for audit in audits)
    per_venue: Counter = Counter()
    if pools:
        for pool_id, count in per_pool.items():
            if pool_id in pools:
                per_venue[pools[pool_id].venue] += count
    return {"pools": dict(sorted(per_pool.items())), "venues": dict(sorted(per_venue.items()))}


# ══════════════════════════════════════════════════════════════════════════════
#  ARBITRAGE STATISTICS
# ══════════════════════════════════════════════════════════════════════════════

class PeriodStats(BaseModel):
    name: str
    from_block: int
    to_block: int
    blocks_scanned: int
    blocks_with_arbitrage: int
    opportunities: int
    mean_relative_profit_pct: Optional[float] = None
    usd_weighted_profit_pct: Optional[float] = None
    total_profit_usd: float = 0.0
    runs: int = 0
    mean_duration_blocks: Optional[float] = None
    max_duration_blocks: Optional[int] = None
    volatility_correlation: Optional[float] = None


def period_stats(
    period: PeriodSpec,
    opportunities: Sequence[CycleOpportunity],
    runs: Sequence[OpportunityRun],
    scanned_blocks: Sequence[int],
    calendar: Optional[BlockCalendar] = None,
    prices: Optional[PriceTable] = None,
    volatility_token: str = "ETH",
) -> PeriodStats:
    """
    Arbitrage statistics for one block range.

    The USD-weighted profit is total profit over total optimal input, both
    in USD. Runs belong to the period they start in. The correlation pairs
    daily arbitrage blocks with the volatility token's daily price movement.
    """
    scanned = [block for block in scanned_blocks if period.contains(block)]
    inside = [o for o in opportunities if period.contains(o.block)]
    period_runs = [run for run in runs if period.contains(run.start_block)]
    stats = PeriodStats(
        name=period.name,
        from_block=period.from_block,
        to_block=period.to_block,
        blocks_scanned=len(scanned),
        blocks_with_arbitrage=len({o.block for o in inside}),
        opportunities=len(inside),
        total_profit_usd=float(sum(o.profit_usd for o in inside)),
        runs=len(period_runs),
    )
    if inside:
        stats.mean_relative_profit_pct = float(np.mean([o.relative_profit_pct for o in inside]))
        input_usd = sum(o.profit_usd * o.alpha_star / o.profit for o in inside)
        stats.usd_weighted_profit_pct = 100.0 * stats.total_profit_usd / input_usd
    if period_runs:
        durations = [run.duration_blocks for run in period_runs]
        stats.mean_duration_blocks = float(np.mean(durations))
        stats.max_duration_blocks = max(durations)
    if calendar is not None and prices is not None and scanned:
        arb = daily_arb_blocks((o.block for o in inside), calendar, scanned)
        movement = daily_price_movement(prices, volatility_token, arb.index)
        stats.volatility_correlation = _aligned_correlation(arb, movement)
    return stats


# ══════════════════════════════════════════════════════════════════════════════
#  REPORT
# ══════════════════════════════════════════════════════════════════════════════

@dataclass
class Aggregates:
    """Everything the report files are rendered from."""
    parameters: dict
    audits_by_network: Dict[str, List[AuditResult]] = field(default_factory=dict)
    opportunities: List[CycleOpportunity] = field(default_factory=list)
    runs: List[OpportunityRun] = field(default_factory=list)
    periods: List[PeriodStats] = field(default_factory=list)
    daily: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=DAILY_COLUMNS))
    pools: Mapping[str, Pool] = field(default_factory=dict)

    def network_summary(self) -> Dict[str, dict]:
        return {
            network: {
                "gain_stats": gain_stats(audits).model_dump(),
                "optimizable": optimizable_share(audits).model_dump(),
                "path_distribution": path_distribution(audits),
                "trade_counts": pool_trade_counts(audits, self.pools),
            }
            for network, audits in sorted(self.audits_by_network.items())
        }


def aggregate(
    parameters: dict,
    audits: Iterable[AuditResult],
    opportunities: Sequence[CycleOpportunity],
    runs: Sequence[OpportunityRun],
    scanned_blocks: Sequence[int],
    calendar: BlockCalendar,
    prices: PriceTable,
    periods: Sequence[PeriodSpec] = (),
    volatility_token: str = "ETH",
    pools: Optional[Mapping[str, Pool]] = None,
) -> Aggregates:
    """Group audits by network and compute the period and daily aggregates."""
    by_network: Dict[str, List[AuditResult]] = {}
    for audit in sorted(audits, key=lambda a: (a.network, a.ordering_key)):
        by_network.setdefault(audit.network, []).append(audit)

    if not periods and scanned_blocks:
        periods = [PeriodSpec(name="all", from_block=min(scanned_blocks), to_block=max(scanned_blocks))]
    period_rows = [
        period_stats(period, opportunities, runs, scanned_blocks, calendar, prices, volatility_token)
        for period in periods
    ]

    arb = daily_arb_blocks((o.block for o in opportunities), calendar, scanned_blocks)
    movement = daily_price_movement(prices, volatility_token, arb.index)
    daily = pd.DataFrame({
        "day": [day.isoformat() for day in arb.index],
        "arb_blocks": arb.to_numpy(),
        "price_movement_pct": movement.to_numpy(),
    }, columns=DAILY_COLUMNS)

    logger.info(
        f"Aggregated {sum(len(a) for a in by_network.values())} audits over {len(by_network)} network(s), "
        f"{len(opportunities)} opportunities in {len(period_rows)} period(s)"
    )
    return Aggregates(
        parameters=parameters,
        audits_by_network=by_network,
        opportunities=sorted(opportunities, key=lambda o: (o.block, o.cycle_key)),
        runs=list(runs),
        periods=period_rows,
        daily=daily,
        pools=pools or {},
    )


def _clean(value):
    """NaN becomes null so report.json stays strict JSON."""
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {key: _clean(item) for key, item in value.items()}
    if isinstance(value, list):
        return [_clean(item) for item in value]
    return value


def report_document(aggregates: Aggregates) -> dict:
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "parameters": aggregates.parameters,
        "networks": aggregates.network_summary(),
        "periods": [period.model_dump() for period in aggregates.periods],
        "opportunities": len(aggregates.opportunities),
        "blocks_with_arbitrage": len({o.block for o in aggregates.opportunities}),
        "runs": len(aggregates.runs),
    })


def emit_report(aggregates: Aggregates, out_dir: Path) -> List[Path]:
    """Write report.json, the CSV series and summary.md."""
    writer = OutputWriter(out_dir)
    document = report_document(aggregates)
    gains = [
        audit.model_dump(mode="json", include=set(GAIN_COLUMNS))
        for audits in aggregates.audits_by_network.values() for audit in audits
    ]
    opportunities = [
        {**o.model_dump(mode="json", include=set(OPPORTUNITY_COLUMNS)), "pools": ">".join(o.pools)}
        for o in aggregates.opportunities
    ]
    runs = [run.model_dump(mode="json") for run in aggregates.runs]
    return [
        writer.write_json("report.json", document),
        writer.write_csv("daily_series.csv", aggregates.daily.to_dict("records"), DAILY_COLUMNS),
        writer.write_csv("gains.csv", gains, GAIN_COLUMNS),
        writer.write_csv("opportunities.csv", opportunities, OPPORTUNITY_COLUMNS),
        writer.write_csv("runs.csv", runs, RUN_COLUMNS),
        writer.write_text("summary.md", render_summary(document)),
    ]
