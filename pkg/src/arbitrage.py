"""
Cyclic arbitrage detection.

A cycle reduces to one effective pool g from the base token to itself, so
the profit p(alpha) = g(alpha) - alpha is strictly concave with a closed-form
maximizer whenever g'(0) = a/b exceeds one.
"""

import itertools
import math
from datetime import date
from typing import Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import networkx as nx
from loguru import logger
from pydantic import BaseModel

from core import BaseAnalysis
from core.cpmm import EffectivePool, reduce_hops, route_output
from core.errors import DomainError, PathUnavailableError, UnmappedBlockError
from core.schemas import BlockSnapshot, CycleOpportunity, Cycle, Hop, OpportunityRun

from .config import RunConfig
from .graph import PoolGraph
from .ingest import BlockCalendar, PriceTable, SnapshotProvider


# ══════════════════════════════════════════════════════════════════════════════
#  CYCLE ENUMERATION
# ══════════════════════════════════════════════════════════════════════════════

def canonical_key(hops: Sequence[Hop]) -> str:
    """Rotation-invariant identity; the two orientations of a cycle differ."""
    start = min(range(len(hops)), key=lambda i: hops[i].pool.id)
    rotated = list(hops[start:]) + list(hops[:start])
    return "|".join(hop.key for hop in rotated)


def _rotate_to_base(hops: Sequence[Hop], base_tokens: Sequence[str]) -> Optional[Tuple[Hop, ...]]:
    starts = [hop.token_in.symbol for hop in hops]
    for token in base_tokens:
        if token in starts:
            index = starts.index(token)
            return tuple(hops[index:]) + tuple(hops[:index])
    return None


def enumerate_cycles(graph: PoolGraph, base_tokens: Sequence[str], max_len: int) -> List[Cycle]:
    """
    Every simple directed pool cycle of 2..max_len hops.

    Each cycle starts at the first of base_tokens it passes through;
    cycles touching none of them are left out. An empty base_tokens list
    admits every token in symbol order.
    """
    if max_len < 2:
        raise DomainError("max_len must be at least 2")
    base_tokens = list(base_tokens) or graph.tokens
    cycles: Dict[str, Cycle] = {}
    for tokens in nx.simple_cycles(graph.token_digraph(), length_bound=max_len):
        if len(tokens) < 2:
            continue
        legs = list(zip(tokens, tokens[1:] + tokens[:1]))
        options = [graph.pools_between(leg_in, leg_out) for leg_in, leg_out in legs]
        for pools in itertools.product(*options):
            if len({pool.id for pool in pools}) < len(pools):
                continue
            hops = [Hop(pool=pool, direction=pool.direction_from(leg_in)) for pool, (leg_in, _) in zip(pools, legs)]
            key = canonical_key(hops)
            if key in cycles:
                continue
            rotated = _rotate_to_base(hops, base_tokens)
            if rotated is None:
                continue
            cycles[key] = Cycle(hops=rotated, canonical_key=key)
    logger.info(f"Enumerated {len(cycles)} cycles up to {max_len} hops")
    return [cycles[key] for key in sorted(cycles)]


# ══════════════════════════════════════════════════════════════════════════════
#  PROFIT MAXIMIZATION
# ══════════════════════════════════════════════════════════════════════════════

class CycleOptimum(NamedTuple):
    alpha_star: float
    profit: float


def cycle_effective(cycle: Cycle, snapshot: BlockSnapshot) -> EffectivePool:
    return reduce_hops(cycle.hops, snapshot)


def optimize_cycle(ep: EffectivePool) -> Optional[CycleOptimum]:
    """Profit-maximizing input and its profit, or None when g'(0) <= 1."""
    if ep.in_token != ep.out_token:
        raise DomainError("a cycle must start and end in the same token")
    if ep.a <= ep.b:
        return None
    root_a, root_b = math.sqrt(ep.a), math.sqrt(ep.b)
    return CycleOptimum(
        alpha_star=root_b * (root_a - root_b) / ep.c,
        profit=(root_a - root_b) ** 2 / ep.c,
    )


def scan_block(
    snapshot: BlockSnapshot,
    cycles: Iterable[Cycle],
    prices: PriceTable,
    day: date,
    min_profit_usd: float = 30.0,
) -> List[CycleOpportunity]:
    """Cycles whose optimal profit at this block exceeds min_profit_usd."""
    found = []
    for cycle in cycles:
        try:
            ep = cycle_effective(cycle, snapshot)
        except PathUnavailableError:
            continue
        optimum = optimize_cycle(ep)
        if optimum is None:
            continue
        base = cycle.base_token
        profit_usd = base.to_units(optimum.profit) * prices.price(base.symbol, day)
        if profit_usd <= min_profit_usd:
            continue
        alpha_units = math.floor(optimum.alpha_star)
        exact_profit = route_output(cycle.hops, snapshot, alpha_units) - alpha_units if alpha_units > 0 else 0
        found.append(CycleOpportunity(
            block=snapshot.block,
            cycle_key=cycle.canonical_key,
            pools=list(cycle.pool_ids),
            base_token=base.symbol,
            alpha_star=optimum.alpha_star,
            profit=optimum.profit,
            exact_profit=exact_profit,
            relative_profit_pct=100.0 * optimum.profit / optimum.alpha_star,
            profit_usd=profit_usd,
        ))
    return found


# ══════════════════════════════════════════════════════════════════════════════
#  DURATIONS
# ══════════════════════════════════════════════════════════════════════════════

def track_durations(
    opportunities_by_block: Mapping[int, Iterable[str]],
    blocks: Iterable[int],
) -> List[OpportunityRun]:
    """
    Maximal runs of consecutive scanned blocks in which a cycle key stays
    profitable. `blocks` lists the scanned blocks; a gap in it ends every
    open run, and those runs are marked ended_by_gap.
    """
    runs: List[OpportunityRun] = []
    open_runs: Dict[str, Tuple[int, int]] = {}
    previous: Optional[int] = None

    def close(keys, gap=False):
        for key in sorted(keys):
            start, end = open_runs.pop(key)
            runs.append(OpportunityRun(cycle_key=key, start_block=start, end_block=end, ended_by_gap=gap))

    for block in sorted(blocks):
        if previous is not None and block != previous + 1:
            close(list(open_runs), gap=True)
        present = set(opportunities_by_block.get(block, ()))
        close([key for key in open_runs if key not in present])
        for key in present:
            start = open_runs[key][0] if key in open_runs else block
            open_runs[key] = (start, block)
        previous = block
    close(list(open_runs))
    return sorted(runs, key=lambda run: (run.start_block, run.cycle_key))


def mean_duration(runs: Sequence[OpportunityRun]) -> Optional[float]:
    if not runs:
        return None
    return sum(run.duration_blocks for run in runs) / len(runs)


# ══════════════════════════════════════════════════════════════════════════════
#  BATCH SCAN
# ══════════════════════════════════════════════════════════════════════════════

class BlockScan(BaseModel):
    block: int
    available: bool = True
    opportunities: List[CycleOpportunity] = []


class ArbScanner(BaseAnalysis[int, BlockScan]):
    """Scans every block of a range for cyclic arbitrage on one cycle network."""

    name = "arb-scan"

    def __init__(
        self,
        config: RunConfig,
        cycles: Sequence[Cycle],
        snapshots: SnapshotProvider,
        prices: PriceTable,
        calendar: BlockCalendar,
    ):
        super().__init__(config)
        self.cycles = list(cycles)
        self.snapshots = snapshots
        self.prices = prices
        self.calendar = calendar
        self.pool_ids = sorted({pool_id for cycle in self.cycles for pool_id in cycle.pool_ids})

    def analyze_item(self, block: int) -> BlockScan:
        try:
            day = self.calendar.day_of(block)
        except UnmappedBlockError:
            logger.debug(f"block {block} missing from the dataset")
            return BlockScan(block=block, available=False)
        snapshot = self.snapshots.snapshot(block, self.pool_ids)
        opportunities = scan_block(snapshot, self.cycles, self.prices, day, self.config.min_profit_usd)
        if opportunities:
            logger.debug(f"block {block}: {len(opportunities)} opportunities")
        return BlockScan(block=block, opportunities=opportunities)

    @staticmethod
    def runs(scans: Sequence[BlockScan]) -> List[OpportunityRun]:
        present = [scan for scan in scans if scan.available]
        by_block = {scan.block: [o.cycle_key for o in scan.opportunities] for scan in present}
        return track_durations(by_block, [scan.block for scan in present])
