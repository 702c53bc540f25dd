"""
Optimal routing of a trade across independent paths.

Each path reduces to a concave g_i(x) = a_i*x / (b_i + c_i*x). The split
maximizing sum g_i(x_i) with sum x_i = X gives every funded path the same
marginal rate lambda; paths whose marginal at zero does not exceed lambda
stay unfunded.
"""

import math
from dataclasses import dataclass
from datetime import date
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from loguru import logger
from scipy.optimize import brentq

from core import BaseAnalysis
from core.cpmm import EffectivePool, reduce_path, route_output
from core.errors import DomainError, PathUnavailableError
from core.schemas import AuditResult, BlockSnapshot, Hop, PathShare, Pool, SwapEvent, TradePath

from .config import RunConfig
from .graph import LEAST_LIQUID, MOST_LIQUID, PathSetConfig, PoolGraph
from .ingest import BlockCalendar, PriceTable, SnapshotProvider, filter_independent_swaps

Liquidity = Callable[[Pool], float]


# ══════════════════════════════════════════════════════════════════════════════
#  PATH ENUMERATION
# ══════════════════════════════════════════════════════════════════════════════

def _reserve_depth(pool: Pool) -> int:
    """sqrt(k); comparable across parallel pools of the same pair without prices."""
    return math.isqrt(pool.reserve0 * pool.reserve1)


def _pick_pool(pools: List[Pool], preference: str, liquidity: Optional[Liquidity]) -> Pool:
    """
    One pool among parallel candidates for a multi-hop leg.

    Without a liquidity measure the pools' own reserves rank them; pools
    carrying no reserves tie and the lowest id wins.
    """
    if preference not in (MOST_LIQUID, LEAST_LIQUID):
        on_venue = [pool for pool in pools if pool.venue == preference]
        if on_venue:
            pools = on_venue
        preference = MOST_LIQUID
    if len(pools) == 1:
        return pools[0]
    rank = liquidity or _reserve_depth
    # ids are sorted, so max/min keep the first id on ties
    if preference == MOST_LIQUID:
        return max(pools, key=rank)
    return min(pools, key=rank)


def _independent(paths: List[TradePath]) -> List[TradePath]:
    """Greedy pool- and intermediate-disjoint subset, shortest paths first."""
    chosen: List[TradePath] = []
    used_pools: set = set()
    used_tokens: set = set()
    for path in sorted(paths, key=lambda p: (len(p), p.pool_ids)):
        pools = set(path.pool_ids)
        tokens = set(path.intermediate_tokens)
        if pools & used_pools or tokens & used_tokens:
            continue
        chosen.append(path)
        used_pools |= pools
        used_tokens |= tokens
    return chosen


def enumerate_paths(
    graph: PoolGraph,
    token_in: str,
    token_out: str,
    config: PathSetConfig,
    liquidity: Optional[Liquidity] = None,
) -> List[TradePath]:
    """
    Independent candidate paths from token_in to token_out.

    Direct pools of every venue are kept when include_both_direct_venues is
    set; each multi-hop leg uses one pool chosen by multi_hop_preference.
    Paths come back ordered lexicographically by pool ids.
    """
    if token_in == token_out:
        raise DomainError("input and output token must differ")
    if config.allowed_pools:
        graph = graph.restricted(config.allowed_pools)

    direct = graph.pools_between(token_in, token_out)
    if direct and not config.include_both_direct_venues:
        direct = [_pick_pool(direct, MOST_LIQUID, liquidity)]
    candidates = [TradePath(hops=(Hop(pool=pool, direction=pool.direction_from(token_in)),)) for pool in direct]

    if config.max_hops > 1 and token_in in graph.graph and token_out in graph.graph:
        tokens = graph.token_digraph()
        for route in sorted(nx.all_simple_paths(tokens, token_in, token_out, cutoff=config.max_hops)):
            if len(route) < 3:
                continue
            hops = []
            for leg_in, leg_out in zip(route, route[1:]):
                pool = _pick_pool(graph.pools_between(leg_in, leg_out), config.multi_hop_preference, liquidity)
                hops.append(Hop(pool=pool, direction=pool.direction_from(leg_in)))
            candidates.append(TradePath(hops=tuple(hops)))

    paths = sorted(_independent(candidates), key=lambda p: p.pool_ids)
    logger.debug(f"{token_in}->{token_out}: {len(paths)} independent paths")
    return paths


# ══════════════════════════════════════════════════════════════════════════════
#  OPTIMAL SPLIT
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class Allocation:
    effective: EffectivePool
    amount: float
    path: Optional[TradePath] = None

    @property
    def output(self) -> float:
        return self.effective.eval(self.amount)


@dataclass(frozen=True)
class RoutePlan:
    allocations: Tuple[Allocation, ...]
    total_input: float
    total_output: float
    lambda_star: float

    @property
    def amounts(self) -> np.ndarray:
        return np.array([allocation.amount for allocation in self.allocations])

    def kkt_residual(self) -> float:
        """Largest relative violation of the equal-marginal conditions."""
        worst = 0.0
        for allocation in self.allocations:
            ep = allocation.effective
            if allocation.amount > 0:
                worst = max(worst, abs(ep.marginal(allocation.amount) - self.lambda_star) / self.lambda_star)
            else:
                worst = max(worst, (ep.marginal_at_zero - self.lambda_star) / self.lambda_star)
        return worst


def _amounts_at(lam: float, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        x = (np.sqrt(a) * np.sqrt(b / lam) - b) / c
    return np.where(a / b > lam, np.maximum(x, 0.0), 0.0)


def _closed_form_lambda(a, b, c, total_input: float) -> float:
    """Grow the funded set by decreasing marginal at zero until lambda settles."""
    m0 = a / b
    order = sorted(range(len(a)), key=lambda i: -m0[i])
    numerator = total_input
    denominator = 0.0
    lam = m0[order[0]]
    for k, i in enumerate(order):
        numerator += b[i] / c[i]
        denominator += math.sqrt(a[i]) * math.sqrt(b[i]) / c[i]
        lam = (denominator / numerator) ** 2
        if k + 1 == len(order) or m0[order[k + 1]] <= lam:
            break
    return lam


def _bisection_lambda(a, b, c, total_input: float) -> float:
    hi = float(np.max(a / b))
    lo = hi / 2
    while _amounts_at(lo, a, b, c).sum() < total_input:
        lo /= 2
    return brentq(
        lambda lam: _amounts_at(lam, a, b, c).sum() - total_input,
        lo, hi, xtol=hi * 1e-18, rtol=4 * np.finfo(float).eps, maxiter=500,
    )


def optimal_split(
    paths: Sequence[EffectivePool],
    total_input: float,
    trade_paths: Optional[Sequence[TradePath]] = None,
    method: str = "closed_form",
) -> RoutePlan:
    """
    Output-maximizing split of total_input across independent paths.

    method="closed_form" solves lambda per funded set and falls back to
    bisection when the allocation misses total_input by more than 1e-9
    relative; method="bisection" goes straight to the fallback.
    """
    if not paths:
        raise DomainError("optimal_split needs at least one path")
    if total_input <= 0:
        raise DomainError("total input must be positive")
    tokens = {(ep.in_token, ep.out_token) for ep in paths}
    if len(tokens) != 1:
        raise DomainError("paths must share input and output tokens")
    if trade_paths is not None and len(trade_paths) != len(paths):
        raise DomainError("trade_paths and paths differ in length")

    a = np.array([ep.a for ep in paths])
    b = np.array([ep.b for ep in paths])
    c = np.array([ep.c for ep in paths])

    if method == "closed_form":
        lam = _closed_form_lambda(a, b, c, total_input)
        amounts = _amounts_at(lam, a, b, c)
        if abs(amounts.sum() - total_input) > 1e-9 * total_input:
            logger.debug("closed form missed the budget, bisecting on lambda")
            method = "bisection"
    if method == "bisection":
        lam = _bisection_lambda(a, b, c, total_input)
        amounts = _amounts_at(lam, a, b, c)
    elif method != "closed_form":
        raise DomainError(f"unknown method {method}")

    # absorb float residue in the largest allocation
    largest = int(np.argmax(amounts))
    amounts[largest] += total_input - amounts.sum()

    allocations = tuple(
        Allocation(effective=ep, amount=float(x), path=trade_paths[i] if trade_paths is not None else None)
        for i, (ep, x) in enumerate(zip(paths, amounts))
    )
    total_output = sum(allocation.output for allocation in allocations)
    return RoutePlan(allocations=allocations, total_input=float(total_input), total_output=total_output, lambda_star=float(lam))


def count_used_paths(plan: RoutePlan, threshold: float = 0.001) -> int:
    """Paths carrying at least `threshold` of the trade."""
    return sum(1 for allocation in plan.allocations if allocation.amount >= threshold * plan.total_input)


# ══════════════════════════════════════════════════════════════════════════════
#  TRADE AUDIT
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class AuditThresholds:
    min_trade_usd: float = 30_000.0
    min_gain_usd: float = 30.0
    path_usage_threshold: float = 0.001


def usd_liquidity(snapshot: BlockSnapshot, prices: PriceTable, day: date) -> Liquidity:
    """USD value of a pool's reserves at the snapshot; inactive pools count zero."""

    def value(pool: Pool) -> float:
        if not snapshot.has_active(pool.id):
            return 0.0
        reserve0, reserve1 = snapshot.reserves[pool.id]
        return (pool.token0.to_units(reserve0) * prices.price(pool.token0.symbol, day)
                + pool.token1.to_units(reserve1) * prices.price(pool.token1.symbol, day))

    return value


def tokens_match(event: SwapEvent, pool: Pool) -> bool:
    """The event sells one of the pool's tokens for the other."""
    return {event.token_in, event.token_out} == {pool.token0.symbol, pool.token1.symbol}


def trade_usd_value(event: SwapEvent, graph: PoolGraph, prices: PriceTable, day: date) -> float:
    """The subgraph's USD value when present, else amount_in at the day's price."""
    if event.usd_value is not None:
        return event.usd_value
    pool = graph.pool(event.pool_id)
    token = pool.token_in(pool.direction_from(event.token_in))
    return token.to_units(event.amount_in) * prices.price(token.symbol, day)


def _output_price(event: SwapEvent, token, prices: PriceTable, day: date) -> float:
    price = prices.get(token.symbol, day)
    if price is not None:
        return price
    if event.usd_value is not None and event.amount_out > 0:
        return event.usd_value / token.to_units(event.amount_out)
    return prices.price(token.symbol, day)


def _integer_split(plan: RoutePlan, total: int) -> List[int]:
    amounts = [math.floor(allocation.amount) for allocation in plan.allocations]
    largest = max(range(len(amounts)), key=lambda i: plan.allocations[i].amount)
    amounts[largest] += total - sum(amounts)
    return amounts


def audit_trade(
    event: SwapEvent,
    snapshot: BlockSnapshot,
    graph: PoolGraph,
    config: PathSetConfig,
    thresholds: AuditThresholds,
    prices: PriceTable,
    day: date,
    network: str = "default",
) -> AuditResult:
    """
    Re-route one trade over the beginning-of-block state.

    The executed route is always one of the candidates, so the optimum
    bounds it from above; the integer re-check keeps the executed route
    whenever rounding would report a loss.
    """
    pool = graph.pool(event.pool_id)
    base = dict(
        block=event.block, tx_hash=event.tx_hash, tx_index=event.tx_index, log_index=event.log_index,
        network=network, pool_id=event.pool_id, token_in=event.token_in, token_out=event.token_out,
        amount_in=event.amount_in, recorded_output=event.amount_out,
    )
    if not tokens_match(event, pool):
        logger.warning(f"tx {event.tx_hash}: {event.token_in}->{event.token_out} does not match pool {pool.id}")
        return AuditResult(**base, auditable=False, skip_reason="event tokens do not match the executed pool")
    original = TradePath(hops=(Hop(pool=pool, direction=pool.direction_from(event.token_in)),))
    token_out = original.out_token
    if not snapshot.has_active(pool.id):
        return AuditResult(**base, auditable=False, skip_reason="executed pool unavailable at block start")

    liquidity = usd_liquidity(snapshot, prices, day)
    paths = enumerate_paths(graph, event.token_in, event.token_out, config, liquidity)
    if original.pool_ids not in {p.pool_ids for p in paths}:
        paths = sorted(paths + [original], key=lambda p: p.pool_ids)

    available: List[TradePath] = []
    effective: List[EffectivePool] = []
    for path in paths:
        try:
            effective.append(reduce_path(path, snapshot))
            available.append(path)
        except PathUnavailableError as exc:
            logger.debug(f"tx {event.tx_hash}: dropping path {path.key}: {exc}")

    plan = optimal_split(effective, float(event.amount_in), available)
    amounts = _integer_split(plan, event.amount_in)
    original_output = route_output(original.hops, snapshot, event.amount_in)
    optimal_output = sum(
        route_output(path.hops, snapshot, amount) for path, amount in zip(available, amounts) if amount > 0
    )
    if optimal_output < original_output:
        optimal_output = original_output
        shares = [PathShare(path=original.key, amount_in=float(event.amount_in), share=1.0)]
        paths_used = 1
    else:
        shares = [
            PathShare(path=path.key, amount_in=allocation.amount, share=allocation.amount / plan.total_input)
            for path, allocation in zip(available, plan.allocations)
        ]
        paths_used = count_used_paths(plan, thresholds.path_usage_threshold)

    gain_tokens = optimal_output - original_output
    gain_usd = token_out.to_units(gain_tokens) * _output_price(event, token_out, prices, day)
    gain_pct = 100.0 * gain_tokens / original_output if original_output > 0 else 0.0
    return AuditResult(
        **base,
        original_output=original_output,
        optimal_output=optimal_output,
        gain_tokens=gain_tokens,
        gain_usd=gain_usd,
        gain_pct=gain_pct,
        paths_available=len(available),
        paths_used=paths_used,
        shares=shares,
        optimizable=gain_usd > thresholds.min_gain_usd,
    )


class RouteAuditor(BaseAnalysis[SwapEvent, AuditResult]):
    """Audits every large independent trade of a dataset against one path network."""

    name = "route-audit"

    def __init__(
        self,
        config: RunConfig,
        graph: PoolGraph,
        path_config: PathSetConfig,
        snapshots: SnapshotProvider,
        prices: PriceTable,
        calendar: BlockCalendar,
    ):
        super().__init__(config)
        self.graph = graph
        self.path_config = path_config
        self.snapshots = snapshots
        self.prices = prices
        self.calendar = calendar
        self.thresholds = AuditThresholds(
            min_trade_usd=config.min_trade_usd,
            min_gain_usd=config.min_gain_usd,
            path_usage_threshold=config.path_usage_threshold,
        )

    def select(self, events: Sequence[SwapEvent]) -> List[SwapEvent]:
        """Independent swaps in range, on known pools, above the trade threshold."""
        selected = []
        skipped: Dict[str, int] = {"range": 0, "unknown pool": 0, "token mismatch": 0, "small": 0}
        for event in filter_independent_swaps(events):
            if not self.config.in_range(event.block):
                skipped["range"] += 1
            elif not self.graph.has_pool(event.pool_id):
                skipped["unknown pool"] += 1
            elif not tokens_match(event, self.graph.pool(event.pool_id)):
                skipped["token mismatch"] += 1
            elif trade_usd_value(event, self.graph, self.prices, self.calendar.day_of(event.block)) < self.thresholds.min_trade_usd:
                skipped["small"] += 1
            else:
                selected.append(event)
        if skipped["unknown pool"]:
            logger.warning(f"{skipped['unknown pool']} swaps on pools missing from the graph were skipped")
        if skipped["token mismatch"]:
            logger.warning(f"{skipped['token mismatch']} swaps whose tokens do not match their pool were skipped")
        logger.info(f"Selected {len(selected)} trades for audit (skipped: {skipped})")
        return selected

    def analyze_item(self, event: SwapEvent) -> AuditResult:
        snapshot = self.snapshots.snapshot(event.block, self.graph_pool_ids)
        return audit_trade(
            event, snapshot, self.graph, self.path_config, self.thresholds,
            self.prices, self.calendar.day_of(event.block), self.config.path_network,
        )

    @property
    def graph_pool_ids(self) -> List[str]:
        return [pool.id for pool in self.graph.pools]
