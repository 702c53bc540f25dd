"""
╔══════════════════════════════════════════════════════════════════════════════╗
║                        SYNTHETIC MARKET GENERATOR                             ║
║                                                                               ║
║  Generates formula-consistent datasets: blocks, end-of-block reserves,        ║
║  swap events and daily prices over the pools of one cycle network.            ║
╚══════════════════════════════════════════════════════════════════════════════╝
"""

import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from loguru import logger

from core import OutputWriter
from core.cpmm import swap_out
from core.schemas import SUSHISWAP, BlockRecord, Pool, PriceRecord, ReserveRecord, SwapEvent

from .config import GeneratorConfig
from .graph import PoolGraphConfig
from .ingest import parse_graph

# USD reference prices at the first block; unknown tokens start at 1.
REFERENCE_PRICES = {"ETH": 400.0, "BTC": 11_000.0, "USDC": 1.0, "USDT": 1.0, "DAI": 1.0}
STABLECOINS = {"USDC", "USDT", "DAI"}

# SushiSwap pools are simulated shallower than Uniswap ones.
SUSHISWAP_DEPTH = 0.5


@dataclass
class SyntheticMarket:
    """One generated dataset, in the order its files are written."""
    graph: PoolGraphConfig
    blocks: List[BlockRecord] = field(default_factory=list)
    reserves: List[ReserveRecord] = field(default_factory=list)
    events: List[SwapEvent] = field(default_factory=list)
    prices: List[PriceRecord] = field(default_factory=list)

    def write(self, output_dir: Path) -> List[Path]:
        writer = OutputWriter(output_dir)
        return [
            writer.write_json("graph.json", self.graph.model_dump(mode="json")),
            writer.write_jsonl("blocks.jsonl", self.blocks),
            writer.write_jsonl("reserves.jsonl", self.reserves),
            writer.write_jsonl("events.jsonl", self.events),
            writer.write_jsonl("prices.jsonl", self.prices),
        ]


class MarketGenerator:
    """
    Simulates swaps block by block on constant-product pools.

    Every swap output is the floored formula output on the pool's current
    state, and each block's touched pools get an end-of-block reserve
    record, so the dataset replays with zero consistency flags.
    """

    def __init__(self, config: GeneratorConfig):
        self.config = config
        self.graph = parse_graph(config.graph)
        network = self.graph.cycle_network(config.network)
        pools = self.graph.build_pools()
        self.pools: Dict[str, Pool] = {pool_id: pools[pool_id] for pool_id in sorted(network.pools)}
        self.rng = np.random.default_rng(config.random_seed)

    # ══════════════════════════════════════════════════════════════════════════
    #  MARKET STATE
    # ══════════════════════════════════════════════════════════════════════════

    def _initial_pool(self, pool: Pool) -> Pool:
        depth = self.config.pool_depth_usd
        if pool.venue == SUSHISWAP:
            depth *= SUSHISWAP_DEPTH
        reserve0 = int(depth / self._reference(pool.token0.symbol) * 10 ** pool.token0.decimals)
        reserve1 = int(depth / self._reference(pool.token1.symbol) * 10 ** pool.token1.decimals)
        if pool.venue == SUSHISWAP:
            reserve1 = int(reserve1 * (1 + self.config.mispricing))
        return pool.with_reserves(reserve0, reserve1)

    @staticmethod
    def _reference(symbol: str) -> float:
        return REFERENCE_PRICES.get(symbol, 1.0)

    def _timestamp(self, block: int) -> int:
        return self.config.start_timestamp + (block - self.config.start_block) * self.config.block_time

    # ══════════════════════════════════════════════════════════════════════════
    #  GENERATION
    # ══════════════════════════════════════════════════════════════════════════

    def generate(self) -> SyntheticMarket:
        cfg = self.config
        market = SyntheticMarket(graph=self.graph)
        state = {pool_id: self._initial_pool(pool) for pool_id, pool in self.pools.items()}

        genesis = cfg.start_block - 1
        market.blocks.append(BlockRecord(block=genesis, timestamp=self._timestamp(genesis)))
        for pool_id, pool in state.items():
            market.reserves.append(ReserveRecord(block=genesis, pool_id=pool_id, reserve0=pool.reserve0, reserve1=pool.reserve1))

        pool_ids = list(state)
        for block in range(cfg.start_block, cfg.start_block + cfg.num_blocks):
            market.blocks.append(BlockRecord(block=block, timestamp=self._timestamp(block)))
            touched = set()
            log_index = 0
            for tx_index in range(int(self.rng.poisson(cfg.swaps_per_block))):
                tx_hash = f"0x{block:012x}{tx_index:04x}"
                swaps = 2 if self.rng.random() < cfg.multi_swap_share else 1
                for _ in range(swaps):
                    pool_id = pool_ids[int(self.rng.integers(len(pool_ids)))]
                    event = self._swap(state, pool_id, block, tx_hash, tx_index, log_index)
                    if event is None:
                        continue
                    market.events.append(event)
                    touched.add(pool_id)
                    log_index += 1
            for pool_id in sorted(touched):
                pool = state[pool_id]
                market.reserves.append(ReserveRecord(block=block, pool_id=pool_id, reserve0=pool.reserve0, reserve1=pool.reserve1))

        market.prices = self._prices(sorted({record.day for record in market.blocks}))
        logger.info(
            f"Generated {len(market.blocks)} blocks, {len(market.events)} swaps, "
            f"{len(market.reserves)} reserve records over {len(state)} pools"
        )
        return market

    def _swap(self, state: Dict[str, Pool], pool_id: str, block: int, tx_hash: str, tx_index: int, log_index: int) -> Optional[SwapEvent]:
        pool = state[pool_id]
        direction = pool.direction_from(pool.tokens[int(self.rng.integers(2))].symbol)
        token_in, token_out = pool.token_in(direction), pool.token_out(direction)
        trade_usd = float(self.rng.uniform(self.config.trade_usd_min, self.config.trade_usd_max))
        amount_in = int(trade_usd / self._reference(token_in.symbol) * 10 ** token_in.decimals)
        amount_out = swap_out(pool, direction, amount_in) if amount_in > 0 else 0
        if amount_out <= 0:
            logger.debug(f"block {block}: skipped empty swap on {pool_id}")
            return None
        state[pool_id] = pool.after_swap(direction, amount_in, amount_out)
        return SwapEvent(
            block=block,
            tx_hash=tx_hash,
            tx_index=tx_index,
            log_index=log_index,
            pool_id=pool_id,
            token_in=token_in.symbol,
            token_out=token_out.symbol,
            amount_in=amount_in,
            amount_out=amount_out,
            usd_value=round(trade_usd, 2),
        )

    def _prices(self, days: List[date]) -> List[PriceRecord]:
        """Daily closes on a log-normal walk, with high/low around each close."""
        records = []
        symbols = sorted(token.symbol for token in self.graph.tokens)
        price = {symbol: self._reference(symbol) for symbol in symbols}
        for day in days:
            for symbol in symbols:
                if symbol in STABLECOINS or self.config.daily_volatility == 0:
                    records.append(PriceRecord(token=symbol, day=day, price=price[symbol], high=price[symbol], low=price[symbol]))
                    continue
                sigma = self.config.daily_volatility
                price[symbol] *= math.exp(float(self.rng.normal(0.0, sigma)))
                spread = abs(float(self.rng.normal(0.0, sigma)))
                records.append(PriceRecord(
                    token=symbol,
                    day=day,
                    price=price[symbol],
                    high=price[symbol] * math.exp(spread / 2),
                    low=price[symbol] * math.exp(-spread / 2),
                ))
        return records
