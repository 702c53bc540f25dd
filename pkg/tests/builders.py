"""Factories for pools, snapshots, prices and small markets used across the tests."""

from datetime import date, datetime, time, timezone
from fractions import Fraction
from typing import Dict, Iterable

from core.schemas import BlockRecord, BlockSnapshot, Pool, PriceRecord, TokenId
from src.ingest import BlockCalendar, PriceTable

ETH = TokenId(symbol="ETH", decimals=18)
BTC = TokenId(symbol="BTC", decimals=8)
USDC = TokenId(symbol="USDC", decimals=6)
USDT = TokenId(symbol="USDT", decimals=6)
DAI = TokenId(symbol="DAI", decimals=18)
TOKENS = {token.symbol: token for token in (ETH, BTC, USDC, USDT, DAI)}

USD = {"ETH": 400.0, "BTC": 11_000.0, "USDC": 1.0, "USDT": 1.0, "DAI": 1.0}
DAY = date(2020, 11, 1)
FEE = Fraction(3, 1000)


def units(token: TokenId, amount: float) -> int:
    return int(round(amount * 10 ** token.decimals))


def make_pool(pool_id, token0, token1, reserve0=0, reserve1=0, fee=FEE, venue="uniswap") -> Pool:
    return Pool(id=pool_id, venue=venue, token0=token0, token1=token1, reserve0=reserve0, reserve1=reserve1, fee=fee)


def usd_pool(pool_id, token0, token1, depth_usd=1_000_000.0, skew=1.0, venue="uniswap", fee=FEE) -> Pool:
    """Pool whose sides are worth depth_usd each at USD prices; skew scales reserve1."""
    reserve0 = units(token0, depth_usd / USD[token0.symbol])
    reserve1 = units(token1, depth_usd / USD[token1.symbol] * skew)
    return make_pool(pool_id, token0, token1, reserve0, reserve1, fee=fee, venue=venue)


def snapshot_of(block: int, pools: Iterable[Pool]) -> BlockSnapshot:
    return BlockSnapshot(block=block, reserves={pool.id: (pool.reserve0, pool.reserve1) for pool in pools})


def price_table(day: date = DAY, prices: Dict[str, float] = USD) -> PriceTable:
    return PriceTable(PriceRecord(token=token, day=day, price=price) for token, price in prices.items())


def calendar_for(blocks: Dict[int, date]) -> BlockCalendar:
    records = []
    for block, day in blocks.items():
        stamp = int(datetime.combine(day, time(12), tzinfo=timezone.utc).timestamp())
        records.append(BlockRecord(block=block, timestamp=stamp))
    return BlockCalendar(records)
