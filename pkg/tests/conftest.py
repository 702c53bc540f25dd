"""Shared fixtures: the two-venue routing market, the mispriced triangle and the shipped networks."""

import pytest

from src.config import DEFAULT_GRAPH
from src.graph import PathSetConfig, PoolGraph
from src.ingest import parse_graph

from builders import BTC, ETH, USDC, USDT, make_pool, units, usd_pool


@pytest.fixture
def f1_pools():
    """
    ETH/BTC on two venues: a deep Uniswap pool at the market price and a
    shallow SushiSwap pool where BTC is 5% dearer.
    """
    uniswap = make_pool("uni-btc-eth", BTC, ETH, units(BTC, 1_000), units(ETH, 27_500))
    sushiswap = make_pool("sushi-btc-eth", BTC, ETH, units(BTC, 95), units(ETH, 2_750), venue="sushiswap")
    return uniswap, sushiswap


@pytest.fixture
def f1_graph(f1_pools):
    return PoolGraph(f1_pools)


@pytest.fixture
def direct_only():
    return PathSetConfig(max_hops=1)


@pytest.fixture
def f2_pools():
    """ETH/USDC/USDT triangle; the USDC/USDT pool hands out 5% extra USDT."""
    return (
        usd_pool("uni-usdc-eth", USDC, ETH, 4_000_000),
        usd_pool("uni-usdt-eth", ETH, USDT, 4_000_000),
        usd_pool("uni-usdc-usdt", USDC, USDT, 4_000_000, skew=1.05),
    )


@pytest.fixture
def f2_graph(f2_pools):
    return PoolGraph(f2_pools)


@pytest.fixture(scope="session")
def shipped_graph_config():
    return parse_graph(DEFAULT_GRAPH)


@pytest.fixture(scope="session")
def period_2_graph(shipped_graph_config):
    network = shipped_graph_config.cycle_network("period_2")
    return PoolGraph.from_config(shipped_graph_config, network.pools)
