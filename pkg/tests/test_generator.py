from collections import Counter

import pytest
from pydantic import ValidationError

from src.config import GeneratorConfig
from src.generator import SUSHISWAP_DEPTH, MarketGenerator
from src.ingest import SnapshotProvider, filter_independent_swaps, serialize_jsonl, validate_consistency


def market(**overrides):
    config = GeneratorConfig(**{"random_seed": 11, "num_blocks": 100, **overrides})
    generator = MarketGenerator(config)
    return generator, generator.generate()


def test_same_seed_same_dataset():
    _, first = market()
    _, second = market()
    for name in ("blocks", "reserves", "events", "prices"):
        assert serialize_jsonl(getattr(first, name)) == serialize_jsonl(getattr(second, name))


def test_other_seed_other_dataset():
    _, first = market()
    _, other = market(random_seed=12)
    assert serialize_jsonl(first.events) != serialize_jsonl(other.events)


def test_generated_swaps_replay_exactly():
    generator, data = market(multi_swap_share=0.3)
    report = validate_consistency(data.events, SnapshotProvider(data.reserves), generator.graph.build_pools())
    assert report.checked == len(data.events) > 0
    assert report.flags == []
    assert report.closure_mismatches == []
    assert report.skipped == 0


def test_genesis_block_sets_every_pool():
    generator, data = market(num_blocks=5)
    genesis = generator.config.start_block - 1
    assert {r.pool_id for r in data.reserves if r.block == genesis} == set(generator.pools)
    assert data.blocks[0].block == genesis
    assert [b.block for b in data.blocks[1:]] == list(range(genesis + 1, genesis + 6))


def test_multi_swap_transactions_share_a_hash():
    _, data = market(multi_swap_share=1.0)
    per_tx = Counter(event.tx_hash for event in data.events)
    assert max(per_tx.values()) == 2
    assert len(filter_independent_swaps(data.events)) < len(data.events)


def test_sushiswap_pools_are_shallower_and_skewed():
    generator, data = market(num_blocks=1, swaps_per_block=0, mispricing=0.1)
    genesis = {r.pool_id: r for r in data.reserves}
    uni, sushi = genesis["uni-usdc-eth"], genesis["sushi-usdc-eth"]
    assert sushi.reserve0 == pytest.approx(uni.reserve0 * SUSHISWAP_DEPTH, rel=1e-9)
    assert sushi.reserve1 == pytest.approx(uni.reserve1 * SUSHISWAP_DEPTH * 1.1, rel=1e-9)


def test_prices_cover_every_token_and_day():
    generator, data = market(num_blocks=10)
    days = {block.day for block in data.blocks}
    tokens = {token.symbol for token in generator.graph.tokens}
    assert {(p.token, p.day) for p in data.prices} == {(t, d) for t in tokens for d in days}
    assert all(p.low <= p.price <= p.high for p in data.prices)
    assert all(p.price == 1.0 for p in data.prices if p.token == "USDC")


def test_trade_range_must_be_ordered():
    with pytest.raises(ValidationError):
        GeneratorConfig(trade_usd_min=10.0, trade_usd_max=5.0)
