from fractions import Fraction

import numpy as np
import pytest

from core.cpmm import (
    EffectivePool,
    compose,
    effective_of_pool,
    inverse_marginal,
    marginal,
    reduce_hops,
    route_output,
    route_output_exact,
    spot_price,
    swap_out,
    swap_out_exact,
)
from core.errors import DomainError, PathUnavailableError
from core.schemas import Direction, Hop, TokenId

from builders import ETH, USDC, USDT, make_pool, snapshot_of, usd_pool

A = TokenId(symbol="A", decimals=0)
B = TokenId(symbol="B", decimals=0)
C = TokenId(symbol="C", decimals=0)


def test_swap_out_matches_formula():
    pool = make_pool("p", A, B, 1_000, 2_000)
    # 2000 * 0.997 * 100 / (1000 + 99.7)
    assert swap_out_exact(pool, Direction.ZERO_FOR_ONE, Fraction(100)) == Fraction(2000 * 997 * 100, 1000 * 1000 + 997 * 100)
    assert swap_out(pool, Direction.ZERO_FOR_ONE, 100) == 181


def test_swap_out_reverse_direction_uses_other_reserves():
    pool = make_pool("p", A, B, 1_000, 2_000, fee=0)
    assert swap_out_exact(pool, Direction.ONE_FOR_ZERO, Fraction(2_000)) == 500


def test_constant_product_never_decreases():
    rng = np.random.default_rng(1)
    for _ in range(10_000):
        r_in, r_out = (int(x) for x in rng.integers(1, 10**12, size=2))
        amount = int(rng.integers(1, 10**12))
        fee = Fraction(int(rng.integers(0, 31)), 1000)
        pool = make_pool("p", A, B, r_in, r_out, fee=fee)
        out = swap_out(pool, Direction.ZERO_FOR_ONE, amount)
        assert 0 <= out < r_out
        assert (r_in + amount) * (r_out - out) >= r_in * r_out


def test_constant_product_exact_without_fee():
    rng = np.random.default_rng(2)
    for _ in range(500):
        r_in, r_out, amount = (int(x) for x in rng.integers(1, 10**9, size=3))
        pool = make_pool("p", A, B, r_in, r_out, fee=0)
        out = swap_out_exact(pool, Direction.ZERO_FOR_ONE, Fraction(amount))
        assert (r_in + amount) * (r_out - out) == r_in * r_out


def test_price_impact_is_monotone():
    pool = make_pool("p", A, B, 10**6, 10**6)
    sizes = [10, 100, 1_000, 10_000, 100_000, 1_000_000]
    outputs = [swap_out_exact(pool, Direction.ZERO_FOR_ONE, Fraction(x)) for x in sizes]
    average_prices = [x / out for x, out in zip(sizes, outputs)]
    assert all(a < b for a, b in zip(outputs, outputs[1:]))
    assert all(a < b for a, b in zip(average_prices, average_prices[1:]))
    assert average_prices[0] > spot_price(pool, Direction.ZERO_FOR_ONE)


def test_doubling_reserves_lowers_average_price():
    rng = np.random.default_rng(3)
    for _ in range(1_000):
        r_in, r_out, amount = (int(x) for x in rng.integers(1, 10**12, size=3))
        fee = Fraction(int(rng.integers(0, 31)), 1000)
        shallow = make_pool("p", A, B, r_in, r_out, fee=fee)
        deep = make_pool("p", A, B, 2 * r_in, 2 * r_out, fee=fee)
        shallow_out = swap_out_exact(shallow, Direction.ZERO_FOR_ONE, Fraction(amount))
        deep_out = swap_out_exact(deep, Direction.ZERO_FOR_ONE, Fraction(amount))
        assert amount / deep_out < amount / shallow_out


def test_inactive_pool_rejected():
    with pytest.raises(DomainError):
        swap_out(make_pool("p", A, B, 0, 100), Direction.ZERO_FOR_ONE, 10)


def test_fee_must_be_below_one():
    with pytest.raises(ValueError):
        make_pool("p", A, B, 1, 1, fee=1)


def test_fee_accepts_decimal_text():
    assert make_pool("p", A, B, 1, 1, fee="0.003").fee == Fraction(3, 1000)


# ══════════════════════════════════════════════════════════════════════════════
#  EFFECTIVE POOLS
# ══════════════════════════════════════════════════════════════════════════════

def test_effective_pool_of_single_pool_matches_swap():
    pool = make_pool("p", A, B, 5_000, 7_000)
    ep = effective_of_pool(pool, Direction.ZERO_FOR_ONE)
    for x in (1, 50, 5_000, 1e6):
        assert ep.eval(x) == pytest.approx(float(swap_out_exact(pool, Direction.ZERO_FOR_ONE, Fraction(x))), rel=1e-12)
    assert ep.marginal_at_zero == pytest.approx(0.997 * 7_000 / 5_000)
    assert ep.supremum == pytest.approx(7_000)


def test_compose_matches_sequential_swaps():
    first = make_pool("p1", A, B, 3_000, 9_000)
    second = make_pool("p2", B, C, 4_000, 1_000, fee=Fraction(1, 100))
    snapshot = snapshot_of(1, [first, second])
    hops = [Hop(pool=first, direction=Direction.ZERO_FOR_ONE), Hop(pool=second, direction=Direction.ZERO_FOR_ONE)]
    folded = reduce_hops(hops, snapshot)
    chained = compose(effective_of_pool(first, Direction.ZERO_FOR_ONE), effective_of_pool(second, Direction.ZERO_FOR_ONE))
    for x in (1, 10, 250, 3_000, 40_000):
        exact = float(route_output_exact(hops, snapshot, x))
        assert folded.eval(x) == pytest.approx(exact, rel=1e-12)
        assert chained.eval(x) == pytest.approx(exact, rel=1e-9)
    assert folded.in_token == A and folded.out_token == C


def random_pool(rng, pool_id, token0, token1):
    r0, r1 = (int(x) for x in rng.integers(10**3, 10**15, size=2))
    return make_pool(pool_id, token0, token1, r0, r1, fee=Fraction(int(rng.integers(0, 31)), 1000))


def random_inputs(rng, count):
    return [int(x) for x in 10 ** rng.uniform(0, 15, size=count)]


def test_effective_pool_matches_exact_swap_on_random_pools():
    rng = np.random.default_rng(5)
    for _ in range(1_000):
        pool = random_pool(rng, "p", A, B)
        direction = Direction.ZERO_FOR_ONE if rng.random() < 0.5 else Direction.ONE_FOR_ZERO
        x = random_inputs(rng, 1)[0]
        exact = float(swap_out_exact(pool, direction, Fraction(x)))
        assert effective_of_pool(pool, direction).eval(x) == pytest.approx(exact, rel=1e-9)


def test_compose_matches_exact_route_on_random_pairs():
    rng = np.random.default_rng(6)
    for _ in range(50):
        first, second = random_pool(rng, "p1", A, B), random_pool(rng, "p2", B, C)
        hops = [Hop(pool=first, direction=Direction.ZERO_FOR_ONE), Hop(pool=second, direction=Direction.ZERO_FOR_ONE)]
        snapshot = snapshot_of(1, [first, second])
        chained = compose(effective_of_pool(first, Direction.ZERO_FOR_ONE), effective_of_pool(second, Direction.ZERO_FOR_ONE))
        for x in random_inputs(rng, 64):
            assert chained.eval(x) == pytest.approx(float(route_output_exact(hops, snapshot, x)), rel=1e-9)


def test_three_hop_route_with_real_decimals():
    pools = [usd_pool("a", USDC, ETH), usd_pool("b", ETH, USDT), usd_pool("c", USDC, USDT, skew=1.02)]
    snapshot = snapshot_of(5, pools)
    hops = [
        Hop(pool=pools[0], direction=Direction.ZERO_FOR_ONE),
        Hop(pool=pools[1], direction=Direction.ZERO_FOR_ONE),
        Hop(pool=pools[2], direction=Direction.ONE_FOR_ZERO),
    ]
    ep = reduce_hops(hops, snapshot)
    for x in (10**6, 10**9, 10**11):
        assert ep.eval(x) == pytest.approx(float(route_output_exact(hops, snapshot, x)), rel=1e-12)
        assert route_output(hops, snapshot, x) == int(route_output_exact(hops, snapshot, x))


def test_compose_rejects_token_mismatch():
    ab = EffectivePool(2.0, 1.0, 1.0, A, B)
    ac = EffectivePool(2.0, 1.0, 1.0, A, C)
    with pytest.raises(DomainError):
        compose(ab, ac)


def test_reduce_hops_missing_pool_is_unavailable():
    pool = make_pool("p", A, B, 10, 10)
    with pytest.raises(PathUnavailableError):
        reduce_hops([Hop(pool=pool, direction=Direction.ZERO_FOR_ONE)], snapshot_of(3, []))


def test_effective_pool_requires_positive_coefficients():
    with pytest.raises(DomainError):
        EffectivePool(0.0, 1.0, 1.0, A, B)


def test_inverse_marginal_roundtrip():
    ep = EffectivePool(4.0, 1.0, 1.0, A, A)
    for lam in (0.01, 0.5, 1.0, 3.9):
        x = inverse_marginal(ep, lam)
        assert marginal(ep, x) == pytest.approx(lam, rel=1e-12)
    assert inverse_marginal(ep, 4.0) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("lam", [0.0, -1.0, 4.5])
def test_inverse_marginal_out_of_range(lam):
    with pytest.raises(DomainError):
        inverse_marginal(EffectivePool(4.0, 1.0, 1.0, A, A), lam)


def test_eval_rejects_negative_input():
    with pytest.raises(DomainError):
        EffectivePool(4.0, 1.0, 1.0, A, A).eval(-1)
