"""
Constant-product swap math.

Swaps are evaluated exactly with Fraction and floored to base units only at
the final output. Pools, multi-hop paths and cycles all reduce to one
EffectivePool g(x) = a*x / (b + c*x), which the solvers work on in floats.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Tuple

from .errors import DomainError
from .schemas import BlockSnapshot, Direction, Hop, Pool, TokenId, TradePath


# ══════════════════════════════════════════════════════════════════════════════
#  SINGLE POOL
# ══════════════════════════════════════════════════════════════════════════════

def _require_active(pool: Pool) -> None:
    if not pool.active:
        raise DomainError(f"pool {pool.id} is inactive (zero reserve)")


def swap_out_exact(pool: Pool, direction: Direction, amount_in: Fraction) -> Fraction:
    """Un-floored output of swapping amount_in through pool."""
    _require_active(pool)
    if amount_in < 0:
        raise DomainError("amount_in must be non-negative")
    reserve_in, reserve_out = pool.reserves_for(direction)
    effective_in = (1 - pool.fee) * amount_in
    return reserve_out * effective_in / (reserve_in + effective_in)


def swap_out(pool: Pool, direction: Direction, amount_in: int) -> int:
    """Output in base units, floored from the exact rational value."""
    return math.floor(swap_out_exact(pool, direction, Fraction(amount_in)))


def spot_price(pool: Pool, direction: Direction) -> Fraction:
    """Marginal input paid per unit of output at zero trade size."""
    _require_active(pool)
    reserve_in, reserve_out = pool.reserves_for(direction)
    return Fraction(reserve_in) / (reserve_out * (1 - pool.fee))


# ══════════════════════════════════════════════════════════════════════════════
#  EFFECTIVE POOL
# ══════════════════════════════════════════════════════════════════════════════

@dataclass(frozen=True)
class EffectivePool:
    """g(x) = a*x / (b + c*x) for a pool, a path or a cycle."""
    a: float
    b: float
    c: float
    in_token: TokenId
    out_token: TokenId

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise DomainError(f"effective pool coefficients must be positive: {self.a}, {self.b}, {self.c}")

    @property
    def marginal_at_zero(self) -> float:
        return self.a / self.b

    @property
    def supremum(self) -> float:
        return self.a / self.c

    def eval(self, x: float) -> float:
        if x < 0:
            raise DomainError("x must be non-negative")
        return self.a * x / (self.b + self.c * x)

    def marginal(self, x: float) -> float:
        if x < 0:
            raise DomainError("x must be non-negative")
        denom = self.b + self.c * x
        return self.a * self.b / (denom * denom)

    def inverse_marginal(self, lam: float) -> float:
        """Input at which the marginal output equals lam."""
        if not 0 < lam <= self.marginal_at_zero:
            raise DomainError(f"marginal rate {lam} outside (0, {self.marginal_at_zero}]")
        return max(0.0, (math.sqrt(self.a) * math.sqrt(self.b / lam) - self.b) / self.c)


def eval(ep: EffectivePool, x: float) -> float:  # noqa: A001
    return ep.eval(x)


def marginal(ep: EffectivePool, x: float) -> float:
    return ep.marginal(x)


def inverse_marginal(ep: EffectivePool, lam: float) -> float:
    return ep.inverse_marginal(lam)


def _pool_coefficients(pool: Pool, direction: Direction) -> Tuple[Fraction, Fraction, Fraction]:
    _require_active(pool)
    reserve_in, reserve_out = pool.reserves_for(direction)
    gamma = 1 - pool.fee
    return reserve_out * gamma, Fraction(reserve_in), gamma


def _compose_coefficients(first, second):
    a1, b1, c1 = first
    a2, b2, c2 = second
    return a1 * a2, b1 * b2, b2 * c1 + c2 * a1


def _to_float(coefficients, in_token: TokenId, out_token: TokenId) -> EffectivePool:
    a, b, c = coefficients
    return EffectivePool(float(a), float(b), float(c), in_token, out_token)


def effective_of_pool(pool: Pool, direction: Direction) -> EffectivePool:
    return _to_float(_pool_coefficients(pool, direction), pool.token_in(direction), pool.token_out(direction))


def compose(first: EffectivePool, second: EffectivePool) -> EffectivePool:
    """Effective pool of feeding first's output into second."""
    if first.out_token != second.in_token:
        raise DomainError(f"cannot chain {first.out_token} output into {second.in_token} input")
    a, b, c = _compose_coefficients((first.a, first.b, first.c), (second.a, second.b, second.c))
    return EffectivePool(a, b, c, first.in_token, second.out_token)


def reduce_hops(hops: Sequence[Hop], snapshot: BlockSnapshot) -> EffectivePool:
    """
    Fold the hops into one effective pool using the snapshot's reserves.

    The fold runs in exact rationals and converts to floats once, so long
    routes do not accumulate rounding. Raises PathUnavailableError when a
    pool is missing or inactive.
    """
    states = [(snapshot.pool_state(hop.pool), hop.direction) for hop in hops]
    coefficients = _pool_coefficients(*states[0])
    for pool, direction in states[1:]:
        coefficients = _compose_coefficients(coefficients, _pool_coefficients(pool, direction))
    return _to_float(coefficients, hops[0].token_in, hops[-1].token_out)


def reduce_path(path: TradePath, snapshot: BlockSnapshot) -> EffectivePool:
    return reduce_hops(path.hops, snapshot)


def route_output_exact(hops: Iterable[Hop], snapshot: BlockSnapshot, amount_in: int) -> Fraction:
    """Chained exact output of a route; no flooring between hops."""
    amount = Fraction(amount_in)
    for hop in hops:
        amount = swap_out_exact(snapshot.pool_state(hop.pool), hop.direction, amount)
    return amount


def route_output(hops: Iterable[Hop], snapshot: BlockSnapshot, amount_in: int) -> int:
    return math.floor(route_output_exact(hops, snapshot, amount_in))
