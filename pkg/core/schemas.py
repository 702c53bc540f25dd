"""Pydantic schemas for pools, paths, snapshots and the records read or written by the toolkit."""

from datetime import date, datetime, timezone
from enum import Enum
from fractions import Fraction
from typing import Annotated, Dict, List, Mapping, Optional, Tuple

from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    computed_field,
    Field,
    PlainSerializer,
    StringConstraints,
    field_serializer,
    field_validator,
    model_validator,
)

from .errors import DomainError, PathUnavailableError


def _parse_fraction(value: object) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # go through the decimal text so 0.003 stays 3/1000
        return Fraction(repr(value))
    if isinstance(value, (int, str)):
        return Fraction(value)
    raise ValueError(f"cannot read {value!r} as an exact rational")


# Token amounts travel as decimal strings so they survive 53-bit JSON readers.
BaseUnits = Annotated[
    int,
    Field(ge=0),
    PlainSerializer(lambda v: str(v), return_type=str, when_used="json"),
]

Venue = Annotated[str, StringConstraints(min_length=1, strip_whitespace=True, to_lower=True)]
UNISWAP = "uniswap"
SUSHISWAP = "sushiswap"


# ══════════════════════════════════════════════════════════════════════════════
#  POOLS AND PATHS
# ══════════════════════════════════════════════════════════════════════════════

class TokenId(BaseModel):
    """A token and its base-unit scale."""
    model_config = ConfigDict(frozen=True)

    symbol: str = Field(min_length=1)
    decimals: int = Field(default=18, ge=0, le=38)

    def to_units(self, amount: float) -> float:
        """Convert base units to whole tokens."""
        return amount / 10 ** self.decimals

    def __str__(self) -> str:
        return self.symbol


class Direction(str, Enum):
    """Which side of a pool is the input."""
    ZERO_FOR_ONE = "0>1"
    ONE_FOR_ZERO = "1>0"

    @property
    def reverse(self) -> "Direction":
        return Direction.ONE_FOR_ZERO if self is Direction.ZERO_FOR_ONE else Direction.ZERO_FOR_ONE


class Pool(BaseModel):
    """
    A two-token constant-product pool.

    Pools read from the graph config carry zero reserves; a snapshot supplies
    the reserves of a given block through with_reserves().
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    id: str = Field(min_length=1)
    venue: Venue
    token0: TokenId
    token1: TokenId
    reserve0: BaseUnits = 0
    reserve1: BaseUnits = 0
    fee: Annotated[Fraction, BeforeValidator(_parse_fraction)] = Fraction(3, 1000)

    @field_validator("fee")
    @classmethod
    def _fee_range(cls, fee: Fraction) -> Fraction:
        if not 0 <= fee < 1:
            raise ValueError("fee must lie in [0, 1)")
        return fee

    @model_validator(mode="after")
    def _distinct_tokens(self) -> "Pool":
        if self.token0 == self.token1:
            raise ValueError("token0 and token1 must differ")
        return self

    @field_serializer("fee")
    def _dump_fee(self, fee: Fraction) -> str:
        return str(fee)

    @property
    def active(self) -> bool:
        return self.reserve0 > 0 and self.reserve1 > 0

    @property
    def tokens(self) -> Tuple[TokenId, TokenId]:
        return self.token0, self.token1

    def token_in(self, direction: Direction) -> TokenId:
        return self.token0 if direction is Direction.ZERO_FOR_ONE else self.token1

    def token_out(self, direction: Direction) -> TokenId:
        return self.token1 if direction is Direction.ZERO_FOR_ONE else self.token0

    def direction_from(self, token_in: str) -> Direction:
        """Direction whose input side is the token with symbol token_in."""
        if token_in == self.token0.symbol:
            return Direction.ZERO_FOR_ONE
        if token_in == self.token1.symbol:
            return Direction.ONE_FOR_ZERO
        raise DomainError(f"{token_in} is not traded in pool {self.id}")

    def reserves_for(self, direction: Direction) -> Tuple[int, int]:
        """(input-side reserve, output-side reserve)."""
        if direction is Direction.ZERO_FOR_ONE:
            return self.reserve0, self.reserve1
        return self.reserve1, self.reserve0

    def with_reserves(self, reserve0: int, reserve1: int) -> "Pool":
        return self.model_copy(update={"reserve0": reserve0, "reserve1": reserve1})

    def after_swap(self, direction: Direction, amount_in: int, amount_out: int) -> "Pool":
        """Pool state after a swap with the given in/out amounts."""
        if direction is Direction.ZERO_FOR_ONE:
            return self.with_reserves(self.reserve0 + amount_in, self.reserve1 - amount_out)
        return self.with_reserves(self.reserve0 - amount_out, self.reserve1 + amount_in)


class Hop(BaseModel):
    """One swap through one pool."""
    model_config = ConfigDict(frozen=True)

    pool: Pool
    direction: Direction

    @property
    def token_in(self) -> TokenId:
        return self.pool.token_in(self.direction)

    @property
    def token_out(self) -> TokenId:
        return self.pool.token_out(self.direction)

    @property
    def key(self) -> str:
        return f"{self.pool.id}:{self.token_in.symbol}>{self.token_out.symbol}"


def _check_hops(hops: Tuple[Hop, ...]) -> None:
    if not hops:
        raise ValueError("a route needs at least one hop")
    for prev, nxt in zip(hops, hops[1:]):
        if prev.token_out != nxt.token_in:
            raise ValueError(f"hop {prev.key} does not chain into {nxt.key}")
    pool_ids = [hop.pool.id for hop in hops]
    if len(set(pool_ids)) != len(pool_ids):
        raise ValueError("a pool appears twice on the route")


class TradePath(BaseModel):
    """An ordered chain of hops from in_token to out_token."""
    model_config = ConfigDict(frozen=True)

    hops: Tuple[Hop, ...]

    @model_validator(mode="after")
    def _chained(self) -> "TradePath":
        _check_hops(self.hops)
        return self

    @property
    def in_token(self) -> TokenId:
        return self.hops[0].token_in

    @property
    def out_token(self) -> TokenId:
        return self.hops[-1].token_out

    @property
    def pool_ids(self) -> Tuple[str, ...]:
        return tuple(hop.pool.id for hop in self.hops)

    @property
    def intermediate_tokens(self) -> Tuple[str, ...]:
        return tuple(hop.token_out.symbol for hop in self.hops[:-1])

    @property
    def key(self) -> str:
        return ">".join(self.pool_ids)

    def __len__(self) -> int:
        return len(self.hops)


class Cycle(BaseModel):
    """A directed cycle of hops that starts and ends in base_token."""
    model_config = ConfigDict(frozen=True)

    hops: Tuple[Hop, ...]
    canonical_key: str

    @model_validator(mode="after")
    def _closed(self) -> "Cycle":
        _check_hops(self.hops)
        if len(self.hops) < 2:
            raise ValueError("a cycle needs at least two hops")
        if self.hops[0].token_in != self.hops[-1].token_out:
            raise ValueError("cycle does not return to its start token")
        return self

    @property
    def base_token(self) -> TokenId:
        return self.hops[0].token_in

    @property
    def pool_ids(self) -> Tuple[str, ...]:
        return tuple(hop.pool.id for hop in self.hops)

    def __len__(self) -> int:
        return len(self.hops)


class BlockSnapshot(BaseModel):
    """Pool reserves as of the beginning of a block."""
    model_config = ConfigDict(frozen=True)

    block: int = Field(ge=0)
    reserves: Mapping[str, Tuple[int, int]]

    def pool_state(self, pool: Pool) -> Pool:
        """Pool with this block's reserves; raises if missing or inactive."""
        state = self.reserves.get(pool.id)
        if state is None or state[0] <= 0 or state[1] <= 0:
            raise PathUnavailableError(pool.id, self.block)
        return pool.with_reserves(*state)

    def has_active(self, pool_id: str) -> bool:
        state = self.reserves.get(pool_id)
        return state is not None and state[0] > 0 and state[1] > 0


# ══════════════════════════════════════════════════════════════════════════════
#  INPUT RECORDS
# ══════════════════════════════════════════════════════════════════════════════

class SwapEvent(BaseModel):
    """One swap log, with the subgraph's USD value when known."""
    model_config = ConfigDict(frozen=True)

    block: int = Field(ge=0)
    tx_hash: str = Field(min_length=1)
    tx_index: int = Field(ge=0)
    log_index: int = Field(ge=0)
    pool_id: str = Field(min_length=1)
    token_in: str = Field(min_length=1)
    token_out: str = Field(min_length=1)
    amount_in: Annotated[BaseUnits, Field(gt=0)]
    amount_out: BaseUnits
    usd_value: Optional[float] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _distinct_tokens(self) -> "SwapEvent":
        if self.token_in == self.token_out:
            raise ValueError("token_in and token_out must differ")
        return self

    @property
    def ordering_key(self) -> Tuple[int, int, int]:
        return self.block, self.tx_index, self.log_index


class ReserveRecord(BaseModel):
    """Pool reserves at the END of a block."""
    model_config = ConfigDict(frozen=True)

    block: int = Field(ge=0)
    pool_id: str = Field(min_length=1)
    reserve0: BaseUnits
    reserve1: BaseUnits


class PriceRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    token: str = Field(min_length=1)
    day: date
    price: float = Field(gt=0)
    high: Optional[float] = Field(default=None, gt=0)
    low: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _range(self) -> "PriceRecord":
        if (self.high is None) != (self.low is None):
            raise ValueError("high and low must be given together")
        if self.high is not None and self.high < self.low:
            raise ValueError("high must not be below low")
        return self


class BlockRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    block: int = Field(ge=0)
    timestamp: Annotated[int, PlainSerializer(lambda v: str(v), return_type=str, when_used="json")]

    @property
    def day(self) -> date:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc).date()


# ══════════════════════════════════════════════════════════════════════════════
#  RESULT RECORDS
# ══════════════════════════════════════════════════════════════════════════════

class PathShare(BaseModel):
    model_config = ConfigDict(frozen=True)

    path: str
    amount_in: float
    share: float


class AuditResult(BaseModel):
    """Outcome of re-routing one historical trade."""
    model_config = ConfigDict(frozen=True)

    block: int
    tx_hash: str
    tx_index: int
    log_index: int
    network: str
    pool_id: str
    token_in: str
    token_out: str
    amount_in: BaseUnits
    recorded_output: BaseUnits
    original_output: BaseUnits = 0
    optimal_output: BaseUnits = 0
    gain_tokens: int = 0
    gain_usd: float = 0.0
    gain_pct: float = 0.0
    paths_available: int = 0
    paths_used: int = 0
    shares: List[PathShare] = Field(default_factory=list)
    optimizable: bool = False
    auditable: bool = True
    skip_reason: Optional[str] = None

    @property
    def ordering_key(self) -> Tuple[int, int, int]:
        return self.block, self.tx_index, self.log_index


class CycleOpportunity(BaseModel):
    """A cycle that is profitable above threshold at one block."""
    model_config = ConfigDict(frozen=True)

    block: int
    cycle_key: str
    pools: List[str]
    base_token: str
    alpha_star: float = Field(gt=0)
    profit: float = Field(gt=0)
    exact_profit: int
    relative_profit_pct: float = Field(gt=0)
    profit_usd: float


class OpportunityRun(BaseModel):
    """Consecutive blocks over which one cycle stayed profitable."""
    model_config = ConfigDict(frozen=True)

    cycle_key: str
    start_block: int
    end_block: int
    # closed by a block with no snapshot rather than by the cycle turning unprofitable
    ended_by_gap: bool = False

    @model_validator(mode="after")
    def _ordered(self) -> "OpportunityRun":
        if self.end_block < self.start_block:
            raise ValueError("end_block precedes start_block")
        return self

    @computed_field
    @property
    def duration_blocks(self) -> int:
        return self.end_block - self.start_block + 1


# Grouped by result file, used when reading results back.
RESULT_MODELS: Dict[str, type] = {
    "audits": AuditResult,
    "opportunities": CycleOpportunity,
    "runs": OpportunityRun,
}
