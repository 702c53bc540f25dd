"""
Pool graph and network configuration.

Tokens are nodes; every pool contributes one directed edge per swap
direction, keyed by pool id, so parallel pools of different venues stay
distinct edges.
"""

from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence

import networkx as nx
from pydantic import BaseModel, Field, field_validator, model_validator

from core.errors import ConfigError
from core.schemas import Direction, Hop, Pool, TokenId, Venue

MOST_LIQUID = "most_liquid"
LEAST_LIQUID = "least_liquid"


# ══════════════════════════════════════════════════════════════════════════════
#  CONFIGURATION
# ══════════════════════════════════════════════════════════════════════════════

class PathSetConfig(BaseModel):
    """Which pools candidate trade paths may use."""
    allowed_pools: List[str] = Field(default_factory=list, description="Empty means every pool of the graph")
    max_hops: int = Field(default=2, ge=1)
    include_both_direct_venues: bool = True
    multi_hop_preference: str = Field(
        default=MOST_LIQUID,
        description="most_liquid, least_liquid, or a venue name preferred for multi-hop legs",
    )


class CycleNetworkConfig(BaseModel):
    pools: List[str] = Field(min_length=1)
    base_tokens: List[str] = Field(default_factory=list)
    max_cycle_len: int = Field(default=4, ge=2)


class PoolSpec(BaseModel):
    id: str = Field(min_length=1)
    venue: Venue
    token0: str
    token1: str
    fee: str = "3/1000"

    @field_validator("fee", mode="before")
    @classmethod
    def _fee_text(cls, value: object) -> str:
        return str(value)


class PoolGraphConfig(BaseModel):
    """Tokens, pools and the named path/cycle networks over them."""
    tokens: List[TokenId] = Field(min_length=2)
    pools: List[PoolSpec]
    path_networks: Dict[str, PathSetConfig] = Field(default_factory=dict)
    cycle_networks: Dict[str, CycleNetworkConfig] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _references_resolve(self) -> "PoolGraphConfig":
        symbols = [token.symbol for token in self.tokens]
        if len(set(symbols)) != len(symbols):
            raise ValueError("duplicate token symbol")
        ids = [pool.id for pool in self.pools]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate pool id")
        for pool in self.pools:
            for symbol in (pool.token0, pool.token1):
                if symbol not in symbols:
                    raise ValueError(f"pool {pool.id} references unknown token {symbol}")
        known = set(ids)
        for name, network in self.path_networks.items():
            unknown = set(network.allowed_pools) - known
            if unknown:
                raise ValueError(f"path network {name} references unknown pools {sorted(unknown)}")
        for name, network in self.cycle_networks.items():
            unknown = set(network.pools) - known
            if unknown:
                raise ValueError(f"cycle network {name} references unknown pools {sorted(unknown)}")
            stray = set(network.base_tokens) - set(symbols)
            if stray:
                raise ValueError(f"cycle network {name} references unknown tokens {sorted(stray)}")
        return self

    def token(self, symbol: str) -> TokenId:
        for token in self.tokens:
            if token.symbol == symbol:
                return token
        raise ConfigError(f"unknown token {symbol}")

    def build_pools(self) -> Dict[str, Pool]:
        return {
            spec.id: Pool(
                id=spec.id,
                venue=spec.venue,
                token0=self.token(spec.token0),
                token1=self.token(spec.token1),
                fee=Fraction(spec.fee),
            )
            for spec in self.pools
        }

    def path_network(self, name: str) -> PathSetConfig:
        if name not in self.path_networks:
            raise ConfigError(f"unknown path network {name!r}; known: {sorted(self.path_networks)}")
        return self.path_networks[name]

    def cycle_network(self, name: str) -> CycleNetworkConfig:
        if name not in self.cycle_networks:
            raise ConfigError(f"unknown cycle network {name!r}; known: {sorted(self.cycle_networks)}")
        return self.cycle_networks[name]


# ══════════════════════════════════════════════════════════════════════════════
#  GRAPH
# ══════════════════════════════════════════════════════════════════════════════

class PoolGraph:
    """Directed multigraph of pools over token symbols."""

    def __init__(self, pools: Iterable[Pool]):
        self.graph = nx.MultiDiGraph()
        self._pools: Dict[str, Pool] = {}
        for pool in sorted(pools, key=lambda p: p.id):
            self._pools[pool.id] = pool
            t0, t1 = pool.token0.symbol, pool.token1.symbol
            self.graph.add_edge(t0, t1, key=pool.id, pool=pool, direction=Direction.ZERO_FOR_ONE)
            self.graph.add_edge(t1, t0, key=pool.id, pool=pool, direction=Direction.ONE_FOR_ZERO)

    @classmethod
    def from_config(cls, config: PoolGraphConfig, pool_ids: Optional[Sequence[str]] = None) -> "PoolGraph":
        pools = config.build_pools()
        if pool_ids:
            pools = {pool_id: pools[pool_id] for pool_id in pool_ids}
        return cls(pools.values())

    @property
    def pools(self) -> List[Pool]:
        return list(self._pools.values())

    @property
    def tokens(self) -> List[str]:
        return sorted(self.graph.nodes)

    def pool(self, pool_id: str) -> Pool:
        try:
            return self._pools[pool_id]
        except KeyError:
            raise ConfigError(f"unknown pool {pool_id}") from None

    def has_pool(self, pool_id: str) -> bool:
        return pool_id in self._pools

    def restricted(self, pool_ids: Iterable[str]) -> "PoolGraph":
        wanted = set(pool_ids)
        return PoolGraph(pool for pool in self.pools if pool.id in wanted)

    def pools_between(self, token_in: str, token_out: str) -> List[Pool]:
        """Pools swapping token_in for token_out, ordered by id."""
        if not self.graph.has_edge(token_in, token_out):
            return []
        edges = self.graph.get_edge_data(token_in, token_out)
        return [edges[key]["pool"] for key in sorted(edges)]

    def hop(self, pool_id: str, token_in: str) -> Hop:
        pool = self.pool(pool_id)
        return Hop(pool=pool, direction=pool.direction_from(token_in))

    def token_digraph(self) -> nx.DiGraph:
        """Token-level view with parallel pools collapsed."""
        return nx.DiGraph(self.graph)
