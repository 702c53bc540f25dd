"""
Market efficiency analyses over constant-product pools.

Main components:
    - config.py   : Run and synthetic-market configuration (RunConfig, GeneratorConfig)
    - graph.py    : Pool graph and named networks (PoolGraph)
    - ingest.py   : Input files, snapshots and consistency checks
    - routing.py  : Path enumeration, optimal split and trade audits (RouteAuditor)
    - arbitrage.py: Cycle enumeration and per-block scans (ArbScanner)
    - metrics.py  : Aggregates, daily series and report files
    - generator.py: Synthetic formula-consistent market (MarketGenerator)
    - cli.py      : Command-line entry point
"""

from .arbitrage import ArbScanner
from .config import GeneratorConfig, RunConfig
from .generator import MarketGenerator
from .graph import PoolGraph
from .routing import RouteAuditor

__all__ = ["ArbScanner", "GeneratorConfig", "MarketGenerator", "PoolGraph", "RouteAuditor", "RunConfig"]
