"""
╔══════════════════════════════════════════════════════════════════════════════╗
║                    MARKET EFFICIENCY RUN CONFIGURATION                        ║
║                                                                               ║
║  Configuration for route audits, arbitrage scans, reports and synthetic       ║
║  datasets. Inherits common settings from core.AnalysisConfig                  ║
╚══════════════════════════════════════════════════════════════════════════════╝
"""

from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, model_validator

from core import AnalysisConfig

DEFAULT_GRAPH = Path(__file__).resolve().parent / "networks" / "default_networks.json"


class PeriodSpec(BaseModel):
    """A named block range reported on its own."""
    name: str = Field(min_length=1)
    from_block: int = Field(ge=0)
    to_block: int = Field(ge=0)

    @model_validator(mode="after")
    def _ordered(self) -> "PeriodSpec":
        if self.to_block < self.from_block:
            raise ValueError(f"period {self.name} is empty")
        return self

    @classmethod
    def parse(cls, text: str) -> "PeriodSpec":
        """Read NAME:FROM_BLOCK:TO_BLOCK."""
        parts = text.rsplit(":", 2)
        if len(parts) != 3:
            raise ValueError(f"period {text!r} is not NAME:FROM_BLOCK:TO_BLOCK")
        name, start, end = parts
        return cls(name=name, from_block=int(start), to_block=int(end))

    def contains(self, block: int) -> bool:
        return self.from_block <= block <= self.to_block


class RunConfig(AnalysisConfig):
    """
    Settings for one subcommand run.

    Inherited from AnalysisConfig:
        - jobs: int                  # Worker processes
        - from_block: Optional[int]  # First block analyzed (inclusive)
        - to_block: Optional[int]    # Last block analyzed (inclusive)
        - output_dir: Path           # Where results are written
        - random_seed: Optional[int] # For synthetic data
    """

    subcommand: str = "route-audit"

    # ══════════════════════════════════════════════════════════════════════════
    #  INPUT FILES
    # ══════════════════════════════════════════════════════════════════════════

    events: Optional[Path] = None
    reserves: Optional[Path] = None
    prices: Optional[Path] = None
    blocks: Optional[Path] = None
    graph: Path = Field(default=DEFAULT_GRAPH, description="Pool graph and named networks")
    results: Optional[Path] = Field(default=None, description="Directory holding audit and scan results; defaults to output_dir")

    # ══════════════════════════════════════════════════════════════════════════
    #  THRESHOLDS
    # ══════════════════════════════════════════════════════════════════════════

    min_trade_usd: float = Field(default=30_000.0, gt=0, description="Only trades at least this large are audited")
    min_gain_usd: float = Field(default=30.0, gt=0, description="Gain above which a trade counts as optimizable")
    min_profit_usd: float = Field(default=30.0, gt=0, description="Profit above which a cycle counts as an opportunity")
    path_usage_threshold: float = Field(default=0.001, gt=0, lt=1, description="Share of input for a path to count as used")
    consistency_tolerance: float = Field(default=1e-6, gt=0)
    check_closure: bool = Field(default=True, description="validate also replays each block into the next snapshot")

    # ══════════════════════════════════════════════════════════════════════════
    #  NETWORKS
    # ══════════════════════════════════════════════════════════════════════════

    path_network: str = Field(default="more_liquid")
    cycle_network: str = Field(default="period_2")
    max_hops: Optional[int] = Field(default=None, ge=1, description="Overrides the path network's max_hops")
    max_cycle_len: Optional[int] = Field(default=None, ge=2, description="Overrides the cycle network's max_cycle_len")
    volatility_token: str = Field(default="ETH")
    periods: List[PeriodSpec] = Field(default_factory=list)

    @model_validator(mode="after")
    def _inputs_for_subcommand(self) -> "RunConfig":
        required = {
            "route-audit": ("events", "reserves", "prices", "blocks"),
            "arb-scan": ("reserves", "prices", "blocks"),
            "validate": ("events", "reserves"),
            "report": ("blocks", "prices"),
            "generate": (),
        }.get(self.subcommand)
        if required is None:
            raise ValueError(f"unknown subcommand {self.subcommand}")
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            flags = ", ".join(f"--{name}" for name in missing)
            raise ValueError(f"{self.subcommand} needs {flags}")
        return self

    @property
    def results_dir(self) -> Path:
        return self.results if self.results is not None else self.output_dir

    def provenance(self) -> dict:
        """Parameters stamped into every report."""
        return {
            "from_block": self.from_block,
            "to_block": self.to_block,
            "min_trade_usd": self.min_trade_usd,
            "min_gain_usd": self.min_gain_usd,
            "min_profit_usd": self.min_profit_usd,
            "path_usage_threshold": self.path_usage_threshold,
            "path_network": self.path_network,
            "cycle_network": self.cycle_network,
            "max_hops": self.max_hops,
            "max_cycle_len": self.max_cycle_len,
            "volatility_token": self.volatility_token,
            "periods": [period.model_dump() for period in self.periods],
        }


class GeneratorConfig(AnalysisConfig):
    """
    Synthetic market settings.

    Reserves, swaps and prices are drawn from random_seed and every swap
    output follows the constant-product formula, so the dataset validates
    with zero consistency flags.
    """

    graph: Path = Field(default=DEFAULT_GRAPH)
    network: str = Field(default="period_2", description="Cycle network whose pools are simulated")

    # ══════════════════════════════════════════════════════════════════════════
    #  CHAIN SETTINGS
    # ══════════════════════════════════════════════════════════════════════════

    num_blocks: int = Field(default=100, ge=1)
    start_block: int = Field(default=11_000_000, ge=1)
    start_timestamp: int = Field(default=1_600_000_000, description="Unix time of start_block")
    block_time: int = Field(default=13, ge=1, description="Seconds between blocks")

    # ══════════════════════════════════════════════════════════════════════════
    #  MARKET SETTINGS
    # ══════════════════════════════════════════════════════════════════════════

    pool_depth_usd: float = Field(default=20_000_000.0, gt=0, description="USD value of each side of a pool")
    swaps_per_block: float = Field(default=2.0, ge=0, description="Mean swaps per block (Poisson)")
    trade_usd_min: float = Field(default=1_000.0, gt=0)
    trade_usd_max: float = Field(default=200_000.0, gt=0)
    multi_swap_share: float = Field(default=0.1, ge=0, le=1, description="Share of transactions carrying two swaps")
    mispricing: float = Field(default=0.0, gt=-1, description="Relative skew applied to SushiSwap pools at start")
    daily_volatility: float = Field(default=0.03, ge=0, description="Std-dev of daily log price moves")

    @model_validator(mode="after")
    def _trade_range(self) -> "GeneratorConfig":
        if self.trade_usd_max < self.trade_usd_min:
            raise ValueError("trade_usd_max must not be below trade_usd_min")
        return self
