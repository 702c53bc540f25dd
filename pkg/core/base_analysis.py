"""Base analysis class."""

import os
from abc import ABC, abstractmethod
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Generic, List, Optional, Sequence, TypeVar

from loguru import logger
from pydantic import BaseModel, Field, model_validator

ItemT = TypeVar("ItemT")
ResultT = TypeVar("ResultT")


class AnalysisConfig(BaseModel):
    """Options shared by every batch analysis."""
    jobs: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    from_block: Optional[int] = Field(default=None, ge=0)
    to_block: Optional[int] = Field(default=None, ge=0)
    output_dir: Path = Path("data/results")
    random_seed: Optional[int] = None

    @model_validator(mode="after")
    def _block_range(self) -> "AnalysisConfig":
        if self.from_block is not None and self.to_block is not None and self.to_block < self.from_block:
            raise ValueError(f"empty block range {self.from_block}..{self.to_block}")
        return self

    def in_range(self, block: int) -> bool:
        if self.from_block is not None and block < self.from_block:
            return False
        if self.to_block is not None and block > self.to_block:
            return False
        return True


class BaseAnalysis(ABC, Generic[ItemT, ResultT]):
    """
    Base class for batch analyses. Implement analyze_item().

    Items are independent; run() fans them out over `jobs` worker processes
    and returns results in input order, so output never depends on the
    degree of parallelism.
    """

    name: str = "analysis"

    def __init__(self, config: AnalysisConfig):
        self.config = config

    @abstractmethod
    def analyze_item(self, item: ItemT) -> ResultT:
        """Analyze one item. Must be pure given the instance's inputs."""

    def run(self, items: Sequence[ItemT]) -> List[ResultT]:
        """Analyze all items, merged in input order."""
        items = list(items)
        jobs = min(self.config.jobs, max(len(items), 1))
        logger.info(f"{self.name}: {len(items)} items on {jobs} worker(s)")
        if jobs == 1:
            results = [self.analyze_item(item) for item in items]
        else:
            chunksize = max(1, len(items) // (jobs * 4))
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(self.analyze_item, items, chunksize=chunksize))
        logger.info(f"{self.name}: done")
        return results
