"""
Core framework for amm-efficiency.

Pool math, record schemas, errors, the batch-analysis base class and the
output writer. Analyses built on it live in src/.
"""

from .base_analysis import AnalysisConfig, BaseAnalysis
from .cpmm import EffectivePool
from .errors import AmmAnalysisError
from .output_writer import OutputWriter

__all__ = [
    "AnalysisConfig",
    "BaseAnalysis",
    "EffectivePool",
    "AmmAnalysisError",
    "OutputWriter",
]
