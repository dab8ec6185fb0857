"""Dense simulation of non-unitary search gates, their unitary dilations,
amplitude amplification of the ancilla, multi-database search and set
grouping circuits."""

from .experiments import ExperimentConfig, ExperimentResult, run
from .operators import APolicy

__all__ = ["APolicy", "ExperimentConfig", "ExperimentResult", "run"]
__version__ = "0.1.0"
