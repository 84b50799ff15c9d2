"""Integrated active and passive sensing (IAPS) toolkit for DFRC systems.

Channel and precoder generation, centralized and distributed GLRT detection,
voting fusion, and detection-maximizing power allocation under SINR
constraints, plus Monte Carlo runners for the figure sweeps.
"""

from iaps.config import ScenarioConfig, load_config

__version__ = "0.1.0"

__all__ = ["ScenarioConfig", "load_config", "__version__"]
