"""Cross-layer adaptive video streaming simulator.

Clients pick chunk quality from their request-queue backlog, helpers run a
max-weight MU-MIMO scheduler on those backlogs, and playback buffers absorb
delivery jitter behind an adaptive pre-buffering threshold.
"""

from .config import SimConfig, config_from_sources
from .engine import SimResult, run, sweep

__version__ = "0.1.0"

__all__ = ["SimConfig", "SimResult", "config_from_sources", "run", "sweep", "__version__"]
