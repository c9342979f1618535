"""Energy-aware edge-cloud orchestration simulator."""

__version__ = "0.1.0"
