"""Multi-radar mmWave point-cloud fusion, tracking and zone occupancy."""

__version__ = "0.1.0"
