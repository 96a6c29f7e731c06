"""Space-time optimal transport between planar Brownian exit laws."""

__version__ = "0.1.0"
