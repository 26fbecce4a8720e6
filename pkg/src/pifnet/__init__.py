"""pifnet - simulator and stability toolkit for perfect integrate-and-fire inhibitory networks."""

__version__ = "0.1.0"
