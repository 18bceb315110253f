"""Cole-Hopf / heat-kernel integral-mapping solver for potential flows."""

__version__ = "0.1.0"
