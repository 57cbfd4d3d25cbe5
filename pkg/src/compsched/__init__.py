"""Multi-cell CoMP downlink simulator with channel-norm-based user scheduling."""

__version__ = "0.1.0"
