"""Session-based social recommendation with dynamic graph attention."""

__version__ = "0.1.0"
