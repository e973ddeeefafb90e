"""Group-aware time-series diagnostics for sparse survey panels and annual model panels."""

__version__ = "0.1.0"
