"""RF network analysis, lumped-circuit fitting, far-field and MIMO metrics."""

__version__ = "0.1.0"
