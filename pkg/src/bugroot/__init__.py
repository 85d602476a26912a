"""Bug-report root-cause classification and characterization."""

__version__ = "0.1.0"
