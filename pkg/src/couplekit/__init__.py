"""couplekit: surrogate-based design coupling analysis."""

__version__ = "0.1.0"
