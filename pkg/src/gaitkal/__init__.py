"""Step-aware INS correction for handheld phones walking in a straight line."""

__version__ = "0.1.0"
