"""Frame-sequence multi-label video classification on synthetic corpora."""
__version__ = "0.1.0"
