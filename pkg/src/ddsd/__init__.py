"""Device-directed speech detection from acoustic, decoder and 1-best features."""

__version__ = "0.1.0"
