"""Transformer-encoder ensembles for sexism detection, built from scratch on numpy."""

__version__ = "0.1.0"
