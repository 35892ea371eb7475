"""Active search over frozen embeddings with neighbor-restricted candidate pools."""

__version__ = "0.1.0"
