"""Clone and clone-bug detection for Solidity via token-stream embeddings."""

__version__ = "0.1.0"
