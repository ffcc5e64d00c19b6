"""CHSH analysis with sound inference, and rank-frequency model selection."""

__version__ = "0.1.0"
