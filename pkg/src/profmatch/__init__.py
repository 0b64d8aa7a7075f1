"""Cross-network profile matching from public attributes, with an exact
countermeasure optimizer and a synthetic data generator."""

__version__ = "0.1.0"
