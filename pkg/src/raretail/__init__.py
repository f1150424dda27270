"""Rare-event probabilities P(S_n > gamma) for sums of i.i.d. variables."""

__version__ = "0.1.0"
