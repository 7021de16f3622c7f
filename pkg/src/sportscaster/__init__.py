"""Learning to match, parse, and generate soccer commentary from ambiguous supervision."""

__version__ = "0.1.0"
