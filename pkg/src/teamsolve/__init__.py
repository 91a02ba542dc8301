"""Team-maxmin equilibria with a coordination device for three-player games."""

__version__ = "0.1.0"
