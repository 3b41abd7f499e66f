"""gridgate: a lightweight grid gateway with dynamic proxy delegation."""

__version__ = "0.1.0"
