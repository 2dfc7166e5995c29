"""Neural state-space identification with Laplace posteriors and a surprise index."""

__version__ = "0.1.0"
