"""Employee turnover risk modeling and retention-policy simulation."""

__version__ = "0.1.0"
