"""Numerical tools for multivalued semiflows."""
__version__ = "0.1.0"
