"""maskcheck: exact and symbolic probing-security verification for masking gadgets."""

__version__ = "0.1.0"
