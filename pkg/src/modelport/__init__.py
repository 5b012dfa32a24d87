"""Model packaging, cataloging, serving, and composition."""

__version__ = "0.1.0"
