"""Partition attributed networks by minimizing the content map equation."""
__version__ = "0.1.0"
