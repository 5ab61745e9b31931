"""Learning unknown quantum processes from randomized product-state experiments."""
__version__ = "0.1.0"
