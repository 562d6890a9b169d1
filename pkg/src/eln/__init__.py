"""Error loss networks: learnable robust losses and fixed-point training of LIP models."""
__version__ = "0.1.0"
