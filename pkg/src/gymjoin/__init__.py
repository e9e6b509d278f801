"""Multiround distributed joins over generalized hypertree decompositions."""
from gymjoin.kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
