"""Numerical study of exponentially small separatrix splitting at a saddle-center."""
__version__ = "0.1.0"
