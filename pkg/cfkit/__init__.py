"""
cfkit: accelerated composite proximal-gradient solvers for group-sparse models.
"""

__version__ = "0.1.0"
