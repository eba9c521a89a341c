"""Numerical flexibility of Lyapunov exponents for area-preserving Anosov maps of the 2-torus."""
import os

# the installed TBB is too old for numba; pick the portable layer quietly
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

__version__ = "0.1.0"
