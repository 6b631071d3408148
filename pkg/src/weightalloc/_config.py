"""Shared numerical tolerances and backend selection."""
import os

# adaptive quadrature
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
QUAD_LIMIT = 500
TRUNCATION_SEQUENCE = (1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
# partial integrals may not grow by more than this once truncation is below 1e-6
DIVERGENCE_GROWTH = 0.01
DIVERGENCE_START = 1e-6

# Stieltjes / variance grids
DEFAULT_GRID_SIZE = 4096
DEFAULT_TRUNCATION = 1e-10
REFINEMENT_TOLERANCE = 1e-2

GAUSS_HERMITE_NODES = 64

# Monte Carlo
MAX_FAILURE_FRACTION = 0.01

ENV_DISABLE_NUMBA = "WEIGHTALLOC_DISABLE_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(ENV_DISABLE_NUMBA, "").strip().lower() not in ("1", "true", "yes", "on")
