"""Galerkin-truncated stochastic 2D Navier-Stokes: forcing geometry, tangent flows,
Malliavin matrices, control constructions and coupling distances."""

import os as _os

# thread override has to land before numpy loads its BLAS
_threads = _os.environ.get("NS2DLAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ[_var] = _threads

from .forcing import FORCING_SPANNING, FORCING_AXES, FORCING_EVEN, Classification, classify  # noqa: E402
from .integrator import IntegratorConfig, NoiseModel, simulate, simulate_ensemble  # noqa: E402
from .spectral import ConfigurationError, SpectralGrid, VorticityField, get_grid  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "FORCING_SPANNING", "FORCING_AXES", "FORCING_EVEN", "Classification", "classify",
    "IntegratorConfig", "NoiseModel", "simulate", "simulate_ensemble",
    "ConfigurationError", "SpectralGrid", "VorticityField", "get_grid",
]
