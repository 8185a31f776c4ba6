"""Two-medium stochastic heat equation driven by an L2-valued fractional Brownian motion.

Modules: ``core`` (grids, fields), ``fbm`` (paths and seminorms), ``kernel``
(fundamental solution and its bounds), ``fraccalc`` (fractional operators
and the generalized Stieltjes integral), ``noise_field`` (the truncated
noise), ``solver`` (mild-solution map and Picard iteration), ``verify`` and
``cli``.
"""

from .core import SpaceGrid, SpaceTimeField, TimeGrid
from .kernel import MediumParams
from .noise_field import NoiseEnsemble, NoiseSpec
from .solver import AffineCoefficient, SolverConfig, picard_solve

__all__ = [
    "AffineCoefficient", "MediumParams", "NoiseEnsemble", "NoiseSpec", "SolverConfig",
    "SpaceGrid", "SpaceTimeField", "TimeGrid", "picard_solve",
]
