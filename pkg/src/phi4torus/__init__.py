"""Spectral numerics for the cutoff stochastic quantization of the Phi^4_3 model on the 3-torus."""
__version__ = "0.1.0"

from .besov import BesovParams, besov_norm, block_norms, dyadic_block
from .dynamics import SimConfig, step_sde
from .gaussian import GaussianSpec, isserlis_moment, mc_moment
from .ou import NoiseStream, OUEnsemble, ou_init_stationary, ou_step
from .paraproducts import commutator_heat, commutator_res, paraproduct
from .projections import project, semigroup
from .renorm import RenormConstants, renorm_constants
from .torus import GridField, SpectralField, forward_transform, inverse_transform, pointwise_product

__all__ = [
    "BesovParams", "GaussianSpec", "GridField", "NoiseStream", "OUEnsemble", "RenormConstants", "SimConfig",
    "SpectralField", "besov_norm", "block_norms", "commutator_heat", "commutator_res", "dyadic_block",
    "forward_transform", "inverse_transform", "isserlis_moment", "mc_moment", "ou_init_stationary", "ou_step",
    "paraproduct", "pointwise_product", "project", "renorm_constants", "semigroup", "step_sde",
]
