"""Restricted Boltzmann machines and Gibbs-sampling instance transfer between image domains."""

from .errors import (
    CapacityError,
    DimensionError,
    FormatError,
    InvalidArgumentError,
    NumericalError,
)
from .rbm import (
    GibbsState,
    RbmParams,
    energy,
    free_energy,
    gibbs_chain,
    gibbs_step,
    hidden_probs,
    sample_bernoulli,
    visible_probs,
)
from .rng import make_rng, row_streams, stream

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DimensionError",
    "FormatError",
    "GibbsState",
    "InvalidArgumentError",
    "NumericalError",
    "RbmParams",
    "energy",
    "free_energy",
    "gibbs_chain",
    "gibbs_step",
    "hidden_probs",
    "make_rng",
    "row_streams",
    "sample_bernoulli",
    "stream",
    "visible_probs",
]
