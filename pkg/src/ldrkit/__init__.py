"""Low displacement rank matrices, structured kernels and LDR networks."""

from .construct import ColumnEmbedding, OneHotNetwork, construct_with_column, embed_as_network
from .displacement import (
    DisplacementRep,
    compress,
    displacement,
    displacement_rank,
    reconstruct,
    stein_displacement,
    sylvester_displacement,
)
from .layer import LdrLayer, NetworkModel, backward, forward, network_backward, network_forward
from .modelfile import load_config, load_model, save_config, save_model
from .operators import OperatorMatrix, OperatorPair, diagonal, make_pair, unit_f_circulant
from .structured import StructuredMatrix, cauchy, circulant, hankel, toeplitz, to_dense, vandermonde
from .training import ExperimentConfig, OptimizerConfig, decay, train

__version__ = "0.1.0"

__all__ = [
    "ColumnEmbedding",
    "DisplacementRep",
    "ExperimentConfig",
    "LdrLayer",
    "NetworkModel",
    "OneHotNetwork",
    "OperatorMatrix",
    "OperatorPair",
    "OptimizerConfig",
    "StructuredMatrix",
    "backward",
    "cauchy",
    "circulant",
    "compress",
    "construct_with_column",
    "decay",
    "diagonal",
    "displacement",
    "displacement_rank",
    "embed_as_network",
    "forward",
    "hankel",
    "load_config",
    "load_model",
    "make_pair",
    "network_backward",
    "network_forward",
    "reconstruct",
    "save_config",
    "save_model",
    "stein_displacement",
    "sylvester_displacement",
    "to_dense",
    "toeplitz",
    "train",
    "unit_f_circulant",
    "vandermonde",
]
