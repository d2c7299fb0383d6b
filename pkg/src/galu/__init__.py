"""GaLU (gated linear unit) networks as an exactly solvable random-feature system."""
from .model import (
    GateBank,
    LabeledSet,
    NaturalParams,
    galu_forward,
    galu_neuron,
    galu_predict,
    relu_forward,
    relu_predict,
    stack_weights,
    unstack_weights,
)
from .features import FeatureMatrix, build_feature_matrix, embed_point, gram
from .kernel import gram_infinity, kappa, mc_kernel_estimate, rkhs_norm_sq
from .solver import min_norm_solve, projected_loss
from .spectral import chernoff_width, lambda_exact, lambda_mc, sigma_min

__version__ = "0.1.0"
