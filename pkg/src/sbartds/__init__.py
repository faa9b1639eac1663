"""Conditional density estimation by tilting a Gaussian linear base model
with a soft-tree-ensemble acceptance function, fit by two-layer data
augmentation MCMC."""

__version__ = "0.1.0"

from .augment import (
    AugmentedData,
    rejection_augment,
    rejection_generate,
    sample_lambda,
    sample_latent_z,
)
from .backfit import (
    BackfitWorkspace,
    ForestState,
    Hyperparams,
    SweepWorkspace,
    augment_all,
    backfit_residuals,
    forest_g,
    gibbs_sweep,
    init_state,
    marginal_loglik,
    sample_leaf_values,
    update_gamma,
    update_latents,
    update_scale_hypers,
    update_split_probs,
    update_tree_and_basis,
)
from .base_model import BaseModel, base_density, base_sample, update_theta
from .basis import Kernel, basis_eval, kernel_cov, sample_basis
from .data import Dataset, build_dataset, load_csv, quantile_transform
from .density import (
    DensityGrid,
    conditional_density,
    default_y_grid,
    evaluate_density_grid,
    posterior_summary,
    predictive_mean,
    tilted_density,
    tv_distance,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateStateError,
    DivergingRejectionError,
    InvalidTreeError,
    SbartdsError,
    SingularDesignError,
)
from .links import Logit, Probit, StudentT, condition_l_constant, get_link, link_eval
from .run import RunConfig, load_config, run_from_config, run_mcmc
from .simulate import DunsonDesign, dunson_true_cdf, dunson_true_density, gen_dunson
from .trees import (
    Node,
    SoftTree,
    TreePrior,
    leaf_weights,
    node_interval,
    propose_tree,
    sample_tree_prior,
    tree_log_prior,
)

__all__ = [
    "AugmentedData",
    "BackfitWorkspace",
    "BaseModel",
    "ConfigError",
    "DataError",
    "Dataset",
    "DegenerateStateError",
    "DensityGrid",
    "DivergingRejectionError",
    "DunsonDesign",
    "ForestState",
    "Hyperparams",
    "InvalidTreeError",
    "Kernel",
    "Logit",
    "Node",
    "Probit",
    "RunConfig",
    "SbartdsError",
    "SingularDesignError",
    "SoftTree",
    "StudentT",
    "SweepWorkspace",
    "TreePrior",
    "augment_all",
    "backfit_residuals",
    "base_density",
    "base_sample",
    "basis_eval",
    "build_dataset",
    "conditional_density",
    "condition_l_constant",
    "default_y_grid",
    "dunson_true_cdf",
    "dunson_true_density",
    "evaluate_density_grid",
    "forest_g",
    "gen_dunson",
    "get_link",
    "gibbs_sweep",
    "init_state",
    "kernel_cov",
    "leaf_weights",
    "link_eval",
    "load_config",
    "load_csv",
    "marginal_loglik",
    "node_interval",
    "posterior_summary",
    "predictive_mean",
    "propose_tree",
    "quantile_transform",
    "rejection_augment",
    "rejection_generate",
    "run_from_config",
    "run_mcmc",
    "sample_basis",
    "sample_lambda",
    "sample_latent_z",
    "sample_leaf_values",
    "sample_tree_prior",
    "tilted_density",
    "tree_log_prior",
    "tv_distance",
    "update_gamma",
    "update_latents",
    "update_scale_hypers",
    "update_split_probs",
    "update_theta",
    "update_tree_and_basis",
]
