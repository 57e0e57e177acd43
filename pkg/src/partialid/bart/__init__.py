"""Probit Bayesian additive regression trees for the identified probability."""

from .sampler import (BartConfig, BartState, ConstantCovariateWarning, FlatResponseWarning,
                      bin_covariates, build_cutpoints, fit_probit_bart, init_state,
                      mcmc_iteration, phi_from_latent, sample_prior_latent)
from .tree import RegTree, SplitRule, TreeEnsemble, evaluate_ensemble, tree_log_prior

__all__ = [
    'BartConfig', 'BartState', 'ConstantCovariateWarning', 'FlatResponseWarning',
    'bin_covariates', 'build_cutpoints', 'fit_probit_bart', 'init_state', 'mcmc_iteration',
    'phi_from_latent', 'sample_prior_latent', 'RegTree', 'SplitRule', 'TreeEnsemble',
    'evaluate_ensemble', 'tree_log_prior',
]
