"""Differentially private release of sparse histograms with correlated
Gaussian noise: release mechanisms, their privacy accounting, calibration
solvers, and numerical oracles that keep the accounting honest.
"""

from .accounting import (
    ANALYSES,
    DeltaBreakdown,
    InfeasibleError,
    MechanismConfig,
    PrivacyParams,
    TightAnalysisTerms,
    ZcdpBudget,
    csh_add_deltas,
    csh_threshold_closed_form,
    csh_tight_delta,
    delta_gauss_with_offset_release,
    delta_inf_bound,
    discrete_csh_deltas,
    gshm_add_deltas,
    gshm_exact_delta,
    min_sigma,
    min_tau,
    total_noise_csh,
    zcdp_to_approx_dp,
)
from .gaussian import (
    ContinuousGaussianParams,
    DiscreteGaussianParams,
    correlated_gaussian_delta,
    discrete_gaussian_cdf,
    discrete_gaussian_pmf,
    gaussian_mechanism_delta,
    sample_discrete_gaussian,
    sample_gaussian,
    std_normal_cdf,
    std_normal_inv_cdf,
)
from .histogram import (
    Dataset,
    NoisyHistogram,
    SparseHistogram,
    build_histogram,
    dataset_from_json,
    dataset_to_json,
    generate_neighbor,
    histogram_from_json,
    histogram_to_json,
    is_k_sparse_monotonic_pair,
    noisy_histogram_to_json,
    topk_preprocess,
)
from .mechanisms import (
    ReleaseReceipt,
    build_receipt,
    csh_release,
    discrete_correlated_release,
    discrete_csh_release,
    gshm_release,
    receipt_to_json,
    topk_release,
)
from .oracles import McEstimate, hockey_stick_csh, mc_delta_inf

__version__ = "0.1.0"

__all__ = [
    "ANALYSES",
    "ContinuousGaussianParams",
    "Dataset",
    "DeltaBreakdown",
    "DiscreteGaussianParams",
    "InfeasibleError",
    "McEstimate",
    "MechanismConfig",
    "NoisyHistogram",
    "PrivacyParams",
    "ReleaseReceipt",
    "SparseHistogram",
    "TightAnalysisTerms",
    "ZcdpBudget",
    "build_histogram",
    "build_receipt",
    "correlated_gaussian_delta",
    "csh_add_deltas",
    "csh_release",
    "csh_threshold_closed_form",
    "csh_tight_delta",
    "dataset_from_json",
    "dataset_to_json",
    "delta_gauss_with_offset_release",
    "delta_inf_bound",
    "discrete_correlated_release",
    "discrete_csh_deltas",
    "discrete_csh_release",
    "discrete_gaussian_cdf",
    "discrete_gaussian_pmf",
    "gaussian_mechanism_delta",
    "generate_neighbor",
    "gshm_add_deltas",
    "gshm_exact_delta",
    "gshm_release",
    "histogram_from_json",
    "histogram_to_json",
    "hockey_stick_csh",
    "is_k_sparse_monotonic_pair",
    "mc_delta_inf",
    "min_sigma",
    "min_tau",
    "noisy_histogram_to_json",
    "receipt_to_json",
    "sample_discrete_gaussian",
    "sample_gaussian",
    "std_normal_cdf",
    "std_normal_inv_cdf",
    "topk_preprocess",
    "topk_release",
    "total_noise_csh",
    "zcdp_to_approx_dp",
]
