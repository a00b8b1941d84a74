"""Learning linear threshold classifiers from label proportions of Gaussian bags."""

from .numkit import (
    NotPositiveDefiniteError,
    NotSymmetricError,
    RngStream,
    angle_min_dist,
    gaussian_cdf,
    gaussian_pdf,
    inv_sqrt_psd,
    principal_eigenvector,
    sample_std_normal,
    sample_trunc_normal,
    sym_eig,
    trunc_normal_mean,
    trunc_normal_second_moment,
)
from .oracle import (
    Bag,
    GaussianSpec,
    LTF,
    OracleConfig,
    bag_label_proportion_check,
    exact_oracle,
    load_bags,
    mixed_oracle,
    noisy_oracle,
    normalize_ltf,
    random_gaussian_spec,
    random_pd_covariance,
    random_unit_vector,
    sample_bag,
    sample_bags,
    sample_conditional,
    save_bags,
)
from .estimators import (
    MomentEstimates,
    closed_form_moments,
    mean_covs_estimator,
    mixture_closed_form_moments,
    pooled_bag_moments,
)
from .learners import (
    LearnedHypothesis,
    bag_err_sample,
    class_ratio_fit,
    instance_disagreement,
    learn_general,
    learn_mean_based,
    learn_spectral_homogeneous,
    random_ltf_baseline,
    select_offset,
    spectral_direction,
)
from .analysis import (
    KappaSet,
    angle_bound_check,
    eta,
    gamma_of,
    kappas,
    prob_equal_binomials,
    rho,
    rho_closed,
    sample_complexity,
)

__version__ = "0.1.0"
