#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approximation;
pub mod bounds;
pub mod eigen;
pub mod error;
pub mod experiments;
pub mod ivanov;
pub mod kernels;
pub mod validation;

pub use faer::Mat;

pub use eigen::{eigh, rank_of, GramDecomposition, DEFAULT_RANK_TOLERANCE};
pub use error::{Error, Result};
pub use ivanov::{
    clip, coefficients, effective_radius, fit, mu_zero_threshold, predict, solve_mu, solve_mu_matrix,
    BisectionOptions, ClippedPredictor, IvanovFit, IvanovPath, Spectrum, Strategy,
};
pub use kernels::{eval_kernel, gram_matrix, sup_norm, BoxDomain, KernelFamily, KernelSpec};
pub use approximation::{
    approx_i2, approx_iinf, interpolation_bound, interpolation_norm_of_rkhs_element, k_functional,
    ApproximationOracle, DiscreteDesign, SupNormEstimate,
};
pub use validation::{
    build_grid, select_radius, select_radius_on_path, validation_risk, AdaptiveFit, ValidationGrid,
};
pub use bounds::{
    bdd_inter_constants, bdd_inter_rate_bound, bound_expectation_clipped, bound_expectation_unclipped,
    bound_highprob_clipped, bound_validation_expectation, bound_validation_highprob,
    clipped_interpolation_baseline, covering_bound, entropy_integral, entropy_integral_numeric,
    inter_constants, inter_rate_bound, minimise_unclipped_bound, optimal_radius_clipped,
    optimal_radius_highprob_clipped, optimal_radius_unclipped, prob_bdd_inter_constants,
    prob_bdd_inter_rate_bound, BoundParams, RateConstants,
};
pub use experiments::{
    fit_log_log_slope, generate, mc_sq_error, run_rate_experiment, synthetic_rate_report, CovariateLaw,
    CovariateSampler, Dataset, Generated, NoiseModel, RateReport, RateRow, ReplicateRecord, ScenarioConfig, Truth,
    TruthEvaluator,
};
