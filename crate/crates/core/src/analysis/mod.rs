//! Analyses built on attributions and features: simplex projection and
//! kernel surface, compositional variance, importance profiles, correlation
//! tables, dispersion tests and exports.

mod compositional;
mod correlations;
mod dispersion;
mod export;
mod profiles;
mod simplex;

use thiserror::Error;

pub use compositional::{aitchison_total_variance, closure, clr, replace_zeros, total_variance, TotalVariance};
pub use correlations::{
    difficulty_correlations, feature_correlation_matrix, feature_gold_spearman, numeric_features, CorrelationMatrix,
    PairCorrelation,
};
pub use dispersion::{
    brown_forsythe, fligner_killeen, mann_whitney_u, pos_dispersion_study, welch_t_test, DispersionReport, TestResult,
};
pub use export::{frequency_similarity_export, profile_svg, simplex_svg, write_freq_sim_csv, FreqSimRow};
pub use profiles::{importance_profiles, rolling_mean, GroupProfile, ProfileItem};
pub use simplex::{
    cartesian, default_bandwidth_grid, log_space, loo_scores, nw_surface, select_bandwidth, to_simplex, triangle_grid,
    KernelSurface, NwConfig, SimplexPoint, SurfaceCell, TRIANGLE_HEIGHT,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("every grid cell is below the weight threshold")]
    AllMasked,
    #[error("not enough observations ({0})")]
    TooFewPoints(usize),
    #[error("{0}")]
    Invalid(String),
}
