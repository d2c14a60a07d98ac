//! Count regression: Poisson and NB2 maximum likelihood, sandwich
//! covariance, the α = 0 likelihood-ratio test, incidence-rate ratios,
//! descriptive statistics, correlations and VIF screening.

mod dataset;
mod describe;
mod fit;
mod inference;
pub mod likelihood;
mod models;
mod vif;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{Dataset, INTERCEPT};
pub use describe::{descriptive_stats, pearson_corr, CorrelationMatrix, Describe};
pub use fit::{
    fit_negbin, fit_negbin_fixed_alpha, fit_poisson, CovarianceVariant, ModelKind, RegressionFit,
};
pub use inference::{
    coefficient_tests, effect_per_delta, irr, lr_test_alpha, percent_change, CoefficientTest,
    IrrRow, LrTest, Stars, TestResult,
};
pub use models::{fit_models, Cell, ModelFits, ModelReport, ModelsReport, ReportRow, MODEL1_REGRESSORS, MODEL2_CANDIDATES};
pub use vif::{screen, vif, VifEntry, VifScreen};

#[derive(Debug, Error)]
pub enum RegressError {
    #[error("dataset shape: {0}")]
    Shape(String),
    #[error("non-finite value in column `{column}` at row {row}")]
    InvalidValue { column: String, row: usize },
    #[error("{rows} rows, at least {needed} required")]
    TooFewRows { rows: usize, needed: usize },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("Hessian is singular at the optimum")]
    SingularHessian,
    #[error("{model} fit did not converge after {iterations} iterations (max |score| = {max_score:.3e})")]
    NonConvergence {
        model: ModelKind,
        iterations: usize,
        max_score: f64,
    },
    #[error("response is zero for every observation")]
    AllZeroResponse,
    #[error("column `{0}` has zero variance")]
    ZeroVariance(String),
    #[error("column `{0}` is empty")]
    EmptyColumn(String),
    #[error("fits do not share the same dataset and regressors")]
    MismatchedFits,
    #[error("likelihood-ratio statistic {0:.3e} is negative beyond optimizer noise")]
    NegativeLr(f64),
    #[error("VIF needs at least two regressors")]
    TooFewRegressors,
    #[error("unknown coefficient `{0}`")]
    UnknownCoefficient(String),
}

/// Standard errors used for z-tests and bracketed values in reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeSource {
    Model,
    #[default]
    Robust,
}

/// p-value convention for the α = 0 test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrPValue {
    /// ½χ²₀ + ½χ²₁, for a parameter on the boundary.
    #[default]
    Mixture,
    Chi2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressConfig {
    pub max_iter: usize,
    pub score_tol: f64,
    pub param_tol: f64,
    /// Lower clamp for the NB2 dispersion.
    pub alpha_floor: f64,
    pub covariance: CovarianceVariant,
    pub se_source: SeSource,
    pub lr_pvalue: LrPValue,
    /// p-value cutoffs for one, two and three stars.
    pub star_thresholds: [f64; 3],
    pub vif_threshold: f64,
    /// Drop the worst flagged regressor before fitting Model 2.
    pub vif_drop: bool,
}

impl Default for RegressConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            score_tol: 1e-8,
            param_tol: 1e-10,
            alpha_floor: 1e-8,
            covariance: CovarianceVariant::Hc0,
            se_source: SeSource::Robust,
            lr_pvalue: LrPValue::Mixture,
            star_thresholds: [0.10, 0.05, 0.01],
            vif_threshold: 10.0,
            vif_drop: true,
        }
    }
}
