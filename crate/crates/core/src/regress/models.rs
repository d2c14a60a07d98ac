use serde::Serialize;

use super::{
    coefficient_tests, fit_negbin, fit_poisson, irr, lr_test_alpha, screen, CoefficientTest,
    Dataset, IrrRow, LrTest, RegressConfig, RegressError, RegressionFit, Stars, VifScreen,
    INTERCEPT,
};

pub const MODEL1_REGRESSORS: [&str; 2] = ["m", "d"];
pub const MODEL2_CANDIDATES: [&str; 4] = ["m", "d", "excell", "star_scientist"];

/// Poisson and NB2 fits of one regressor set, with the α = 0 test.
#[derive(Debug, Clone)]
pub struct ModelFits {
    pub label: String,
    pub regressors: Vec<String>,
    pub poisson: RegressionFit,
    pub negbin: RegressionFit,
    pub lr: LrTest,
    pub tests: Vec<CoefficientTest>,
    pub irr: Vec<IrrRow>,
}

impl ModelFits {
    pub fn fit(
        label: &str,
        data: &Dataset,
        regressors: &[&str],
        cfg: &RegressConfig,
    ) -> Result<ModelFits, RegressError> {
        let sub = data.select(regressors)?;
        let poisson = fit_poisson(&sub, cfg)?;
        let negbin = fit_negbin(&sub, cfg)?;
        let lr = lr_test_alpha(&poisson, &negbin, cfg)?;
        Ok(ModelFits {
            label: label.to_string(),
            regressors: regressors.iter().map(|s| s.to_string()).collect(),
            tests: coefficient_tests(&negbin, cfg),
            irr: irr(&negbin, cfg),
            poisson,
            negbin,
            lr,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ModelsReport {
    pub vif: VifScreen,
    pub model1: ModelFits,
    pub model2: ModelFits,
    pub n_obs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub value: f64,
    pub se: f64,
    pub stars: Stars,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub label: String,
    pub cells: Vec<Option<Cell>>,
}

/// A regression table: one column per model, coefficient rows, then the
/// observation count and LR footers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub n_obs: Vec<usize>,
    pub lr: Vec<(f64, Stars)>,
}

impl ModelsReport {
    fn models(&self) -> [&ModelFits; 2] {
        [&self.model1, &self.model2]
    }

    fn row_labels(&self, with_const: bool) -> Vec<String> {
        let mut labels: Vec<String> = Vec::new();
        for m in self.models() {
            for r in &m.regressors {
                if !labels.contains(r) {
                    labels.push(r.clone());
                }
            }
        }
        if with_const {
            labels.push(INTERCEPT.to_string());
        }
        labels
    }

    fn footers(&self) -> (Vec<usize>, Vec<(f64, Stars)>) {
        (
            self.models().iter().map(|m| m.negbin.n_obs).collect(),
            self.models()
                .iter()
                .map(|m| (m.lr.test.statistic, m.lr.test.stars))
                .collect(),
        )
    }

    /// NB2 coefficients with bracketed standard errors.
    pub fn coefficients(&self) -> ModelReport {
        let rows = self
            .row_labels(true)
            .into_iter()
            .map(|label| ReportRow {
                cells: self
                    .models()
                    .iter()
                    .map(|m| {
                        m.tests.iter().find(|t| t.name == label).map(|t| Cell {
                            value: t.estimate,
                            se: t.se,
                            stars: t.stars,
                        })
                    })
                    .collect(),
                label,
            })
            .collect();
        let (n_obs, lr) = self.footers();
        ModelReport {
            title: "Negative binomial regression results".into(),
            columns: self.models().iter().map(|m| m.label.clone()).collect(),
            rows,
            n_obs,
            lr,
        }
    }

    /// Incidence-rate ratios; the intercept is omitted.
    pub fn irr(&self) -> ModelReport {
        let rows = self
            .row_labels(false)
            .into_iter()
            .map(|label| ReportRow {
                cells: self
                    .models()
                    .iter()
                    .map(|m| {
                        m.irr.iter().find(|t| t.name == label).map(|t| Cell {
                            value: t.irr,
                            se: t.se,
                            stars: t.stars,
                        })
                    })
                    .collect(),
                label,
            })
            .collect();
        let (n_obs, lr) = self.footers();
        ModelReport {
            title: "Incidence rate ratios".into(),
            columns: self.models().iter().map(|m| m.label.clone()).collect(),
            rows,
            n_obs,
            lr,
        }
    }
}

/// Model 1 on `(m, d)`; Model 2 on `(m, d, excell, star_scientist)` as
/// available, after VIF screening.
pub fn fit_models(data: &Dataset, cfg: &RegressConfig) -> Result<ModelsReport, RegressError> {
    let candidates: Vec<&str> = MODEL2_CANDIDATES
        .iter()
        .copied()
        .filter(|c| data.has(c))
        .collect();
    for req in MODEL1_REGRESSORS {
        if !data.has(req) {
            return Err(RegressError::MissingColumn(req.to_string()));
        }
    }
    let vif = screen(&data.select(&candidates)?, cfg.vif_threshold, cfg.vif_drop)?;
    let model2: Vec<&str> = vif.kept.iter().map(String::as_str).collect();
    let model1 = ModelFits::fit("Model 1", data, &MODEL1_REGRESSORS, cfg)?;
    let model2 = ModelFits::fit("Model 2", data, &model2, cfg)?;
    Ok(ModelsReport {
        vif,
        model1,
        model2,
        n_obs: data.n_obs(),
    })
}
