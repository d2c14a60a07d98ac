use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::{LrPValue, RegressConfig, RegressError, RegressionFit, SeSource};
use super::fit::ModelKind;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Stars {
    #[default]
    None,
    One,
    Two,
    Three,
}

impl Stars {
    /// `thresholds` are the cutoffs for one, two and three stars; the
    /// comparison is strict.
    pub fn from_p(p: f64, thresholds: &[f64; 3]) -> Stars {
        if p < thresholds[2] {
            Stars::Three
        } else if p < thresholds[1] {
            Stars::Two
        } else if p < thresholds[0] {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        }
    }
}

impl std::fmt::Display for Stars {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub stars: Stars,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrTest {
    pub test: TestResult,
    /// `2·(ll_nb − ll_p)` before flooring.
    pub raw_statistic: f64,
    /// The raw statistic was negative noise and has been set to zero.
    pub floored: bool,
}

/// Likelihood-ratio test of `α = 0`. A negbin fit clamped at the dispersion
/// floor has the Poisson fit as its constrained optimum, so the statistic
/// is zero.
pub fn lr_test_alpha(
    poisson: &RegressionFit,
    negbin: &RegressionFit,
    cfg: &RegressConfig,
) -> Result<LrTest, RegressError> {
    if poisson.model != ModelKind::Poisson
        || negbin.model != ModelKind::Negbin
        || poisson.data_digest != negbin.data_digest
        || poisson.names != negbin.names
        || poisson.n_obs != negbin.n_obs
    {
        return Err(RegressError::MismatchedFits);
    }
    let raw = 2.0 * (negbin.loglik - poisson.loglik);
    let (statistic, floored) = if negbin.alpha_at_boundary {
        (0.0, raw != 0.0)
    } else if raw < 0.0 {
        if raw < -1e-8 {
            return Err(RegressError::NegativeLr(raw));
        }
        (0.0, true)
    } else {
        (raw, false)
    };
    let tail = if statistic > 0.0 {
        1.0 - ChiSquared::new(1.0).expect("df > 0").cdf(statistic)
    } else {
        1.0
    };
    let p_value = match cfg.lr_pvalue {
        LrPValue::Mixture => 0.5 * tail,
        LrPValue::Chi2 => tail,
    };
    Ok(LrTest {
        test: TestResult {
            statistic,
            p_value,
            stars: Stars::from_p(p_value, &cfg.star_thresholds),
        },
        raw_statistic: raw,
        floored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientTest {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
    pub z: f64,
    pub p_value: f64,
    pub stars: Stars,
}

/// Two-sided Wald z-tests using the configured standard errors.
pub fn coefficient_tests(fit: &RegressionFit, cfg: &RegressConfig) -> Vec<CoefficientTest> {
    let se = match cfg.se_source {
        SeSource::Model => fit.se_model(),
        SeSource::Robust => fit.se_robust(),
    };
    let normal = Normal::standard();
    fit.names
        .iter()
        .zip(&fit.beta)
        .zip(se)
        .map(|((name, &b), s)| {
            let z = b / s;
            let p_value = if z.is_finite() {
                2.0 * (1.0 - normal.cdf(z.abs()))
            } else {
                f64::NAN
            };
            CoefficientTest {
                name: name.clone(),
                estimate: b,
                se: s,
                z,
                p_value,
                stars: if p_value.is_nan() {
                    Stars::None
                } else {
                    Stars::from_p(p_value, &cfg.star_thresholds)
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrrRow {
    pub name: String,
    pub irr: f64,
    /// Delta-method standard error, `exp(β)·se(β)`.
    pub se: f64,
    pub stars: Stars,
}

pub fn irr(fit: &RegressionFit, cfg: &RegressConfig) -> Vec<IrrRow> {
    coefficient_tests(fit, cfg)
        .into_iter()
        .map(|t| {
            let irr = t.estimate.exp();
            IrrRow {
                name: t.name,
                irr,
                se: irr * t.se,
                stars: t.stars,
            }
        })
        .collect()
}

/// Percent change in the expected count for a `delta` change in a regressor
/// with coefficient `beta`.
pub fn percent_change(beta: f64, delta: f64) -> f64 {
    100.0 * (delta * beta).exp_m1()
}

pub fn effect_per_delta(
    fit: &RegressionFit,
    variable: &str,
    delta: f64,
) -> Result<f64, RegressError> {
    let b = fit
        .coefficient(variable)
        .ok_or_else(|| RegressError::UnknownCoefficient(variable.to_string()))?;
    Ok(percent_change(b, delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn fake(model: ModelKind, ll: f64, beta: Vec<f64>, se: f64) -> RegressionFit {
        let k = beta.len();
        RegressionFit {
            model,
            names: (0..k).map(|i| format!("x{i}")).collect(),
            beta,
            alpha: None,
            ln_alpha_se: None,
            alpha_at_boundary: false,
            cov_model: DMatrix::identity(k, k) * (se * se),
            cov_robust: DMatrix::identity(k, k) * (se * se),
            loglik: ll,
            n_obs: 10,
            converged: true,
            iterations: 1,
            data_digest: 7,
        }
    }

    #[test]
    fn stars_thresholds_are_strict() {
        let t = [0.10, 0.05, 0.01];
        assert_eq!(Stars::from_p(0.10, &t), Stars::None);
        assert_eq!(Stars::from_p(0.0999, &t), Stars::One);
        assert_eq!(Stars::from_p(0.05, &t), Stars::One);
        assert_eq!(Stars::from_p(0.049, &t), Stars::Two);
        assert_eq!(Stars::from_p(0.01, &t), Stars::Two);
        assert_eq!(Stars::from_p(0.0099, &t), Stars::Three);
    }

    #[test]
    fn lr_equal_loglik_gives_half() {
        let cfg = RegressConfig::default();
        let p = fake(ModelKind::Poisson, -50.0, vec![0.0], 1.0);
        let n = fake(ModelKind::Negbin, -50.0, vec![0.0], 1.0);
        let lr = lr_test_alpha(&p, &n, &cfg).unwrap();
        assert_eq!(lr.test.statistic, 0.0);
        assert_eq!(lr.test.p_value, 0.5);
        let chi = RegressConfig {
            lr_pvalue: LrPValue::Chi2,
            ..cfg
        };
        assert_eq!(lr_test_alpha(&p, &n, &chi).unwrap().test.p_value, 1.0);
    }

    #[test]
    fn lr_paper_statistic_is_three_stars() {
        let cfg = RegressConfig::default();
        let p = fake(ModelKind::Poisson, -100.0, vec![0.0], 1.0);
        let n = fake(ModelKind::Negbin, -100.0 + 16.76 / 2.0, vec![0.0], 1.0);
        let lr = lr_test_alpha(&p, &n, &cfg).unwrap();
        assert!((lr.test.statistic - 16.76).abs() < 1e-9);
        assert_eq!(lr.test.stars, Stars::Three);
        // critical value of the mixture at 5% is the χ²₁ 10% point
        let c = fake(ModelKind::Negbin, -100.0 + 2.705543 / 2.0, vec![0.0], 1.0);
        let lr = lr_test_alpha(&p, &c, &cfg).unwrap();
        assert!((lr.test.p_value - 0.05).abs() < 1e-6);
    }

    #[test]
    fn lr_noise_floored_and_large_negative_rejected() {
        let cfg = RegressConfig::default();
        let p = fake(ModelKind::Poisson, -10.0, vec![0.0], 1.0);
        let n = fake(ModelKind::Negbin, -10.0 - 1e-10, vec![0.0], 1.0);
        let lr = lr_test_alpha(&p, &n, &cfg).unwrap();
        assert!(lr.floored);
        assert_eq!(lr.test.statistic, 0.0);
        let bad = fake(ModelKind::Negbin, -11.0, vec![0.0], 1.0);
        assert!(matches!(lr_test_alpha(&p, &bad, &cfg), Err(RegressError::NegativeLr(_))));
        let mut other = fake(ModelKind::Negbin, -9.0, vec![0.0], 1.0);
        other.data_digest = 8;
        assert!(matches!(lr_test_alpha(&p, &other, &cfg), Err(RegressError::MismatchedFits)));
    }

    #[test]
    fn irr_paper_anchors() {
        assert!((0.048_f64.exp() - 1.049).abs() < 5e-4);
        assert!((0.161_f64.exp() - 1.175).abs() < 5e-4);
        let f = fake(ModelKind::Negbin, 0.0, vec![0.0, 0.669], 0.173);
        let rows = irr(&f, &RegressConfig::default());
        assert_eq!(rows[0].irr, 1.0);
        assert!((rows[1].irr - 1.952).abs() < 5e-4);
        assert!((rows[1].se - 0.669_f64.exp() * 0.173).abs() < 1e-15);
    }

    #[test]
    fn irr_and_coefficient_stars_agree() {
        let cfg = RegressConfig::default();
        let f = fake(ModelKind::Negbin, 0.0, vec![0.02, -0.5, 3.0], 0.2);
        let t = coefficient_tests(&f, &cfg);
        let r = irr(&f, &cfg);
        for (a, b) in t.iter().zip(&r) {
            assert_eq!(a.stars, b.stars);
        }
        assert_eq!(t[2].stars, Stars::Three);
        assert_eq!(t[0].stars, Stars::None);
    }

    #[test]
    fn percent_change_formula() {
        assert_eq!(percent_change(0.3, 0.0), 0.0);
        let b = 0.84_f64.ln() / 100.0;
        assert!((percent_change(b, 100.0) + 16.0).abs() < 1e-9);
        let b = 0.861_f64.ln() / 100.0;
        assert!((b + 0.001497).abs() < 1e-6);
        assert!((percent_change(b, 100.0) + 13.9).abs() < 1e-9);
    }
}
