//! Synthetic corpora and count datasets with planted ground truth.
//!
//! All randomness flows from one `ChaCha8Rng` seeded with `seed`, so a
//! configuration and seed fix the output. Sampling goes through
//! `rand_distr`'s floating-point samplers; results are stable across runs
//! and builds on IEEE-754 platforms with the same libm.

mod generate;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::YearWindow;
use crate::regress::{Dataset, RegressError, INTERCEPT};

pub use generate::{generate_corpus, PlantedGroup, SynthCorpus};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}` (available: pharmacology, aggregate)")]
    UnknownPreset(String),
    #[error("preset parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Regress(#[from] RegressError),
    #[error("{path}: {message}")]
    Write { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub code: String,
    pub capital_name: String,
    pub lat: f64,
    pub lon: f64,
    /// Macro-group for regional reports.
    pub group: String,
    /// Relative share of universities placed in the region.
    pub universities: f64,
    /// Relative share of enterprise demand located in the region.
    pub enterprises: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdsSpec {
    pub code: String,
    /// Journal subject category used by the SDS.
    pub category: String,
    /// Multiplier on the mean group size.
    #[serde(default = "one")]
    pub staff_scale: f64,
    /// Probability that a university of average size staffs the SDS.
    #[serde(default = "one")]
    pub presence: f64,
    /// Expected collaborative publications per researcher over the window.
    pub collab_rate: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Staffing {
    /// Mean researchers per (university, SDS) group.
    pub mean: f64,
    /// Log-scale sd of the university size factor.
    pub university_sd: f64,
    /// Log-scale sd of group size given the university.
    pub group_sd: f64,
    /// Share of researchers active in every window year.
    pub full_years_share: f64,
    /// Upper bound on researchers per group.
    pub max_group: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Research {
    pub pubs_per_year: f64,
    pub university_quality_sd: f64,
    pub researcher_quality_sd: f64,
    /// Exponent of quality in the publication rate.
    pub rate_elasticity: f64,
    /// Slope of journal prestige in log quality.
    pub prestige_slope: f64,
    pub prestige_noise: f64,
    pub journals_per_category: usize,
    pub max_coauthors: usize,
}

/// Publication-level collaboration propensity
/// `exp(b_m·m + b_d·d + b_q·q) × frailty` for a (university, SDS) group,
/// where `q` is the group's SS per researcher relative to the SDS mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Collaboration {
    pub b_m: f64,
    pub b_d: f64,
    pub b_q: f64,
    /// Variance of the mean-one gamma frailty; zero disables it.
    pub frailty_alpha: f64,
    pub colleague_share: f64,
    pub second_university_share: f64,
    pub second_enterprise_share: f64,
    /// Log-scale sd of SDS-specific perturbations of regional demand.
    pub demand_sd: f64,
    /// Maximum distance of an institution from its regional capital.
    pub jitter_km: f64,
}

/// Coefficients and dispersion for [`generate_counts`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truth {
    pub beta: BTreeMap<String, f64>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub name: String,
    pub seed: u64,
    pub window: String,
    pub n_universities: usize,
    pub n_enterprises: usize,
    pub staffing: Staffing,
    pub research: Research,
    pub collaboration: Collaboration,
    pub truth: Truth,
    pub sds: Vec<SdsSpec>,
    pub regions: Vec<RegionSpec>,
}

const PHARMACOLOGY: &str = include_str!("../../presets/pharmacology.toml");
const AGGREGATE: &str = include_str!("../../presets/aggregate.toml");

pub const PRESETS: [&str; 2] = ["pharmacology", "aggregate"];

impl SynthConfig {
    pub fn preset(name: &str) -> Result<SynthConfig, SynthError> {
        let text = match name {
            "pharmacology" => PHARMACOLOGY,
            "aggregate" => AGGREGATE,
            other => return Err(SynthError::UnknownPreset(other.to_string())),
        };
        SynthConfig::from_toml(text)
    }

    pub fn from_toml(text: &str) -> Result<SynthConfig, SynthError> {
        let cfg: SynthConfig = toml::from_str(text).map_err(|e| SynthError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// The configuration as TOML.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_sds(&self) -> usize {
        self.sds.len()
    }

    pub fn year_window(&self) -> Result<YearWindow, SynthError> {
        self.window.parse().map_err(SynthError::Invalid)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        self.year_window()?;
        if self.n_universities == 0 || self.n_enterprises == 0 || self.sds.is_empty() {
            return bad("n_universities, n_enterprises and the SDS list must be non-empty");
        }
        if self.regions.is_empty() {
            return bad("at least one region is required");
        }
        if self.regions.iter().any(|r| r.universities < 0.0 || r.enterprises < 0.0)
            || self.regions.iter().map(|r| r.universities).sum::<f64>() <= 0.0
            || self.regions.iter().map(|r| r.enterprises).sum::<f64>() <= 0.0
        {
            return bad("region shares must be non-negative with a positive total");
        }
        let demand_regions = self.regions.iter().filter(|r| r.enterprises > 0.0).count();
        if self.n_enterprises < demand_regions {
            return bad("need at least one enterprise per region with demand");
        }
        if self.truth.alpha < 0.0 || self.collaboration.frailty_alpha < 0.0 {
            return bad("dispersion parameters must be non-negative");
        }
        if self.staffing.mean <= 0.0 || self.staffing.max_group == 0 || self.research.journals_per_category < 2 {
            return bad("staffing.mean must be positive and categories need two journals");
        }
        for s in &self.sds {
            if s.code.is_empty() || s.collab_rate < 0.0 || s.presence <= 0.0 {
                return bad("SDS entries need a code, positive presence and non-negative collab_rate");
            }
        }
        let mut codes: Vec<&str> = self.sds.iter().map(|s| s.code.as_str()).collect();
        codes.sort();
        codes.dedup();
        if codes.len() != self.sds.len() {
            return bad("duplicate SDS code");
        }
        Ok(())
    }
}

/// Gamma–Poisson draw with mean `mu` and variance `mu + alpha·mu²`;
/// `alpha = 0` is a plain Poisson draw.
pub fn sample_nb2(rng: &mut ChaCha8Rng, mu: f64, alpha: f64) -> u64 {
    let lambda = if alpha > 0.0 {
        Gamma::new(1.0 / alpha, alpha * mu)
            .expect("positive shape and scale")
            .sample(rng)
    } else {
        mu
    };
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("positive rate").sample(rng) as u64
}

/// Replaces the response of `design` by NB2 draws with mean
/// `exp(x·truth.beta)` and dispersion `truth.alpha`. Coefficients are looked
/// up by regressor name, the intercept under `const`.
pub fn generate_counts(config: &SynthConfig, design: &Dataset) -> Result<Dataset, SynthError> {
    let beta = &config.truth.beta;
    let coef = |name: &str| {
        beta.get(name)
            .copied()
            .ok_or_else(|| SynthError::Invalid(format!("truth.beta has no entry for `{name}`")))
    };
    let intercept = coef(INTERCEPT)?;
    let slopes: Vec<(f64, &[f64])> = design
        .regressor_names()
        .iter()
        .map(|n| Ok((coef(n)?, design.column(n).expect("listed column"))))
        .collect::<Result<_, SynthError>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let y = (0..design.n_obs())
        .map(|i| {
            let eta = intercept + slopes.iter().map(|(b, x)| b * x[i]).sum::<f64>();
            sample_nb2(&mut rng, eta.exp(), config.truth.alpha)
        })
        .collect();
    Ok(design.with_response(y)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts_config(beta: &[(&str, f64)], alpha: f64, seed: u64) -> SynthConfig {
        let mut c = SynthConfig::preset("pharmacology").unwrap().with_seed(seed);
        c.truth = Truth {
            beta: beta.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            alpha,
        };
        c
    }

    fn design(n: usize) -> Dataset {
        Dataset::new(
            (0..n).map(|i| i.to_string()).collect(),
            "cp",
            vec![0; n],
            vec![("m".into(), (0..n).map(|i| (i % 7) as f64).collect())],
        )
        .unwrap()
    }

    #[test]
    fn presets_parse() {
        for p in PRESETS {
            let c = SynthConfig::preset(p).unwrap();
            assert_eq!(SynthConfig::from_toml(&c.echo()).unwrap(), c);
        }
        assert!(matches!(SynthConfig::preset("x"), Err(SynthError::UnknownPreset(_))));
    }

    #[test]
    fn poisson_mean() {
        let n = 10_000;
        let c = counts_config(&[("m", 0.0), ("const", 2.0_f64.ln())], 0.0, 1);
        let d = generate_counts(&c, &design(n)).unwrap();
        let mean = d.response().iter().sum::<u64>() as f64 / n as f64;
        assert!((mean - 2.0).abs() < 3.0 * (2.0 / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn nb2_variance() {
        let n = 100_000;
        let mu: f64 = 3.0;
        let c = counts_config(&[("m", 0.0), ("const", mu.ln())], 1.0, 2);
        let d = generate_counts(&c, &design(n)).unwrap();
        let y: Vec<f64> = d.response().iter().map(|&v| v as f64).collect();
        let mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let target = mu + mu * mu;
        assert!((var - target).abs() / target < 0.10, "{var} vs {target}");
    }

    #[test]
    fn same_seed_same_counts() {
        let c = counts_config(&[("m", 0.1), ("const", 0.5)], 0.5, 9);
        let a = generate_counts(&c, &design(200)).unwrap();
        let b = generate_counts(&c, &design(200)).unwrap();
        assert_eq!(a, b);
        let other = generate_counts(&c.clone().with_seed(10), &design(200)).unwrap();
        assert_ne!(a.response(), other.response());
    }

    #[test]
    fn missing_coefficient_rejected() {
        let c = counts_config(&[("const", 0.5)], 0.0, 1);
        assert!(matches!(generate_counts(&c, &design(10)), Err(SynthError::Invalid(_))));
    }
}
