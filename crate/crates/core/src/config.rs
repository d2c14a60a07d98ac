//! Run configuration file: TOML with optional `window`, `[pipeline]` and
//! `[regress]` sections. Missing keys take their defaults; unknown keys are
//! rejected.
//!
//! ```toml
//! window = "2001-2003"
//!
//! [pipeline]
//! top_share = 0.10
//! pq = "per_researcher"        # or "per_university"
//! distance = "national_mix"    # or "own_collaborations"
//!
//! [regress]
//! max_iter = 100
//! score_tol = 1e-8
//! param_tol = 1e-10
//! alpha_floor = 1e-8
//! covariance = "hc0"           # or "hc1"
//! se_source = "robust"         # or "model"
//! lr_pvalue = "mixture"        # or "chi2"
//! star_thresholds = [0.10, 0.05, 0.01]
//! vif_threshold = 10.0
//! vif_drop = true
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::YearWindow;
use crate::pipeline::PipelineOptions;
use crate::regress::RegressConfig;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    #[serde(with = "window_str")]
    pub window: YearWindow,
    pub pipeline: PipelineOptions,
    pub regress: RegressConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            window: YearWindow::default(),
            pipeline: PipelineOptions::default(),
            regress: RegressConfig::default(),
        }
    }
}

mod window_str {
    use super::YearWindow;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(w: &YearWindow, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&w.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<YearWindow, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Config, Error> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), Error> {
        let p = &self.pipeline;
        if !(p.top_share > 0.0 && p.top_share < 1.0) {
            return Err(Error::Config(format!(
                "pipeline.top_share must lie in (0, 1), got {}",
                p.top_share
            )));
        }
        let r = &self.regress;
        if r.max_iter == 0 || r.score_tol <= 0.0 || r.param_tol <= 0.0 || r.alpha_floor <= 0.0 {
            return Err(Error::Config(
                "regress tolerances, alpha_floor and max_iter must be positive".into(),
            ));
        }
        let t = r.star_thresholds;
        if !(t[0] > t[1] && t[1] > t[2] && t[2] > 0.0 && t[0] < 1.0) {
            return Err(Error::Config(
                "regress.star_thresholds must be strictly decreasing within (0, 1)".into(),
            ));
        }
        if r.vif_threshold <= 1.0 {
            return Err(Error::Config("regress.vif_threshold must exceed 1".into()));
        }
        Ok(())
    }

    /// The effective configuration as TOML, for echoing in output headers.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
