//! University–industry collaboration capability: corpus ingestion,
//! collaboration tallies, bibliometric indicators, demand-weighted
//! distances and count regression.

pub mod collab;
pub mod config;
pub mod corpus;
pub mod geo;
pub mod indicators;
pub mod pipeline;
pub mod regress;
pub mod report;
pub mod synth;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus: {0}")]
    Corpus(#[from] corpus::CorpusError),
    #[error("indicators: {0}")]
    Indicator(#[from] indicators::IndicatorError),
    #[error("geo: {0}")]
    Geo(#[from] geo::GeoError),
    #[error("regress: {0}")]
    Regress(#[from] regress::RegressError),
    #[error("synth: {0}")]
    Synth(#[from] synth::SynthError),
    #[error("config: {0}")]
    Config(String),
    #[error("unknown SDS `{0}`")]
    UnknownSds(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl Error {
    /// Bad input as opposed to a failed computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Corpus(_) | Error::Config(_) | Error::UnknownSds(_) | Error::Io { .. } => true,
            Error::Synth(_) => true,
            Error::Regress(e) => matches!(
                e,
                regress::RegressError::Shape(_)
                    | regress::RegressError::InvalidValue { .. }
                    | regress::RegressError::MissingColumn(_)
                    | regress::RegressError::TooFewRows { .. }
            ),
            Error::Indicator(indicators::IndicatorError::TopShare(_)) => true,
            Error::Indicator(_) | Error::Geo(_) => false,
        }
    }
}
