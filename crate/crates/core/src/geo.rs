//! Great-circle distances and demand-weighted distance variables.
//!
//! A university's distance from industrial demand is the weighted mean of its
//! surface distances to regional capitals, each capital weighted by that
//! region's share of the relevant collaborations. At SDS level the weights are
//! the SDS's national regional mix; at aggregate level they are a
//! `p_sds`-weighted blend of those mixes over the SDSs the university staffs.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collab::CollaborationLedger;
use crate::corpus::{Corpus, InstitutionKind};

/// Mean Earth radius (IUGG), kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("no demand: {0} has no collaborations to weight regions by")]
    NoDemand(DemandScope),
    #[error("unknown university `{0}`")]
    UnknownUniversity(String),
    #[error("unknown region `{0}` in demand distribution")]
    UnknownRegion(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    lat: f64,
    lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::Latitude(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::Longitude(lon));
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Haversine distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn great_circle_km(a: LatLon, b: LatLon) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    let h = h.clamp(0.0, 1.0);
    2.0 * EARTH_RADIUS_KM * h.sqrt().atan2((1.0 - h).sqrt())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum DemandScope {
    Sds(String),
    NationalMix(String),
    OwnCollaborations(String),
}

impl fmt::Display for DemandScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemandScope::Sds(code) => write!(f, "sds:{code}"),
            DemandScope::NationalMix(u) => write!(f, "aggregate:{u}"),
            DemandScope::OwnCollaborations(u) => write!(f, "own:{u}"),
        }
    }
}

/// Region weights summing to one, or empty when the scope has no demand.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandDistribution {
    pub scope: DemandScope,
    pub weights: BTreeMap<String, f64>,
}

impl DemandDistribution {
    pub fn from_counts<'a>(
        scope: DemandScope,
        counts: impl IntoIterator<Item = (&'a String, &'a u64)>,
    ) -> Self {
        let counts: Vec<(&String, &u64)> = counts.into_iter().filter(|(_, c)| **c > 0).collect();
        let total: u64 = counts.iter().map(|(_, c)| **c).sum();
        let weights = if total == 0 {
            BTreeMap::new()
        } else {
            counts
                .into_iter()
                .map(|(r, c)| (r.clone(), *c as f64 / total as f64))
                .collect()
        };
        Self { scope, weights }
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRecord {
    pub university_id: String,
    pub scope: DemandScope,
    pub d_km: f64,
}

/// National regional mix of an SDS's SDS-level collaborations.
pub fn demand_distribution_sds(ledger: &CollaborationLedger, sds_code: &str) -> DemandDistribution {
    let scope = DemandScope::Sds(sds_code.to_string());
    match ledger.sds_demand(sds_code) {
        Some(counts) => DemandDistribution::from_counts(scope, counts),
        None => DemandDistribution {
            scope,
            weights: BTreeMap::new(),
        },
    }
}

/// Regional mix of one university's own university-level collaborations.
pub fn demand_distribution_own(
    ledger: &CollaborationLedger,
    university_id: &str,
) -> DemandDistribution {
    let scope = DemandScope::OwnCollaborations(university_id.to_string());
    match ledger.university_demand(university_id) {
        Some(counts) => DemandDistribution::from_counts(scope, counts),
        None => DemandDistribution {
            scope,
            weights: BTreeMap::new(),
        },
    }
}

/// Blend of national SDS mixes, each weighted by the SDS's `p_sds`, over the
/// SDSs the university staffs; renormalized to sum to one.
pub fn demand_distribution_university<'a>(
    university_id: &str,
    national: &BTreeMap<String, DemandDistribution>,
    p_sds: &BTreeMap<String, f64>,
    sds_mix: impl IntoIterator<Item = &'a str>,
) -> Result<DemandDistribution, GeoError> {
    let scope = DemandScope::NationalMix(university_id.to_string());
    let mut weights: BTreeMap<String, f64> = BTreeMap::new();
    for sds in sds_mix {
        let p = p_sds.get(sds).copied().unwrap_or(0.0);
        let Some(dist) = national.get(sds) else {
            continue;
        };
        if p <= 0.0 {
            continue;
        }
        for (region, w) in &dist.weights {
            *weights.entry(region.clone()).or_insert(0.0) += p * w;
        }
    }
    let total: f64 = weights.values().sum();
    if total <= 0.0 {
        return Err(GeoError::NoDemand(scope));
    }
    for w in weights.values_mut() {
        *w /= total;
    }
    Ok(DemandDistribution { scope, weights })
}

/// `Σ_r w_r · great_circle_km(origin, capital_r)`.
pub fn weighted_distance_km(
    origin: LatLon,
    dist: &DemandDistribution,
    capitals: &BTreeMap<String, LatLon>,
) -> Result<f64, GeoError> {
    if dist.is_empty() {
        return Err(GeoError::NoDemand(dist.scope.clone()));
    }
    dist.weights.iter().try_fold(0.0, |acc, (region, w)| {
        let cap = capitals
            .get(region)
            .ok_or_else(|| GeoError::UnknownRegion(region.clone()))?;
        Ok(acc + w * great_circle_km(origin, *cap))
    })
}

pub fn capitals(corpus: &Corpus) -> BTreeMap<String, LatLon> {
    corpus
        .regions()
        .map(|r| (r.code.clone(), r.capital_location))
        .collect()
}

pub fn weighted_distance(
    university_id: &str,
    dist: &DemandDistribution,
    corpus: &Corpus,
) -> Result<DistanceRecord, GeoError> {
    let uni = corpus
        .institution(university_id)
        .filter(|i| i.kind == InstitutionKind::University)
        .ok_or_else(|| GeoError::UnknownUniversity(university_id.to_string()))?;
    let d_km = weighted_distance_km(uni.location, dist, &capitals(corpus))?;
    Ok(DistanceRecord {
        university_id: university_id.to_string(),
        scope: dist.scope.clone(),
        d_km,
    })
}
