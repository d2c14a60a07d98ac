//! Wires the corpus through tallies, indicators and distances into
//! regression datasets.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::collab::{extract_events, CollaborationLedger};
use crate::corpus::Corpus;
use crate::geo::{
    capitals, demand_distribution_own, demand_distribution_sds, demand_distribution_university,
    weighted_distance_km, DemandDistribution, DemandScope, DistanceRecord, GeoError,
};
use crate::indicators::{
    aggregate_indicators, scientist_scores, sds_indicators, star_sets, PqConvention,
    ScientistScore, SdsTable, UniversityIndicators,
};
use crate::regress::Dataset;
use crate::Error;

/// How the aggregate distance `d` weights regions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    /// `p_sds`-weighted blend of the national SDS mixes the university staffs.
    #[default]
    NationalMix,
    /// The university's own collaborations; universities without any fall
    /// back to the national mix.
    OwnCollaborations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    pub top_share: f64,
    pub pq: PqConvention,
    pub distance: DistanceMode,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            top_share: 0.10,
            pq: PqConvention::PerResearcher,
            distance: DistanceMode::NationalMix,
        }
    }
}

pub const RESPONSE: &str = "cp";
pub const REGRESSORS: [&str; 4] = ["m", "d", "excell", "star_scientist"];

#[derive(Debug, Clone)]
pub struct Analysis {
    pub ledger: CollaborationLedger,
    pub scores: BTreeMap<String, ScientistScore>,
    pub stars: BTreeMap<String, BTreeSet<String>>,
    pub sds: SdsTable,
    pub universities: Vec<UniversityIndicators>,
    pub sds_demand: BTreeMap<String, DemandDistribution>,
    /// `d_sds` per (university, SDS); absent for SDSs with no demand.
    pub sds_distance: BTreeMap<(String, String), f64>,
    /// Aggregate `d` per university.
    pub distance: BTreeMap<String, DistanceRecord>,
}

pub fn analyze(corpus: &Corpus, opts: &PipelineOptions) -> Result<Analysis, Error> {
    let ledger = extract_events(corpus);
    let scores = scientist_scores(corpus);
    let stars = star_sets(corpus, &scores, opts.top_share)?;
    let sds = sds_indicators(corpus, &ledger, &scores, &stars, opts.pq);
    let universities = aggregate_indicators(&sds.rows, &sds.national, &ledger)?;

    let caps = capitals(corpus);
    let location = |uid: &str| {
        corpus
            .institution(uid)
            .map(|u| u.location)
            .ok_or_else(|| GeoError::UnknownUniversity(uid.to_string()))
    };

    let sds_demand: BTreeMap<String, DemandDistribution> = sds
        .national
        .keys()
        .map(|code| (code.clone(), demand_distribution_sds(&ledger, code)))
        .filter(|(_, d)| !d.is_empty())
        .collect();

    let mut sds_distance = BTreeMap::new();
    for row in &sds.rows {
        if let Some(dist) = sds_demand.get(&row.sds_code) {
            let d = weighted_distance_km(location(&row.university_id)?, dist, &caps)?;
            sds_distance.insert((row.university_id.clone(), row.sds_code.clone()), d);
        }
    }

    let p_sds = sds.p_sds();
    let mut mix: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for row in &sds.rows {
        mix.entry(row.university_id.as_str())
            .or_default()
            .push(row.sds_code.as_str());
    }
    let mut distance = BTreeMap::new();
    for (uid, codes) in mix {
        let dist = match opts.distance {
            DistanceMode::OwnCollaborations if ledger.university_count(uid) > 0 => {
                demand_distribution_own(&ledger, uid)
            }
            _ => demand_distribution_university(uid, &sds_demand, &p_sds, codes.iter().copied())?,
        };
        let d_km = weighted_distance_km(location(uid)?, &dist, &caps)?;
        distance.insert(
            uid.to_string(),
            DistanceRecord {
                university_id: uid.to_string(),
                scope: dist.scope.clone(),
                d_km,
            },
        );
    }

    Ok(Analysis {
        ledger,
        scores,
        stars,
        sds,
        universities,
        sds_demand,
        sds_distance,
        distance,
    })
}

impl Analysis {
    pub fn sds_codes(&self) -> Vec<String> {
        self.sds.national.keys().cloned().collect()
    }

    /// One row per university staffing the SDS, ordered by university id.
    pub fn sds_dataset(&self, sds_code: &str) -> Result<Dataset, Error> {
        if !self.sds.national.contains_key(sds_code) {
            return Err(Error::UnknownSds(sds_code.to_string()));
        }
        if !self.sds_demand.contains_key(sds_code) {
            return Err(GeoError::NoDemand(DemandScope::Sds(sds_code.to_string())).into());
        }
        let rows: Vec<_> = self.sds.for_sds(sds_code).collect();
        let d = rows
            .iter()
            .map(|r| self.sds_distance[&(r.university_id.clone(), r.sds_code.clone())])
            .collect();
        Ok(Dataset::new(
            rows.iter().map(|r| r.university_id.clone()).collect(),
            RESPONSE,
            rows.iter().map(|r| r.cp_sds).collect(),
            vec![
                ("m".into(), rows.iter().map(|r| r.m_sds).collect()),
                ("d".into(), d),
                ("excell".into(), rows.iter().map(|r| r.excell_sds).collect()),
                (
                    "star_scientist".into(),
                    rows.iter().map(|r| r.star_concentration).collect(),
                ),
            ],
        )?)
    }

    /// One row per university with staff in any SDS, zero-CP rows included.
    pub fn aggregate_dataset(&self) -> Result<Dataset, Error> {
        let u = &self.universities;
        Ok(Dataset::new(
            u.iter().map(|r| r.university_id.clone()).collect(),
            RESPONSE,
            u.iter().map(|r| r.cp).collect(),
            vec![
                ("m".into(), u.iter().map(|r| r.m).collect()),
                (
                    "d".into(),
                    u.iter().map(|r| self.distance[&r.university_id].d_km).collect(),
                ),
                ("excell".into(), u.iter().map(|r| r.excell).collect()),
                (
                    "star_scientist".into(),
                    u.iter().map(|r| r.star_scientist).collect(),
                ),
            ],
        )?)
    }

    /// Distance records, SDS scopes first (by SDS then university), then
    /// aggregate.
    pub fn distance_records(&self) -> Vec<DistanceRecord> {
        let mut out: Vec<DistanceRecord> = Vec::new();
        let mut keys: Vec<&(String, String)> = self.sds_distance.keys().collect();
        keys.sort_by(|a, b| (&a.1, &a.0).cmp(&(&b.1, &b.0)));
        for k in keys {
            out.push(DistanceRecord {
                university_id: k.0.clone(),
                scope: DemandScope::Sds(k.1.clone()),
                d_km: self.sds_distance[k],
            });
        }
        out.extend(self.distance.values().cloned());
        out
    }
}
