//! University–enterprise and SDS–enterprise collaboration events.
//!
//! A qualifying publication (at least one university and one enterprise on
//! the byline) linking `m` distinct universities and `n` distinct enterprises
//! yields `m·n` university-level events. At SDS level, every distinct
//! (university, SDS) group among roster-matched university authors is paired
//! with every enterprise, giving `s·n` events.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Corpus, InstitutionKind, Publication};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    University,
    Sds,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CollaborationEvent {
    pub publication_id: String,
    pub university_id: String,
    pub enterprise_id: String,
    pub level: Level,
    /// Present iff `level == Level::Sds`.
    pub sds_code: Option<String>,
    pub enterprise_region: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LevelTally {
    pub collaborations: u64,
    pub pairs: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairSummary {
    pub publications: u64,
    pub university: LevelTally,
    pub sds: LevelTally,
}

#[derive(Debug, Clone, Default)]
pub struct CollaborationLedger {
    events: Vec<CollaborationEvent>,
    qualifying_publications: u64,
    university_pairs: BTreeMap<(String, String), u64>,
    sds_pairs: BTreeMap<(String, String, String), u64>,
    by_university: BTreeMap<String, u64>,
    by_university_sds: BTreeMap<(String, String), u64>,
    by_sds: BTreeMap<String, u64>,
    // SDS -> enterprise region -> SDS-level events
    sds_demand: BTreeMap<String, BTreeMap<String, u64>>,
    // university -> enterprise region -> university-level events
    university_demand: BTreeMap<String, BTreeMap<String, u64>>,
}

impl CollaborationLedger {
    pub fn events(&self) -> &[CollaborationEvent] {
        &self.events
    }

    pub fn qualifying_publications(&self) -> u64 {
        self.qualifying_publications
    }

    /// University-level collaborations per university.
    pub fn by_university(&self) -> &BTreeMap<String, u64> {
        &self.by_university
    }

    pub fn university_count(&self, university_id: &str) -> u64 {
        self.by_university.get(university_id).copied().unwrap_or(0)
    }

    /// SDS-level collaborations per (university, SDS).
    pub fn by_university_sds(&self) -> &BTreeMap<(String, String), u64> {
        &self.by_university_sds
    }

    pub fn university_sds_count(&self, university_id: &str, sds_code: &str) -> u64 {
        self.by_university_sds
            .get(&(university_id.to_string(), sds_code.to_string()))
            .copied()
            .unwrap_or(0)
    }

    /// SDS-level collaborations per SDS, nationally.
    pub fn by_sds(&self) -> &BTreeMap<String, u64> {
        &self.by_sds
    }

    pub fn sds_total(&self) -> u64 {
        self.by_sds.values().sum()
    }

    pub fn sds_demand(&self, sds_code: &str) -> Option<&BTreeMap<String, u64>> {
        self.sds_demand.get(sds_code)
    }

    pub fn university_demand(&self, university_id: &str) -> Option<&BTreeMap<String, u64>> {
        self.university_demand.get(university_id)
    }

    pub fn tally(&self) -> PairSummary {
        tally_pairs(self)
    }

    fn record(&mut self, ev: CollaborationEvent) {
        match ev.level {
            Level::University => {
                *self
                    .university_pairs
                    .entry((ev.university_id.clone(), ev.enterprise_id.clone()))
                    .or_default() += 1;
                *self.by_university.entry(ev.university_id.clone()).or_default() += 1;
                *self
                    .university_demand
                    .entry(ev.university_id.clone())
                    .or_default()
                    .entry(ev.enterprise_region.clone())
                    .or_default() += 1;
            }
            Level::Sds => {
                let sds = ev.sds_code.clone().expect("sds event carries a code");
                *self
                    .sds_pairs
                    .entry((sds.clone(), ev.university_id.clone(), ev.enterprise_id.clone()))
                    .or_default() += 1;
                *self
                    .by_university_sds
                    .entry((ev.university_id.clone(), sds.clone()))
                    .or_default() += 1;
                *self.by_sds.entry(sds.clone()).or_default() += 1;
                *self
                    .sds_demand
                    .entry(sds)
                    .or_default()
                    .entry(ev.enterprise_region.clone())
                    .or_default() += 1;
            }
        }
        self.events.push(ev);
    }
}

fn publication_events(corpus: &Corpus, p: &Publication) -> Vec<CollaborationEvent> {
    let mut universities = BTreeSet::new();
    let mut enterprises = BTreeSet::new();
    let mut groups = BTreeSet::new();
    for a in &p.byline {
        let Some(inst) = corpus.institution(&a.institution_id) else {
            continue;
        };
        match inst.kind {
            InstitutionKind::University => {
                universities.insert(inst.id.as_str());
                if let Some(r) = a.researcher_id.as_deref().and_then(|r| corpus.researcher(r)) {
                    groups.insert((inst.id.as_str(), r.sds_code.as_str()));
                }
            }
            InstitutionKind::Enterprise => {
                enterprises.insert(inst.id.as_str());
            }
        }
    }
    if universities.is_empty() || enterprises.is_empty() {
        return Vec::new();
    }
    let region_of = |e: &str| {
        corpus
            .institution(e)
            .map(|i| i.region_code.clone())
            .unwrap_or_default()
    };
    let mut out = Vec::with_capacity(enterprises.len() * (universities.len() + groups.len()));
    for e in &enterprises {
        let enterprise_region = region_of(e);
        for u in &universities {
            out.push(CollaborationEvent {
                publication_id: p.id.clone(),
                university_id: u.to_string(),
                enterprise_id: e.to_string(),
                level: Level::University,
                sds_code: None,
                enterprise_region: enterprise_region.clone(),
            });
        }
        for (u, sds) in &groups {
            out.push(CollaborationEvent {
                publication_id: p.id.clone(),
                university_id: u.to_string(),
                enterprise_id: e.to_string(),
                level: Level::Sds,
                sds_code: Some(sds.to_string()),
                enterprise_region: enterprise_region.clone(),
            });
        }
    }
    out
}

pub fn extract_events(corpus: &Corpus) -> CollaborationLedger {
    let mut ledger = CollaborationLedger::default();
    for p in corpus.publications() {
        let events = publication_events(corpus, p);
        if events.is_empty() {
            continue;
        }
        ledger.qualifying_publications += 1;
        for ev in events {
            ledger.record(ev);
        }
    }
    ledger
}

pub fn tally_pairs(ledger: &CollaborationLedger) -> PairSummary {
    PairSummary {
        publications: ledger.qualifying_publications,
        university: LevelTally {
            collaborations: ledger.university_pairs.values().sum(),
            pairs: ledger.university_pairs.len() as u64,
        },
        sds: LevelTally {
            collaborations: ledger.sds_pairs.values().sum(),
            pairs: ledger.sds_pairs.len() as u64,
        },
    }
}

/// Region → macro-group assignment for regional reports. Regions without a
/// group land in `other_label`.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroGroups {
    pub order: Vec<String>,
    pub assignment: BTreeMap<String, String>,
    pub other_label: String,
}

impl Default for MacroGroups {
    fn default() -> Self {
        Self {
            order: Vec::new(),
            assignment: BTreeMap::new(),
            other_label: "All".to_string(),
        }
    }
}

impl MacroGroups {
    pub fn new(order: Vec<String>, assignment: BTreeMap<String, String>) -> Self {
        Self {
            order,
            assignment,
            other_label: "Other".to_string(),
        }
    }

    /// Groups ordered by first appearance among `(region, group)` pairs.
    pub fn from_pairs(pairs: &[(String, String)]) -> Self {
        let mut order: Vec<String> = Vec::new();
        for (_, g) in pairs {
            if !order.contains(g) {
                order.push(g.clone());
            }
        }
        Self::new(order, pairs.iter().cloned().collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub region_code: String,
    pub region_name: String,
    pub collaborations: u64,
    pub share_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionGroup {
    pub name: String,
    pub rows: Vec<RegionRow>,
    pub collaborations: u64,
    pub share_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionalReport {
    pub groups: Vec<RegionGroup>,
    pub total: u64,
}

fn share(count: u64, total: u64) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// University-level collaborations grouped by the region of the university,
/// ordered by descending count within each macro-group. Regions with no
/// collaborations are omitted.
pub fn regional_report(
    ledger: &CollaborationLedger,
    corpus: &Corpus,
    groups: &MacroGroups,
) -> RegionalReport {
    let mut by_region: BTreeMap<String, u64> = BTreeMap::new();
    for (uid, n) in ledger.by_university() {
        if let Some(u) = corpus.institution(uid) {
            *by_region.entry(u.region_code.clone()).or_default() += n;
        }
    }
    let total: u64 = by_region.values().sum();

    let mut grouped: BTreeMap<String, Vec<RegionRow>> = BTreeMap::new();
    for (code, n) in by_region.into_iter().filter(|(_, n)| *n > 0) {
        let group = groups
            .assignment
            .get(&code)
            .cloned()
            .unwrap_or_else(|| groups.other_label.clone());
        let region_name = corpus
            .region(&code)
            .map(|r| r.capital_name.clone())
            .unwrap_or_else(|| code.clone());
        grouped.entry(group).or_default().push(RegionRow {
            region_code: code,
            region_name,
            collaborations: n,
            share_pct: share(n, total),
        });
    }

    let mut names: Vec<String> = groups
        .order
        .iter()
        .filter(|g| grouped.contains_key(*g))
        .cloned()
        .collect();
    for g in grouped.keys() {
        if !names.contains(g) && *g != groups.other_label {
            names.push(g.clone());
        }
    }
    if grouped.contains_key(&groups.other_label) && !names.contains(&groups.other_label) {
        names.push(groups.other_label.clone());
    }

    let groups = names
        .into_iter()
        .map(|name| {
            let mut rows = grouped.remove(&name).unwrap_or_default();
            rows.sort_by(|a, b| {
                b.collaborations
                    .cmp(&a.collaborations)
                    .then_with(|| a.region_code.cmp(&b.region_code))
            });
            let collaborations = rows.iter().map(|r| r.collaborations).sum();
            RegionGroup {
                name,
                rows,
                collaborations,
                share_pct: share(collaborations, total),
            }
        })
        .collect();
    RegionalReport { groups, total }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Authorship, Institution, Journal, JournalId, Region, Researcher, YearWindow};
    use crate::geo::LatLon;

    pub(crate) struct Builder {
        institutions: Vec<Institution>,
        researchers: Vec<Researcher>,
        publications: Vec<crate::corpus::Publication>,
    }

    impl Builder {
        fn new() -> Self {
            Self {
                institutions: Vec::new(),
                researchers: Vec::new(),
                publications: Vec::new(),
            }
        }

        fn inst(mut self, id: &str, kind: InstitutionKind, region: &str) -> Self {
            self.institutions.push(Institution {
                id: id.into(),
                name: id.into(),
                canonical_name: id.to_lowercase(),
                kind,
                region_code: region.into(),
                location: LatLon::new(42.0, 12.0).unwrap(),
            });
            self
        }

        fn researcher(mut self, id: &str, uni: &str, sds: &str) -> Self {
            self.researchers.push(Researcher {
                id: id.into(),
                university_id: uni.into(),
                sds_code: sds.into(),
                active_years: [2001, 2002, 2003].into(),
            });
            self
        }

        // byline entries: (institution, researcher)
        fn publication(mut self, id: &str, byline: &[(&str, Option<&str>)]) -> Self {
            self.publications.push(crate::corpus::Publication {
                id: id.into(),
                year: 2002,
                journal: JournalId(0),
                byline: byline
                    .iter()
                    .map(|(i, r)| Authorship {
                        author_name: "x".into(),
                        institution_id: i.to_string(),
                        researcher_id: r.map(str::to_string),
                    })
                    .collect(),
            });
            self
        }

        fn build(self) -> Corpus {
            let regions = ["N", "C", "S"]
                .iter()
                .map(|c| Region {
                    code: c.to_string(),
                    capital_name: format!("{c}-capital"),
                    capital_location: LatLon::new(42.0, 12.0).unwrap(),
                })
                .collect();
            Corpus::from_parts(
                self.publications,
                self.institutions,
                self.researchers,
                regions,
                vec![Journal {
                    name: "J".into(),
                    category: "C".into(),
                    impact_factor: 1.0,
                }],
                YearWindow::default(),
            )
            .unwrap()
        }
    }

    use InstitutionKind::{Enterprise as E, University as U};

    #[test]
    fn m_times_n_university_events() {
        let c = Builder::new()
            .inst("U1", U, "N")
            .inst("U2", U, "C")
            .inst("E1", E, "N")
            .inst("E2", E, "N")
            .inst("E3", E, "S")
            .publication(
                "P1",
                &[("U1", None), ("U1", None), ("U2", None), ("E1", None), ("E2", None), ("E3", None)],
            )
            .build();
        let t = extract_events(&c).tally();
        assert_eq!(t.university.collaborations, 6);
        assert_eq!(t.university.pairs, 6);
        assert_eq!(t.sds.collaborations, 0);
    }

    #[test]
    fn one_university_two_sds() {
        let c = Builder::new()
            .inst("U1", U, "N")
            .inst("E1", E, "N")
            .researcher("R1", "U1", "BIO/14")
            .researcher("R2", "U1", "CHIM/08")
            .researcher("R3", "U1", "BIO/14")
            .publication("P1", &[("U1", Some("R1")), ("U1", Some("R2")), ("U1", Some("R3")), ("E1", None)])
            .build();
        let ledger = extract_events(&c);
        let t = ledger.tally();
        assert_eq!(t.university.collaborations, 1);
        assert_eq!(t.sds.collaborations, 2);
        assert_eq!(ledger.university_sds_count("U1", "BIO/14"), 1);
        assert_eq!(ledger.sds_demand("BIO/14").unwrap()["N"], 1);
    }

    #[test]
    fn repeated_pair_counts_once() {
        let c = Builder::new()
            .inst("U1", U, "N")
            .inst("E1", E, "N")
            .publication("P1", &[("U1", None), ("E1", None)])
            .publication("P2", &[("E1", None), ("U1", None)])
            .publication("P3", &[("U1", None), ("E1", None)])
            .build();
        let t = extract_events(&c).tally();
        assert_eq!(t.university, LevelTally { collaborations: 3, pairs: 1 });
        assert_eq!(t.publications, 3);
    }

    #[test]
    fn empty_ledger_tallies_zero() {
        let t = tally_pairs(&CollaborationLedger::default());
        assert_eq!(t, PairSummary::default());
    }

    #[test]
    fn non_qualifying_publications_ignored() {
        let c = Builder::new()
            .inst("U1", U, "N")
            .inst("U2", U, "N")
            .inst("E1", E, "N")
            .publication("P1", &[("U1", None), ("U2", None)])
            .publication("P2", &[("E1", None)])
            .build();
        let l = extract_events(&c);
        assert!(l.events().is_empty());
        assert_eq!(l.qualifying_publications(), 0);
    }

    fn regional_fixture() -> Corpus {
        let mut b = Builder::new()
            .inst("UN", U, "N")
            .inst("UC", U, "C")
            .inst("US", U, "S")
            .inst("E1", E, "N");
        for (uni, n) in [("UN", 6), ("UC", 3), ("US", 1)] {
            for i in 0..n {
                b = b.publication(&format!("{uni}-{i}"), &[(uni, None), ("E1", None)]);
            }
        }
        b.build()
    }

    #[test]
    fn shares_follow_counts() {
        let c = regional_fixture();
        let l = extract_events(&c);
        let groups = MacroGroups::new(
            vec!["North".into(), "Center".into(), "South".into()],
            [("N", "North"), ("C", "Center"), ("S", "South")]
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        );
        let r = regional_report(&l, &c, &groups);
        let shares: Vec<f64> = r.groups.iter().map(|g| g.share_pct).collect();
        assert_eq!(shares, vec![60.0, 30.0, 10.0]);
        assert_eq!(r.total, 10);
        let sum: f64 = r.groups.iter().map(|g| g.share_pct).sum();
        assert!((sum - 100.0).abs() < 1e-9);
    }

    #[test]
    fn single_region_holds_everything() {
        let c = regional_fixture();
        let l = extract_events(&c);
        let groups = MacroGroups::new(
            vec!["All".into()],
            [("N", "All"), ("C", "All"), ("S", "All")]
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        );
        let r = regional_report(&l, &c, &groups);
        assert_eq!(r.groups.len(), 1);
        assert_eq!(r.groups[0].share_pct, 100.0);
        // descending within group
        let counts: Vec<u64> = r.groups[0].rows.iter().map(|r| r.collaborations).collect();
        assert_eq!(counts, vec![6, 3, 1]);
    }

    #[test]
    fn published_macro_shares_add_to_hundred() {
        // North, Center, South, Other subtotals of the Italian 2001-2003 census.
        let counts = [1108u64, 526, 313, 36];
        let total: u64 = counts.iter().sum();
        assert_eq!(total, 1983);
        let rounded: Vec<f64> = counts
            .iter()
            .map(|c| (share(*c, total) * 10.0).round() / 10.0)
            .collect();
        assert_eq!(rounded, vec![55.9, 26.5, 15.8, 1.8]);
        assert!((rounded.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    }
}
