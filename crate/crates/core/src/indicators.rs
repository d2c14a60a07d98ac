//! Bibliometric quality and size indicators.
//!
//! Each article weighs its journal's impact-factor percentile within its
//! subject category, scaled to `[0, 1]`. A researcher's Scientific Strength
//! (SS) is the sum of those weights over the window; SDS groups and the
//! aggregate university variables are built from it.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collab::CollaborationLedger;
use crate::corpus::{Corpus, Journal, Researcher};

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("journal category `{0}` is not in the catalog")]
    UnknownCategory(String),
    #[error("top share must lie strictly between 0 and 1, got {0}")]
    TopShare(f64),
    #[error("SDS `{sds}`: national PQ is zero but university `{university}` has SS {ss}")]
    InconsistentNational {
        sds: String,
        university: String,
        ss: f64,
    },
    #[error("no national statistics for SDS `{0}`")]
    MissingNational(String),
}

/// How the national SS normalizer of an SDS is averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PqConvention {
    /// National SS over national staff in the SDS.
    #[default]
    PerResearcher,
    /// National SS over the number of universities staffing the SDS.
    PerUniversity,
}

/// Impact factors grouped by subject category, sorted ascending.
#[derive(Debug, Clone, Default)]
pub struct JournalCatalog {
    by_category: BTreeMap<String, Vec<f64>>,
}

impl JournalCatalog {
    pub fn new<'a>(journals: impl IntoIterator<Item = &'a Journal>) -> Self {
        let mut by_category: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for j in journals {
            by_category
                .entry(j.category.clone())
                .or_default()
                .push(j.impact_factor);
        }
        for v in by_category.values_mut() {
            v.sort_by(f64::total_cmp);
        }
        Self { by_category }
    }

    /// Share of the other journals in the category with a strictly lower
    /// impact factor, in percent; 50 for a category of one.
    pub fn percentile(&self, journal: &Journal) -> Result<f64, IndicatorError> {
        let ifs = self
            .by_category
            .get(&journal.category)
            .ok_or_else(|| IndicatorError::UnknownCategory(journal.category.clone()))?;
        if ifs.len() <= 1 {
            return Ok(50.0);
        }
        let lower = ifs.partition_point(|x| *x < journal.impact_factor);
        Ok(100.0 * lower as f64 / (ifs.len() - 1) as f64)
    }
}

pub fn if_percentile(journal: &Journal, corpus: &Corpus) -> Result<f64, IndicatorError> {
    JournalCatalog::new(corpus.journals()).percentile(journal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScientistScore {
    pub researcher_id: String,
    pub ss: f64,
    pub publication_count: u32,
}

/// Scientific Strength of every roster researcher.
pub fn scientist_scores(corpus: &Corpus) -> BTreeMap<String, ScientistScore> {
    let catalog = JournalCatalog::new(corpus.journals());
    let weights: Vec<f64> = corpus
        .journals()
        .iter()
        .map(|j| catalog.percentile(j).expect("catalog built from corpus journals") / 100.0)
        .collect();
    let mut scores: BTreeMap<String, ScientistScore> = corpus
        .researchers()
        .map(|r| {
            (
                r.id.clone(),
                ScientistScore {
                    researcher_id: r.id.clone(),
                    ss: 0.0,
                    publication_count: 0,
                },
            )
        })
        .collect();
    for p in corpus.publications() {
        let w = weights[p.journal.0];
        let authors: BTreeSet<&str> = p
            .byline
            .iter()
            .filter_map(|a| a.researcher_id.as_deref())
            .collect();
        for rid in authors {
            if let Some(s) = scores.get_mut(rid) {
                s.ss += w;
                s.publication_count += 1;
            }
        }
    }
    scores
}

pub fn scientific_strength(researcher: &Researcher, corpus: &Corpus) -> ScientistScore {
    let catalog = JournalCatalog::new(corpus.journals());
    let mut ss = 0.0;
    let mut publication_count = 0;
    for p in corpus.publications() {
        if p.byline
            .iter()
            .any(|a| a.researcher_id.as_deref() == Some(researcher.id.as_str()))
        {
            let j = corpus.journal(p.journal);
            ss += catalog.percentile(j).expect("catalog built from corpus journals") / 100.0;
            publication_count += 1;
        }
    }
    ScientistScore {
        researcher_id: researcher.id.clone(),
        ss,
        publication_count,
    }
}

/// Top `top_share` of a national SDS pool by SS. The cutoff rank is
/// `⌈top_share·n⌉`; everyone tied with the cutoff score joins, and zero
/// scores never qualify.
pub fn star_set<'a>(
    pool: impl IntoIterator<Item = &'a ScientistScore>,
    top_share: f64,
) -> Result<BTreeSet<String>, IndicatorError> {
    if !(top_share > 0.0 && top_share < 1.0) {
        return Err(IndicatorError::TopShare(top_share));
    }
    let mut ranked: Vec<&ScientistScore> = pool.into_iter().collect();
    if ranked.is_empty() {
        return Ok(BTreeSet::new());
    }
    ranked.sort_by(|a, b| b.ss.total_cmp(&a.ss));
    // guard against 0.1 * 30 = 3.0000000000000004
    let k = ((top_share * ranked.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    let cutoff = ranked[k.min(ranked.len()) - 1].ss;
    Ok(ranked
        .into_iter()
        .filter(|s| s.ss > 0.0 && s.ss >= cutoff)
        .map(|s| s.researcher_id.clone())
        .collect())
}

/// Star sets per SDS over the researchers active during the window.
pub fn star_sets(
    corpus: &Corpus,
    scores: &BTreeMap<String, ScientistScore>,
    top_share: f64,
) -> Result<BTreeMap<String, BTreeSet<String>>, IndicatorError> {
    let window = corpus.window();
    let mut pools: BTreeMap<&str, Vec<&ScientistScore>> = BTreeMap::new();
    for r in corpus.researchers().filter(|r| r.staff_fraction(&window) > 0.0) {
        if let Some(s) = scores.get(&r.id) {
            pools.entry(r.sds_code.as_str()).or_default().push(s);
        }
    }
    pools
        .into_iter()
        .map(|(sds, pool)| Ok((sds.to_string(), star_set(pool, top_share)?)))
        .collect()
}

/// `(stars_i / stars_national) / (staff_i / staff_national)`, zero when the
/// SDS has no stars or the university has no staff in it.
pub fn star_concentration(stars_i: u32, stars_national: u32, staff_i: f64, staff_national: f64) -> f64 {
    if stars_national == 0 || staff_i <= 0.0 || staff_national <= 0.0 {
        return 0.0;
    }
    (stars_i as f64 / stars_national as f64) / (staff_i / staff_national)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdsIndicators {
    pub university_id: String,
    pub sds_code: String,
    pub m_sds: f64,
    pub ss_sds: f64,
    pub excell_sds: f64,
    pub star_count: u32,
    pub star_concentration: f64,
    pub cp_sds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NationalSdsStats {
    pub sds_code: String,
    pub pq_sds: f64,
    pub p_sds: f64,
    pub national_m: f64,
    pub national_ss: f64,
    pub national_star_count: u32,
    pub universities: u32,
    pub collaborations: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniversityIndicators {
    pub university_id: String,
    pub cp: u64,
    pub m: f64,
    pub excell: f64,
    pub star_scientist: f64,
}

#[derive(Debug, Clone, Default)]
pub struct SdsTable {
    pub rows: Vec<SdsIndicators>,
    pub national: BTreeMap<String, NationalSdsStats>,
}

impl SdsTable {
    pub fn for_sds<'a>(&'a self, sds_code: &'a str) -> impl Iterator<Item = &'a SdsIndicators> + 'a {
        self.rows.iter().filter(move |r| r.sds_code == sds_code)
    }

    pub fn p_sds(&self) -> BTreeMap<String, f64> {
        self.national
            .iter()
            .map(|(k, v)| (k.clone(), v.p_sds))
            .collect()
    }
}

/// One row per (university, SDS) with positive average staff, plus national
/// per-SDS statistics.
pub fn sds_indicators(
    corpus: &Corpus,
    ledger: &CollaborationLedger,
    scores: &BTreeMap<String, ScientistScore>,
    stars: &BTreeMap<String, BTreeSet<String>>,
    pq: PqConvention,
) -> SdsTable {
    let window = corpus.window();

    #[derive(Default)]
    struct Acc {
        m: f64,
        ss: f64,
        stars: u32,
    }
    let mut groups: BTreeMap<(String, String), Acc> = BTreeMap::new();
    for r in corpus.researchers() {
        let frac = r.staff_fraction(&window);
        if frac <= 0.0 {
            continue;
        }
        let acc = groups
            .entry((r.university_id.clone(), r.sds_code.clone()))
            .or_default();
        acc.m += frac;
        acc.ss += scores.get(&r.id).map_or(0.0, |s| s.ss);
        if stars.get(&r.sds_code).is_some_and(|set| set.contains(&r.id)) {
            acc.stars += 1;
        }
    }

    let mut national: BTreeMap<String, NationalSdsStats> = BTreeMap::new();
    for ((_, sds), acc) in &groups {
        let n = national
            .entry(sds.clone())
            .or_insert_with(|| NationalSdsStats {
                sds_code: sds.clone(),
                pq_sds: 0.0,
                p_sds: 0.0,
                national_m: 0.0,
                national_ss: 0.0,
                national_star_count: 0,
                universities: 0,
                collaborations: 0,
            });
        n.national_m += acc.m;
        n.national_ss += acc.ss;
        n.national_star_count += acc.stars;
        n.universities += 1;
    }
    let sds_total = ledger.sds_total();
    for n in national.values_mut() {
        n.pq_sds = match pq {
            PqConvention::PerResearcher => n.national_ss / n.national_m,
            PqConvention::PerUniversity => n.national_ss / n.universities as f64,
        };
        n.collaborations = ledger.by_sds().get(&n.sds_code).copied().unwrap_or(0);
        n.p_sds = if sds_total == 0 {
            0.0
        } else {
            n.collaborations as f64 / sds_total as f64
        };
    }

    let rows = groups
        .into_iter()
        .map(|((uid, sds), acc)| {
            let nat = &national[&sds];
            SdsIndicators {
                cp_sds: ledger.university_sds_count(&uid, &sds),
                star_concentration: star_concentration(
                    acc.stars,
                    nat.national_star_count,
                    acc.m,
                    nat.national_m,
                ),
                excell_sds: acc.ss / acc.m,
                university_id: uid,
                sds_code: sds,
                m_sds: acc.m,
                ss_sds: acc.ss,
                star_count: acc.stars,
            }
        })
        .collect();
    SdsTable { rows, national }
}

/// University-level variables from the SDS table:
/// `m = Σ p·m_sds`, `star_scientist = Σ p·conc_sds`,
/// `excell = (Σ (ss_sds / pq_sds)·p) / Σ m_sds`.
pub fn aggregate_indicators(
    sds_rows: &[SdsIndicators],
    national: &BTreeMap<String, NationalSdsStats>,
    ledger: &CollaborationLedger,
) -> Result<Vec<UniversityIndicators>, IndicatorError> {
    #[derive(Default)]
    struct Acc {
        m_weighted: f64,
        m_total: f64,
        star: f64,
        quality: f64,
    }
    let mut acc: BTreeMap<&str, Acc> = BTreeMap::new();
    for row in sds_rows {
        let nat = national
            .get(&row.sds_code)
            .ok_or_else(|| IndicatorError::MissingNational(row.sds_code.clone()))?;
        let a = acc.entry(row.university_id.as_str()).or_default();
        a.m_weighted += nat.p_sds * row.m_sds;
        a.m_total += row.m_sds;
        a.star += nat.p_sds * row.star_concentration;
        if row.ss_sds > 0.0 {
            if nat.pq_sds <= 0.0 {
                return Err(IndicatorError::InconsistentNational {
                    sds: row.sds_code.clone(),
                    university: row.university_id.clone(),
                    ss: row.ss_sds,
                });
            }
            a.quality += row.ss_sds / nat.pq_sds * nat.p_sds;
        }
    }
    Ok(acc
        .into_iter()
        .map(|(uid, a)| UniversityIndicators {
            university_id: uid.to_string(),
            cp: ledger.university_count(uid),
            m: a.m_weighted,
            excell: if a.m_total > 0.0 { a.quality / a.m_total } else { 0.0 },
            star_scientist: a.star,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn journal(cat: &str, impact: f64) -> Journal {
        Journal {
            name: format!("{cat}-{impact}"),
            category: cat.into(),
            impact_factor: impact,
        }
    }

    fn score(id: &str, ss: f64) -> ScientistScore {
        ScientistScore {
            researcher_id: id.into(),
            ss,
            publication_count: 1,
        }
    }

    #[test]
    fn top_of_ten_is_hundred() {
        let js: Vec<Journal> = (1..=10).map(|i| journal("A", i as f64)).collect();
        let cat = JournalCatalog::new(&js);
        assert_eq!(cat.percentile(&js[9]).unwrap(), 100.0);
        assert_eq!(cat.percentile(&js[0]).unwrap(), 0.0);
    }

    #[test]
    fn ninety_percent_lower() {
        // 11 journals; target beats 9 of the other 10, and one beats it.
        let mut js: Vec<Journal> = (1..=9).map(|i| journal("A", i as f64)).collect();
        js.push(journal("A", 20.0));
        let target = journal("A", 10.0);
        js.push(target.clone());
        assert_eq!(JournalCatalog::new(&js).percentile(&target).unwrap(), 90.0);
    }

    #[test]
    fn ties_share_percentile_and_singletons_are_fifty() {
        let js = vec![journal("A", 1.0), journal("A", 2.0), journal("A", 2.0), journal("B", 3.0)];
        let cat = JournalCatalog::new(&js);
        assert_eq!(cat.percentile(&js[1]).unwrap(), cat.percentile(&js[2]).unwrap());
        assert_eq!(cat.percentile(&js[3]).unwrap(), 50.0);
        assert_eq!(
            cat.percentile(&journal("Z", 1.0)),
            Err(IndicatorError::UnknownCategory("Z".into()))
        );
    }

    #[test]
    fn star_set_cutoff() {
        let pool: Vec<ScientistScore> = (0..20).map(|i| score(&format!("r{i:02}"), 20.0 - i as f64)).collect();
        let s = star_set(&pool, 0.10).unwrap();
        assert_eq!(s, ["r00", "r01"].iter().map(|s| s.to_string()).collect());
    }

    #[test]
    fn star_set_tie_expansion() {
        let mut pool: Vec<ScientistScore> = (0..20).map(|i| score(&format!("r{i:02}"), 1.0 + i as f64 * 0.01)).collect();
        pool[19].ss = 50.0;
        for i in [16, 17, 18] {
            pool[i].ss = 40.0; // ranks 2-4 tie
        }
        assert_eq!(star_set(&pool, 0.10).unwrap().len(), 4);
    }

    #[test]
    fn star_set_zero_scores_and_share_bounds() {
        let pool: Vec<ScientistScore> = (0..20).map(|i| score(&format!("r{i}"), 0.0)).collect();
        assert!(star_set(&pool, 0.10).unwrap().is_empty());
        assert_eq!(star_set(&pool, 1.0), Err(IndicatorError::TopShare(1.0)));
        assert_eq!(star_set(&pool, 0.0), Err(IndicatorError::TopShare(0.0)));
    }

    #[test]
    fn star_set_ceiling_is_robust_to_rounding() {
        let pool: Vec<ScientistScore> = (0..30).map(|i| score(&format!("r{i:02}"), 30.0 - i as f64)).collect();
        assert_eq!(star_set(&pool, 0.10).unwrap().len(), 3);
    }

    #[test]
    fn concentration_formula() {
        assert_eq!(star_concentration(2, 10, 5.0, 100.0), 4.0);
        assert_eq!(star_concentration(0, 10, 5.0, 100.0), 0.0);
        assert_eq!(star_concentration(10, 10, 100.0, 100.0), 1.0);
        assert_eq!(star_concentration(1, 0, 5.0, 100.0), 0.0);
    }

    fn nat(sds: &str, pq: f64, p: f64) -> (String, NationalSdsStats) {
        (
            sds.to_string(),
            NationalSdsStats {
                sds_code: sds.into(),
                pq_sds: pq,
                p_sds: p,
                national_m: 0.0,
                national_ss: 0.0,
                national_star_count: 0,
                universities: 0,
                collaborations: 0,
            },
        )
    }

    fn row(u: &str, sds: &str, m: f64, ss: f64, conc: f64) -> SdsIndicators {
        SdsIndicators {
            university_id: u.into(),
            sds_code: sds.into(),
            m_sds: m,
            ss_sds: ss,
            excell_sds: ss / m,
            star_count: 0,
            star_concentration: conc,
            cp_sds: 0,
        }
    }

    #[test]
    fn excell_division() {
        let r = row("U", "S", 4.0, 100.0, 0.0);
        assert_eq!(r.excell_sds, 25.0);
    }

    #[test]
    fn single_sds_aggregate_collapses() {
        let national: BTreeMap<_, _> = [nat("S", 2.0, 1.0)].into();
        let rows = vec![row("U", "S", 4.0, 10.0, 1.5)];
        let agg = aggregate_indicators(&rows, &national, &CollaborationLedger::default()).unwrap();
        assert_eq!(agg.len(), 1);
        assert!((agg[0].excell - rows[0].excell_sds / 2.0).abs() < 1e-15);
        assert_eq!(agg[0].m, 4.0);
        assert_eq!(agg[0].star_scientist, 1.5);
        assert_eq!(agg[0].cp, 0);
    }

    #[test]
    fn zero_pq_with_positive_ss_is_rejected() {
        let national: BTreeMap<_, _> = [nat("S", 0.0, 1.0)].into();
        let rows = vec![row("U", "S", 4.0, 10.0, 0.0)];
        assert!(matches!(
            aggregate_indicators(&rows, &national, &CollaborationLedger::default()),
            Err(IndicatorError::InconsistentNational { .. })
        ));
    }

    #[test]
    fn pharmacology_mean_cp() {
        // 105 collaborations over 44 universities
        assert!((105.0_f64 / 44.0 - 2.386).abs() < 5e-4);
    }
}
