//! Input data model: institutions, researchers, journals, publications and
//! regional geography, loaded into an immutable [`Corpus`].

mod load;
mod normalize;

pub use load::{
    load_corpus, load_corpus_dir, read_macro_groups, CorpusPaths, LoadReport, INSTITUTIONS_FILE,
    MACRO_GROUPS_FILE, PUBLICATIONS_FILE, REGIONS_FILE, ROSTER_FILE,
};
pub use normalize::{normalize_institution_name, NameNormalizer, DEFAULT_LEGAL_SUFFIXES};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::LatLon;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file}:{line}: malformed record, field `{field}`: {message}")]
    Malformed {
        file: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("{file}:{line}: invalid UTF-8 in record")]
    InvalidEncoding { file: String, line: usize },
    #[error("{file}:{line}: dangling reference to {kind} `{id}`")]
    DanglingReference {
        file: String,
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("{file}:{line}: duplicate {kind} id `{id}`")]
    DuplicateId {
        file: String,
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("no publications left after filtering to window {0}")]
    EmptyCorpus(YearWindow),
    #[error("invalid year window {start}-{end}")]
    InvalidWindow { start: i32, end: i32 },
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Inclusive range of publication years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub start: i32,
    pub end: i32,
}

impl YearWindow {
    pub fn new(start: i32, end: i32) -> Result<Self, CorpusError> {
        if start > end {
            return Err(CorpusError::InvalidWindow { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        self.start <= year && year <= self.end
    }

    /// Number of years covered.
    pub fn len(&self) -> usize {
        (self.end - self.start + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for YearWindow {
    fn default() -> Self {
        Self {
            start: 2001,
            end: 2003,
        }
    }
}

impl fmt::Display for YearWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

impl std::str::FromStr for YearWindow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = s
            .split_once('-')
            .ok_or_else(|| format!("expected START-END, got `{s}`"))?;
        let start = a.trim().parse::<i32>().map_err(|e| e.to_string())?;
        let end = b.trim().parse::<i32>().map_err(|e| e.to_string())?;
        YearWindow::new(start, end).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InstitutionKind {
    University,
    Enterprise,
}

impl fmt::Display for InstitutionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InstitutionKind::University => "university",
            InstitutionKind::Enterprise => "enterprise",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Institution {
    pub id: String,
    pub name: String,
    /// Canonical form of `name` after normalization and alias resolution.
    pub canonical_name: String,
    pub kind: InstitutionKind,
    pub region_code: String,
    pub location: LatLon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Researcher {
    pub id: String,
    pub university_id: String,
    pub sds_code: String,
    pub active_years: BTreeSet<i32>,
}

impl Researcher {
    /// Share of the window the researcher was on staff: years active inside
    /// the window divided by the window length.
    pub fn staff_fraction(&self, window: &YearWindow) -> f64 {
        let active = self
            .active_years
            .iter()
            .filter(|y| window.contains(**y))
            .count();
        active as f64 / window.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Journal {
    pub name: String,
    pub category: String,
    pub impact_factor: f64,
}

/// Index into [`Corpus::journals`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct JournalId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Authorship {
    pub author_name: String,
    pub institution_id: String,
    pub researcher_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Publication {
    pub id: String,
    pub year: i32,
    pub journal: JournalId,
    pub byline: Vec<Authorship>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub code: String,
    pub capital_name: String,
    pub capital_location: LatLon,
}

/// Validated, window-filtered input data. Immutable after load.
#[derive(Debug, Clone)]
pub struct Corpus {
    publications: Vec<Publication>,
    institutions: BTreeMap<String, Institution>,
    researchers: BTreeMap<String, Researcher>,
    regions: BTreeMap<String, Region>,
    journals: Vec<Journal>,
    window: YearWindow,
}

impl Corpus {
    /// Assembles a corpus from already-validated parts. Callers outside the
    /// loader are expected to uphold referential integrity; [`Corpus::validate`]
    /// re-checks it.
    pub fn from_parts(
        publications: Vec<Publication>,
        institutions: Vec<Institution>,
        researchers: Vec<Researcher>,
        regions: Vec<Region>,
        journals: Vec<Journal>,
        window: YearWindow,
    ) -> Result<Self, CorpusError> {
        let corpus = Corpus {
            publications,
            institutions: institutions
                .into_iter()
                .map(|i| (i.id.clone(), i))
                .collect(),
            researchers: researchers.into_iter().map(|r| (r.id.clone(), r)).collect(),
            regions: regions.into_iter().map(|r| (r.code.clone(), r)).collect(),
            journals,
            window,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn publications(&self) -> &[Publication] {
        &self.publications
    }

    pub fn institutions(&self) -> impl Iterator<Item = &Institution> {
        self.institutions.values()
    }

    pub fn institution(&self, id: &str) -> Option<&Institution> {
        self.institutions.get(id)
    }

    pub fn universities(&self) -> impl Iterator<Item = &Institution> {
        self.institutions
            .values()
            .filter(|i| i.kind == InstitutionKind::University)
    }

    pub fn enterprises(&self) -> impl Iterator<Item = &Institution> {
        self.institutions
            .values()
            .filter(|i| i.kind == InstitutionKind::Enterprise)
    }

    pub fn researchers(&self) -> impl Iterator<Item = &Researcher> {
        self.researchers.values()
    }

    pub fn researcher(&self, id: &str) -> Option<&Researcher> {
        self.researchers.get(id)
    }

    pub fn regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.values()
    }

    pub fn region(&self, code: &str) -> Option<&Region> {
        self.regions.get(code)
    }

    pub fn journals(&self) -> &[Journal] {
        &self.journals
    }

    pub fn journal(&self, id: JournalId) -> &Journal {
        &self.journals[id.0]
    }

    pub fn window(&self) -> YearWindow {
        self.window
    }

    /// Sum over researchers of their staff fraction for the window.
    pub fn average_staff(&self) -> f64 {
        self.researchers
            .values()
            .map(|r| r.staff_fraction(&self.window))
            .sum()
    }

    /// Re-checks referential integrity and the window filter.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let ctx = |what: &str| what.to_string();
        for inst in self.institutions.values() {
            if !self.regions.contains_key(&inst.region_code) {
                return Err(CorpusError::DanglingReference {
                    file: ctx("institutions"),
                    line: 0,
                    kind: "region",
                    id: inst.region_code.clone(),
                });
            }
        }
        for r in self.researchers.values() {
            match self.institutions.get(&r.university_id) {
                Some(i) if i.kind == InstitutionKind::University => {}
                _ => {
                    return Err(CorpusError::DanglingReference {
                        file: ctx("roster"),
                        line: 0,
                        kind: "university",
                        id: r.university_id.clone(),
                    })
                }
            }
        }
        for p in &self.publications {
            if !self.window.contains(p.year) {
                return Err(CorpusError::Malformed {
                    file: ctx("publications"),
                    line: 0,
                    field: "year".into(),
                    message: format!("{} outside window {}", p.year, self.window),
                });
            }
            if p.journal.0 >= self.journals.len() {
                return Err(CorpusError::DanglingReference {
                    file: ctx("publications"),
                    line: 0,
                    kind: "journal",
                    id: p.journal.0.to_string(),
                });
            }
            for a in &p.byline {
                if !self.institutions.contains_key(&a.institution_id) {
                    return Err(CorpusError::DanglingReference {
                        file: ctx("publications"),
                        line: 0,
                        kind: "institution",
                        id: a.institution_id.clone(),
                    });
                }
                if let Some(rid) = &a.researcher_id {
                    match self.researchers.get(rid) {
                        Some(r) if r.university_id == a.institution_id => {}
                        _ => {
                            return Err(CorpusError::DanglingReference {
                                file: ctx("publications"),
                                line: 0,
                                kind: "researcher",
                                id: rid.clone(),
                            })
                        }
                    }
                }
            }
        }
        if self.publications.is_empty() {
            return Err(CorpusError::EmptyCorpus(self.window));
        }
        Ok(())
    }
}
