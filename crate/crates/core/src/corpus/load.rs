use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::{
    Authorship, Corpus, CorpusError, Institution, InstitutionKind, Journal, JournalId,
    NameNormalizer, Publication, Region, Researcher, YearWindow,
};
use crate::geo::LatLon;

pub const PUBLICATIONS_FILE: &str = "publications.jsonl";
pub const INSTITUTIONS_FILE: &str = "institutions.csv";
pub const ROSTER_FILE: &str = "roster.csv";
pub const REGIONS_FILE: &str = "regions.csv";
pub const MACRO_GROUPS_FILE: &str = "macro_groups.csv";

const INSTITUTIONS_HEADER: &[&str] = &["id", "name", "kind", "region_code", "lat", "lon"];
const ROSTER_HEADER: &[&str] = &["researcher_id", "university_id", "sds_code", "years"];
const REGIONS_HEADER: &[&str] = &["code", "capital_name", "lat", "lon"];
const MACRO_GROUPS_HEADER: &[&str] = &["region_code", "group"];

#[derive(Debug, Clone)]
pub struct CorpusPaths {
    pub publications: PathBuf,
    pub institutions: PathBuf,
    pub roster: PathBuf,
    pub regions: PathBuf,
}

impl CorpusPaths {
    /// Standard file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            publications: dir.join(PUBLICATIONS_FILE),
            institutions: dir.join(INSTITUTIONS_FILE),
            roster: dir.join(ROSTER_FILE),
            regions: dir.join(REGIONS_FILE),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [
            &self.publications,
            &self.institutions,
            &self.roster,
            &self.regions,
        ]
    }
}

/// Non-fatal findings from a load.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub publications_read: usize,
    pub publications_kept: usize,
    pub outside_window: usize,
    /// Byline entries at a university with no roster match. They count for
    /// university-level events but not for SDS-level events.
    pub unmatched_university_authors: usize,
    pub warnings: Vec<String>,
}

pub fn load_corpus_dir(
    dir: impl AsRef<Path>,
    window: YearWindow,
) -> Result<(Corpus, LoadReport), CorpusError> {
    load_corpus(&CorpusPaths::in_dir(dir), window, &NameNormalizer::default())
}

pub fn load_corpus(
    paths: &CorpusPaths,
    window: YearWindow,
    normalizer: &NameNormalizer,
) -> Result<(Corpus, LoadReport), CorpusError> {
    let mut report = LoadReport::default();

    let regions = read_regions(&paths.regions)?;
    let institutions = read_institutions(&paths.institutions, &regions, normalizer, &mut report)?;
    let researchers = read_roster(&paths.roster, &institutions)?;
    let (publications, journals) = read_publications(
        &paths.publications,
        window,
        &institutions,
        &researchers,
        &mut report,
    )?;
    if publications.is_empty() {
        return Err(CorpusError::EmptyCorpus(window));
    }
    report.publications_kept = publications.len();

    let corpus = Corpus {
        publications,
        institutions,
        researchers,
        regions,
        journals,
        window,
    };
    Ok((corpus, report))
}

/// Region → macro-group pairs in file order.
pub fn read_macro_groups(path: &Path) -> Result<Vec<(String, String)>, CorpusError> {
    let t = read_csv(path, MACRO_GROUPS_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, rec) in &t.rows {
        let code = non_empty(&t.file, *line, "region_code", &rec[0])?;
        let group = non_empty(&t.file, *line, "group", &rec[1])?;
        if !seen.insert(code.clone()) {
            return Err(CorpusError::DuplicateId {
                file: t.file.clone(),
                line: *line,
                kind: "region",
                id: code,
            });
        }
        out.push((code, group));
    }
    Ok(out)
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Reads a file, failing on the first line that is not valid UTF-8.
fn read_utf8(path: &Path) -> Result<String, CorpusError> {
    let bytes = fs::read(path).map_err(|source| CorpusError::Io {
        path: display(path),
        source,
    })?;
    match String::from_utf8(bytes) {
        Ok(s) => Ok(s),
        Err(e) => {
            let bad = e.utf8_error().valid_up_to();
            let line = e.as_bytes()[..bad].iter().filter(|b| **b == b'\n').count() + 1;
            Err(CorpusError::InvalidEncoding {
                file: display(path),
                line,
            })
        }
    }
}

struct CsvTable {
    file: String,
    rows: Vec<(usize, csv::StringRecord)>,
}

fn read_csv(path: &Path, header: &[&str]) -> Result<CsvTable, CorpusError> {
    let file = display(path);
    let text = read_utf8(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found: Vec<String> = rdr
        .headers()
        .map_err(|e| malformed(&file, 1, "header", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if found != header {
        return Err(malformed(
            &file,
            1,
            "header",
            format!("expected `{}`, found `{}`", header.join(","), found.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            malformed(&file, line, "record", e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push((line, rec));
    }
    Ok(CsvTable { file, rows })
}

fn malformed(file: &str, line: usize, field: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::Malformed {
        file: file.to_string(),
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

fn non_empty(file: &str, line: usize, field: &str, v: &str) -> Result<String, CorpusError> {
    if v.is_empty() {
        Err(malformed(file, line, field, "empty value"))
    } else {
        Ok(v.to_string())
    }
}

fn parse_f64(file: &str, line: usize, field: &str, v: &str) -> Result<f64, CorpusError> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| malformed(file, line, field, format!("`{v}` is not a finite number")))
}

fn parse_location(
    file: &str,
    line: usize,
    lat: &str,
    lon: &str,
) -> Result<LatLon, CorpusError> {
    let lat = parse_f64(file, line, "lat", lat)?;
    let lon = parse_f64(file, line, "lon", lon)?;
    LatLon::new(lat, lon).map_err(|e| malformed(file, line, "lat/lon", e.to_string()))
}

fn read_regions(path: &Path) -> Result<BTreeMap<String, Region>, CorpusError> {
    let table = read_csv(path, REGIONS_HEADER)?;
    let f = &table.file;
    let mut out = BTreeMap::new();
    for (line, rec) in &table.rows {
        let line = *line;
        let code = non_empty(f, line, "code", &rec[0])?;
        let capital_name = non_empty(f, line, "capital_name", &rec[1])?;
        let capital_location = parse_location(f, line, &rec[2], &rec[3])?;
        if out.contains_key(&code) {
            return Err(CorpusError::DuplicateId {
                file: f.clone(),
                line,
                kind: "region",
                id: code,
            });
        }
        out.insert(
            code.clone(),
            Region {
                code,
                capital_name,
                capital_location,
            },
        );
    }
    Ok(out)
}

fn read_institutions(
    path: &Path,
    regions: &BTreeMap<String, Region>,
    normalizer: &NameNormalizer,
    report: &mut LoadReport,
) -> Result<BTreeMap<String, Institution>, CorpusError> {
    let table = read_csv(path, INSTITUTIONS_HEADER)?;
    let f = &table.file;
    let mut out = BTreeMap::new();
    let mut seen_names: BTreeMap<(InstitutionKind, String), String> = BTreeMap::new();
    for (line, rec) in &table.rows {
        let line = *line;
        let id = non_empty(f, line, "id", &rec[0])?;
        let name = non_empty(f, line, "name", &rec[1])?;
        let kind = match &rec[2] {
            "university" => InstitutionKind::University,
            "enterprise" => InstitutionKind::Enterprise,
            other => {
                return Err(malformed(
                    f,
                    line,
                    "kind",
                    format!("`{other}` is neither `university` nor `enterprise`"),
                ))
            }
        };
        let region_code = non_empty(f, line, "region_code", &rec[3])?;
        if !regions.contains_key(&region_code) {
            return Err(CorpusError::DanglingReference {
                file: f.clone(),
                line,
                kind: "region",
                id: region_code,
            });
        }
        let location = parse_location(f, line, &rec[4], &rec[5])?;
        if out.contains_key(&id) {
            return Err(CorpusError::DuplicateId {
                file: f.clone(),
                line,
                kind: "institution",
                id,
            });
        }
        let canonical_name = normalizer.canonical(&name);
        if canonical_name.is_empty() {
            report
                .warnings
                .push(format!("{f}:{line}: institution `{id}` normalizes to an empty name"));
        } else if let Some(prev) = seen_names.insert((kind, canonical_name.clone()), id.clone()) {
            report.warnings.push(format!(
                "{f}:{line}: institutions `{prev}` and `{id}` share canonical name `{canonical_name}`"
            ));
        }
        out.insert(
            id.clone(),
            Institution {
                id,
                name,
                canonical_name,
                kind,
                region_code,
                location,
            },
        );
    }
    Ok(out)
}

fn read_roster(
    path: &Path,
    institutions: &BTreeMap<String, Institution>,
) -> Result<BTreeMap<String, Researcher>, CorpusError> {
    let table = read_csv(path, ROSTER_HEADER)?;
    let f = &table.file;
    let mut out = BTreeMap::new();
    for (line, rec) in &table.rows {
        let line = *line;
        let id = non_empty(f, line, "researcher_id", &rec[0])?;
        let university_id = non_empty(f, line, "university_id", &rec[1])?;
        match institutions.get(&university_id) {
            None => {
                return Err(CorpusError::DanglingReference {
                    file: f.clone(),
                    line,
                    kind: "university",
                    id: university_id,
                })
            }
            Some(i) if i.kind != InstitutionKind::University => {
                return Err(malformed(
                    f,
                    line,
                    "university_id",
                    format!("`{university_id}` is an enterprise"),
                ))
            }
            Some(_) => {}
        }
        let sds_code = non_empty(f, line, "sds_code", &rec[2])?;
        let mut active_years = BTreeSet::new();
        for y in rec[3].split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let y = y
                .parse::<i32>()
                .map_err(|_| malformed(f, line, "years", format!("`{y}` is not a year")))?;
            active_years.insert(y);
        }
        if active_years.is_empty() {
            return Err(malformed(f, line, "years", "no active years"));
        }
        if out.contains_key(&id) {
            return Err(CorpusError::DuplicateId {
                file: f.clone(),
                line,
                kind: "researcher",
                id,
            });
        }
        out.insert(
            id.clone(),
            Researcher {
                id,
                university_id,
                sds_code,
                active_years,
            },
        );
    }
    Ok(out)
}

fn str_field<'a>(
    obj: &'a Value,
    file: &str,
    line: usize,
    field: &str,
) -> Result<&'a str, CorpusError> {
    match obj.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.as_str()),
        Some(Value::String(_)) => Err(malformed(file, line, field, "empty value")),
        Some(_) => Err(malformed(file, line, field, "expected a string")),
        None => Err(malformed(file, line, field, "missing")),
    }
}

fn read_publications(
    path: &Path,
    window: YearWindow,
    institutions: &BTreeMap<String, Institution>,
    researchers: &BTreeMap<String, Researcher>,
    report: &mut LoadReport,
) -> Result<(Vec<Publication>, Vec<Journal>), CorpusError> {
    let file = display(path);
    let f = file.as_str();
    let text = read_utf8(path)?;

    let mut ids = BTreeSet::new();
    let mut impact: HashMap<(String, String), f64> = HashMap::new();
    let mut journal_ids: BTreeMap<(String, String), JournalId> = BTreeMap::new();
    let mut journals = Vec::new();
    let mut publications = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim();
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let obj: Value = serde_json::from_str(raw)
            .map_err(|e| malformed(f, line, "record", e.to_string()))?;
        if !obj.is_object() {
            return Err(malformed(f, line, "record", "expected a JSON object"));
        }
        let id = str_field(&obj, f, line, "id")?.to_string();
        let year = obj
            .get("year")
            .and_then(Value::as_i64)
            .and_then(|y| i32::try_from(y).ok())
            .ok_or_else(|| malformed(f, line, "year", "expected an integer"))?;

        let j = obj
            .get("journal")
            .filter(|v| v.is_object())
            .ok_or_else(|| malformed(f, line, "journal", "expected an object"))?;
        let jname = str_field(j, f, line, "name")
            .map_err(|_| malformed(f, line, "journal.name", "missing or empty"))?;
        let category = str_field(j, f, line, "category")
            .map_err(|_| malformed(f, line, "journal.category", "missing or empty"))?;
        let impact_factor = j
            .get("impact_factor")
            .and_then(Value::as_f64)
            .filter(|x| x.is_finite() && *x >= 0.0)
            .ok_or_else(|| {
                malformed(f, line, "journal.impact_factor", "expected a non-negative number")
            })?;
        let key = (jname.to_string(), category.to_string());
        if let Some(prev) = impact.insert(key.clone(), impact_factor) {
            if prev != impact_factor {
                return Err(malformed(
                    f,
                    line,
                    "journal.impact_factor",
                    format!("journal `{jname}` ({category}) listed with {prev} and {impact_factor}"),
                ));
            }
        }

        let byline_raw = obj
            .get("byline")
            .and_then(Value::as_array)
            .ok_or_else(|| malformed(f, line, "byline", "expected an array"))?;
        if byline_raw.is_empty() {
            return Err(malformed(f, line, "byline", "empty byline"));
        }
        let mut byline = Vec::with_capacity(byline_raw.len());
        let mut unmatched = 0;
        for entry in byline_raw {
            let author_name = str_field(entry, f, line, "author")
                .map_err(|_| malformed(f, line, "byline.author", "missing or empty"))?
                .to_string();
            let institution_id = str_field(entry, f, line, "institution_id")
                .map_err(|_| malformed(f, line, "byline.institution_id", "missing or empty"))?
                .to_string();
            let inst = institutions.get(&institution_id).ok_or_else(|| {
                CorpusError::DanglingReference {
                    file: file.clone(),
                    line,
                    kind: "institution",
                    id: institution_id.clone(),
                }
            })?;
            let researcher_id = match entry.get("researcher_id") {
                None | Some(Value::Null) => None,
                Some(Value::String(s)) if s.trim().is_empty() => None,
                Some(Value::String(s)) => Some(s.clone()),
                Some(_) => {
                    return Err(malformed(
                        f,
                        line,
                        "byline.researcher_id",
                        "expected a string",
                    ))
                }
            };
            if let Some(rid) = &researcher_id {
                let r = researchers
                    .get(rid)
                    .ok_or_else(|| CorpusError::DanglingReference {
                        file: file.clone(),
                        line,
                        kind: "researcher",
                        id: rid.clone(),
                    })?;
                if r.university_id != institution_id {
                    return Err(malformed(
                        f,
                        line,
                        "byline.researcher_id",
                        format!(
                            "researcher `{rid}` belongs to `{}`, not `{institution_id}`",
                            r.university_id
                        ),
                    ));
                }
            } else if inst.kind == InstitutionKind::University {
                unmatched += 1;
            }
            byline.push(Authorship {
                author_name,
                institution_id,
                researcher_id,
            });
        }

        if !ids.insert(id.clone()) {
            return Err(CorpusError::DuplicateId {
                file: file.clone(),
                line,
                kind: "publication",
                id,
            });
        }
        report.publications_read += 1;
        if !window.contains(year) {
            report.outside_window += 1;
            continue;
        }
        report.unmatched_university_authors += unmatched;

        let journal = *journal_ids.entry(key.clone()).or_insert_with(|| {
            journals.push(Journal {
                name: key.0.clone(),
                category: key.1.clone(),
                impact_factor,
            });
            JournalId(journals.len() - 1)
        });
        publications.push(Publication {
            id,
            year,
            journal,
            byline,
        });
    }
    if report.unmatched_university_authors > 0 {
        report.warnings.push(format!(
            "{f}: {} university byline entries have no roster match (excluded from SDS-level counts)",
            report.unmatched_university_authors
        ));
    }
    Ok((publications, journals))
}
