//! Table rendering (aligned text, CSV, Markdown) and the fixed-column CSV
//! exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::collab::{CollaborationLedger, PairSummary, RegionalReport};
use crate::corpus::Corpus;
use crate::geo::{DemandScope, DistanceRecord};
use crate::indicators::{SdsIndicators, UniversityIndicators};
use crate::regress::{
    CorrelationMatrix, Dataset, Describe, ModelReport, RegressConfig, RegressError, SeSource,
    VifScreen,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Text,
    Markdown,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

/// Comment block placed before any output body: `#` lines for text and
/// CSV, an HTML comment for Markdown.
pub fn header(format: Format, lines: &[String]) -> String {
    let mut out = String::new();
    match format {
        Format::Markdown => {
            out.push_str("<!--\n");
            for l in lines {
                out.push_str(l);
                out.push('\n');
            }
            out.push_str("-->\n");
        }
        Format::Csv | Format::Text => {
            for l in lines {
                if l.is_empty() {
                    out.push_str("#\n");
                } else {
                    let _ = writeln!(out, "# {l}");
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub title: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(title: impl Into<String>, columns: &[&str]) -> Table {
        Table {
            title: title.into(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.render_text(),
            Format::Csv => csv_body(&self.columns, &self.rows),
            Format::Markdown => self.render_markdown(),
        }
    }

    fn render_text(&self) -> String {
        let ncol = self.columns.len();
        let mut width = vec![0usize; ncol];
        for r in std::iter::once(&self.columns).chain(&self.rows) {
            for (i, c) in r.iter().enumerate().take(ncol) {
                width[i] = width[i].max(c.chars().count());
            }
        }
        let line = |cells: &[String]| {
            let mut s = String::new();
            for (i, w) in width.iter().enumerate() {
                let c = cells.get(i).map(String::as_str).unwrap_or("");
                let pad = w - c.chars().count();
                if i == 0 {
                    s.push_str(c);
                    s.push_str(&" ".repeat(pad));
                } else {
                    s.push_str("  ");
                    s.push_str(&" ".repeat(pad));
                    s.push_str(c);
                }
            }
            s.trim_end().to_string()
        };
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
            let _ = writeln!(out);
        }
        let head = line(&self.columns);
        let rule = "-".repeat(width.iter().sum::<usize>() + 2 * ncol.saturating_sub(1));
        let _ = writeln!(out, "{head}");
        let _ = writeln!(out, "{rule}");
        for r in &self.rows {
            let _ = writeln!(out, "{}", line(r));
        }
        if !self.notes.is_empty() {
            let _ = writeln!(out, "{rule}");
            for n in &self.notes {
                let _ = writeln!(out, "{n}");
            }
        }
        out
    }

    fn render_markdown(&self) -> String {
        let esc = |s: &str| s.replace('|', "\\|").replace('*', "\\*");
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "**{}**", self.title);
            let _ = writeln!(out);
        }
        let _ = writeln!(
            out,
            "| {} |",
            self.columns.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | ")
        );
        let align: Vec<&str> = (0..self.columns.len())
            .map(|i| if i == 0 { ":---" } else { "---:" })
            .collect();
        let _ = writeln!(out, "|{}|", align.join("|"));
        for r in &self.rows {
            let _ = writeln!(
                out,
                "| {} |",
                r.iter().map(|c| esc(c)).collect::<Vec<_>>().join(" | ")
            );
        }
        if !self.notes.is_empty() {
            let _ = writeln!(out);
            for n in &self.notes {
                let _ = writeln!(out, "{}", esc(n));
                let _ = writeln!(out);
            }
        }
        out
    }
}

fn csv_body(columns: &[String], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(columns).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn f3(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.3}")
    }
}

fn thousands(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

pub fn pairs_table(summary: &PairSummary) -> Table {
    let mut t = Table::new(
        "University-enterprise and SDS-enterprise pairs and collaborations",
        &["Level of analysis", "N. of collaborations", "N. of pairs"],
    );
    t.push(vec![
        "University-enterprise".into(),
        thousands(summary.university.collaborations),
        thousands(summary.university.pairs),
    ]);
    t.push(vec![
        "SDS-enterprise".into(),
        thousands(summary.sds.collaborations),
        thousands(summary.sds.pairs),
    ]);
    t.notes.push(format!(
        "Co-authored publications with at least one university and one enterprise: {}",
        thousands(summary.publications)
    ));
    t
}

/// Collaborations per university with average staff in brackets, largest
/// first; universities without collaborations are listed too.
pub fn university_table(ledger: &CollaborationLedger, corpus: &Corpus) -> Table {
    let window = corpus.window();
    let mut staff: BTreeMap<&str, f64> = BTreeMap::new();
    for r in corpus.researchers() {
        *staff.entry(r.university_id.as_str()).or_default() += r.staff_fraction(&window);
    }
    let mut rows: Vec<(u64, String, String)> = corpus
        .universities()
        .map(|u| {
            (
                ledger.university_count(&u.id),
                u.id.clone(),
                format!("{} ({:.0})", u.name, staff.get(u.id.as_str()).copied().unwrap_or(0.0)),
            )
        })
        .collect();
    rows.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut t = Table::new(
        "Collaborations by university (average number of scientists in brackets)",
        &["University", "Coll."],
    );
    for (n, _, label) in rows {
        t.push(vec![label, n.to_string()]);
    }
    t
}

pub fn region_table(report: &RegionalReport) -> Table {
    let mut t = Table::new(
        "Collaborations by universities of each region",
        &["Region", "Collaborations", "Frequency (%)"],
    );
    for g in &report.groups {
        for r in &g.rows {
            t.push(vec![r.region_code.clone(), thousands(r.collaborations), format!("{:.1}", r.share_pct)]);
        }
        t.push(vec![
            format!("Sub Tot. {}", g.name),
            thousands(g.collaborations),
            format!("{:.1}", g.share_pct),
        ]);
    }
    t.push(vec!["Total".into(), thousands(report.total), String::new()]);
    t
}

/// SDS-level collaborations and distinct pairs per SDS.
pub fn sds_table(ledger: &CollaborationLedger) -> Table {
    let mut pairs: BTreeMap<&str, std::collections::BTreeSet<(&str, &str)>> = BTreeMap::new();
    for e in ledger.events() {
        if let Some(sds) = &e.sds_code {
            pairs
                .entry(sds.as_str())
                .or_default()
                .insert((e.university_id.as_str(), e.enterprise_id.as_str()));
        }
    }
    let total = ledger.sds_total();
    let mut t = Table::new(
        "SDS-enterprise collaborations by SDS",
        &["SDS", "N. of collaborations", "N. of pairs", "Share (%)"],
    );
    for (sds, n) in ledger.by_sds() {
        let share = if total == 0 { 0.0 } else { 100.0 * *n as f64 / total as f64 };
        t.push(vec![
            sds.clone(),
            n.to_string(),
            pairs.get(sds.as_str()).map_or(0, |p| p.len()).to_string(),
            format!("{share:.1}"),
        ]);
    }
    t
}

pub fn descriptive_table(title: &str, stats: &[Describe]) -> Table {
    let mut t = Table::new(title, &["Variable", "Obs", "Mean", "Std. Dev.", "Min", "Max"]);
    for s in stats {
        t.push(vec![
            s.name.clone(),
            s.obs.to_string(),
            f3(s.mean),
            f3(s.std_dev),
            f3(s.min),
            f3(s.max),
        ]);
    }
    t
}

fn significance_note(cfg: &RegressConfig) -> String {
    let [a, b, c] = cfg.star_thresholds;
    format!("Statistical significance: * p-value < {a:.2}, ** p-value < {b:.2}, *** p-value < {c:.2}")
}

/// Lower-triangular correlation matrix with stars.
pub fn correlation_table(title: &str, c: &CorrelationMatrix, cfg: &RegressConfig) -> Table {
    let mut cols = vec![String::new()];
    cols.extend(c.labels.iter().cloned());
    let mut t = Table {
        title: title.into(),
        columns: cols,
        ..Default::default()
    };
    for i in 0..c.labels.len() {
        let mut row = vec![c.labels[i].clone()];
        for j in 0..c.labels.len() {
            row.push(if j < i {
                format!("{}{}", f3(c.r[(i, j)]), c.stars[i][j])
            } else if j == i {
                "1.000".into()
            } else {
                String::new()
            });
        }
        t.push(row);
    }
    t.notes.push(significance_note(cfg));
    t
}

pub fn vif_table(screen: &VifScreen) -> Table {
    let mut t = Table::new("Variance inflation factors", &["Variable", "VIF", "R2", "Flagged"]);
    for e in &screen.entries {
        t.push(vec![
            e.name.clone(),
            f3(e.vif),
            f3(e.r_squared),
            if e.flagged { "yes".into() } else { String::new() },
        ]);
    }
    t.notes.push(format!("Threshold: {}", screen.threshold));
    t.notes.push(match &screen.dropped {
        Some(d) => format!("Dropped: {d}"),
        None => "Dropped: none".into(),
    });
    t
}

/// Coefficient or IRR table: `value (se)stars` cells, then `n° obs` and the
/// α = 0 LR footer.
pub fn model_table(report: &ModelReport, cfg: &RegressConfig) -> Table {
    let mut cols = vec![String::new()];
    cols.extend(report.columns.iter().cloned());
    let mut t = Table {
        title: report.title.clone(),
        columns: cols,
        ..Default::default()
    };
    for r in &report.rows {
        let mut row = vec![r.label.clone()];
        for c in &r.cells {
            row.push(match c {
                Some(c) => format!("{} ({}){}", f3(c.value), f3(c.se), c.stars),
                None => String::new(),
            });
        }
        t.push(row);
    }
    let mut obs = vec!["n° obs".to_string()];
    obs.extend(report.n_obs.iter().map(|n| n.to_string()));
    t.push(obs);
    let mut lr = vec!["LR chi square α = 0".to_string()];
    lr.extend(report.lr.iter().map(|(s, st)| format!("{s:.2}{st}")));
    t.push(lr);
    t.notes.push(format!(
        "Method of estimation: negative binomial regression; {} standard errors in brackets",
        match cfg.se_source {
            SeSource::Robust => "robust",
            SeSource::Model => "model-based",
        }
    ));
    t.notes.push(significance_note(cfg));
    t
}

fn num(v: f64) -> String {
    format!("{v}")
}

pub const SDS_COLUMNS: [&str; 8] = [
    "university_id",
    "sds_code",
    "m",
    "ss",
    "excell",
    "stars",
    "star_conc",
    "cp",
];
pub const AGGREGATE_COLUMNS: [&str; 6] = ["university_id", "cp", "m", "d", "excell", "star_scientist"];
pub const DISTANCE_COLUMNS: [&str; 3] = ["university_id", "scope", "d_km"];

pub fn sds_indicators_csv(rows: &[SdsIndicators]) -> String {
    let cols: Vec<String> = SDS_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.university_id.clone(),
                r.sds_code.clone(),
                num(r.m_sds),
                num(r.ss_sds),
                num(r.excell_sds),
                r.star_count.to_string(),
                num(r.star_concentration),
                r.cp_sds.to_string(),
            ]
        })
        .collect();
    csv_body(&cols, &body)
}

pub fn aggregate_indicators_csv(
    rows: &[UniversityIndicators],
    distances: &BTreeMap<String, DistanceRecord>,
) -> String {
    let cols: Vec<String> = AGGREGATE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.university_id.clone(),
                r.cp.to_string(),
                num(r.m),
                distances
                    .get(&r.university_id)
                    .map(|d| num(d.d_km))
                    .unwrap_or_default(),
                num(r.excell),
                num(r.star_scientist),
            ]
        })
        .collect();
    csv_body(&cols, &body)
}

fn scope_label(s: &DemandScope) -> String {
    match s {
        DemandScope::Sds(code) => format!("sds:{code}"),
        DemandScope::NationalMix(_) => "aggregate".into(),
        DemandScope::OwnCollaborations(_) => "own".into(),
    }
}

pub fn distances_csv(records: &[DistanceRecord]) -> String {
    let cols: Vec<String> = DISTANCE_COLUMNS.iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = records
        .iter()
        .map(|r| vec![r.university_id.clone(), scope_label(&r.scope), num(r.d_km)])
        .collect();
    csv_body(&cols, &body)
}

/// Regression dataset as CSV: id, response, then regressors. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn dataset_csv(data: &Dataset) -> String {
    let mut cols = vec!["university_id".to_string(), data.response_name().to_string()];
    cols.extend(data.regressor_names().iter().cloned());
    let body: Vec<Vec<String>> = (0..data.n_obs())
        .map(|i| {
            let mut row = vec![data.ids()[i].clone(), data.response()[i].to_string()];
            for name in data.regressor_names() {
                row.push(num(data.column(name).expect("listed column")[i]));
            }
            row
        })
        .collect();
    csv_body(&cols, &body)
}

/// Parses [`dataset_csv`] output; `#` lines are skipped.
pub fn read_dataset_csv(text: &str) -> Result<Dataset, RegressError> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| RegressError::Shape(e.to_string()))?
        .clone();
    if headers.len() < 2 {
        return Err(RegressError::Shape(
            "dataset needs an id column and a response column".into(),
        ));
    }
    let mut ids = Vec::new();
    let mut y = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len() - 2];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| RegressError::Shape(e.to_string()))?;
        ids.push(rec[0].to_string());
        y.push(rec[1].parse::<u64>().map_err(|_| RegressError::InvalidValue {
            column: headers[1].to_string(),
            row: i,
        })?);
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(rec[j + 2].parse::<f64>().map_err(|_| RegressError::InvalidValue {
                column: headers[j + 2].to_string(),
                row: i,
            })?);
        }
    }
    Dataset::new(
        ids,
        headers[1].to_string(),
        y,
        headers.iter().skip(2).map(String::from).zip(cols).collect(),
    )
}
