//! `capmodel`: corpus ingestion, collaboration counts, indicators,
//! distances, count-regression fits and synthetic corpora.

use std::io::{IsTerminal, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use capmodel_core::collab::{regional_report, MacroGroups};
use capmodel_core::config::Config;
use capmodel_core::corpus::{
    load_corpus, read_macro_groups, Corpus, CorpusPaths, LoadReport, NameNormalizer,
    MACRO_GROUPS_FILE,
};
use capmodel_core::pipeline::{analyze, Analysis};
use capmodel_core::regress::{
    descriptive_stats, effect_per_delta, fit_models, pearson_corr, Dataset, ModelsReport,
    RegressConfig,
};
use capmodel_core::report::{
    self, aggregate_indicators_csv, correlation_table, dataset_csv, descriptive_table,
    distances_csv, model_table, pairs_table, read_dataset_csv, region_table, sds_indicators_csv,
    sds_table, university_table, vif_table, Format, Table,
};
use capmodel_core::synth::{generate_corpus, SynthConfig, PRESETS};
use capmodel_core::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "capmodel", version, about = "University-industry collaboration capability model")]
struct Cli {
    /// TOML run configuration; see the README for keys and defaults
    #[arg(long, global = true, env = "CAPMODEL_CONFIG")]
    config: Option<PathBuf>,

    /// Output format for tables
    #[arg(long, global = true, value_enum, default_value_t = OutFormat::Text)]
    format: OutFormat,

    /// Write output here instead of stdout; for `simulate`, the directory
    /// receiving the corpus files
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Text,
    Markdown,
}

impl From<OutFormat> for Format {
    fn from(f: OutFormat) -> Format {
        match f {
            OutFormat::Csv => Format::Csv,
            OutFormat::Text => Format::Text,
            OutFormat::Markdown => Format::Markdown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Level {
    Sds,
    Aggregate,
}

#[derive(Args, Debug, Clone)]
struct CorpusArgs {
    /// Corpus directory holding publications.jsonl, institutions.csv,
    /// roster.csv, regions.csv and optionally macro_groups.csv
    #[arg(long = "in", value_name = "DIR")]
    input: PathBuf,

    /// Publication-year window START-END [default: 2001-2003, or the config file]
    #[arg(long)]
    window: Option<String>,

    /// Share of each SDS counted as star scientists [default: 0.10, or the config file]
    #[arg(long)]
    top_share: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct FitArgs {
    /// Corpus directory; without it a regression dataset is read from
    /// --data or stdin
    #[arg(long = "in", value_name = "DIR", conflicts_with = "data")]
    input: Option<PathBuf>,

    /// Regression dataset CSV (id, cp, then regressors)
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,

    /// Unit of analysis
    #[arg(long, value_enum, default_value_t = Level::Sds)]
    level: Level,

    /// SDS code to fit; defaults to the only SDS when the corpus has one
    #[arg(long, conflicts_with = "all_sds")]
    sds: Option<String>,

    /// Fit every SDS of the corpus, in SDS-code order
    #[arg(long, requires = "input")]
    all_sds: bool,

    /// Publication-year window START-END [default: 2001-2003, or the config file]
    #[arg(long)]
    window: Option<String>,

    /// Share of each SDS counted as star scientists [default: 0.10, or the config file]
    #[arg(long)]
    top_share: Option<f64>,

    /// VIF above which a regressor is flagged [default: 10, or the config file]
    #[arg(long)]
    vif_threshold: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load and validate a corpus; print the load summary
    Ingest(CorpusArgs),
    /// Collaboration tallies: pairs, regions, SDSs and universities
    Count(CorpusArgs),
    /// Indicator table as CSV; with --sds, the regression dataset of one SDS
    Indicators {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Unit of analysis
        #[arg(long, value_enum, default_value_t = Level::Sds)]
        level: Level,
        /// Emit the regression dataset of this SDS
        #[arg(long)]
        sds: Option<String>,
    },
    /// Demand-weighted distances as CSV, SDS scopes then aggregate
    Distance(CorpusArgs),
    /// Poisson and negative binomial fits of Model 1 and Model 2
    Fit(FitArgs),
    /// Full report: counts, descriptive statistics, correlations and fits
    Report(FitArgs),
    /// Generate a synthetic corpus into --out DIR, or print its regression
    /// dataset
    Simulate {
        /// Preset name (pharmacology, aggregate) or path to a preset TOML file
        #[arg(long, default_value = "pharmacology")]
        preset: String,
        /// Random seed [default: the preset's seed]
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset level when printing [default: sds for single-SDS presets, otherwise aggregate]
        #[arg(long, value_enum)]
        level: Option<Level>,
    },
}

#[derive(Debug)]
enum CliError {
    Core(Error),
    Usage(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

fn core<T, E: Into<Error>>(r: Result<T, E>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Core(e.into()))
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) if e.is_validation() => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("capmodel: error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Inputs contributing to an output, for the header digests.
struct Inputs(Vec<(String, String)>);

impl Inputs {
    fn new() -> Self {
        Inputs(Vec::new())
    }

    fn add_bytes(&mut self, label: &str, bytes: &[u8]) {
        self.0.push((label.to_string(), hex::encode(Sha256::digest(bytes))));
    }

    fn add_file(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = core(std::fs::read(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        }))?;
        let label = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.add_bytes(&label, &bytes);
        Ok(())
    }
}

struct Ctx<'a> {
    cli: &'a Cli,
    config: Config,
    format: Format,
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => {
            if !p.is_file() {
                return Err(CliError::Usage(format!("config file `{}` not found", p.display())));
            }
            Config::load(p)?
        }
        None => Config::default(),
    };
    let mut ctx = Ctx {
        cli,
        config,
        format: cli.format.into(),
    };
    match &cli.command {
        Command::Ingest(a) => ingest(&mut ctx, a),
        Command::Count(a) => count(&mut ctx, a),
        Command::Indicators { corpus, level, sds } => indicators(&mut ctx, corpus, *level, sds.as_deref()),
        Command::Distance(a) => distance(&mut ctx, a),
        Command::Fit(a) => fit(&mut ctx, a, false),
        Command::Report(a) => fit(&mut ctx, a, true),
        Command::Simulate { preset, seed, level } => {
            simulate(&ctx, preset, *seed, cli.out.as_deref(), *level)
        }
    }
}

fn apply_overrides(
    config: &mut Config,
    window: Option<&str>,
    top_share: Option<f64>,
    vif_threshold: Option<f64>,
) -> Result<(), CliError> {
    if let Some(w) = window {
        config.window = w
            .parse()
            .map_err(|e| CliError::Usage(format!("--window: {e}")))?;
    }
    if let Some(t) = top_share {
        config.pipeline.top_share = t;
    }
    if let Some(v) = vif_threshold {
        config.regress.vif_threshold = v;
    }
    Ok(config.validate()?)
}

struct Loaded {
    corpus: Corpus,
    load: LoadReport,
    groups: MacroGroups,
    inputs: Inputs,
}

fn load(ctx: &Ctx, dir: &Path) -> Result<Loaded, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "input directory `{}` does not exist",
            dir.display()
        )));
    }
    let paths = CorpusPaths::in_dir(dir);
    for p in paths.all() {
        if !p.is_file() {
            return Err(CliError::Usage(format!("missing corpus file `{}`", p.display())));
        }
    }
    let mut inputs = Inputs::new();
    for p in paths.all() {
        inputs.add_file(p)?;
    }
    let groups_path = dir.join(MACRO_GROUPS_FILE);
    let groups = if groups_path.is_file() {
        inputs.add_file(&groups_path)?;
        MacroGroups::from_pairs(&core(read_macro_groups(&groups_path))?)
    } else {
        MacroGroups::default()
    };
    let (corpus, load) = core(load_corpus(&paths, ctx.config.window, &NameNormalizer::default()))?;
    Ok(Loaded {
        corpus,
        load,
        groups,
        inputs,
    })
}

fn header(ctx: &Ctx, command: &str, inputs: &Inputs, format: Format) -> String {
    let mut lines = vec![format!("capmodel {VERSION} {command}"), "config:".to_string()];
    lines.extend(ctx.config.echo().lines().filter(|l| !l.is_empty()).map(|l| format!("  {l}")));
    for (label, digest) in &inputs.0 {
        lines.push(format!("input {label} sha256 {digest}"));
    }
    report::header(format, &lines)
}

fn render(tables: &[Table], format: Format) -> String {
    tables
        .iter()
        .map(|t| t.render(format))
        .collect::<Vec<_>>()
        .join("\n")
}

fn emit(ctx: &Ctx, body: &str) -> Result<(), CliError> {
    match &ctx.cli.out {
        Some(p) => core(std::fs::write(p, body).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        })),
        None => {
            let mut out = std::io::stdout().lock();
            // a closed pipe downstream is not our failure
            let _ = out.write_all(body.as_bytes()).and_then(|_| out.flush());
            Ok(())
        }
    }
}

fn load_table(l: &Loaded) -> Table {
    let c = &l.corpus;
    let r = &l.load;
    let mut t = Table::new("Corpus load summary", &["Item", "Count"]);
    let rows: [(&str, usize); 10] = [
        ("Publications read", r.publications_read),
        ("Publications in window", r.publications_kept),
        ("Publications outside window", r.outside_window),
        ("Unmatched university authors", r.unmatched_university_authors),
        ("Universities", c.universities().count()),
        ("Enterprises", c.enterprises().count()),
        ("Researchers", c.researchers().count()),
        ("Journals", c.journals().len()),
        ("Regions", c.regions().count()),
        ("Warnings", r.warnings.len()),
    ];
    for (k, v) in rows {
        t.push(vec![k.to_string(), v.to_string()]);
    }
    t.notes.push(format!("Window: {}", c.window()));
    t.notes.extend(r.warnings.iter().map(|w| format!("warning: {w}")));
    t
}

fn ingest(ctx: &mut Ctx, a: &CorpusArgs) -> Result<(), CliError> {
    apply_overrides(&mut ctx.config, a.window.as_deref(), a.top_share, None)?;
    let l = load(ctx, &a.input)?;
    let body = header(ctx, "ingest", &l.inputs, ctx.format) + &load_table(&l).render(ctx.format);
    emit(ctx, &body)
}

fn count_tables(l: &Loaded, a: &Analysis) -> Vec<Table> {
    let regional = regional_report(&a.ledger, &l.corpus, &l.groups);
    vec![
        pairs_table(&a.ledger.tally()),
        region_table(&regional),
        sds_table(&a.ledger),
        university_table(&a.ledger, &l.corpus),
    ]
}

fn count(ctx: &mut Ctx, a: &CorpusArgs) -> Result<(), CliError> {
    apply_overrides(&mut ctx.config, a.window.as_deref(), a.top_share, None)?;
    let l = load(ctx, &a.input)?;
    let an = core(analyze(&l.corpus, &ctx.config.pipeline))?;
    let body = header(ctx, "count", &l.inputs, ctx.format) + &render(&count_tables(&l, &an), ctx.format);
    emit(ctx, &body)
}

fn indicators(ctx: &mut Ctx, a: &CorpusArgs, level: Level, sds: Option<&str>) -> Result<(), CliError> {
    apply_overrides(&mut ctx.config, a.window.as_deref(), a.top_share, None)?;
    let l = load(ctx, &a.input)?;
    let an = core(analyze(&l.corpus, &ctx.config.pipeline))?;
    let body = match (level, sds) {
        (Level::Sds, Some(code)) => dataset_csv(&core(an.sds_dataset(code))?),
        (Level::Sds, None) => sds_indicators_csv(&an.sds.rows),
        (Level::Aggregate, _) => aggregate_indicators_csv(&an.universities, &an.distance),
    };
    emit(ctx, &(header(ctx, "indicators", &l.inputs, Format::Csv) + &body))
}

fn distance(ctx: &mut Ctx, a: &CorpusArgs) -> Result<(), CliError> {
    apply_overrides(&mut ctx.config, a.window.as_deref(), a.top_share, None)?;
    let l = load(ctx, &a.input)?;
    let an = core(analyze(&l.corpus, &ctx.config.pipeline))?;
    let body = header(ctx, "distance", &l.inputs, Format::Csv) + &distances_csv(&an.distance_records());
    emit(ctx, &body)
}

fn fit_tables(scope: &str, data: &Dataset, cfg: &RegressConfig, full: bool) -> Result<Vec<Table>, Error> {
    let mut tables = Vec::new();
    if full {
        let stats = descriptive_stats(data)?;
        tables.push(descriptive_table(&format!("Descriptive statistics ({scope})"), &stats));
        let corr = pearson_corr(data, &cfg.star_thresholds)?;
        tables.push(correlation_table(&format!("Pairwise correlations ({scope})"), &corr, cfg));
    }
    let r: ModelsReport = fit_models(data, cfg)?;
    let mut vif = vif_table(&r.vif);
    vif.title = format!("{} ({scope})", vif.title);
    tables.push(vif);

    let mut coef = r.coefficients();
    coef.title = format!("{} ({scope})", coef.title);
    let mut coef_t = model_table(&coef, cfg);
    for m in [&r.model1, &r.model2] {
        let nb = &m.negbin;
        let alpha = nb.alpha.unwrap_or(0.0);
        let mut note = format!("{}: alpha = {alpha:.4}", m.label);
        if nb.alpha_at_boundary {
            note.push_str(" (at the lower bound)");
        }
        if let Ok(pct) = effect_per_delta(nb, "d", 100.0) {
            note.push_str(&format!(", +100 km in d changes expected CP by {pct:.1}%"));
        }
        coef_t.notes.push(note);
    }
    tables.push(coef_t);

    let mut irr = r.irr();
    irr.title = format!("{} ({scope})", irr.title);
    tables.push(model_table(&irr, cfg));
    Ok(tables)
}

fn resolve_sds(an: &Analysis, sds: Option<&str>) -> Result<String, CliError> {
    let codes = an.sds_codes();
    match sds {
        Some(c) => Ok(c.to_string()),
        None if codes.len() == 1 => Ok(codes[0].clone()),
        None => Err(CliError::Usage(format!(
            "the corpus has {} SDSs; pass --sds CODE or --all-sds (available: {})",
            codes.len(),
            codes.join(", ")
        ))),
    }
}

fn fit(ctx: &mut Ctx, a: &FitArgs, full: bool) -> Result<(), CliError> {
    apply_overrides(&mut ctx.config, a.window.as_deref(), a.top_share, a.vif_threshold)?;
    let command = if full { "report" } else { "fit" };
    let cfg = ctx.config.regress.clone();
    let format = ctx.format;

    let Some(dir) = &a.input else {
        let mut inputs = Inputs::new();
        let text = match &a.data {
            Some(p) => {
                if !p.is_file() {
                    return Err(CliError::Usage(format!("dataset file `{}` not found", p.display())));
                }
                inputs.add_file(p)?;
                core(std::fs::read_to_string(p).map_err(|source| Error::Io {
                    path: p.display().to_string(),
                    source,
                }))?
            }
            None => {
                let stdin = std::io::stdin();
                if stdin.is_terminal() {
                    return Err(CliError::Usage(
                        "no input: pass --in DIR, --data FILE or pipe a dataset on stdin".into(),
                    ));
                }
                let mut s = String::new();
                core(stdin.lock().read_to_string(&mut s).map_err(|source| Error::Io {
                    path: "<stdin>".into(),
                    source,
                }))?;
                inputs.add_bytes("<stdin>", s.as_bytes());
                s
            }
        };
        let data = core(read_dataset_csv(&text))?;
        let scope = match (a.level, &a.sds) {
            (Level::Aggregate, _) => "aggregate".to_string(),
            (Level::Sds, Some(c)) => format!("SDS {c}"),
            (Level::Sds, None) => "SDS".to_string(),
        };
        let tables = core(fit_tables(&scope, &data, &cfg, full))?;
        return emit(ctx, &(header(ctx, command, &inputs, format) + &render(&tables, format)));
    };

    let l = load(ctx, dir)?;
    let an = core(analyze(&l.corpus, &ctx.config.pipeline))?;
    let mut tables = if full { count_tables(&l, &an) } else { Vec::new() };
    match a.level {
        Level::Aggregate => {
            let data = core(an.aggregate_dataset())?;
            tables.extend(core(fit_tables("aggregate", &data, &cfg, full))?);
        }
        Level::Sds if a.all_sds => {
            let codes = an.sds_codes();
            let results: Vec<Result<Vec<Table>, Error>> = codes
                .par_iter()
                .map(|code| fit_tables(&format!("SDS {code}"), &an.sds_dataset(code)?, &cfg, full))
                .collect();
            let mut failed = 0;
            for (code, r) in codes.iter().zip(results) {
                match r {
                    Ok(t) => tables.extend(t),
                    Err(e) => {
                        failed += 1;
                        let mut t = Table::new(format!("SDS {code}"), &["Status"]);
                        t.push(vec![format!("not fitted: {e}")]);
                        tables.push(t);
                    }
                }
            }
            if failed == codes.len() {
                tables.clear();
                return Err(CliError::Core(Error::Config(format!(
                    "none of the {} SDSs could be fitted",
                    codes.len()
                ))));
            }
        }
        Level::Sds => {
            let code = resolve_sds(&an, a.sds.as_deref())?;
            let data = core(an.sds_dataset(&code))?;
            tables.extend(core(fit_tables(&format!("SDS {code}"), &data, &cfg, full))?);
        }
    }
    emit(ctx, &(header(ctx, command, &l.inputs, format) + &render(&tables, format)))
}

fn simulate(
    ctx: &Ctx,
    preset: &str,
    seed: Option<u64>,
    corpus_out: Option<&Path>,
    level: Option<Level>,
) -> Result<(), CliError> {
    let mut cfg = if PRESETS.contains(&preset) {
        core(SynthConfig::preset(preset))?
    } else {
        let p = Path::new(preset);
        if !p.is_file() {
            return Err(CliError::Usage(format!(
                "unknown preset `{preset}` (built in: {}; or a path to a preset file)",
                PRESETS.join(", ")
            )));
        }
        let text = core(std::fs::read_to_string(p).map_err(|source| Error::Io {
            path: p.display().to_string(),
            source,
        }))?;
        core(SynthConfig::from_toml(&text))?
    };
    if let Some(s) = seed {
        cfg = cfg.with_seed(s);
    }
    let synth = core(generate_corpus(&cfg))?;
    if let Some(dir) = corpus_out {
        core(synth.write(dir))?;
        let mut t = Table::new("Synthetic corpus", &["Item", "Count"]);
        t.push(vec!["Publications".into(), synth.publications.len().to_string()]);
        t.push(vec!["Institutions".into(), synth.institutions.len().to_string()]);
        t.push(vec!["Researchers".into(), synth.researchers.len().to_string()]);
        t.notes.push(format!("Written to {}", dir.display()));
        let mut inputs = Inputs::new();
        inputs.add_bytes("preset", cfg.echo().as_bytes());
        let body = header(ctx, &format!("simulate {} seed {}", cfg.name, cfg.seed), &inputs, ctx.format)
            + &t.render(ctx.format);
        // --out names the corpus directory here, so the summary goes to stdout
        let mut out = std::io::stdout().lock();
        let _ = out.write_all(body.as_bytes()).and_then(|_| out.flush());
        return Ok(());
    }
    let corpus = core(synth.corpus())?;
    let an = core(analyze(&corpus, &ctx.config.pipeline))?;
    let level = level.unwrap_or(if cfg.n_sds() == 1 { Level::Sds } else { Level::Aggregate });
    let data = match level {
        Level::Sds => core(an.sds_dataset(&resolve_sds(&an, None)?))?,
        Level::Aggregate => core(an.aggregate_dataset())?,
    };
    let mut inputs = Inputs::new();
    inputs.add_bytes("preset", cfg.echo().as_bytes());
    let body = header(ctx, &format!("simulate {} seed {}", cfg.name, cfg.seed), &inputs, Format::Csv)
        + &dataset_csv(&data);
    emit(ctx, &body)
}
