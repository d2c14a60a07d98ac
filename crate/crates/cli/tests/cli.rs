use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_capmodel"));
    c.env_remove("CAPMODEL_CONFIG");
    c
}

fn tiny() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/tiny_corpus")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Numbers become `#`, stars and repeated blanks go, rules shrink to `---`.
fn layout(text: &str) -> String {
    let mut out = String::new();
    for line in text.lines().filter(|l| !l.starts_with('#')) {
        let mut s = String::new();
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let starts_number =
                c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()));
            if starts_number {
                i += 1;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if chars.get(i) == Some(&'%') {
                    i += 1;
                }
                s.push('#');
                continue;
            }
            if c != '*' && !(c == ' ' && s.ends_with(' ')) {
                s.push(c);
            }
            i += 1;
        }
        let s = s.trim_end();
        if s.len() >= 3 && s.chars().all(|c| c == '-') {
            out.push_str("---");
        } else {
            out.push_str(s);
        }
        out.push('\n');
    }
    out
}

#[test]
fn count_tiny_corpus_as_text() {
    let o = run(&["count", "--in", tiny().to_str().unwrap(), "--format", "text"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("# capmodel "));
    assert!(s.contains("# input publications.jsonl sha256 "));
    assert!(s.contains("University-enterprise and SDS-enterprise pairs and collaborations"));
    let row = |label: &str| {
        s.lines()
            .find(|l| l.starts_with(label))
            .unwrap_or_else(|| panic!("no `{label}` row"))
            .split_whitespace()
            .skip(1)
            .collect::<Vec<_>>()
            .join(" ")
    };
    assert_eq!(row("University-enterprise  "), "13 9");
    assert_eq!(row("SDS-enterprise  "), "14 10");
    assert!(s.contains("Sub Tot. North"));
}

#[test]
fn missing_input_is_a_validation_error() {
    let missing = "/nonexistent/capmodel-corpus";
    let o = run(&["fit", "--level", "aggregate", "--in", missing]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(missing), "{}", stderr(&o));
}

#[test]
fn unknown_flag_exits_one() {
    let o = run(&["count", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn failed_fit_exits_two() {
    let data = "university_id,cp,m,d\nA,0,1,100\nB,0,2,200\nC,0,3,150\nD,0,4,300\nE,0,5,120\n";
    let o = run_stdin(&["fit", "--level", "aggregate"], data.as_bytes());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("regress:"));
}

#[test]
fn simulate_piped_into_fit_matches_layout() {
    let sim = run(&["simulate", "--preset", "pharmacology", "--seed", "7"]);
    assert!(sim.status.success(), "{}", stderr(&sim));
    let o = run_stdin(&["fit", "--level", "sds"], &sim.stdout);
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = include_str!("fixtures/simulate_fit_sds.layout");
    assert_eq!(layout(&stdout(&o)), expected);
}

#[test]
fn help_lists_defaults() {
    for sub in ["ingest", "count", "indicators", "distance", "fit", "report", "simulate"] {
        let o = run(&[sub, "--help"]);
        assert!(o.status.success());
        let s = stdout(&o);
        assert!(s.contains("--format") && s.contains("[default: text]"), "{sub}");
    }
    let fit = stdout(&run(&["fit", "--help"]));
    for flag in ["--level", "--window", "--top-share", "--vif-threshold"] {
        let line = fit.lines().find(|l| l.contains(flag)).unwrap();
        assert!(line.contains("default"), "{line}");
    }
}

#[test]
fn config_from_environment_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[regress]\ncovariance = \"hc1\"\n").unwrap();
    let o = bin()
        .args(["ingest", "--in", tiny().to_str().unwrap()])
        .env("CAPMODEL_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("#   covariance = \"hc1\""));

    std::fs::write(&cfg, "[regress]\nbogus = 1\n").unwrap();
    let o = run(&["ingest", "--config", cfg.to_str().unwrap(), "--in", tiny().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn all_sds_sections_follow_code_order() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let o = run(&["simulate", "--preset", "aggregate", "--seed", "3", "--out", corpus.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["fit", "--in", corpus.to_str().unwrap(), "--all-sds"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let seen: Vec<String> = stdout(&o)
        .lines()
        .filter_map(|l| l.strip_prefix("Negative binomial regression results (SDS "))
        .map(|r| r.trim_end_matches(')').to_string())
        .collect();
    assert_eq!(seen.len(), 10);
    let mut sorted = seen.clone();
    sorted.sort();
    assert_eq!(seen, sorted);
}

#[test]
fn indicator_exports() {
    let o = run(&["indicators", "--in", tiny().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "university_id,sds_code,m,ss,excell,stars,star_conc,cp"));
    let o = run(&["indicators", "--in", tiny().to_str().unwrap(), "--level", "aggregate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().any(|l| l == "university_id,cp,m,d,excell,star_scientist"));
    let o = run(&["distance", "--in", tiny().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "university_id,scope,d_km"));
}

#[test]
fn sds_dataset_export_feeds_fit() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus");
    let data = dir.path().join("bio14.csv");
    let c = corpus.to_str().unwrap();
    assert!(run(&["simulate", "--seed", "5", "--out", c]).status.success());
    let o = run(&["indicators", "--in", c, "--sds", "BIO/14", "--out", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let from_file = run(&["fit", "--data", data.to_str().unwrap(), "--sds", "BIO/14"]);
    let from_corpus = run(&["fit", "--in", c]);
    assert!(from_file.status.success() && from_corpus.status.success());
    let body = |o: &Output| -> String {
        stdout(o).lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(body(&from_file), body(&from_corpus));
}
