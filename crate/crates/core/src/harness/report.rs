//! CSV tables, markdown summaries and two-column plot data.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::product_partial_series;
use crate::error::{Error, Result};
use crate::record::{CheckStatus, VerificationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    Series,
    All,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "series" => Ok(ReportFormat::Series),
            "all" => Ok(ReportFormat::All),
            other => Err(Error::Usage(format!(
                "unknown report format {other:?}; expected csv, markdown, series or all"
            ))),
        }
    }
}

/// Flat CSV view of a record (details are left out).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub check: String,
    pub model: String,
    pub seed: u64,
    pub trial: u64,
    pub p: Option<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack_ratio: f64,
    pub tol: f64,
    pub pass: bool,
    pub status: CheckStatus,
    pub cstar: f64,
    pub cstar_provenance: String,
    pub inputs_digest: String,
    pub wall_time_ms: f64,
}

impl From<&VerificationRecord> for CsvRow {
    fn from(r: &VerificationRecord) -> Self {
        CsvRow {
            check: r.check.clone(),
            model: r.model.clone(),
            seed: r.seed,
            trial: r.trial,
            p: r.p,
            lhs: r.lhs,
            rhs: r.rhs,
            slack_ratio: r.slack_ratio,
            tol: r.tol,
            pass: r.pass,
            status: r.status,
            cstar: r.cstar,
            cstar_provenance: r.cstar_provenance.clone(),
            inputs_digest: r.inputs_digest.clone(),
            wall_time_ms: r.wall_time_ms,
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

pub fn write_csv(path: &Path, records: &[VerificationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if records.is_empty() {
        // serde only emits the header together with a row
        w.write_record([
            "check",
            "model",
            "seed",
            "trial",
            "p",
            "lhs",
            "rhs",
            "slack_ratio",
            "tol",
            "pass",
            "status",
            "cstar",
            "cstar_provenance",
            "inputs_digest",
            "wall_time_ms",
        ])
        .map_err(csv_err)?;
    }
    for r in records {
        w.serialize(CsvRow::from(r)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(csv_err)?;
    rd.deserialize().map(|r| r.map_err(csv_err)).collect()
}

/// Per `(model, check, p)` statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub model: String,
    pub check: String,
    pub p: Option<f64>,
    pub count: usize,
    pub passed: usize,
    pub shortfalls: usize,
    pub violations: usize,
    pub numerical: usize,
    pub min_slack: f64,
    pub cstar: f64,
    pub provenance: String,
}

pub fn group_key(r: &VerificationRecord) -> String {
    match r.p {
        Some(p) => format!("{}|{}|p={p}", r.model, r.check),
        None => format!("{}|{}", r.model, r.check),
    }
}

pub fn summarize(records: &[VerificationRecord]) -> Vec<GroupSummary> {
    let mut groups: BTreeMap<String, GroupSummary> = BTreeMap::new();
    for r in records {
        let g = groups.entry(group_key(r)).or_insert_with(|| GroupSummary {
            model: r.model.clone(),
            check: r.check.clone(),
            p: r.p,
            count: 0,
            passed: 0,
            shortfalls: 0,
            violations: 0,
            numerical: 0,
            min_slack: f64::INFINITY,
            cstar: r.cstar,
            provenance: r.cstar_provenance.clone(),
        });
        g.count += 1;
        match r.status {
            CheckStatus::Pass => g.passed += 1,
            CheckStatus::EstimatorShortfall => g.shortfalls += 1,
            CheckStatus::Violation => g.violations += 1,
            CheckStatus::NumericalFailure => g.numerical += 1,
        }
        if !r.slack_ratio.is_nan() {
            g.min_slack = g.min_slack.min(r.slack_ratio);
        }
    }
    groups.into_values().collect()
}

pub fn markdown_summary(records: &[VerificationRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Verification summary\n");
    let _ = writeln!(s, "{} records.\n", records.len());
    let _ = writeln!(
        s,
        "| model | check | p | records | pass | shortfall | violation | numerical | min slack | C* | C* source |"
    );
    let _ = writeln!(s, "|---|---|---|---|---|---|---|---|---|---|---|");
    for g in summarize(records) {
        let p = g.p.map(|p| p.to_string()).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {:.6e} | {:.6} | {} |",
            g.model,
            g.check,
            p,
            g.count,
            g.passed,
            g.shortfalls,
            g.violations,
            g.numerical,
            g.min_slack,
            g.cstar,
            g.provenance
        );
    }
    let _ = writeln!(
        s,
        "\nEstimated C* values are lower bounds of the true constants, so every check is \
         conservative only up to estimator quality. A shortfall is a failure that disappears \
         once C* is inflated."
    );
    s
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' }).collect()
}

/// Two-column series:
/// `slack_vs_cstar_<model>.tsv` from `cstar_sweep` records, and
/// `a_truncation_n<n>_p<p>_c<C*>.tsv` (partial product `A` against depth)
/// for every `(n, p, C*)` of the other records.
pub fn write_series(dir: &Path, records: &[VerificationRecord]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let mut sweeps: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in records.iter().filter(|r| r.check == "cstar_sweep") {
        sweeps.entry(r.model.clone()).or_default().push((r.cstar, r.slack_ratio));
    }
    for (model, mut pts) in sweeps {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut text = String::from("cstar\tslack_ratio\n");
        for (c, s) in pts {
            let _ = writeln!(text, "{c}\t{s}");
        }
        let path = dir.join(format!("slack_vs_cstar_{}.tsv", sanitize(&model)));
        write_text(&path, &text)?;
        written.push(path);
    }

    let mut triples: Vec<(usize, f64, f64)> = Vec::new();
    for r in records.iter().filter(|r| r.check != "cstar_sweep") {
        if let (Some(p), Some(&n)) = (r.p, r.details.get("n")) {
            let t = (n as usize, p, r.cstar);
            if r.cstar > 0.0 && !triples.contains(&t) {
                triples.push(t);
            }
        }
    }
    for (n, p, c) in triples {
        let mut text = String::from("depth\tA\n");
        for (k, a) in product_partial_series(n, p, c, 40)? {
            let _ = writeln!(text, "{k}\t{a}");
        }
        let path = dir.join(format!("a_truncation_n{n}_p{p}_c{}.tsv", sanitize(&format!("{c:.6}"))));
        write_text(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}

/// Writes `report.csv`, `summary.md` and/or `series/*.tsv` into `out`.
pub fn render_report(records: &[VerificationRecord], format: ReportFormat, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut files = Vec::new();
    if matches!(format, ReportFormat::Csv | ReportFormat::All) {
        let p = out.join("report.csv");
        write_csv(&p, records)?;
        files.push(p);
    }
    if matches!(format, ReportFormat::Markdown | ReportFormat::All) {
        let p = out.join("summary.md");
        write_text(&p, &markdown_summary(records))?;
        files.push(p);
    }
    if matches!(format, ReportFormat::Series | ReportFormat::All) {
        files.extend(write_series(&out.join("series"), records)?);
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(check: &str, lhs: f64, rhs: f64, cstar: f64) -> VerificationRecord {
        VerificationRecord::inequality(check, "torus:3:4:1", lhs, rhs, 0.0)
            .with_cstar(cstar, "slab")
            .with_p(2.0)
            .with_detail("n", 3.0)
    }

    #[test]
    fn empty_report_has_header() {
        let dir = tempfile::tempdir().unwrap();
        render_report(&[], ReportFormat::All, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert!(text.starts_with("check,model,seed"));
        assert!(read_csv(&dir.path().join("report.csv")).unwrap().is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![rec("moser", 0.5, 2.0, 0.3), rec("theorem_a", -1.0, 2.0, 0.3), rec("x", 3.0, 1.0, 0.3)];
        let path = dir.path().join("r.csv");
        write_csv(&path, &recs).unwrap();
        let rows = read_csv(&path).unwrap();
        let want: Vec<CsvRow> = recs.iter().map(CsvRow::from).collect();
        assert_eq!(rows, want);
    }

    #[test]
    fn unknown_format_is_usage_error() {
        assert!(matches!("pdf".parse::<ReportFormat>(), Err(Error::Usage(_))));
    }

    #[test]
    fn markdown_lists_min_slack() {
        let recs = vec![rec("moser", 1.0, 2.0, 0.3), rec("moser", 1.0, 5.0, 0.3)];
        let md = markdown_summary(&recs);
        assert!(md.contains("| torus:3:4:1 | moser | 2 | 2 | 2 |"));
        assert!(md.contains("2.000000e0"));
    }

    #[test]
    fn series_files() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<VerificationRecord> = [0.3, 0.6, 0.9]
            .iter()
            .map(|&c| rec("cstar_sweep", 1.0, 10.0 * c, c))
            .collect();
        let mut recs = recs;
        recs.push(rec("moser", 1.0, 2.0, 0.3));
        let files = write_series(dir.path(), &recs).unwrap();
        assert_eq!(files.len(), 2);
        let sweep = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(sweep.lines().count(), 4);
    }
}
