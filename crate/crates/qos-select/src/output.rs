//! Result persistence: fixed-schema CSV for trial records, a JSON-lines
//! removal log, and per-strategy summary tables. Files are UTF-8 and
//! newline-terminated with a stable field order, so identical runs produce
//! byte-identical output.
//!
//! Sensor indices are 0-based everywhere in the library and 1-based in
//! persisted files and printed reports.

use std::fs::{self, File};
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::RemovalRecord;

/// Column order of the trial CSV; fixed, append-only schema.
pub const TRIAL_COLUMNS: [&str; 9] = [
    "trial",
    "seed",
    "bandwidth_hz",
    "strategy",
    "selected",
    "objective",
    "n_selected",
    "sca_iters",
    "wall_ms",
];

/// Column order of the summary CSV.
pub const SUMMARY_COLUMNS: [&str; 7] = [
    "bandwidth_hz",
    "strategy",
    "trials",
    "mean_objective",
    "std_objective",
    "mean_n_selected",
    "mean_gap_vs_brute",
];

/// One strategy's outcome on one trial. `selected` holds 0-based indices;
/// serialization converts to the 1-based `"1;3;5"` form.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// Present in rate-over-bandwidth runs; empty column otherwise.
    pub bandwidth_hz: Option<f64>,
    pub strategy: String,
    pub selected: Vec<usize>,
    pub objective: f64,
    pub n_selected: usize,
    /// Total outer iterations across the heuristic's solves; 0 for the
    /// baselines.
    pub sca_iters: usize,
    /// 0 unless timing was requested (timing breaks byte determinism).
    pub wall_ms: f64,
}

/// One line of the removal log, 1-based for human consumption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalLogLine {
    pub iteration: usize,
    pub candidate_set: Vec<usize>,
    pub gamma: Vec<f64>,
    pub p: Vec<f64>,
    pub removed: Option<usize>,
}

impl From<&RemovalRecord> for RemovalLogLine {
    fn from(rec: &RemovalRecord) -> Self {
        RemovalLogLine {
            iteration: rec.iteration,
            candidate_set: rec.candidate_set.iter().map(|&i| i + 1).collect(),
            gamma: rec.gamma.clone(),
            p: rec.p.clone(),
            removed: rec.removed.map(|i| i + 1),
        }
    }
}

/// Per-(bandwidth, strategy) aggregate over a run's trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub bandwidth_hz: Option<f64>,
    pub strategy: String,
    pub trials: usize,
    pub mean_objective: f64,
    pub std_objective: f64,
    pub mean_n_selected: f64,
    /// Mean of (objective − brute-force objective); present only when the
    /// run included the brute-force strategy.
    pub mean_gap_vs_brute: Option<f64>,
}

/// 1-based, semicolon-joined selection, e.g. `"2;4;5"`; empty for the
/// empty set.
pub fn format_selected(selected: &[usize]) -> String {
    selected.iter().map(|&i| (i + 1).to_string()).collect::<Vec<_>>().join(";")
}

/// Inverse of [`format_selected`], back to 0-based indices.
pub fn parse_selected(text: &str) -> Result<Vec<usize>> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(';')
        .map(|tok| {
            let v: usize = tok
                .parse()
                .map_err(|_| Error::Config(format!("bad selection token {tok:?}")))?;
            if v == 0 {
                return Err(Error::Config("selection indices are 1-based".into()));
            }
            Ok(v - 1)
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trial_csv(path: &Path, records: &[TrialRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRIAL_COLUMNS)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            fmt_opt(r.bandwidth_hz),
            r.strategy.clone(),
            format_selected(&r.selected),
            r.objective.to_string(),
            r.n_selected.to_string(),
            r.sca_iters.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trial_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(TRIAL_COLUMNS) {
        return Err(Error::Config(format!(
            "unexpected trial CSV columns: {headers:?}"
        )));
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or_default();
        let parse_f = |i: usize| -> Result<f64> {
            field(i)
                .parse()
                .map_err(|_| Error::Config(format!("bad number {:?} in column {}", field(i), TRIAL_COLUMNS[i])))
        };
        let bandwidth_hz = if field(2).is_empty() { None } else { Some(parse_f(2)?) };
        records.push(TrialRecord {
            trial: field(0)
                .parse()
                .map_err(|_| Error::Config(format!("bad trial index {:?}", field(0))))?,
            seed: field(1)
                .parse()
                .map_err(|_| Error::Config(format!("bad seed {:?}", field(1))))?,
            bandwidth_hz,
            strategy: field(3).to_string(),
            selected: parse_selected(field(4))?,
            objective: parse_f(5)?,
            n_selected: field(6)
                .parse()
                .map_err(|_| Error::Config(format!("bad count {:?}", field(6))))?,
            sca_iters: field(7)
                .parse()
                .map_err(|_| Error::Config(format!("bad iteration count {:?}", field(7))))?,
            wall_ms: parse_f(8)?,
        });
    }
    Ok(records)
}

pub fn write_removal_log(path: &Path, lines: &[RemovalLogLine]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for line in lines {
        serde_json::to_writer(&mut w, line)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_removal_log(path: &Path) -> Result<Vec<RemovalLogLine>> {
    let text = fs::read_to_string(path)?;
    text.lines().map(|l| Ok(serde_json::from_str(l)?)).collect()
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    for r in rows {
        w.write_record([
            fmt_opt(r.bandwidth_hz),
            r.strategy.clone(),
            r.trials.to_string(),
            r.mean_objective.to_string(),
            r.std_objective.to_string(),
            r.mean_n_selected.to_string(),
            fmt_opt(r.mean_gap_vs_brute),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One outer iteration of a relaxation solve, for convergence plots.
/// Iteration 0 is the initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub objective: f64,
    pub max_residual: f64,
}

pub fn write_trace_csv(path: &Path, points: &[TracePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["iteration", "objective", "max_residual"])?;
    for p in points {
        w.write_record([
            p.iteration.to_string(),
            p.objective.to_string(),
            p.max_residual.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a run's three files (`<stem>_results.csv`, `<stem>_removals.jsonl`,
/// `<stem>_summary.csv`) under `dir`, creating it if needed.
pub fn write_results(
    dir: &Path,
    stem: &str,
    records: &[TrialRecord],
    removals: &[RemovalLogLine],
    summary: &[SummaryRow],
) -> Result<[PathBuf; 3]> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}_results.csv"));
    write_trial_csv(&csv_path, records)?;
    let jsonl_path = dir.join(format!("{stem}_removals.jsonl"));
    write_removal_log(&jsonl_path, removals)?;
    let summary_path = dir.join(format!("{stem}_summary.csv"));
    write_summary_csv(&summary_path, summary)?;
    Ok([csv_path, jsonl_path, summary_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_records() -> Vec<TrialRecord> {
        vec![
            TrialRecord {
                trial: 0,
                seed: 42,
                bandwidth_hz: Some(2e6),
                strategy: "proposed".into(),
                selected: vec![1, 3, 4],
                objective: 0.06453,
                n_selected: 3,
                sca_iters: 9,
                wall_ms: 0.0,
            },
            TrialRecord {
                trial: 0,
                seed: 42,
                bandwidth_hz: None,
                strategy: "pmf".into(),
                selected: vec![],
                objective: 2.010025,
                n_selected: 0,
                sca_iters: 0,
                wall_ms: 0.0,
            },
        ]
    }

    #[test]
    fn trial_csv_matches_golden_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_trial_csv(&path, &sample_records()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let golden = "\
trial,seed,bandwidth_hz,strategy,selected,objective,n_selected,sca_iters,wall_ms
0,42,2000000,proposed,2;4;5,0.06453,3,9,0
0,42,,pmf,,2.010025,0,0,0
";
        assert_eq!(text, golden);
    }

    #[test]
    fn trial_csv_round_trips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let records = sample_records();
        write_trial_csv(&path, &records).unwrap();
        assert_eq!(read_trial_csv(&path).unwrap(), records);
    }

    #[test]
    fn selected_formatting_is_one_based() {
        assert_eq!(format_selected(&[1, 3, 4]), "2;4;5");
        assert_eq!(format_selected(&[]), "");
        assert_eq!(parse_selected("2;4;5").unwrap(), vec![1, 3, 4]);
        assert_eq!(parse_selected("").unwrap(), Vec::<usize>::new());
        assert!(parse_selected("0;1").is_err());
        assert!(parse_selected("a").is_err());
    }

    #[test]
    fn removal_log_round_trips_with_stable_keys() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("r.jsonl");
        let lines = vec![RemovalLogLine {
            iteration: 1,
            candidate_set: vec![1, 2, 3, 4, 5],
            gamma: vec![0.1882, 1.0, 0.06, 1.0, 1.0],
            p: vec![0.0148, 0.12, 1.0, 0.12, 0.12],
            removed: Some(1),
        }];
        write_removal_log(&path, &lines).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"iteration\":1,\"candidate_set\":[1,2,3,4,5],\"gamma\":"));
        assert!(text.ends_with("\n"));
        assert_eq!(read_removal_log(&path).unwrap(), lines);
    }

    #[test]
    fn summary_csv_has_fixed_columns() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let rows = vec![SummaryRow {
            bandwidth_hz: Some(1e6),
            strategy: "snm".into(),
            trials: 200,
            mean_objective: 0.5,
            std_objective: 0.125,
            mean_n_selected: 2.5,
            mean_gap_vs_brute: Some(0.01),
        }];
        write_summary_csv(&path, &rows).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let golden = "\
bandwidth_hz,strategy,trials,mean_objective,std_objective,mean_n_selected,mean_gap_vs_brute
1000000,snm,200,0.5,0.125,2.5,0.01
";
        assert_eq!(text, golden);
    }

    #[test]
    fn write_results_creates_all_three_files() {
        let dir = tempdir().unwrap();
        let paths = write_results(
            &dir.path().join("nested"),
            "run",
            &sample_records(),
            &[],
            &[],
        )
        .unwrap();
        for p in &paths {
            assert!(p.exists(), "{p:?} missing");
        }
    }
}
