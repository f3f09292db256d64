//! CSV output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ArlError, Result};
use crate::mcts::RootSnapshot;

use super::run::{RunRecord, StepRow};
use super::stats::{query_frequency_curve, summarize, Summary};

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ArlError + '_ {
    move |source| ArlError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| ArlError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Writes `rows` with a header. Header names come from `T`'s fields, so an
/// empty slice still gets its header from `header`.
fn write_rows<T: Serialize>(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = T>,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.serialize(row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| ArlError::Io {
        path: path.to_path_buf(),
        source,
    })
}

const RUNS_HEADER: [&str; 9] = [
    "replicate",
    "episode",
    "step",
    "state",
    "query",
    "action",
    "observed_reward",
    "true_reward",
    "cum_return",
];

#[derive(Serialize, Deserialize)]
struct CurveRow {
    step: usize,
    query_frequency: f64,
}

#[derive(Serialize)]
struct TraceRow {
    simulations: usize,
    query_q: Option<f64>,
    silent_q: Option<f64>,
}

/// Paths written by [`emit`].
#[derive(Clone, Debug, PartialEq)]
pub struct EmittedFiles {
    pub runs: PathBuf,
    pub curves: PathBuf,
    pub summary: PathBuf,
}

/// Writes `runs.csv`, `curves.csv` and `summary.csv` into `out_dir`,
/// overwriting earlier files.
pub fn emit(
    records: &[RunRecord],
    curve: &[f64],
    summaries: &[Summary],
    out_dir: &Path,
) -> Result<EmittedFiles> {
    create_dir(out_dir)?;
    let files = EmittedFiles {
        runs: out_dir.join("runs.csv"),
        curves: out_dir.join("curves.csv"),
        summary: out_dir.join("summary.csv"),
    };
    write_rows(
        &files.runs,
        &RUNS_HEADER,
        records.iter().flat_map(|r| &r.rows),
    )?;
    write_rows(
        &files.curves,
        &["step", "query_frequency"],
        curve
            .iter()
            .enumerate()
            .map(|(step, &query_frequency)| CurveRow {
                step,
                query_frequency,
            }),
    )?;
    write_rows(
        &files.summary,
        &["task", "agent", "mean_return", "sd_return", "mean_queries"],
        summaries,
    )?;
    Ok(files)
}

/// Writes the records of an experiment. With a single horizon everything
/// goes into `out_dir`; with several, each horizon gets its own `h<T>`
/// subdirectory and `out_dir/summary.csv` covers all of them.
pub fn emit_experiment(records: &[RunRecord], out_dir: &Path) -> Result<Vec<EmittedFiles>> {
    let mut horizons: Vec<usize> = records.iter().map(|r| r.horizon).collect();
    horizons.dedup();
    let summaries = summarize(records)?;
    if horizons.len() <= 1 {
        let curve = query_frequency_curve(records)?;
        return Ok(vec![emit(records, &curve, &summaries, out_dir)?]);
    }
    let mut written = Vec::new();
    for h in horizons {
        let group: Vec<RunRecord> = records.iter().filter(|r| r.horizon == h).cloned().collect();
        let curve = query_frequency_curve(&group)?;
        written.push(emit(
            &group,
            &curve,
            &summarize(&group)?,
            &out_dir.join(format!("h{h}")),
        )?);
    }
    create_dir(out_dir)?;
    let path = out_dir.join("summary.csv");
    write_rows(
        &path,
        &["task", "agent", "mean_return", "sd_return", "mean_queries"],
        &summaries,
    )?;
    Ok(written)
}

/// Root Q estimates at increasing simulation counts.
pub fn write_root_trace(snapshots: &[RootSnapshot], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_rows(
        path,
        &["simulations", "query_q", "silent_q"],
        snapshots.iter().map(|s| TraceRow {
            simulations: s.simulations,
            query_q: s.query_q,
            silent_q: s.silent_q,
        }),
    )
}

/// Parses a `runs.csv` file.
pub fn read_runs(path: &Path) -> Result<Vec<StepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize()
        .map(|row| row.map_err(csv_err(path)))
        .collect()
}

/// Parses a `curves.csv` file.
pub fn read_curve(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize::<CurveRow>()
        .map(|row| row.map(|c| c.query_frequency).map_err(csv_err(path)))
        .collect()
}
