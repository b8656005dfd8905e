//! File formats exchanged between the simulator, the comparison tools and
//! the evaluation harness.
//!
//! - output CSV: the six model series, one row per iteration;
//! - parameter file: `key=value` lines, `#` comments;
//! - results table: one staged score per (candidate, trial);
//! - p-value, timing and PC-score tables for downstream analysis.
//!
//! Every writer emits `\n` line endings, including after the last line.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::params::{ParamError, SimParams, PARAM_COUNT, PARAM_NAMES};
use crate::sim::{Column, OutputRow, SimOutput};

pub const OUTPUT_HEADER: &str =
    "total_prey,total_predators,total_food,mean_energy_prey,mean_energy_predators,mean_c";

/// What was wrong with an output CSV.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad header: expected `{OUTPUT_HEADER}`, found `{found}`")]
    Header { found: String },
    #[error("line {line}: {message}")]
    Cell { line: usize, message: String },
    #[error("expected {expected} data rows, found {found}")]
    Length { expected: usize, found: usize },
    #[error("line {line}: `{column}` is negative ({value})")]
    Domain {
        line: usize,
        column: &'static str,
        value: String,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl FormatError {
    /// Short class name: header, cell, length, domain or io.
    pub fn class(&self) -> &'static str {
        match self {
            FormatError::Header { .. } => "header",
            FormatError::Cell { .. } => "cell",
            FormatError::Length { .. } => "length",
            FormatError::Domain { .. } => "domain",
            FormatError::Io(_) => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum ParamFileError {
    #[error("line {line}: expected `key=value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("missing key `{0}`")]
    MissingKey(&'static str),
    #[error("line {line}: `{key}` is not a non-negative integer: `{value}`")]
    NotInteger {
        line: usize,
        key: String,
        value: String,
    },
    #[error(transparent)]
    Invalid(#[from] ParamError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Formats a mean with exactly six decimals.
fn fmt_mean(v: f64) -> String {
    format!("{v:.6}")
}

pub fn write_output_csv<W: Write>(output: &SimOutput, sink: W) -> io::Result<()> {
    let mut sink = io::BufWriter::new(sink);
    writeln!(sink, "{OUTPUT_HEADER}")?;
    for r in &output.rows {
        writeln!(
            sink,
            "{},{},{},{},{},{}",
            r.total_prey,
            r.total_predators,
            r.total_food,
            fmt_mean(r.mean_energy_prey),
            fmt_mean(r.mean_energy_predators),
            fmt_mean(r.mean_c),
        )?;
    }
    sink.flush()
}

pub fn output_csv_string(output: &SimOutput) -> String {
    let mut buf = Vec::new();
    write_output_csv(output, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("csv output is ASCII")
}

fn parse_count(field: &str, column: Column, line: usize) -> Result<u64, FormatError> {
    let field = field.trim();
    if let Ok(v) = field.parse::<u64>() {
        return Ok(v);
    }
    if field.parse::<i64>().is_ok() {
        return Err(FormatError::Domain {
            line,
            column: column.name(),
            value: field.to_string(),
        });
    }
    Err(FormatError::Cell {
        line,
        message: format!("`{}` is not an integer count: `{field}`", column.name()),
    })
}

fn parse_mean(field: &str, column: Column, line: usize) -> Result<f64, FormatError> {
    let field = field.trim();
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(v),
        Ok(v) if v.is_finite() => Err(FormatError::Domain {
            line,
            column: column.name(),
            value: field.to_string(),
        }),
        _ => Err(FormatError::Cell {
            line,
            message: format!("`{}` is not a finite number: `{field}`", column.name()),
        }),
    }
}

/// Parses an output CSV. With `expected_rows`, the number of data rows must
/// match exactly. A trailing `\r` on each line is tolerated, and a final
/// newline is optional.
pub fn read_output_csv<R: Read>(
    source: R,
    expected_rows: Option<usize>,
) -> Result<SimOutput, FormatError> {
    let reader = BufReader::new(source);
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => String::new(),
    };
    let header = header.trim_end_matches('\r');
    if header != OUTPUT_HEADER {
        return Err(FormatError::Header {
            found: header.to_string(),
        });
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            return Err(FormatError::Cell {
                line: line_no,
                message: "empty line".into(),
            });
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(FormatError::Cell {
                line: line_no,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        rows.push(OutputRow {
            total_prey: parse_count(fields[0], Column::TotalPrey, line_no)?,
            total_predators: parse_count(fields[1], Column::TotalPredators, line_no)?,
            total_food: parse_count(fields[2], Column::TotalFood, line_no)?,
            mean_energy_prey: parse_mean(fields[3], Column::MeanEnergyPrey, line_no)?,
            mean_energy_predators: parse_mean(fields[4], Column::MeanEnergyPredators, line_no)?,
            mean_c: parse_mean(fields[5], Column::MeanC, line_no)?,
        });
    }
    if let Some(expected) = expected_rows {
        if rows.len() != expected {
            return Err(FormatError::Length {
                expected,
                found: rows.len(),
            });
        }
    }
    Ok(SimOutput { rows })
}

pub fn write_param_file<W: Write>(params: &SimParams, mut sink: W) -> io::Result<()> {
    for (name, value) in PARAM_NAMES.iter().zip(params.values()) {
        writeln!(sink, "{name}={value}")?;
    }
    Ok(())
}

/// Reads a parameter file. Blank lines and lines starting with `#` are
/// ignored; whitespace around keys and values is trimmed.
pub fn read_param_file<R: Read>(source: R) -> Result<SimParams, ParamFileError> {
    let mut values: [Option<u32>; PARAM_COUNT] = [None; PARAM_COUNT];
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| ParamFileError::Syntax {
                line: line_no,
                text: trimmed.to_string(),
            })?;
        let (key, value) = (key.trim(), value.trim());
        let slot = PARAM_NAMES.iter().position(|n| *n == key).ok_or_else(|| {
            ParamFileError::UnknownKey {
                line: line_no,
                key: key.to_string(),
            }
        })?;
        if values[slot].is_some() {
            return Err(ParamFileError::DuplicateKey {
                line: line_no,
                key: key.to_string(),
            });
        }
        let parsed = value
            .parse::<u32>()
            .map_err(|_| ParamFileError::NotInteger {
                line: line_no,
                key: key.to_string(),
                value: value.to_string(),
            })?;
        values[slot] = Some(parsed);
    }
    let mut resolved = [0u32; PARAM_COUNT];
    for (slot, v) in values.iter().enumerate() {
        resolved[slot] = v.ok_or(ParamFileError::MissingKey(PARAM_NAMES[slot]))?;
    }
    Ok(SimParams::from_values(&resolved)?)
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ResultRow {
    pub candidate_id: String,
    pub trial_id: u32,
    pub seed: u64,
    pub score: u8,
    pub reason: String,
}

pub fn write_results_table<W: Write>(rows: &[ResultRow], sink: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["candidate_id", "trial_id", "seed", "score", "reason"])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_table<R: Read>(source: R) -> csv::Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_reader(source);
    let rows: Vec<ResultRow> = r.deserialize().collect::<Result<_, _>>()?;
    for row in &rows {
        if !(1..=6).contains(&row.score) {
            return Err(csv::Error::from(io::Error::new(
                io::ErrorKind::InvalidData,
                format!("score {} outside 1..=6", row.score),
            )));
        }
    }
    Ok(rows)
}

/// One row of the p-value table.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PValueRow {
    pub candidate: String,
    pub trial: u32,
    pub paramset: String,
    pub k: usize,
    pub p_raw: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

pub fn write_pvalue_table<W: Write>(rows: &[PValueRow], sink: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    w.write_record([
        "candidate",
        "trial",
        "paramset",
        "k",
        "p_raw",
        "p_adjusted",
        "significant",
    ])?;
    for r in rows {
        w.write_record([
            r.candidate.clone(),
            r.trial.to_string(),
            r.paramset.clone(),
            r.k.to_string(),
            format!("{:.6}", r.p_raw),
            format!("{:.6}", r.p_adjusted),
            r.significant.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the timing table.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub paramset: String,
    pub trial: String,
    pub mean_s: f64,
    pub s_rel_pct: Option<f64>,
    pub ratio: Option<f64>,
}

pub fn write_timing_table<W: Write>(rows: &[TimingRow], sink: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink);
    w.write_record(["paramset", "trial", "mean_s", "s_rel_pct", "ratio"])?;
    let opt = |v: Option<f64>, prec: usize| v.map(|v| format!("{v:.prec$}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.paramset.clone(),
            r.trial.clone(),
            format!("{:.6}", r.mean_s),
            opt(r.s_rel_pct, 2),
            opt(r.ratio, 2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes principal-component scores for plotting: a comment line with the
/// explained-variance ratios (4 decimals), a `group,pc1..pck` header and one
/// row per run.
///
/// # Panics
/// If `labels` and `scores` disagree on the number of rows.
pub fn export_pc_scores<W: Write>(
    scores: &nalgebra::DMatrix<f64>,
    labels: &[&str],
    explained: &[f64],
    mut sink: W,
) -> io::Result<()> {
    assert_eq!(scores.nrows(), labels.len(), "one label per score row");
    let ratios: Vec<String> = explained.iter().map(|r| format!("{r:.4}")).collect();
    writeln!(sink, "# explained_variance_ratio={}", ratios.join(","))?;
    write!(sink, "group")?;
    for c in 0..scores.ncols() {
        write!(sink, ",pc{}", c + 1)?;
    }
    writeln!(sink)?;
    for (r, label) in labels.iter().enumerate() {
        write!(sink, "{label}")?;
        for c in 0..scores.ncols() {
            write!(sink, ",{:.6}", scores[(r, c)])?;
        }
        writeln!(sink)?;
    }
    Ok(())
}

/// Name given to the single parameter set of a flat run directory.
pub const FLAT_PARAMSET: &str = "default";

#[derive(Debug, Error)]
pub enum RunDirError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("{dir}: parameter set `{paramset}` has {found} run file(s), need at least 2")]
    TooFewRuns {
        dir: PathBuf,
        paramset: String,
        found: usize,
    },
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>, RunDirError> {
    let io_err = |source| RunDirError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads recorded runs from a directory.
///
/// Each subdirectory is one parameter set (named after the subdirectory,
/// sorted by name) holding one output CSV per run. A directory without
/// subdirectories is a single parameter set named [`FLAT_PARAMSET`]. Run
/// files are read in file-name order; every parameter set needs at least
/// two runs.
pub fn read_run_dir(dir: &Path) -> Result<Vec<(String, Vec<SimOutput>)>, RunDirError> {
    let io_err = |source| RunDirError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut subdirs = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_dir() {
            subdirs.push(path);
        }
    }
    subdirs.sort();
    let sets: Vec<(String, PathBuf)> = if subdirs.is_empty() {
        vec![(FLAT_PARAMSET.to_string(), dir.to_path_buf())]
    } else {
        subdirs
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
            .collect()
    };
    let mut out = Vec::with_capacity(sets.len());
    for (name, path) in sets {
        let files = csv_files(&path)?;
        if files.len() < 2 {
            return Err(RunDirError::TooFewRuns {
                dir: path,
                paramset: name,
                found: files.len(),
            });
        }
        let mut runs = Vec::with_capacity(files.len());
        for file in files {
            let f = std::fs::File::open(&file).map_err(|source| RunDirError::Io {
                path: file.clone(),
                source,
            })?;
            let run = read_output_csv(f, None).map_err(|source| RunDirError::Format {
                path: file.clone(),
                source,
            })?;
            runs.push(run);
        }
        out.push((name, runs));
    }
    Ok(out)
}
