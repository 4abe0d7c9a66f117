//! CSV ingestion and emission, draws files and run manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value read back is bit-identical to the one written.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::inference::BandTable;
use crate::sampler::{Draw, PosteriorDraws, ThetaState};

/// Raw table from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawData {
    pub predictor_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub censored: Option<Vec<bool>>,
}

impl RawData {
    pub fn n(&self) -> usize {
        self.y.len()
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn headers(rdr: &mut csv::Reader<File>) -> Result<Vec<String>> {
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

fn parse_cell(path: &Path, row: usize, column: &str, cell: &str) -> Result<f64> {
    cell.parse::<f64>().map_err(|_| {
        let message = if cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan") {
            format!("missing value '{cell}'")
        } else {
            format!("non-numeric value '{cell}'; encode categorical predictors as numeric dummy columns")
        };
        Error::Parse { path: path.to_path_buf(), row, column: column.to_string(), message }
    })
}

/// Reads every column of a numeric CSV: (header, rows). Rows are 1-based in
/// error messages, counting data rows after the header.
pub fn read_numeric_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = reader(path)?;
    let names = headers(&mut rdr)?;
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = names
            .iter()
            .zip(rec.iter())
            .map(|(name, cell)| parse_cell(path, r + 1, name, cell))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((names, rows))
}

/// Loads a dataset: `response` is the outcome column, `censor` an optional
/// 0/1 column, and every other column (or only `predictors` when given) is
/// a predictor.
pub fn load_dataset(path: &Path, response: &str, censor: Option<&str>, predictors: Option<&[String]>) -> Result<RawData> {
    let (names, rows) = read_numeric_csv(path)?;
    let find = |c: &str| {
        names.iter().position(|n| n == c).ok_or_else(|| Error::Data {
            path: path.to_path_buf(),
            message: format!("column '{c}' not found (columns: {})", names.join(", ")),
        })
    };
    let yi = find(response)?;
    let ci = censor.map(find).transpose()?;
    let pred_idx: Vec<usize> = match predictors {
        Some(list) => list.iter().map(|c| find(c)).collect::<Result<_>>()?,
        None => (0..names.len()).filter(|&i| i != yi && Some(i) != ci).collect(),
    };
    if pred_idx.is_empty() {
        return Err(Error::Data { path: path.to_path_buf(), message: "no predictor columns".into() });
    }
    if rows.is_empty() {
        return Err(Error::Data { path: path.to_path_buf(), message: "no data rows".into() });
    }
    let mut censored = ci.map(|_| Vec::with_capacity(rows.len()));
    for (r, row) in rows.iter().enumerate() {
        if let (Some(ci), Some(flags)) = (ci, censored.as_mut()) {
            let v = row[ci];
            if v != 0.0 && v != 1.0 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: r + 1,
                    column: names[ci].clone(),
                    message: format!("censoring flag must be 0 or 1, got {v}"),
                });
            }
            flags.push(v == 1.0);
        }
    }
    Ok(RawData {
        predictor_names: pred_idx.iter().map(|&i| names[i].clone()).collect(),
        x: rows.iter().map(|r| pred_idx.iter().map(|&i| r[i]).collect()).collect(),
        y: rows.iter().map(|r| r[yi]).collect(),
        censored,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a header and rows of numbers.
pub fn write_numeric_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| v.to_string()))?;
    }
    finish(w, path)
}

pub fn draws_header(p: usize, m: usize) -> Vec<String> {
    let mut h = vec!["iter".to_string(), "logpost".into(), "loglik".into()];
    h.extend(ThetaState::names(p, m));
    h
}

pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let first = draws.draws.first().ok_or_else(|| Error::InvalidInput("no draws to write".into()))?;
    let (p, m) = (first.theta.p(), first.theta.m());
    let mut w = writer(path)?;
    w.write_record(draws_header(p, m))?;
    for d in &draws.draws {
        let mut rec = vec![d.iter.to_string(), d.logpost.to_string(), d.loglik.to_string()];
        rec.extend(d.theta.to_vec().iter().map(|v| v.to_string()));
        w.write_record(rec)?;
    }
    finish(w, path)
}

/// Reads a draws file; chain numbers restart whenever `iter` decreases.
pub fn read_draws(path: &Path, p: usize, m: usize) -> Result<Vec<Draw>> {
    let mut rdr = reader(path)?;
    let names = headers(&mut rdr)?;
    if names != draws_header(p, m) {
        return Err(Error::Data {
            path: path.to_path_buf(),
            message: format!("header does not match a model with p = {p} and m = {m}"),
        });
    }
    let mut out: Vec<Draw> = Vec::new();
    let mut chain = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals: Vec<f64> = names
            .iter()
            .zip(rec.iter())
            .map(|(n, c)| parse_cell(path, r + 1, n, c))
            .collect::<Result<_>>()?;
        let iter = vals[0] as usize;
        if out.last().is_some_and(|d| d.iter >= iter) {
            chain += 1;
        }
        out.push(Draw {
            iter,
            chain,
            logpost: vals[1],
            loglik: vals[2],
            theta: ThetaState::from_vec(&vals[3..], p, m)?,
        });
    }
    Ok(out)
}

pub fn write_bands(path: &Path, bands: &BandTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["tau", "coef", "mean", "lo", "hi"])?;
    for (t, tau) in bands.taus.iter().enumerate() {
        for j in 0..bands.n_coef() {
            w.write_record([
                tau.to_string(),
                j.to_string(),
                bands.mean[j][t].to_string(),
                bands.lo[j][t].to_string(),
                bands.hi[j][t].to_string(),
            ])?;
        }
    }
    finish(w, path)
}

/// Where the data for a fit came from, so later steps can rebuild it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSource {
    pub path: PathBuf,
    pub response: String,
    pub censor: Option<String>,
    pub predictors: Vec<String>,
    pub n: usize,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub n_target: usize,
    pub mesh: f64,
    pub points: usize,
    pub first: f64,
    pub last: f64,
    pub anchor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config: RunConfig,
    pub seed: u64,
    pub data: DataSource,
    pub grid: GridInfo,
    pub lambdas: Vec<f64>,
    pub acceptance: Vec<Vec<f64>>,
    pub draws: usize,
    pub wall_time_secs: f64,
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, manifest)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}
