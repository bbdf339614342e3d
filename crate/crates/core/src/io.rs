//! Delimited-text input and output.
//!
//! Data files are comma-separated with one header row; blank lines and lines
//! starting with `#` are skipped. Output files start with `#` lines carrying
//! whatever metadata the caller passes (typically the run configuration),
//! then a header row.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::bench::{ScoreTable, SummaryRow};
use crate::error::{Error, Result};
use crate::kernel::DesignMatrix;
use crate::linalg::Matrix;
use crate::predict::PredictionResult;

pub const PREDICTION_HEADER: &str = "index,mean,variance";
pub const SCORE_HEADER: &str = "model,rep,n,m,rmse,rmspe,crps,fit_s,pred_s";
pub const SUMMARY_HEADER: &str = "model,reps,rmse,rmspe,crps,fit_s,pred_s";

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn parse_table(reader: impl BufRead) -> Result<Table> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        let Some(h) = &header else {
            header = Some(fields.iter().map(|s| s.to_string()).collect());
            continue;
        };
        if fields.len() != h.len() {
            return Err(Error::Data(format!("line {lineno}: expected {} fields, found {}", h.len(), fields.len())));
        }
        let row = fields
            .iter()
            .enumerate()
            .map(|(col, f)| {
                let v: f64 = f
                    .parse()
                    .map_err(|_| Error::Data(format!("line {lineno}, column {}: cannot parse `{f}`", col + 1)))?;
                if !v.is_finite() {
                    return Err(Error::Data(format!("line {lineno}, column {}: non-finite value `{f}`", col + 1)));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let header = header.ok_or_else(|| Error::Data("file has no header row".into()))?;
    if rows.is_empty() {
        return Err(Error::Data("file has no data rows".into()));
    }
    Ok(Table { header, rows })
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    parse_table(std::io::BufReader::new(file))
}

/// Training data: every column but the last is an input, the last is the
/// response.
pub fn read_training(path: impl AsRef<Path>) -> Result<(DesignMatrix<f64>, Vec<f64>)> {
    let t = read_table(path)?;
    if t.header.len() < 2 {
        return Err(Error::Data("training data needs at least one input and a response column".into()));
    }
    let d = t.header.len() - 1;
    let y = t.rows.iter().map(|r| r[d]).collect();
    let x: Vec<Vec<f64>> = t
        .rows
        .into_iter()
        .map(|mut r| {
            r.truncate(d);
            r
        })
        .collect();
    Ok((DesignMatrix::from_rows(&x)?, y))
}

/// Test inputs with `d` columns; a trailing extra column (a response) is
/// ignored.
pub fn read_inputs(path: impl AsRef<Path>, d: usize) -> Result<DesignMatrix<f64>> {
    let t = read_table(path)?;
    let cols = t.header.len();
    if cols != d && cols != d + 1 {
        return Err(Error::Data(format!("test data has {cols} columns, the model expects {d} inputs")));
    }
    let x: Vec<Vec<f64>> = t
        .rows
        .into_iter()
        .map(|mut r| {
            r.truncate(d);
            r
        })
        .collect();
    DesignMatrix::from_rows(&x)
}

fn write_meta(w: &mut impl Write, meta: &[String]) -> Result<()> {
    for m in meta {
        for line in m.lines() {
            writeln!(w, "# {line}")?;
        }
    }
    Ok(())
}

pub fn write_predictions(mut w: impl Write, meta: &[String], result: &PredictionResult) -> Result<()> {
    write_meta(&mut w, meta)?;
    writeln!(w, "{PREDICTION_HEADER}")?;
    for (i, (m, v)) in result.mean.iter().zip(&result.variance).enumerate() {
        writeln!(w, "{i},{m},{v}")?;
    }
    Ok(())
}

/// Square matrix, one row per line, no header row.
pub fn write_matrix(mut w: impl Write, meta: &[String], m: &Matrix<f64>) -> Result<()> {
    write_meta(&mut w, meta)?;
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn write_scores(mut w: impl Write, meta: &[String], table: &ScoreTable) -> Result<()> {
    write_meta(&mut w, meta)?;
    for f in &table.failures {
        writeln!(w, "# failed: {} rep {}: {}", f.model, f.rep, f.message)?;
    }
    writeln!(w, "{SCORE_HEADER}")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.model, r.rep, r.n, r.m, r.rmse, r.rmspe, r.crps, r.fit_s, r.pred_s
        )?;
    }
    Ok(())
}

pub fn write_summary(mut w: impl Write, meta: &[String], rows: &[SummaryRow]) -> Result<()> {
    write_meta(&mut w, meta)?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{}", r.model, r.reps, r.rmse, r.rmspe, r.crps, r.fit_s, r.pred_s)?;
    }
    Ok(())
}
