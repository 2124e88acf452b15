//! Shared score and truth CSV formats.
//!
//! Every detector writes the same three-column schema — record id, ranking
//! score (higher is more outlying), binary flag — so evaluation is
//! detector-agnostic. EM filters label the score column `t`; baselines label
//! it `score`; the reader accepts either. Injection writes a sidecar truth
//! file `(id, truth, source_id)` with an empty source for originals.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreRow {
    pub id: usize,
    pub score: f64,
    pub flag: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthRow {
    pub id: usize,
    pub truth: bool,
    pub source_id: Option<usize>,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Write scores with the given label for the middle column (`t` or `score`).
pub fn write_scores_csv(path: &Path, score_label: &str, rows: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["id", score_label, "flag"])
        .map_err(csv_err(path))?;
    for row in rows {
        w.write_record([
            row.id.to_string(),
            row.score.to_string(),
            u8::from(row.flag).to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<ScoreRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    let score_ok = matches!(cols.get(1), Some(&"t") | Some(&"score"));
    if cols.first() != Some(&"id") || !score_ok || cols.get(2) != Some(&"flag") {
        return Err(Error::ConfigInvalid {
            reason: format!(
                "{}: expected header id,(t|score),flag, found {cols:?}",
                path.display()
            ),
        });
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let parse = |i: usize| -> Result<&str> {
            rec.get(i).ok_or_else(|| Error::ConfigInvalid {
                reason: format!("{}: short row at line {line}", path.display()),
            })
        };
        let id = parse(0)?.trim().parse().map_err(|_| Error::ConfigInvalid {
            reason: format!("{}: bad id at line {line}", path.display()),
        })?;
        let score = parse(1)?.trim().parse().map_err(|_| Error::ConfigInvalid {
            reason: format!("{}: bad score at line {line}", path.display()),
        })?;
        let flag = match parse(2)?.trim() {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::ConfigInvalid {
                    reason: format!("{}: bad flag {other:?} at line {line}", path.display()),
                })
            }
        };
        rows.push(ScoreRow { id, score, flag });
    }
    Ok(rows)
}

pub fn write_truth_csv(path: &Path, rows: &[TruthRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["id", "truth", "source_id"])
        .map_err(csv_err(path))?;
    for row in rows {
        w.write_record([
            row.id.to_string(),
            u8::from(row.truth).to_string(),
            row.source_id.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

pub fn read_truth_csv(path: &Path) -> Result<Vec<TruthRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.first() != Some(&"id") || cols.get(1) != Some(&"truth") {
        return Err(Error::ConfigInvalid {
            reason: format!(
                "{}: expected header id,truth[,source_id], found {cols:?}",
                path.display()
            ),
        });
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let bad = |what: &str| Error::ConfigInvalid {
            reason: format!("{}: bad {what} at line {line}", path.display()),
        };
        let id = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("id"))?;
        let truth = match rec.get(1).map(str::trim) {
            Some("0") => false,
            Some("1") => true,
            _ => return Err(bad("truth")),
        };
        let source_id = match rec.get(2).map(str::trim) {
            None | Some("") => None,
            Some(s) => Some(s.parse().map_err(|_| bad("source_id"))?),
        };
        rows.push(TruthRow {
            id,
            truth,
            source_id,
        });
    }
    Ok(rows)
}
