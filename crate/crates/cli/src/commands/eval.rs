//! `corrfilter eval`: score one or more detector outputs against truth
//! labels and emit a metrics JSON plus per-detector PR-curve CSVs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use corrfilter::metrics::{auc_pr, confusion, pr_curve, precision_at_k, RankedScores};
use corrfilter::scores::{read_scores_csv, read_truth_csv};
use corrfilter::{Error, Result};
use serde::Serialize;

use crate::manifest::RunManifest;

use super::ensure_dir;

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// One or more score CSVs (id,(t|score),flag).
    #[arg(long, required = true, num_args = 1..)]
    pub scores: Vec<PathBuf>,
    /// Truth CSV (id,truth[,source_id]).
    #[arg(long)]
    pub truth: PathBuf,
    /// Metrics JSON output path; PR-curve CSVs are written alongside.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct DetectorMetrics {
    auc_pr: f64,
    dr: Option<f64>,
    fpr: Option<f64>,
    precision: Option<f64>,
    tnr: Option<f64>,
    counts: corrfilter::metrics::ConfusionCounts,
    precision_at: BTreeMap<usize, f64>,
    pr_curve_csv: PathBuf,
}

const PRECISION_AT_KAPPAS: [usize; 5] = [10, 50, 100, 500, 1000];

pub fn run(args: &EvalArgs) -> Result<()> {
    let truth_rows = read_truth_csv(&args.truth)?;
    let truth: Vec<(usize, bool)> = truth_rows.iter().map(|r| (r.id, r.truth)).collect();

    let out_dir = args
        .out
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf();
    ensure_dir(&out_dir)?;

    let mut manifest = RunManifest::new("eval", 0);
    manifest.add_input(&args.truth)?;

    let mut blocks: BTreeMap<String, DetectorMetrics> = BTreeMap::new();
    for scores_path in &args.scores {
        let block = evaluate_one(scores_path, &truth, &out_dir).map_err(|e| {
            eprintln!("error in {}: {e}", scores_path.display());
            e
        })?;
        let name = detector_name(scores_path);
        manifest.add_input(scores_path)?;
        manifest.add_output(&block.pr_curve_csv);
        blocks.insert(name, block);
    }

    let json = serde_json::to_string_pretty(&blocks).expect("metrics serialize");
    std::fs::write(&args.out, json + "\n").map_err(|source| Error::Io {
        path: args.out.clone(),
        source,
    })?;
    manifest.add_output(&args.out);

    let stem = args
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "eval".to_string());
    manifest.write(&out_dir.join(format!("{stem}.manifest.json")))?;

    for (name, block) in &blocks {
        println!(
            "{name}: auc_pr={:.4} dr={} precision={}",
            block.auc_pr,
            fmt_opt(block.dr),
            fmt_opt(block.precision)
        );
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}"))
        .unwrap_or_else(|| "n/a".to_string())
}

fn detector_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| path.display().to_string())
}

fn evaluate_one(
    scores_path: &Path,
    truth: &[(usize, bool)],
    out_dir: &Path,
) -> Result<DetectorMetrics> {
    let rows = read_scores_csv(scores_path)?;
    let pairs: Vec<(usize, f64)> = rows.iter().map(|r| (r.id, r.score)).collect();
    let ranked = RankedScores::join(&pairs, truth)?;

    // Flags arrive in score-file order; confusion needs truth-aligned order.
    let truth_by_id: BTreeMap<usize, bool> = truth.iter().cloned().collect();
    let flags: Vec<bool> = rows.iter().map(|r| r.flag).collect();
    let aligned_truth: Vec<bool> = rows.iter().map(|r| truth_by_id[&r.id]).collect();
    let (counts, rates) = confusion(&flags, &aligned_truth)?;

    let auc = auc_pr(&ranked)?;
    let mut precision_at = BTreeMap::new();
    for kappa in PRECISION_AT_KAPPAS {
        if kappa >= 1 && kappa <= ranked.len() {
            precision_at.insert(kappa, precision_at_k(&ranked, kappa)?);
        }
    }

    let curve = pr_curve(&ranked)?;
    let curve_path = out_dir.join(format!("{}.pr.csv", detector_name(scores_path)));
    let csv_err = |source: csv::Error| Error::Csv {
        path: curve_path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&curve_path).map_err(csv_err)?;
    w.write_record(["kappa", "precision", "recall"])
        .map_err(csv_err)?;
    for point in &curve {
        w.write_record([
            point.kappa.to_string(),
            point.precision.to_string(),
            point.recall.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: curve_path.clone(),
        source,
    })?;

    Ok(DetectorMetrics {
        auc_pr: auc,
        dr: rates.dr,
        fpr: rates.fpr,
        precision: rates.precision,
        tnr: rates.tnr,
        counts,
        precision_at,
        pr_curve_csv: curve_path,
    })
}
