//! `corrfilter detect`: fit every template of a config against a dataset and
//! write per-filter params and scores plus the combined report.

use std::path::{Path, PathBuf};

use clap::Args;
use corrfilter::dataset::{load_csv, LoadOptions, NaPolicy};
use corrfilter::detector;
use corrfilter::scores::{write_scores_csv, ScoreRow};
use corrfilter::templates::parse_templates;
use corrfilter::{EMSettings, Error, Result};

use crate::manifest::RunManifest;

use super::{ensure_dir, read_to_string, sanitize};

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input dataset (CSV with one header row).
    #[arg(long)]
    pub data: PathBuf,
    /// Template configuration (JSON array of templates).
    #[arg(long)]
    pub templates: PathBuf,
    /// Output directory (params/, scores/, report/, manifest.json).
    #[arg(long)]
    pub out: PathBuf,
    /// Maximum EM iterations.
    #[arg(long = "max-iter", default_value_t = 100)]
    pub max_iter: usize,
    /// Relative-change convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Initial outlier probability.
    #[arg(long = "init-p", default_value_t = 0.05)]
    pub init_p: f64,
    /// Initial non-outlier variance.
    #[arg(long = "init-sigma2", default_value_t = 1.0)]
    pub init_sigma2: f64,
    /// CSV delimiter.
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// How to treat non-numeric cells: drop the row or fail.
    #[arg(long = "na-policy", value_parser = ["drop", "error"], default_value = "drop")]
    pub na_policy: String,
}

pub fn run(args: &DetectArgs) -> Result<()> {
    let options = LoadOptions {
        delimiter: args.delimiter as u8,
        na_policy: if args.na_policy == "error" {
            NaPolicy::Error
        } else {
            NaPolicy::Drop
        },
    };
    let loaded = load_csv(&args.data, options)?;
    if loaded.dropped > 0 {
        eprintln!("dropped {} rows with bad cells", loaded.dropped);
    }

    let templates = parse_templates(&read_to_string(&args.templates)?)?;
    let settings = EMSettings {
        init_p: args.init_p,
        init_sigma2: args.init_sigma2,
        max_iterations: args.max_iter,
        tolerance: args.tol,
        ..EMSettings::default()
    };

    let report = detector::detect(&loaded.dataset, &templates, &settings)?;

    let params_dir = args.out.join("params");
    let scores_dir = args.out.join("scores");
    let report_dir = args.out.join("report");
    for dir in [&args.out, &params_dir, &scores_dir, &report_dir] {
        ensure_dir(dir)?;
    }

    let mut manifest = RunManifest::new("detect", 0).with_config(&args.templates);
    manifest.add_input(&args.data)?;
    manifest.add_input(&args.templates)?;

    for outcome in &report.per_filter {
        let stem = sanitize(&outcome.name);

        let params_path = params_dir.join(format!("{stem}.json"));
        let json = serde_json::to_string_pretty(&outcome.fit.export()).expect("params serialize");
        write_text(&params_path, &(json + "\n"))?;
        manifest.add_output(&params_path);

        let rows: Vec<ScoreRow> = outcome
            .row_ids
            .iter()
            .enumerate()
            .map(|(row, &id)| ScoreRow {
                id,
                score: outcome.fit.t[row],
                flag: outcome.fit.flags[row],
            })
            .collect();
        let scores_path = scores_dir.join(format!("{stem}.csv"));
        write_scores_csv(&scores_path, "t", &rows)?;
        manifest.add_output(&scores_path);
    }

    let combined_path = report_dir.join("combined.csv");
    report.export(&combined_path)?;
    manifest.add_output(&combined_path);

    let summary_path = report_dir.join("summary.json");
    report.write_summary(&summary_path)?;
    manifest.add_output(&summary_path);

    manifest.write(&args.out.join("manifest.json"))?;

    for f in report.summary().filters {
        println!(
            "{}: p={:.6} K={} iterations={} converged={}",
            f.name, f.p, f.k, f.iterations, f.converged
        );
    }
    println!(
        "combined outliers: {} of {}",
        report.combined_flags.iter().filter(|f| **f).count(),
        report.n
    );
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
