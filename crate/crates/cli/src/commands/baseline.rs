//! `corrfilter baseline`: run one of the comparison detectors and emit
//! scores in the shared schema.

use std::path::PathBuf;

use clap::Args;
use corrfilter::baselines::{cooks_distance, ratio_detector};
use corrfilter::dataset::{load_csv, LoadOptions};
use corrfilter::scores::{write_scores_csv, ScoreRow};
use corrfilter::templates::{compile, parse_template};
use corrfilter::{Error, Result};
use serde::Deserialize;

use crate::manifest::RunManifest;

use super::{ensure_dir, read_to_string};

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Input dataset (CSV with one header row).
    #[arg(long)]
    pub data: PathBuf,
    /// Which baseline to run.
    #[arg(long, value_parser = ["cooks", "ratio"])]
    pub method: String,
    /// Method configuration JSON: a template object for cooks, or
    /// {"numerator": ..., "denominator": ...} for ratio.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (scores/<method>.csv, manifest.json).
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RatioConfig {
    numerator: String,
    denominator: String,
}

pub fn run(args: &BaselineArgs) -> Result<()> {
    let loaded = load_csv(&args.data, LoadOptions::default())?;
    let config_text = read_to_string(&args.config)?;

    let rows: Vec<ScoreRow> = match args.method.as_str() {
        "cooks" => {
            let template = parse_template(&config_text)?;
            let (design, excluded) = compile(&template, &loaded.dataset)?;
            if !excluded.is_empty() {
                eprintln!("{} rows excluded by template transforms", excluded.len());
            }
            let res = cooks_distance(&design)?;
            design
                .row_ids()
                .iter()
                .enumerate()
                .map(|(row, &id)| ScoreRow {
                    id,
                    score: res.d[row],
                    flag: res.flags[row],
                })
                .collect()
        }
        "ratio" => {
            let cfg: RatioConfig =
                serde_json::from_str(&config_text).map_err(|e| Error::ConfigInvalid {
                    reason: format!("ratio config: {e}"),
                })?;
            let num = loaded.dataset.column(&cfg.numerator)?;
            let den = loaded.dataset.column(&cfg.denominator)?;
            let res = ratio_detector(&num, &den)?;
            // The ratio detector ranks only; it defines no flag threshold.
            res.scores
                .iter()
                .enumerate()
                .map(|(id, &score)| ScoreRow {
                    id,
                    score,
                    flag: false,
                })
                .collect()
        }
        other => {
            return Err(Error::ConfigInvalid {
                reason: format!("unknown method {other:?}"),
            })
        }
    };

    let scores_dir = args.out.join("scores");
    ensure_dir(&scores_dir)?;
    let scores_path = scores_dir.join(format!("{}.csv", args.method));
    write_scores_csv(&scores_path, "score", &rows)?;

    let mut manifest = RunManifest::new("baseline", 0).with_config(&args.config);
    manifest.add_input(&args.data)?;
    manifest.add_input(&args.config)?;
    manifest.add_output(&scores_path);
    manifest.write(&args.out.join("manifest.json"))?;

    println!(
        "{}: scored {} records, {} flagged",
        args.method,
        rows.len(),
        rows.iter().filter(|r| r.flag).count()
    );
    Ok(())
}
