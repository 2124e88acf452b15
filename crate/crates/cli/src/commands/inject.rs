//! `corrfilter inject`: plant labeled synthetic outliers in a dataset.

use std::path::PathBuf;

use clap::Args;
use corrfilter::dataset::{load_csv, LoadOptions};
use corrfilter::inject::{inject, pick_contextual_target, InjectionSpec, PerturbMode};
use corrfilter::scores::{write_truth_csv, TruthRow};
use corrfilter::{Error, Result};

use crate::manifest::RunManifest;

use super::ensure_dir;

#[derive(Debug, Args)]
pub struct InjectArgs {
    /// Input dataset (CSV with one header row).
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory (dataset.csv, truth.csv, manifest.json).
    #[arg(long)]
    pub out: PathBuf,
    /// Outlier fraction of the original row count.
    #[arg(long, default_value_t = 0.05)]
    pub q: f64,
    /// Noise upper bound; injected noise is in (0, alpha).
    #[arg(long, default_value_t = 50.0)]
    pub alpha: f64,
    /// Which role the perturbed attribute plays.
    #[arg(long, value_parser = ["behavioral", "contextual"], default_value = "behavioral")]
    pub mode: String,
    /// Attribute to perturb. May be omitted in contextual mode together
    /// with --behavior, which picks the context most correlated with it.
    #[arg(long)]
    pub target: Option<String>,
    /// Behavior attribute used to pick the perturbation target when
    /// --target is omitted (contextual mode).
    #[arg(long)]
    pub behavior: Option<String>,
    /// RNG seed; all randomness flows from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rescale the target to [lo, hi] before injection.
    #[arg(long = "standardize-lo", default_value_t = 18.0)]
    pub standardize_lo: f64,
    #[arg(long = "standardize-hi", default_value_t = 30.0)]
    pub standardize_hi: f64,
    /// Skip target standardization.
    #[arg(long = "no-standardize", default_value_t = false)]
    pub no_standardize: bool,
}

pub fn run(args: &InjectArgs) -> Result<()> {
    let loaded = load_csv(&args.data, LoadOptions::default())?;

    let mode = if args.mode == "contextual" {
        PerturbMode::Contextual
    } else {
        PerturbMode::Behavioral
    };
    let target = match (&args.target, &args.behavior) {
        (Some(t), _) => t.clone(),
        (None, Some(behavior)) if mode == PerturbMode::Contextual => {
            let picked = pick_contextual_target(&loaded.dataset, behavior)?;
            eprintln!("picked contextual target {picked:?} (highest |Pearson| with {behavior:?})");
            picked
        }
        _ => {
            return Err(Error::ConfigInvalid {
                reason: "--target is required (or --behavior with --mode contextual)".to_string(),
            })
        }
    };

    let spec = InjectionSpec {
        q: args.q,
        alpha: args.alpha,
        target,
        mode,
        standardize_range: if args.no_standardize {
            None
        } else {
            Some((args.standardize_lo, args.standardize_hi))
        },
        seed: args.seed,
    };

    let injected = inject(&loaded.dataset, &spec)?;

    ensure_dir(&args.out)?;
    let dataset_path = args.out.join("dataset.csv");
    injected.dataset.write_csv(&dataset_path)?;

    let truth_rows: Vec<TruthRow> = (0..injected.dataset.len())
        .map(|id| TruthRow {
            id,
            truth: injected.truth[id],
            source_id: injected.provenance.get(&id).copied(),
        })
        .collect();
    let truth_path = args.out.join("truth.csv");
    write_truth_csv(&truth_path, &truth_rows)?;

    let mut manifest = RunManifest::new("inject", spec.seed);
    manifest.add_input(&args.data)?;
    manifest.add_output(&dataset_path);
    manifest.add_output(&truth_path);
    manifest.extra = Some(serde_json::to_value(&spec).expect("spec serializes"));
    manifest.write(&args.out.join("manifest.json"))?;

    println!(
        "injected {} outliers into {} records (target {:?}, seed {})",
        injected.provenance.len(),
        loaded.dataset.len(),
        spec.target,
        spec.seed
    );
    Ok(())
}
