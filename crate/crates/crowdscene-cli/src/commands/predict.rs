use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;

use crowdscene_core::fusion::write_prob_csv;
use crowdscene_core::manifest::load_manifest;
use crowdscene_core::nn::checkpoint::load_checkpoint;
use crowdscene_core::nn::train::{predict_records, NormStats};
use crowdscene_core::nn::FeatureStore;

use super::parse_split_filter;

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Feature store matching the checkpoint's kind.
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Records to score: train, test, or all.
    #[arg(long, default_value = "test")]
    split: String,
    /// Probability CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Framework name in the CSV (default `{kind}-vgg15`).
    #[arg(long)]
    framework: Option<String>,
}

pub fn run(args: PredictArgs) -> Result<()> {
    let split = parse_split_filter(&args.split)?;
    let manifest = load_manifest(&args.manifest)?;
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let kind = checkpoint.meta.kind;
    let norm = checkpoint.meta.norm.clone().unwrap_or_else(|| NormStats {
        mean: vec![0.0; if kind.channels() == 3 { 3 } else { 128 }],
        std: vec![1.0; if kind.channels() == 3 { 3 } else { 128 }],
    });
    let framework = args
        .framework
        .unwrap_or_else(|| format!("{}-vgg15", kind.name()));

    let records: Vec<_> = manifest
        .records()
        .iter()
        .filter(|r| split.map(|s| r.split == s).unwrap_or(true))
        .collect();
    if records.is_empty() {
        bail!("no records in split {:?}", args.split);
    }
    let store = FeatureStore::new(&args.features);
    let predictions = predict_records(&checkpoint.params, kind, &norm, &store, &records, &framework)?;
    write_prob_csv(&args.out, &predictions)?;
    println!(
        "wrote {} predictions from {framework} to {}",
        predictions.len(),
        args.out.display()
    );
    Ok(())
}
