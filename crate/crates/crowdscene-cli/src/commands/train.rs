use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use crowdscene_cli::config;
use crowdscene_core::augment::AugmentConfig;
use crowdscene_core::manifest::load_manifest;
use crowdscene_core::nn::train::{train, TrainConfig};
use crowdscene_core::nn::FeatureStore;

use super::parse_kind;

#[derive(Args)]
pub struct TrainArgs {
    /// Feature kind the store was extracted with.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    manifest: PathBuf,
    /// Feature store directory.
    #[arg(long)]
    features: PathBuf,
    /// Checkpoint output path (sidecar written next to it).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML config file supplying defaults; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: TrainArgs) -> Result<()> {
    let kind = parse_kind(&args.kind)?;
    let file = match &args.config {
        Some(path) => config::load(path)?,
        None => config::FileConfig::default(),
    };
    let defaults = TrainConfig::default();
    let mut cfg = TrainConfig {
        epochs: args.epochs.or(file.train.epochs).unwrap_or(defaults.epochs),
        batch_size: args
            .batch_size
            .or(file.train.batch_size)
            .unwrap_or(defaults.batch_size),
        l2_lambda: args.l2.or(file.train.l2_lambda).unwrap_or(defaults.l2_lambda),
        seed: args.seed.or(file.train.seed).unwrap_or(defaults.seed),
        ..defaults
    };
    if let Some(lr) = args.lr.or(file.train.lr) {
        cfg.adam.lr = lr;
    }

    let manifest = load_manifest(&args.manifest)?;
    let store = FeatureStore::new(&args.features);
    let outcome = train(
        &manifest,
        &store,
        kind,
        &cfg,
        &AugmentConfig::default(),
        Some(&args.out),
    )?;
    for e in &outcome.history.epochs {
        println!(
            "epoch {:>3}: loss {:>12.3}  train-accuracy {:.3}",
            e.epoch, e.loss, e.train_accuracy
        );
    }
    println!(
        "saved best checkpoint (epoch {}, loss {:.3}) to {}",
        outcome.best_epoch,
        outcome.best_loss,
        args.out.display()
    );
    Ok(())
}
