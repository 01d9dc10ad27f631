use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use crowdscene_core::dsp::DspConfig;
use crowdscene_core::features::extract_to_store;
use crowdscene_core::manifest::load_manifest;
use crowdscene_core::nn::FeatureStore;

use super::{parse_kind, parse_split_filter};

#[derive(Args)]
pub struct FeaturesArgs {
    /// Frontend: mel, cqt, gam, or frames.
    #[arg(long)]
    kind: String,
    #[arg(long)]
    manifest: PathBuf,
    /// Directory receiving one CSTF file per segment.
    #[arg(long)]
    out: PathBuf,
    /// Restrict to one split: train, test, or all.
    #[arg(long, default_value = "all")]
    split: String,
}

pub fn run(args: FeaturesArgs) -> Result<()> {
    let kind = parse_kind(&args.kind)?;
    let split = parse_split_filter(&args.split)?;
    let manifest = load_manifest(&args.manifest)?;
    let store = FeatureStore::new(&args.out);
    let count = extract_to_store(manifest.records(), split, kind, &DspConfig::default(), &store)?;
    println!(
        "extracted {kind} features for {count} segments into {}",
        args.out.display()
    );
    Ok(())
}
