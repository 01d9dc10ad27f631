use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use crowdscene_core::manifest::Split;
use crowdscene_core::synth::{generate_corpus, manifest_path, SynthSpec};

#[derive(Args)]
pub struct SynthArgs {
    /// Output directory for audio, frames and the manifest.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    train_per_class: usize,
    #[arg(long, default_value_t = 10)]
    test_per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write per-segment frame images.
    #[arg(long)]
    frames: bool,
    #[arg(long, default_value_t = 3)]
    frames_per_segment: usize,
}

pub fn run(args: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        train_per_class: args.train_per_class,
        test_per_class: args.test_per_class,
        rng_seed: args.seed,
        emit_frames: args.frames,
        frames_per_segment: args.frames_per_segment,
    };
    let manifest = generate_corpus(&spec, &args.out)?;
    println!(
        "wrote {} segments ({} train / {} test) under {}",
        manifest.records().len(),
        manifest.split_len(Split::Train),
        manifest.split_len(Split::Test),
        args.out.display()
    );
    println!("manifest: {}", manifest_path(&args.out).display());
    Ok(())
}
