use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;

use crowdscene_core::manifest::{
    ingest_media, write_manifest, DatasetManifest, SceneLabel, Split,
};

#[derive(Args)]
pub struct IngestArgs {
    #[arg(long)]
    video: PathBuf,
    /// Directory receiving per-segment WAV files.
    #[arg(long)]
    out: PathBuf,
    /// Decoder command template with {input} {output} {start} {duration}
    /// placeholders, run through `sh -c`. Example:
    /// `ffmpeg -y -loglevel error -ss {start} -t {duration} -i {input} -ac 1 -ar 32000 {output}`
    #[arg(long)]
    decoder_cmd: String,
    /// Optional frame-extraction template with {input} {outdir} {start}
    /// {duration} placeholders.
    #[arg(long)]
    frame_cmd: Option<String>,
    /// With --split and --manifest-out, label the segments and write a
    /// manifest.
    #[arg(long)]
    label: Option<String>,
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    manifest_out: Option<PathBuf>,
}

pub fn run(args: IngestArgs) -> Result<()> {
    let report = ingest_media(
        &args.video,
        &args.out,
        &args.decoder_cmd,
        args.frame_cmd.as_deref(),
    )?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "cut {} into {} ten-second segments under {}",
        args.video.display(),
        report.segments.len(),
        args.out.display()
    );

    if let Some(manifest_out) = &args.manifest_out {
        let (Some(label), Some(split)) = (&args.label, &args.split) else {
            bail!("--manifest-out requires --label and --split");
        };
        let Some(label) = SceneLabel::from_name(label) else {
            bail!("unknown label {label:?}");
        };
        let Some(split) = Split::from_name(split) else {
            bail!("unknown split {split:?} (train, test)");
        };
        if report.segments.is_empty() {
            bail!("no segments to write into a manifest");
        }
        let records = report
            .segments
            .into_iter()
            .map(|s| s.into_record(label, split))
            .collect();
        let manifest = DatasetManifest::new(records)?;
        write_manifest(manifest_out, &manifest)?;
        println!("manifest: {}", manifest_out.display());
    }
    Ok(())
}
