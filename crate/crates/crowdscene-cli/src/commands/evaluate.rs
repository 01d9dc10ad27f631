use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;

use crowdscene_cli::chart::write_accuracy_chart;
use crowdscene_core::eval::evaluate;
use crowdscene_core::fusion::read_prob_csv;
use crowdscene_core::manifest::{load_manifest, Split};

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
    /// Probability CSV holding exactly one framework.
    #[arg(long)]
    pred: PathBuf,
    /// Write the full-precision report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write a per-class accuracy bar chart (PNG).
    #[arg(long)]
    chart: Option<PathBuf>,
}

pub fn run(args: EvaluateArgs) -> Result<()> {
    let Some(split) = Split::from_name(&args.split) else {
        bail!("unknown split {:?} (train, test)", args.split);
    };
    let manifest = load_manifest(&args.manifest)?;
    let frameworks = read_prob_csv(&args.pred)?;
    let [framework] = frameworks.as_slice() else {
        bail!(
            "{} holds {} frameworks; evaluate expects exactly one",
            args.pred.display(),
            frameworks.len()
        );
    };
    let report = evaluate(&framework.predictions, &manifest, split)?;
    print!("{}", report.render_text());
    if let Some(path) = &args.json {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
        println!("report json: {}", path.display());
    }
    if let Some(path) = &args.chart {
        write_accuracy_chart(
            path,
            &report.per_class_accuracy,
            &format!("{} accuracy {:.1}%", framework.name, report.accuracy_pct),
        )?;
        println!("chart: {}", path.display());
    }
    Ok(())
}
