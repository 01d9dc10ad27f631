use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;

use crowdscene_core::fusion::{fuse, read_prob_csv, write_prob_csv, FusionInput, FusionScheme};

#[derive(Args)]
pub struct FuseArgs {
    /// mean, prod, or max.
    #[arg(long)]
    scheme: String,
    #[arg(long)]
    out: PathBuf,
    /// Probability CSVs, one or more frameworks in total.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

pub fn run(args: FuseArgs) -> Result<()> {
    let Some(scheme) = FusionScheme::from_name(&args.scheme) else {
        bail!("unknown fusion scheme {:?} (mean, prod, max)", args.scheme);
    };
    let mut frameworks = Vec::new();
    for path in &args.inputs {
        frameworks.extend(read_prob_csv(path)?);
    }
    let names: Vec<String> = frameworks.iter().map(|f| f.name.clone()).collect();
    let input = FusionInput::new(frameworks)?;
    let fused = fuse(&input, scheme)?;
    write_prob_csv(&args.out, &fused)?;
    println!(
        "{} fusion of [{}] over {} segments -> {}",
        scheme,
        names.join(", "),
        fused.len(),
        args.out.display()
    );
    Ok(())
}
