use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;

use crowdscene_cli::config;
use crowdscene_cli::server::{run_server, ServeState, DEFAULT_MAX_BODY_MB};
use crowdscene_core::fusion::FusionScheme;

#[derive(Args)]
pub struct ServeArgs {
    /// Bind address, e.g. 127.0.0.1:8080 (port 0 picks a free port).
    #[arg(long)]
    addr: Option<String>,
    /// Model checkpoint; repeat for multi-framework fusion.
    #[arg(long = "checkpoint")]
    checkpoints: Vec<PathBuf>,
    /// Fusion scheme across checkpoints: mean, prod, or max.
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    max_body_mb: Option<usize>,
    /// TOML config file supplying defaults; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

pub fn run(args: ServeArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => config::load(path)?,
        None => config::FileConfig::default(),
    };
    let addr = args
        .addr
        .or(file.serve.addr)
        .unwrap_or_else(|| "127.0.0.1:8080".to_string());
    let scheme_name = args
        .scheme
        .or(file.serve.scheme)
        .unwrap_or_else(|| "prod".to_string());
    let Some(scheme) = FusionScheme::from_name(&scheme_name) else {
        bail!("unknown fusion scheme {scheme_name:?} (mean, prod, max)");
    };
    let checkpoints = if args.checkpoints.is_empty() {
        file.serve.checkpoints
    } else {
        args.checkpoints
    };
    if checkpoints.is_empty() {
        bail!("at least one --checkpoint (or [serve].checkpoints in the config) is required");
    }
    let max_body_mb = args
        .max_body_mb
        .or(file.serve.max_body_mb)
        .unwrap_or(DEFAULT_MAX_BODY_MB);

    let state = ServeState::load(&checkpoints, scheme, max_body_mb)?;
    let frameworks = state.framework_names().join(", ");
    let service = run_server(state, &addr)?;
    println!(
        "serving [{frameworks}] with {scheme_name} fusion on http://{}",
        service.addr
    );
    println!("endpoints: GET /health, POST /classify (wav upload)");
    loop {
        std::thread::park();
    }
}
