use clap::{Parser, Subcommand};

mod commands;

use commands::{evaluate, features, fuse, ingest, predict, serve, synth, train};

/// Crowded-scene classification pipeline: synthetic corpus generation,
/// spectrogram feature extraction, VGG15 training, prediction, late fusion,
/// evaluation, and a headless classification service.
#[derive(Parser)]
#[command(name = "crowdscene", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic corpus with a manifest.
    Synth(synth::SynthArgs),
    /// Extract MEL/CQT/GAM spectrograms (or frame stacks) to CSTF files.
    Features(features::FeaturesArgs),
    /// Train a VGG15 classifier on extracted features.
    Train(train::TrainArgs),
    /// Run inference over a split and write a probability CSV.
    Predict(predict::PredictArgs),
    /// Fuse probability CSVs with MEAN, PROD or MAX.
    Fuse(fuse::FuseArgs),
    /// Score a probability CSV against manifest ground truth.
    Evaluate(evaluate::EvaluateArgs),
    /// Start the HTTP classification service.
    Serve(serve::ServeArgs),
    /// Cut a video into 10-second WAV segments via an external decoder.
    Ingest(ingest::IngestArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version go to stdout and exit 0; usage errors exit 2
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Synth(args) => synth::run(args),
        Command::Features(args) => features::run(args),
        Command::Train(args) => train::run(args),
        Command::Predict(args) => predict::run(args),
        Command::Fuse(args) => fuse::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::Serve(args) => serve::run(args),
        Command::Ingest(args) => ingest::run(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
