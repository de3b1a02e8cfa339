//! `tncs`: train Born machines, send images as measured states, decode, and
//! benchmark.

mod commands;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tncs::TncsError;

#[derive(Parser, Debug)]
#[command(
    name = "tncs",
    version,
    about = "Tensor-network compressed sensing of images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a Born machine on one class of an IDX dataset.
    Train(commands::TrainArgs),
    /// Measure a model on the chosen pixels of one image.
    Encode(commands::EncodeArgs),
    /// Reconstruct an image from an encoded message.
    Decode(commands::DecodeArgs),
    /// PSNR against the number of sent pixels.
    Bench(commands::BenchArgs),
    /// Mean-entropy profile and q-sparsity of a model.
    Qsparsity(commands::QsparsityArgs),
    /// Encrypted send/receive of one image, compared with the plain exchange.
    ProtocolDemo(commands::ProtocolArgs),
}

/// Exit status per error class.
fn exit_code(e: &TncsError) -> u8 {
    match e {
        TncsError::Argument(_) | TncsError::TooLarge { .. } => 2,
        TncsError::Format(_) | TncsError::Consistency(_) | TncsError::Structural(_) => 3,
        TncsError::Io(_) => 4,
        TncsError::ZeroProbability { .. }
        | TncsError::EncodeImpossible { .. }
        | TncsError::InfiniteNll { .. }
        | TncsError::TrainingDiverged { .. }
        | TncsError::Unclassifiable
        | TncsError::Internal(_) => 5,
    }
}

fn configure_threads() -> Result<(), TncsError> {
    let Ok(v) = std::env::var("TNCS_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        TncsError::Argument(format!("TNCS_THREADS={v:?} is not a positive integer"))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| TncsError::Internal(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Encode(a) => commands::encode(a),
        Command::Decode(a) => commands::decode(a),
        Command::Bench(a) => commands::bench(a),
        Command::Qsparsity(a) => commands::qsparsity(a),
        Command::ProtocolDemo(a) => commands::protocol_demo(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
