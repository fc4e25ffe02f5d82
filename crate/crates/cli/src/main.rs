//! `rulefuse`: train tree ensembles, compute regularization paths and extract
//! compact rule sets, with a provenance manifest beside every output.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rulefuse::Error;

use commands::{BenchArgs, ExtractArgs, Outputs, PathArgs, SynthArgs, TrainArgs};
use manifest::{digests, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "rulefuse",
    version,
    about = "Sparse, fused rule extraction from tree ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    Synth(SynthArgs),
    Train(TrainArgs),
    Path(PathArgs),
    Extract(ExtractArgs),
    Bench(BenchArgs),
    Replay(ReplayArgs),
}

/// Re-runs the command recorded in a manifest and checks its outputs.
#[derive(Debug, Args)]
struct ReplayArgs {
    manifest: PathBuf,
}

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: String) -> Self {
        Self { code: 2, message }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::BudgetInfeasible { .. } => 3,
        Error::Numeric(_) => 4,
        Error::PathPoint { source, .. } => exit_code(source),
        _ => 2,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn run(command: &Command, argv: &[String]) -> Result<(), Failure> {
    let started = Instant::now();
    let (name, params, outputs) = match command {
        Command::Synth(a) => ("synth", serde_json::to_value(a), commands::synth(a)?),
        Command::Train(a) => ("train", serde_json::to_value(a), commands::train(a)?),
        Command::Path(a) => ("path", serde_json::to_value(a), commands::path(a)?),
        Command::Extract(a) => ("extract", serde_json::to_value(a), commands::extract(a)?),
        Command::Bench(a) => ("bench", serde_json::to_value(a), commands::bench(a)?),
        Command::Replay(a) => return replay(&a.manifest),
    };
    let Outputs {
        primary,
        inputs,
        deterministic,
        seed,
    } = outputs;
    let manifest = RunManifest {
        command: name.to_string(),
        argv: argv.to_vec(),
        params: params.map_err(|e| Failure::invalid(e.to_string()))?,
        seed,
        input_digests: digests(&inputs.iter().map(PathBuf::as_path).collect::<Vec<_>>())?,
        output_digests: digests(
            &deterministic
                .iter()
                .map(PathBuf::as_path)
                .collect::<Vec<_>>(),
        )?,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
    };
    manifest.write(&primary)?;
    Ok(())
}

fn replay(path: &std::path::Path) -> Result<(), Failure> {
    let recorded = RunManifest::load(path)?;
    for (input, digest) in &recorded.input_digests {
        if manifest::sha256_file(std::path::Path::new(input))? != *digest {
            return Err(Failure::invalid(format!(
                "input {input} changed since the recorded run"
            )));
        }
    }
    let cli = Cli::try_parse_from(
        std::iter::once("rulefuse".to_string()).chain(recorded.argv.iter().cloned()),
    )
    .map_err(|e| Failure::invalid(format!("manifest arguments do not parse: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Failure::invalid(
            "a manifest cannot record a replay".to_string(),
        ));
    }
    run(&cli.command, &recorded.argv)?;
    for (output, digest) in &recorded.output_digests {
        let now = manifest::sha256_file(std::path::Path::new(output))?;
        if now != *digest {
            return Err(Failure {
                code: 4,
                message: format!("output {output} differs from the recorded run"),
            });
        }
    }
    eprintln!(
        "reproduced {} outputs of `{}`",
        recorded.output_digests.len(),
        recorded.command
    );
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match run(&cli.command, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        assert_eq!(exit_code(&Error::Numeric("nan".into())), 4);
        assert_eq!(
            exit_code(&Error::BudgetInfeasible {
                max_rules: 1,
                sparsest: 3
            }),
            3
        );
        assert_eq!(exit_code(&Error::InvalidInput("x".into())), 2);
        let nested = Error::PathPoint {
            index: 4,
            source: Box::new(Error::Numeric("inf".into())),
        };
        assert_eq!(exit_code(&nested), 4);
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
