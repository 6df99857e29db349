use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qpbec_cli::stages::update_summary;
use qpbec_cli::summary::evaluate;
use qpbec_cli::{CliError, RunConfig, Runner, Stage};

/// Reproduces the localized-mode, dimer and GPE datasets of a
/// quasi-periodic condensate from one JSON configuration.
#[derive(Debug, Parser)]
#[command(name = "qpbec", version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,

    #[arg(long, value_enum, default_value = "pipeline")]
    stage: Stage,

    /// Compare the results with the configured bands; exit 4 on failure.
    #[arg(long)]
    check: bool,

    /// Validate the configuration and print the plan without computing.
    #[arg(long)]
    dry_run: bool,

    /// Overrides the noise seed of the GPE runs.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut config = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.gpe.seed = seed;
    }
    if let Some(out) = args.out {
        config.output = out;
    }
    let mut runner = Runner::new(config);
    if args.dry_run {
        for line in runner.plan(args.stage) {
            println!("{line}");
        }
        return Ok(());
    }
    let summary = runner.run(args.stage)?;
    let summary = update_summary(&runner.out, summary)?;
    println!("summary written to {}", runner.out.join("summary.json").display());
    if args.check {
        let lines = evaluate(&runner.config, &summary);
        let failed = lines.iter().filter(|l| !l.passed).count();
        for l in &lines {
            println!("{}", l.line());
        }
        if failed > 0 {
            return Err(CliError::CheckFailed(failed));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
