use clap::Parser;
use simplexlab_cli::{run, CliError, ExperimentConfig, Kind, THREADS_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

/// Run one experiment described by an INI config file.
#[derive(Parser, Debug)]
#[command(name = "simplexlab", version)]
struct Args {
    /// Experiment kind; must agree with `[experiment] kind` when both are given.
    kind: Option<String>,
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; overrides the config value.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
    /// Output directory; overrides the config value.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: Args) -> Result<(), CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(k) = args.kind {
        let k: Kind = k.parse()?;
        if k != cfg.kind {
            return Err(CliError::Validation(format!(
                "command line asks for `{}` but the config describes `{}`",
                k.name(),
                cfg.kind.name()
            )));
        }
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    if args.out.is_some() {
        cfg.out = args.out;
    }
    let summary = run(&cfg)?;
    for line in &summary.report {
        println!("{line}");
    }
    println!("wrote {} file(s) to {}", summary.files.len(), summary.out_dir.display());
    Ok(())
}
