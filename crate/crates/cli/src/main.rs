use std::path::PathBuf;
use std::process::ExitCode;

use bipolar_cli::{run, write_outputs, Command, FileConfig, Mode, RunConfig, EXIT_ERROR};
use clap::{Args, Parser};

/// Bipolar comparison and MTW experiments on model surfaces.
#[derive(Parser)]
#[command(name = "bipolar", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// TOML file with any of the keys below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Manifold spec, e.g. `sphere:r=1` or
    /// `revolution:profile=flatband,r=1.0,band=1.0,blend=0.5`.
    #[arg(long)]
    manifold: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    l: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Multistart budget of the low-rank solver.
    #[arg(long)]
    budget: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Relative feasibility tolerance.
    #[arg(long = "tol-feas")]
    tol_feas: Option<f64>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    /// Instance file for `check`.
    #[arg(long)]
    instance: Option<PathBuf>,
    /// Directory receiving instances that failed to verify.
    #[arg(long = "dump-dir")]
    dump_dir: Option<PathBuf>,
    /// Report path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> FileConfig {
        FileConfig {
            manifold: self.manifold.clone(),
            k: self.k,
            l: self.l,
            trials: self.trials,
            budget: self.budget,
            seed: self.seed,
            tol_feas: self.tol_feas,
            mode: self.mode,
            workers: self.workers,
            instance: self.instance.clone(),
            dump_dir: self.dump_dir.clone(),
            out: self.out.clone(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_ERROR as u8 } else { 0 });
        }
    };
    let result = (|| {
        let file = match &cli.flags.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let config = RunConfig::resolve(cli.command, file.merge(cli.flags.overrides()))?;
        let outcome = run(&config)?;
        write_outputs(&outcome)?;
        Ok::<_, bipolar_cli::CliError>(outcome.exit_code())
    })();
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
