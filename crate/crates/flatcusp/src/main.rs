use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use flatcusp::commands::{run_command, Context, COMMANDS};
use flatcusp::config::{load_config, CornerMode, ExperimentConfig, Precision, RunSection};
use flatcusp::output::Output;
use flatcusp::runner::Runner;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Table,
    Corner,
    Tail,
    Expansion,
    Transitions,
    Correlations,
    All,
}

/// Cusped-billiard experiments: table checks, corner series, return-time
/// tails, expansion, cell transitions and correlations.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Command,
    /// TOML experiment config; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Build corner series from the reduced recursion instead of the map.
    #[arg(long)]
    reduced: bool,
    /// Add an exact-vs-reduced comparison to the corner report.
    #[arg(long)]
    compare: bool,
    /// Double-double arithmetic for the reduced recursion.
    #[arg(long)]
    extended_precision: bool,
    /// Recompute every chunk even if a checkpoint exists.
    #[arg(long)]
    no_resume: bool,
}

fn resolve(cli: &Cli) -> anyhow::Result<(ExperimentConfig, RunSection)> {
    let (mut cfg, mut run) = match &cli.config {
        Some(p) => load_config(p)?,
        None => (ExperimentConfig::default(), RunSection::default()),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        run.workers = w;
    }
    if let Some(o) = &cli.out {
        run.out = o.clone();
    }
    if cli.reduced {
        cfg.corner.mode = CornerMode::Reduced;
    }
    if cli.compare {
        cfg.corner.compare = true;
    }
    if cli.extended_precision {
        cfg.precision = Precision::Extended;
    }
    if cli.no_resume {
        run.checkpoints = false;
    }
    cfg.validate()?;
    Ok((cfg, run))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, run) = match resolve(&cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli, &cfg, &run) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(cli: &Cli, cfg: &ExperimentConfig, run: &RunSection) -> anyhow::Result<bool> {
    let hash = cfg.hash();
    let ckpt = run.checkpoints.then(|| run.out.join("checkpoints"));
    let runner = Runner::new(run.workers, ckpt, &hash)?;
    let mut out = Output::new(&run.out, cfg)?;
    let ctx = Context { cfg, runner: &runner };
    let names: Vec<&str> = match cli.command {
        Command::All => COMMANDS.to_vec(),
        c => vec![COMMANDS[c as usize]],
    };
    let mut ok = true;
    for name in names {
        match run_command(name, &ctx, &mut out) {
            Ok(v) => ok &= v,
            Err(e) => {
                out.finish()?;
                return Err(e.context(format!("command `{name}`")));
            }
        }
    }
    let m = out.finish()?;
    eprintln!("artifacts listed in {}", m.display());
    Ok(ok)
}
