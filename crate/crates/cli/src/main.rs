use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dquant_cli::{run_experiment, CliError, Command, ExperimentConfig, ResolvedExperiment};

/// Distributed quantile estimation over noisy sensor networks.
#[derive(Parser)]
#[command(name = "dquant", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Estimate the configured quantile and record its convergence trace.
    Run(Common),
    /// Rank selection (median, min, max, k-th smallest).
    Select(Common),
    /// Distributed trimmed mean.
    Trim(Common),
    /// Flag nodes beyond a quantile threshold.
    Outliers(Common),
    /// Print topology facts: size, edges, max degree, algebraic connectivity.
    GraphInfo(Common),
    /// Check a config without running anything.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides `[run] master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, short)]
    quiet: bool,
}

impl Common {
    fn parse(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = ExperimentConfig::from_file(&self.config)?;
        if let Some(seed) = self.seed {
            config.run.master_seed = seed;
        }
        if let Some(out) = &self.out {
            config.output.dir = out.clone();
        }
        Ok(config)
    }

    fn load(&self) -> Result<ResolvedExperiment, CliError> {
        self.parse()?.resolve()
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (common, command) = match &cli.command {
        Sub::Run(c) => (c, Command::Run),
        Sub::Select(c) => (c, Command::Select),
        Sub::Trim(c) => (c, Command::Trim),
        Sub::Outliers(c) => (c, Command::Outliers),
        Sub::GraphInfo(c) => return graph_info(c),
        Sub::Validate(c) => {
            let exp = c.load()?;
            warn(&exp);
            if !c.quiet {
                println!("ok: {}", c.config.display());
            }
            return Ok(());
        }
    };
    let exp = common.load()?;
    warn(&exp);
    let summary = run_experiment(&exp, command)?;
    if !common.quiet {
        print!("{}", summary.to_text());
        for f in &summary.files {
            println!("wrote {}", f.display());
        }
    }
    Ok(())
}

fn warn(exp: &ResolvedExperiment) {
    for w in &exp.warnings {
        eprintln!("warning: {w}");
    }
}

fn graph_info(c: &Common) -> Result<(), CliError> {
    // disconnected topologies are reported, not rejected
    let g = &c.parse()?.build_network()?;
    println!("nodes={}", g.node_count());
    println!("edges={}", g.edge_count());
    println!("max_degree={}", g.max_degree());
    println!("algebraic_connectivity={}", g.algebraic_connectivity());
    println!("connected={}", g.is_connected());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
