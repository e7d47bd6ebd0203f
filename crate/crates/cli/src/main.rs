mod commands;
mod config;
mod manifest;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;
use manifest::Manifest;

#[derive(Parser)]
#[command(name = "contact-kam", version, about = "Weak KAM solutions and minimizers of contact Hamiltonians")]
struct Cli {
    /// TOML run configuration; defaults describe the pendulum.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the standing conditions on the Hamiltonian.
    Check,
    /// Solve for the stationary backward and forward solutions.
    Solve {
        /// Succeed only if the evolution diverges.
        #[arg(long)]
        expect_diverge: bool,
    },
    /// Evolve initial data with the solution semigroup.
    Evolve,
    /// Integrate a contact orbit and extract its omega-limit.
    Orbit,
    /// Extract the Mane set and the graph of the stationary solution.
    Mane,
    /// Tabulate the implicit action from a point source.
    Action,
    /// Find the initial momentum of a calibrated curve and follow its orbit.
    Minimize,
    /// Trace the stable manifold of the saddle and shoot initial momenta.
    Manifold {
        /// Overrides `manifold.x0`.
        #[arg(long)]
        x0: Option<f64>,
        /// Skips the double-double refinement.
        #[arg(long)]
        no_polish: bool,
    },
    /// Run the acceptance criteria and write report.json.
    Verify {
        /// Comma-separated criterion ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u32>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Solve { .. } => "solve",
            Command::Evolve => "evolve",
            Command::Orbit => "orbit",
            Command::Mane => "mane",
            Command::Action => "action",
            Command::Minimize => "minimize",
            Command::Manifold { .. } => "manifold",
            Command::Verify { .. } => "verify",
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    let start = Instant::now();
    let mut config = RunConfig::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.verify.seed = seed;
    }
    if let Command::Manifold { x0, no_polish } = &cli.command {
        if let Some(x0) = x0 {
            config.manifold.x0 = *x0;
        }
        if *no_polish {
            config.manifold.polish = false;
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("building the thread pool")?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let mut manifest = Manifest::new(&cli.out, cli.command.name());
    manifest.set_flat("config", &config)?;
    manifest.set("seed", config.seed);
    manifest.set("threads", pool.current_num_threads());
    let ok = pool.install(|| {
        let ctx = Ctx {
            config: &config,
            manifest: &mut manifest,
        };
        match &cli.command {
            Command::Check => commands::check(ctx),
            Command::Solve { expect_diverge } => commands::solve(ctx, *expect_diverge),
            Command::Evolve => commands::evolve(ctx),
            Command::Orbit => commands::orbit(ctx),
            Command::Mane => commands::mane(ctx),
            Command::Action => commands::action(ctx),
            Command::Minimize => commands::minimize(ctx),
            Command::Manifold { .. } => commands::manifold(ctx),
            Command::Verify { criteria } => commands::verify(ctx, criteria),
        }
    })?;
    manifest.set("ok", ok);
    manifest.set("wall_seconds", start.elapsed().as_secs_f64());
    manifest.finish()?;
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
