use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pparabolic::harness::{self, exit_code, Command, ExperimentConfig, EXIT_CONFIG, EXIT_NUMERICAL};
use pparabolic::Error;

#[derive(Parser)]
#[command(name = "pparabolic", version, about = "Numerical lab for the p-parabolic Cauchy problem")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Directory for CSV reports, snapshots and the manifest.
    #[arg(long, global = true, default_value = "out")]
    outdir: PathBuf,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set problem.p=3.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form profiles, support radii, masses and residuals.
    Barenblatt(ConfigArgs),
    /// Run the solver and summarize mass, sup norm and support.
    Solve(ConfigArgs),
    /// Distances to the solution at p for a sequence p_i -> p.
    Stability(ConfigArgs),
    /// Dead-zone recession around a probe point.
    Propagation(ConfigArgs),
    /// Scaled sup norm t^alpha ||u(t)||_inf / mass^sigma.
    Smoothing(ConfigArgs),
    /// Dyadic level-set measures and truncation energies.
    Decay(ConfigArgs),
    /// Property checks with pass/fail counts.
    Selftest(ConfigArgs),
    /// Print the effective config as TOML with its hash.
    Config(ConfigArgs),
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig, Error> {
    let text = match &args.config {
        Some(path) => Some(
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    ExperimentConfig::from_sources(text.as_deref(), &args.set)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Cmd::Config(args) = &cli.command {
        return match load(args) {
            Ok(cfg) => {
                println!("# config_sha256: {}\n{}", cfg.hash(), cfg.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG as u8)
            }
        };
    }
    let (cmd, args) = match &cli.command {
        Cmd::Barenblatt(a) => (Command::Barenblatt, a),
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Stability(a) => (Command::Stability, a),
        Cmd::Propagation(a) => (Command::Propagation, a),
        Cmd::Smoothing(a) => (Command::Smoothing, a),
        Cmd::Decay(a) => (Command::Decay, a),
        Cmd::Selftest(a) => (Command::Selftest, a),
        Cmd::Config(_) => unreachable!("handled above"),
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let result = harness::run(cmd, &cfg, cli.seed);
    match &result {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            match harness::write_outcome(outcome, cmd, &cfg, cli.seed, &cli.outdir) {
                Ok(files) => {
                    for f in files {
                        println!("wrote {}", cli.outdir.join(f).display());
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    let code = if e.is_config() { EXIT_CONFIG } else { EXIT_NUMERICAL };
                    return ExitCode::from(code as u8);
                }
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
