use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hjdisc_cli::scenarios::SCENARIOS;
use hjdisc_cli::{run, thread_cap, CliError, Command, RawConfig};

#[derive(Parser)]
#[command(name = "hjdisc", version, about = "Discounted Hamilton-Jacobi equations on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// configuration file (`key = value` lines)
    #[arg(long)]
    config: PathBuf,
    /// output directory, overrides `outputs.dir`
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key=value` override, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Stationary solution u_- (or v_+)
    Solve(RunArgs),
    /// Critical value by bisection or the zero-set formula
    Critical(RunArgs),
    /// Convergence rates and Mather averages over a list of c
    Rate(RunArgs),
    /// Characteristic orbit and Mather estimate
    Orbit(RunArgs),
    /// Long-time classification over a list of c
    Scan(RunArgs),
    /// Property suites
    Verify(RunArgs),
    /// List built-in scenarios
    Scenarios,
}

fn configure_threads() -> Result<(), CliError> {
    let cap = thread_cap(std::env::var("HJDISC_THREADS").ok().as_deref())?;
    #[cfg(feature = "parallel")]
    if let Some(n) = cap {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    #[cfg(not(feature = "parallel"))]
    let _ = cap;
    Ok(())
}

fn execute(command: Command, args: RunArgs) -> Result<ExitCode, CliError> {
    configure_threads()?;
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let mut raw = RawConfig::parse(&text)?;
    for s in &args.set {
        raw.set(s)?;
    }
    let summary = run(command, &raw, args.out)?;
    for line in &summary.lines {
        println!("{line}");
    }
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    match summary.failure {
        None => Ok(ExitCode::SUCCESS),
        Some(f) => {
            eprintln!("hjdisc: {f}");
            Ok(ExitCode::from(f.exit_code()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Scenarios => {
            for s in SCENARIOS {
                println!("{:<16} {}", s.name, s.description);
            }
            return ExitCode::SUCCESS;
        }
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Critical(a) => (Command::Critical, a),
        Cmd::Rate(a) => (Command::Rate, a),
        Cmd::Orbit(a) => (Command::Orbit, a),
        Cmd::Scan(a) => (Command::Scan, a),
        Cmd::Verify(a) => (Command::Verify, a),
    };
    match execute(command, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("hjdisc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
