use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qheat::harness::{self, ScenarioConfig, SweepSpec};

#[derive(Parser)]
#[command(name = "qheat", version, about = "Self-contained quantum heat engine simulator")]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML, or JSON with a .json extension).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the master equation and write the trajectory and summary.
    Simulate(Common),
    /// Compare a simulation against the closed forms.
    Verify(Common),
    /// Evaluate closed forms over a parameter grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to vary, e.g. `th`.
        #[arg(long)]
        param: String,
        /// `a,b,c` or `start:stop:count`.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        /// Also run a full simulation per point.
        #[arg(long)]
        simulate: bool,
    },
}

fn run(cli: &Cli) -> qheat::Result<i32> {
    match &cli.command {
        Command::Simulate(c) => {
            let cfg = ScenarioConfig::load(&c.config)?;
            let out = harness::run_simulate(&cfg, &c.out)?;
            if !cli.quiet {
                match out.summary.fit {
                    Some(f) => println!("drift {:.6e}  diffusion slope {:.6e}", f.drift, f.diffusion_slope),
                    None => println!("finished at t = {}", out.trajectory.last().t),
                }
            }
            Ok(harness::EXIT_OK)
        }
        Command::Verify(c) => {
            let cfg = ScenarioConfig::load(&c.config)?;
            let report = harness::run_verify(&cfg, &c.out)?;
            if !cli.quiet {
                print!("{}", report.table());
            }
            Ok(if report.pass {
                harness::EXIT_OK
            } else {
                harness::EXIT_VERIFY_FAILED
            })
        }
        Command::Sweep {
            common,
            param,
            grid,
            simulate,
        } => {
            let cfg = ScenarioConfig::load(&common.config)?;
            let spec = SweepSpec {
                param: param.clone(),
                grid: harness::parse_grid(grid)?,
            };
            let out = harness::run_sweep(&cfg, &spec, *simulate, &common.out)?;
            if !cli.quiet {
                println!("{} points, {} failed", out.points.len(), out.failures());
            }
            Ok(harness::EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
