use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entrap_cli::{
    cmd_check_pe, cmd_run, cmd_sweep, cmd_validate, render_pe, CliError, Overrides, EXIT_OK, EXIT_VALIDATION,
};

#[derive(Parser)]
#[command(
    name = "entrap",
    version,
    about = "Bearing-based cooperative target-entrapping simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct OverrideArgs {
    /// Integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon, s.
    #[arg(long)]
    horizon: Option<f64>,
    /// Trace sample period, s.
    #[arg(long)]
    sample_every: Option<f64>,
    /// Replace the switching sign with x / (|x| + EPS).
    #[arg(long, value_name = "EPS")]
    smooth_sgn: Option<f64>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            dt: a.dt,
            horizon: a.horizon,
            sample_every: a.sample_every,
            smooth_sgn: a.smooth_sgn,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check stress, gain, stability and avoidance conditions.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Simulate and write trace.csv, summary.json and certificates.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Simulate even when mandatory checks fail.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Report excitation conditions along the desired trajectories.
    CheckPe {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run several scenarios in parallel, one output directory each.
    Sweep {
        #[arg(long, required = true, num_args = 1..)]
        scenario: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { scenario, overrides } => match cmd_validate(&scenario, &overrides.into()) {
            Ok(report) => {
                print!("{}", report.render());
                ExitCode::from(if report.passes() { EXIT_OK } else { EXIT_VALIDATION } as u8)
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            scenario,
            out,
            force,
            overrides,
        } => match cmd_run(&scenario, &out, &overrides.into(), force) {
            Ok(r) => {
                let t = &r.summary.terminal;
                println!(
                    "wrote {}, {}, {}",
                    r.trace.display(),
                    r.summary_path.display(),
                    r.certificates_path.display()
                );
                println!(
                    "t = {:.3} s: max|rho_err| {:.4e}, |delta_p| {:.4e}, |delta_v| {:.4e}, min gap {:.4}",
                    t.t, t.max_abs_rho_err, t.delta_p, t.delta_v, r.summary.min_gap
                );
                ExitCode::from(EXIT_OK as u8)
            }
            Err(e) => fail(&e),
        },
        Command::CheckPe { scenario, overrides } => match cmd_check_pe(&scenario, &overrides.into()) {
            Ok(check) => {
                print!("{}", render_pe(&check));
                ExitCode::from(EXIT_OK as u8)
            }
            Err(e) => fail(&e),
        },
        Command::Sweep {
            scenario,
            out,
            force,
            overrides,
        } => {
            let mut code = EXIT_OK;
            for (path, result) in cmd_sweep(&scenario, &out, &overrides.into(), force) {
                match result {
                    Ok(r) => println!("{}: ok, min gap {:.4}", path.display(), r.summary.min_gap),
                    Err(e) => {
                        eprintln!("{}: {e}", path.display());
                        code = code.max(e.exit_code());
                    }
                }
            }
            ExitCode::from(code as u8)
        }
    }
}
