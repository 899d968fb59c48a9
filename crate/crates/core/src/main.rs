use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use oscsync::averaging::{find_rho, QuadratureConfig};
use oscsync::dynamics::{polynomial_damping, vdp_damping};
use oscsync::harness::{load_scenario, run_scenario, ExperimentKind, HarnessError, RunOptions, RunOutcome};

#[derive(Parser)]
#[command(name = "oscsync", version, about = "Simulate and check synchronization of coupled oscillator arrays")]
struct Cli {
    /// Directory for output files (overrides the scenario).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Seed for random initial conditions (overrides the scenario).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long, global = true)]
    quiet: bool,
    /// Also write the long-format t,series,value CSV.
    #[arg(long, global = true)]
    tidy: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment declared in a scenario file.
    Run { scenario: PathBuf },
    /// Sweep the scenario over frequencies.
    Sweep {
        scenario: PathBuf,
        /// Comma-separated frequencies; defaults to the scenario's list.
        #[arg(long, value_delimiter = ',')]
        omega: Option<Vec<f64>>,
    },
    /// Search for a frequency beyond which every draw settles.
    OmegaStar {
        scenario: PathBuf,
        /// Bound on the initial distance to the target set.
        #[arg(long = "Delta")]
        big_delta: Option<f64>,
        /// Residual that must hold over the tail window.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Check a scenario's network without running it.
    Validate { scenario: PathBuf },
    /// Print the synchronization amplitude of a damping function.
    Rho {
        #[arg(long, value_enum, default_value = "vdp")]
        damping: DampingChoice,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        /// Polynomial coefficients c0,c1,… of f(s) = Σ c_k s^k.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        coefficients: Option<Vec<f64>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DampingChoice {
    Vdp,
    Polynomial,
}

fn report(outcome: &RunOutcome, quiet: bool) {
    if quiet {
        return;
    }
    let s = &outcome.summary;
    if let Some(m) = &s.final_metrics {
        let r = m.dist_r.map_or("n/a".to_string(), |v| format!("{v:.6e}"));
        println!(
            "{}: t = {}, dist_R = {r}, dist_A = {:.6e}{}",
            s.scenario,
            s.final_time.unwrap_or(0.0),
            m.dist_a,
            if s.diverged { " (diverged)" } else { "" }
        );
    }
    if let Some(rows) = &s.sweep {
        println!("{:>12} {:>16} {:>16} {:>12} diverged", "omega", "final_residual", "max_deviation", "settle_time");
        for r in rows {
            println!(
                "{:>12} {:>16.6e} {:>16} {:>12} {}",
                r.omega,
                r.final_residual,
                r.max_deviation.map_or("-".into(), |v| format!("{v:.6e}")),
                r.settle_time.map_or("-".into(), |v| format!("{v:.3}")),
                r.diverged
            );
        }
    }
    if let Some(w) = &s.omega_star {
        match w.omega_star {
            Some(v) => println!("omega* = {v} (Delta = {}, delta = {})", w.radius, w.residual),
            None => println!("not found below the cap (Delta = {}, delta = {})", w.radius, w.residual),
        }
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
}

fn execute(cli: Cli) -> Result<i32, HarnessError> {
    let mut opts = RunOptions {
        out_dir: cli.out_dir,
        seed: cli.seed,
        tidy: cli.tidy,
        ..Default::default()
    };
    let path = match cli.command {
        Command::Rho {
            damping,
            epsilon,
            coefficients,
        } => {
            let d = match damping {
                DampingChoice::Vdp => vdp_damping(epsilon),
                DampingChoice::Polynomial => polynomial_damping(
                    coefficients.ok_or_else(|| HarnessError::Parse("--coefficients is required".into()))?,
                ),
            }
            .map_err(|e| HarnessError::Validation(e.to_string()))?;
            let rho = find_rho(&d, &QuadratureConfig::default()).map_err(|e| HarnessError::Validation(e.to_string()))?;
            println!("{rho}");
            return Ok(0);
        }
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            let check = s.check_network()?;
            if !check.passed() {
                return Err(HarnessError::Validation(check.report()));
            }
            if !cli.quiet {
                print!("{}", check.report());
            }
            return Ok(0);
        }
        Command::Run { scenario } => scenario,
        Command::Sweep { scenario, omega } => {
            opts.experiment = Some(ExperimentKind::OmegaSweep);
            opts.omegas = omega;
            scenario
        }
        Command::OmegaStar {
            scenario,
            big_delta,
            delta,
        } => {
            opts.experiment = Some(ExperimentKind::OmegaStarSearch);
            opts.radius = big_delta;
            opts.residual = delta;
            scenario
        }
    };
    let outcome = run_scenario(load_scenario(&path)?, &opts)?;
    report(&outcome, cli.quiet);
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
