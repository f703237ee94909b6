use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nicholson_core::modelfile::{format_list, KeyValues};

mod commands;
mod settings;

/// Experiments on patch-structured Nicholson delay systems driven by a
/// quasi-periodic torus flow.
#[derive(Parser, Debug)]
#[command(name = "nicholson", version)]
struct Cli {
    /// Worker threads for mesh computations
    #[arg(long, global = true, env = "NICHOLSON_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Model file (`key = value` lines); defaults to the two-patch model
    model: Option<PathBuf>,

    /// Overrides for the model file, same format
    #[arg(long)]
    config: Option<PathBuf>,

    /// Single KEY=VALUE override, repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Args, Debug, Clone, Default)]
struct SolverFlags {
    /// Step size
    #[arg(long)]
    h: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
struct PullbackFlags {
    /// Grid points per torus axis
    #[arg(long)]
    n: Option<usize>,
    /// Pullback convergence tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Comparison lag
    #[arg(long)]
    lag: Option<f64>,
    /// Horizon increment
    #[arg(long)]
    t_step: Option<f64>,
    /// Horizon cap
    #[arg(long)]
    t_max: Option<f64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structural hypotheses and the invariant-zone inequality
    Check {
        #[command(flatten)]
        common: Common,
        /// Sample coefficients on a time grid instead of the exact corner check
        #[arg(long)]
        sampled: bool,
        /// Time step of the sampling grid
        #[arg(long)]
        grid_step: Option<f64>,
    },
    /// Integrate the system and write the trajectory as CSV
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        /// Base point `theta1,theta2` at time 0
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        t_start: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        t_end: Option<f64>,
        /// gl2 or rk23
        #[arg(long)]
        method: Option<String>,
        /// Integrate the linearization at zero instead
        #[arg(long)]
        linearized: bool,
        /// Constant initial value on the delay interval
        #[arg(long)]
        history: Option<f64>,
        /// CSV path (stdout when absent)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lyapunov exponents of the deciding blocks and the persistence verdict
    Persistence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        renorm_threshold: Option<f64>,
        /// CSV path for `block,indices,lambda,converged`
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pullback attractor over a uniform torus grid
    Mesh {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        pullback: PullbackFlags,
    },
    /// One mesh per parameter value plus an order report
    Study {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        #[command(flatten)]
        pullback: PullbackFlags,
        /// both-migrations, alpha12 or mortality
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated parameter values
        #[arg(long)]
        values: Option<String>,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// bad input, exit 2
    Input(String),
    /// condition violated, not persistent, no convergence; exit 1
    Domain(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(format!("i/o: {e}"))
    }
}

struct Flags(KeyValues);

impl Flags {
    fn new() -> Self {
        Flags(KeyValues::default())
    }

    fn opt<T: ToString>(mut self, key: &str, v: Option<T>) -> Self {
        if let Some(v) = v {
            self.0.set(key, v.to_string());
        }
        self
    }

    fn list(self, key: &str, v: Option<String>) -> Result<Self, CliError> {
        match v {
            None => Ok(self),
            Some(text) => {
                let parsed = nicholson_core::modelfile::parse_list(&text)
                    .map_err(|e| CliError::Input(format!("--{}: {e}", key.replace('_', "-"))))?;
                Ok(self.opt(key, Some(format_list(&parsed))))
            }
        }
    }

    fn solver(self, s: &SolverFlags) -> Self {
        self.opt("h", s.h)
    }

    fn pullback(self, p: &PullbackFlags) -> Self {
        self.opt("n", p.n)
            .opt("tol", p.tol)
            .opt("lag", p.lag)
            .opt("t_step", p.t_step)
            .opt("t_max", p.t_max)
    }
}

fn load(common: &Common, flags: Flags) -> Result<settings::Settings, CliError> {
    settings::Settings::load(common.model.as_deref(), common.config.as_deref(), &common.sets, flags.0)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    match cli.command {
        Command::Check {
            common,
            sampled,
            grid_step,
        } => {
            let flags = Flags::new()
                .opt("sampling", sampled.then_some("grid"))
                .opt("grid_step", grid_step);
            commands::check(&load(&common, flags)?)
        }
        Command::Simulate {
            common,
            solver,
            theta,
            t_start,
            t_end,
            method,
            linearized,
            history,
            out,
        } => {
            let flags = Flags::new()
                .solver(&solver)
                .list("theta", theta)?
                .opt("t_start", t_start)
                .opt("t_end", t_end)
                .opt("method", method)
                .opt("linearized", linearized.then_some(true))
                .opt("history", history);
            commands::simulate(&load(&common, flags)?, out.as_deref())
        }
        Command::Persistence {
            common,
            solver,
            theta,
            horizon,
            renorm_threshold,
            out,
        } => {
            let flags = Flags::new()
                .solver(&solver)
                .list("theta", theta)?
                .opt("horizon", horizon)
                .opt("renorm_threshold", renorm_threshold);
            commands::persistence(&load(&common, flags)?, out.as_deref())
        }
        Command::Mesh {
            common,
            solver,
            pullback,
        } => {
            let flags = Flags::new().solver(&solver).pullback(&pullback);
            commands::mesh(&load(&common, flags)?, &pullback.out_dir, jobs)
        }
        Command::Study {
            common,
            solver,
            pullback,
            axis,
            values,
        } => {
            let flags = Flags::new()
                .solver(&solver)
                .pullback(&pullback)
                .opt("axis", axis)
                .list("values", values)?;
            commands::study(&load(&common, flags)?, &pullback.out_dir, jobs)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Domain(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(1)
        }
    }
}
