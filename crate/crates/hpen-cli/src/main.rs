//! `hpen` — generate constrained regression instances, select penalty
//! parameters, run the solvers, and reproduce the canned benchmark
//! experiments. All output is plot-ready CSV plus JSON manifests.
//!
//! Exit codes: 0 success, 1 numerical/validation failure, 2 usage error.

mod run;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hpen",
    version,
    about = "Smooth penalty benchmark toolkit",
    disable_help_subcommand = true
)]
struct Cli {
    /// Flat key = value config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random constrained regression instance as JSON.
    Generate(GenerateArgs),
    /// Select penalty parameters for an instance and print a JSON report.
    Params(ParamsArgs),
    /// Run one solver on an instance, writing a trace and a run manifest.
    Solve(SolveArgs),
    /// Run the full-gradient γ-sweep experiment.
    SweepGamma(SweepArgs),
    /// Run the SAGA vs random-projection comparison experiment.
    Compare(CompareArgs),
    /// Run the invariant battery; exits nonzero on any failure.
    Validate(ValidateArgs),
}

#[derive(Args)]
pub(crate) struct GenerateArgs {
    /// Problem dimension n.
    #[arg(long, default_value_t = 30)]
    pub(crate) n: usize,
    /// Rows of the feature matrix (defaults to n).
    #[arg(long)]
    pub(crate) l: Option<usize>,
    /// Number of linear constraints.
    #[arg(long)]
    pub(crate) m: usize,
    #[arg(long)]
    pub(crate) seed: u64,
    /// Output file for the instance JSON.
    #[arg(short, long)]
    pub(crate) out: PathBuf,
}

#[derive(Args)]
pub(crate) struct ParamsArgs {
    /// Instance JSON file.
    #[arg(long)]
    pub(crate) instance: PathBuf,
    /// Target accuracy δ⁰ (for strong/gap modes).
    #[arg(long, default_value_t = 1e-2)]
    delta0: f64,
    /// Selection mode: feasible, strong, or gap.
    #[arg(long, default_value = "strong")]
    pub(crate) mode: String,
    #[command(flatten)]
    pub(crate) consts: ConstOverrides,
    /// Optional output file for the JSON report (stdout otherwise).
    #[arg(short, long)]
    pub(crate) out: Option<PathBuf>,
}

/// Problem-constant overrides shared by the solver-facing subcommands.
#[derive(Args, Clone, Default)]
pub(crate) struct ConstOverrides {
    /// Certified Hoffman constant (skips the sampling estimator).
    #[arg(long)]
    pub(crate) beta: Option<f64>,
    /// Certified gradient-norm bound over the relevant ball.
    #[arg(long)]
    pub(crate) grad_bound: Option<f64>,
    /// Slater margin ε (defaults to the generator's 0.01).
    #[arg(long)]
    pub(crate) slater_eps: Option<f64>,
    /// Budget c for the product γδ.
    #[arg(long)]
    pub(crate) c_budget: Option<f64>,
}

#[derive(Args)]
pub(crate) struct SolveArgs {
    /// Instance JSON file.
    #[arg(long)]
    pub(crate) instance: PathBuf,
    /// Solver: fullgrad, saga, timevarying, or randproj.
    #[arg(long)]
    pub(crate) method: String,
    /// Penalty slope γ (defaults to 100·m²).
    #[arg(long)]
    pub(crate) gamma: Option<f64>,
    /// Penalty smoothing δ (defaults to 1e-3).
    #[arg(long)]
    pub(crate) delta: Option<f64>,
    /// Fixed step size (auto-selected when omitted).
    #[arg(long)]
    pub(crate) step: Option<f64>,
    /// Schedule exponent ε for the time-varying method.
    #[arg(long, default_value_t = 0.25)]
    pub(crate) eps_exp: f64,
    /// Schedule exponent b for the time-varying method.
    #[arg(long, default_value_t = 1.6)]
    pub(crate) b_exp: f64,
    /// Iteration budget.
    #[arg(long, default_value_t = 1000)]
    pub(crate) iters: u64,
    /// Sampling seed (saga, randproj).
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
    /// Trace sampling stride.
    #[arg(long, default_value_t = 10)]
    pub(crate) record_every: u64,
    /// Gradient-norm stopping tolerance (fullgrad only).
    #[arg(long, default_value_t = 0.0)]
    pub(crate) tol: f64,
    /// Output directory (defaults to $HPEN_OUT_DIR or ./out).
    #[arg(short, long)]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct SweepArgs {
    #[arg(long, default_value_t = 500)]
    pub(crate) m: usize,
    /// Number of master seeds.
    #[arg(long, default_value_t = 20)]
    pub(crate) seeds: u64,
    #[arg(long, default_value_t = 1000)]
    pub(crate) iters: u64,
    #[arg(short, long)]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct CompareArgs {
    #[arg(long, default_value_t = 500)]
    pub(crate) m: usize,
    #[arg(long, default_value_t = 20)]
    pub(crate) seeds: u64,
    #[arg(long, default_value_t = 1000)]
    pub(crate) iters: u64,
    #[arg(short, long)]
    pub(crate) out: Option<PathBuf>,
}

#[derive(Args)]
pub(crate) struct ValidateArgs {
    #[arg(long, default_value_t = 0)]
    pub(crate) seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.config.as_deref().map(run::load_config).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Generate(a) => run::generate(a.n, a.l.unwrap_or(a.n), a.m, a.seed, &a.out),
        Command::Params(a) => run::params(
            &a.instance,
            a.delta0,
            &a.mode,
            &a.consts.merged(&config),
            a.out.as_deref(),
        ),
        Command::Solve(a) => run::solve(&a),
        Command::SweepGamma(a) => {
            run::sweep_gamma(a.m, a.seeds, a.iters, run::out_dir(a.out.as_deref()))
        }
        Command::Compare(a) => run::compare(a.m, a.seeds, a.iters, run::out_dir(a.out.as_deref())),
        Command::Validate(a) => run::validate(a.seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

impl ConstOverrides {
    /// Flags win over config-file values.
    fn merged(&self, config: &run::Config) -> ConstOverrides {
        ConstOverrides {
            beta: self.beta.or(config.get_f64("beta")),
            grad_bound: self.grad_bound.or(config.get_f64("grad-bound")),
            slater_eps: self.slater_eps.or(config.get_f64("slater-eps")),
            c_budget: self.c_budget.or(config.get_f64("c-budget")),
        }
    }
}
