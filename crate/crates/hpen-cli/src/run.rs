//! Implementations behind the CLI subcommands.

use crate::{ConstOverrides, SolveArgs};
use hpen_core::experiments::{
    self, generate_regression_instance, persist_run, ExperimentSpec, SLATER_EPS,
};
use hpen_core::params::{self, GradBound, ProblemConstants};
use hpen_core::problem::{
    slater_margin, Objective, Polyhedron, ProblemInstance, QuadraticObjective,
};
use hpen_core::solvers::{self, Method, SolverConfig, SolverError};
use hpen_core::{penalty::PenaltyParams, validate as checks};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub type CliError = Box<dyn std::error::Error>;
type Result<T> = std::result::Result<T, CliError>;

/// Flat `key = value` configuration file.
#[derive(Default)]
pub struct Config {
    values: HashMap<String, String>,
}

impl Config {
    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(|v| v.parse().ok())
    }
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let mut values = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("{}:{}: expected key = value", path.display(), lineno + 1).into());
        };
        values.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(Config { values })
}

/// Output root: explicit flag, then $HPEN_OUT_DIR, then ./out.
pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os("HPEN_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load_instance(path: &Path) -> Result<(QuadraticObjective, Polyhedron)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("reading {}: {e}", path.display()))?;
    let inst = ProblemInstance::from_json(&text)
        .map_err(|e| format!("parsing {}: {e}", path.display()))?;
    inst.into_parts().map_err(CliError::from)
}

pub fn generate(n: usize, l: usize, m: usize, seed: u64, out: &Path) -> Result<()> {
    let (obj, poly, slater) = generate_regression_instance(n, l, m, seed);
    let inst = ProblemInstance::from_parts(&obj, &poly);
    std::fs::write(out, inst.to_json()).map_err(|e| format!("writing {}: {e}", out.display()))?;
    println!(
        "wrote {} (n={n}, l={l}, m={m}, seed={seed}): alpha_min={}, alpha_max={}, slater margin at 0 = {}",
        out.display(),
        poly.alpha_min(),
        poly.alpha_max(),
        slater_margin(&poly, &slater.point),
    );
    Ok(())
}

/// Builds problem constants from the instance plus user overrides.
fn assemble_constants(
    obj: &QuadraticObjective,
    poly: &Polyhedron,
    overrides: &ConstOverrides,
    c_default: f64,
) -> Result<(ProblemConstants, GradBound)> {
    let (mu_f, l_f) = obj.curvature_bounds();
    let epsilon = match overrides.slater_eps {
        Some(e) => e,
        None => {
            let margin = slater_margin(poly, &vec![0.0; poly.dim()]);
            if margin <= 0.0 {
                return Err(
                    "the origin is not strictly feasible; pass --slater-eps for a certified margin"
                        .into(),
                );
            }
            margin.min(SLATER_EPS)
        }
    };
    let beta_hat = match overrides.beta {
        Some(b) => b,
        None => {
            // near-boundary samples give the sharpest ratios and the
            // cheapest projections; certify an exact value with --beta
            let radius = poly
                .constraints()
                .iter()
                .map(|c| c.b().abs() / c.norm())
                .fold(0.0f64, f64::max)
                .max(0.1)
                * 2.0;
            let est = params::estimate_hoffman(poly, 0xB0FF, 200, radius);
            if est.degenerate {
                return Err("Hoffman sampling found no infeasible points; supply --beta".into());
            }
            est.beta
        }
    };
    let c = overrides.c_budget.unwrap_or(c_default);
    let slater = hpen_core::problem::SlaterCertificate {
        point: vec![0.0; poly.dim()],
        margin: epsilon,
    };
    let grad = match overrides.grad_bound {
        Some(b) => GradBound {
            bound: b,
            radius: f64::NAN,
        },
        None => params::estimate_grad_bound(obj, poly, &slater, beta_hat, c)?,
    };
    let consts = ProblemConstants {
        alpha_min: poly.alpha_min(),
        alpha_max: poly.alpha_max(),
        beta_hat,
        l_hat: grad.bound,
        epsilon,
        mu_f,
        l_f,
        c,
    };
    consts.validate()?;
    Ok((consts, grad))
}

pub fn params(
    instance: &Path,
    delta0: f64,
    mode: &str,
    overrides: &ConstOverrides,
    out: Option<&Path>,
) -> Result<()> {
    let (obj, poly) = load_instance(instance)?;
    let m = poly.len();
    let (mu_f, _) = obj.curvature_bounds();
    let c_default = match mode {
        "strong" => 4.0 * mu_f * poly.alpha_min() * delta0,
        "gap" => 8.0 * poly.alpha_min() * delta0,
        "feasible" => 1.0,
        other => {
            return Err(format!("unknown mode {other:?}; expected feasible, strong, or gap").into())
        }
    };
    let (consts, _) = assemble_constants(&obj, &poly, overrides, c_default)?;

    let pp = match mode {
        "strong" => params::params_for_accuracy_strong(&consts, m, delta0)?,
        "gap" => params::params_for_accuracy_gap(&consts, m, delta0)?,
        "feasible" => {
            let delta = params::delta_range_feasibility(&consts, m)?;
            let gamma_min = params::gamma_threshold(&consts, m, delta)?;
            let cap = consts.c / delta;
            PenaltyParams::new((gamma_min * cap).sqrt(), delta)
        }
        _ => unreachable!(),
    };

    // re-validate every inequality before reporting
    let gamma_min = params::gamma_threshold(&consts, m, pp.delta())?;
    let cap = match mode {
        "strong" => 2.0 * consts.mu_f * consts.alpha_min * delta0 / pp.delta(),
        "gap" => 4.0 * consts.alpha_min * delta0 / pp.delta(),
        _ => consts.c / pp.delta(),
    };
    if !(gamma_min <= pp.gamma() && pp.gamma() <= cap) {
        return Err(format!(
            "selected gamma {} violates Gamma = {gamma_min} <= gamma <= {cap}",
            pp.gamma()
        )
        .into());
    }
    let alpha = params::saga_step_size(&consts, m, pp, consts.mu_f > 0.0);

    let report = serde_json::json!({
        "mode": mode,
        "delta0": delta0,
        "gamma": pp.gamma(),
        "delta": pp.delta(),
        "gamma_threshold": gamma_min,
        "gamma_cap": cap,
        "saga_step": alpha,
        "constants": consts,
    });
    let text = serde_json::to_string_pretty(&report).expect("report serialization");
    match out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| format!("writing {}: {e}", path.display()))?
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn parse_method(name: &str) -> Result<Method> {
    Ok(match name {
        "fullgrad" => Method::FullGrad,
        "saga" => Method::Saga,
        "timevarying" => Method::TimeVarying,
        "randproj" => Method::RandProj,
        other => return Err(format!("unknown method {other:?}").into()),
    })
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    let (obj, poly) = load_instance(&args.instance)?;
    let method = parse_method(&args.method)?;
    let m = poly.len();
    let n = poly.dim();
    let x0 = vec![0.0; n];
    let (mu_f, l_f) = obj.curvature_bounds();

    // benchmark-scale defaults when nothing is specified
    let gamma = args.gamma.unwrap_or(100.0 * (m as f64) * (m as f64));
    let delta = args.delta.unwrap_or(1e-3);
    let dir = out_dir(args.out.as_deref());
    let run_name = format!("solve-{}-seed{}", method.name(), args.seed);

    let (step_used, run) = match method {
        Method::FullGrad => {
            let pp = PenaltyParams::new(gamma, delta);
            let step = args
                .step
                .unwrap_or_else(|| experiments::sweep_step(&obj, &poly, gamma, delta));
            (
                step,
                solvers::solve_full_gradient(
                    &obj,
                    &poly,
                    pp,
                    &x0,
                    step,
                    args.iters,
                    args.tol,
                    args.record_every,
                    None,
                ),
            )
        }
        Method::Saga => {
            let consts = ProblemConstants {
                alpha_min: poly.alpha_min(),
                alpha_max: poly.alpha_max(),
                beta_hat: 1.0,
                l_hat: 1.0,
                epsilon: 1.0,
                mu_f,
                l_f,
                c: 1.0,
            };
            let pp = PenaltyParams::new(gamma, delta);
            let step = args
                .step
                .unwrap_or_else(|| params::saga_step_size(&consts, m, pp, mu_f > 0.0));
            (
                step,
                solvers::solve_saga(
                    &obj,
                    &poly,
                    pp,
                    &x0,
                    step,
                    args.iters,
                    args.seed,
                    args.record_every,
                    None,
                ),
            )
        }
        Method::TimeVarying => {
            let schedule = params::make_schedule(args.eps_exp, args.b_exp)?;
            (
                f64::NAN,
                solvers::solve_time_varying(
                    &obj,
                    &poly,
                    &schedule,
                    &x0,
                    args.iters,
                    args.record_every,
                    None,
                ),
            )
        }
        Method::RandProj => (
            f64::NAN,
            solvers::solve_rand_proj(
                &obj,
                &poly,
                &x0,
                args.iters,
                args.seed,
                args.record_every,
                None,
            ),
        ),
        Method::Reference => unreachable!("not a CLI method"),
    };

    let trace_path = dir.join(&run_name).join("trace.csv");
    let sidecar_path = dir.join(&run_name).join("run.json");
    let write_outputs = |trace: &solvers::IterateTrace, completed: bool| -> Result<()> {
        std::fs::create_dir_all(trace_path.parent().unwrap())
            .map_err(|e| format!("creating {}: {e}", trace_path.parent().unwrap().display()))?;
        std::fs::write(&trace_path, trace.to_csv())
            .map_err(|e| format!("writing {}: {e}", trace_path.display()))?;
        let config = SolverConfig {
            method,
            max_iter: args.iters,
            step: if step_used.is_nan() {
                None
            } else {
                Some(step_used)
            },
            gamma: Some(gamma),
            delta: Some(delta),
            schedule_eps: (method == Method::TimeVarying).then_some(args.eps_exp),
            schedule_b: (method == Method::TimeVarying).then_some(args.b_exp),
            seed: args.seed,
            record_every: args.record_every,
            tol: args.tol,
        };
        let sidecar = serde_json::json!({
            "config": config,
            "instance_hash": experiments::instance_hash(&obj, &poly),
            "completed": completed,
        });
        std::fs::write(
            &sidecar_path,
            serde_json::to_string_pretty(&sidecar).unwrap(),
        )
        .map_err(|e| format!("writing {}: {e}", sidecar_path.display()))?;
        Ok(())
    };

    match run {
        Ok(run) => {
            write_outputs(&run.trace, true)?;
            println!(
                "{}: {} iterations, terminal f = {:.6e}, feasibility residual = {:.3e} ({:.1} ms)",
                run_name,
                run.iterations,
                obj.value(&run.x),
                hpen_core::feasibility_residual(&run.x, &poly),
                run.elapsed_ms,
            );
            println!("trace: {}", trace_path.display());
            Ok(())
        }
        Err(SolverError::Diverged {
            iteration,
            norm,
            trace,
        }) => {
            write_outputs(&trace, false)?;
            Err(format!(
                "solver diverged at iteration {iteration} (|x| = {norm:.3e}); partial trace kept at {}",
                trace_path.display()
            )
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

pub fn sweep_gamma(m: usize, seeds: u64, iters: u64, out: PathBuf) -> Result<()> {
    let spec = ExperimentSpec::gamma_sweep(m, (1..=seeds).collect(), iters);
    let record = experiments::run_gamma_sweep(&spec)?;
    let manifest = persist_run(&record, &out)?;
    print_aggregates(&record);
    println!(
        "wrote {} files under {}",
        manifest.files.len() + 1,
        out.join(&spec.name).display()
    );
    Ok(())
}

pub fn compare(m: usize, seeds: u64, iters: u64, out: PathBuf) -> Result<()> {
    let spec = ExperimentSpec::comparison(m, (1..=seeds).collect(), iters);
    let record = experiments::run_method_comparison(&spec)?;
    let manifest = persist_run(&record, &out)?;
    if let Some(tuned) = &record.tuned {
        println!(
            "tuned saga: gamma = {}, delta = {}, step scale = {}",
            tuned.gamma, tuned.delta, tuned.step_scale
        );
    }
    print_aggregates(&record);
    println!(
        "wrote {} files under {}",
        manifest.files.len() + 1,
        out.join(&spec.name).display()
    );
    Ok(())
}

fn print_aggregates(record: &experiments::RunRecord) {
    for row in &record.aggregates {
        println!(
            "{}: median rel err = {:.4e}, mean = {:.4e}, feasible fraction = {:.2}",
            row.label, row.median_rel_err, row.mean_rel_err, row.feasible_fraction
        );
    }
}

pub fn validate(seed: u64) -> Result<()> {
    let outcomes = checks::run_all(seed);
    let mut failures = 0;
    let mut report = String::new();
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        writeln!(report, "{status} {} — {}", o.name, o.details).unwrap();
        if !o.passed {
            failures += 1;
        }
    }
    print!("{report}");
    if failures > 0 {
        return Err(format!("{failures} validation check(s) failed").into());
    }
    println!("all {} checks passed", outcomes.len());
    Ok(())
}
