//! Seeded benchmark experiments: random regression instances, the γ-sweep,
//! the SAGA-vs-random-projection comparison, metric aggregation across
//! seeds, and persistence to CSV traces plus a JSON manifest.
//!
//! Reproducibility rules: every random quantity flows from one master seed
//! through [`derive_seed`], independent (seed, config) cells run in
//! parallel but are reduced in input order, and persisted files carry no
//! timestamps, so a rerun with the same inputs writes byte-identical files.

use crate::geometry::feasibility_residual;
use crate::linalg::Mat;
use crate::penalty::PenaltyParams;
use crate::problem::{
    LinearConstraint, Objective, Polyhedron, ProblemInstance, QuadraticObjective, SlaterCertificate,
};
use crate::solvers::{
    solve_full_gradient, solve_rand_proj, solve_reference, solve_saga, IterateTrace, Method,
    SolverConfig, SolverError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("solver failed in experiment cell (seed {seed}, label {label}): {source}")]
    Cell {
        seed: u64,
        label: String,
        source: SolverError,
    },
    #[error("reference solve failed for seed {seed}: {source}")]
    Reference { seed: u64, source: SolverError },
    #[error("writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("experiment spec invalid: {0}")]
    BadSpec(String),
}

/// Slater margin enforced at the origin for generated instances.
pub const SLATER_EPS: f64 = 0.01;

const SPLITMIX_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(SPLITMIX_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(s: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Seed fan-out: instance and solver streams are decorrelated from one
/// master seed by folding a domain tag and index through SplitMix64, so
/// methods compare on identical instances with independent sampling noise.
pub fn derive_seed(master: u64, domain: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a(domain) ^ index.wrapping_mul(SPLITMIX_GAMMA))
}

/// Draws a random regression instance: x⁰ ~ Normal(0, var 10) per
/// coordinate, Φ ~ Uniform[−1, 1] entrywise, constraint rows and offsets
/// ~ Normal(0, var 100). Offsets are then adapted so the origin is a
/// Slater point with margin ε = 0.01: any bᵢ < ε is replaced by a fresh
/// |Normal(0, var 100)| + ε. Deterministic given the seed; "variance v"
/// means std = sqrt(v) throughout.
pub fn generate_regression_instance(
    n: usize,
    l: usize,
    m: usize,
    seed: u64,
) -> (QuadraticObjective, Polyhedron, SlaterCertificate) {
    assert!(n >= 1 && l >= 1 && m >= 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal_x0 = Normal::new(0.0, 10.0f64.sqrt()).unwrap();
    let normal_ab = Normal::new(0.0, 10.0).unwrap();

    let x0: Vec<f64> = (0..l).map(|_| normal_x0.sample(&mut rng)).collect();
    let phi: Vec<f64> = (0..l * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for _ in 0..m {
        loop {
            let a: Vec<f64> = (0..n).map(|_| normal_ab.sample(&mut rng)).collect();
            if a.iter().any(|&v| v != 0.0) {
                rows.push(a);
                break;
            }
        }
    }
    let mut bs: Vec<f64> = (0..m).map(|_| normal_ab.sample(&mut rng)).collect();
    for b in &mut bs {
        if *b < SLATER_EPS {
            *b = normal_ab.sample(&mut rng).abs() + SLATER_EPS;
        }
    }

    let obj = QuadraticObjective::new(Mat::new(l, n, phi), x0);
    let poly = Polyhedron::new(
        rows.into_iter()
            .zip(bs)
            .map(|(a, b)| LinearConstraint::new(a, b))
            .collect(),
    );
    let slater = SlaterCertificate {
        point: vec![0.0; n],
        margin: SLATER_EPS,
    };
    debug_assert!(crate::problem::slater_margin(&poly, &slater.point) >= SLATER_EPS);
    (obj, poly, slater)
}

/// Declarative description of one canned experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub name: String,
    pub n: usize,
    pub l: usize,
    pub m: usize,
    pub seeds: Vec<u64>,
    pub iterations: u64,
    pub record_every: u64,
    pub delta0: f64,
    pub gamma_grid: Option<Vec<f64>>,
    pub methods: Vec<SolverConfig>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::BadSpec("seed list is empty".into()));
        }
        if self.iterations < 1 {
            return Err(ExperimentError::BadSpec("iterations must be >= 1".into()));
        }
        Ok(())
    }

    /// Benchmark defaults: n = l = 30, 1000 iterations.
    pub fn comparison(m: usize, seeds: Vec<u64>, iterations: u64) -> Self {
        ExperimentSpec {
            name: format!("compare-m{m}"),
            n: 30,
            l: 30,
            m,
            seeds,
            iterations,
            record_every: 10,
            delta0: 1e-2,
            gamma_grid: None,
            methods: vec![
                SolverConfig {
                    method: Method::Saga,
                    max_iter: iterations,
                    step: None,
                    gamma: None,
                    delta: None,
                    schedule_eps: None,
                    schedule_b: None,
                    seed: 0,
                    record_every: 10,
                    tol: 0.0,
                },
                SolverConfig {
                    method: Method::RandProj,
                    max_iter: iterations,
                    step: None,
                    gamma: None,
                    delta: None,
                    schedule_eps: None,
                    schedule_b: None,
                    seed: 0,
                    record_every: 10,
                    tol: 0.0,
                },
            ],
        }
    }

    /// γ-sweep defaults mirroring the regression study: grid
    /// {1, 2, 5, 10, 20}·100m² at fixed δ = 0.001.
    pub fn gamma_sweep(m: usize, seeds: Vec<u64>, iterations: u64) -> Self {
        let base = 100.0 * (m as f64) * (m as f64);
        ExperimentSpec {
            name: format!("sweep-gamma-m{m}"),
            n: 30,
            l: 30,
            m,
            seeds,
            iterations,
            record_every: 10,
            delta0: 1e-2,
            gamma_grid: Some(vec![base, 2.0 * base, 5.0 * base, 10.0 * base, 20.0 * base]),
            methods: Vec::new(),
        }
    }
}

/// Terminal metrics of one (seed, config) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellOutcome {
    pub seed: u64,
    pub label: String,
    /// Terminal distance to the reference solution (plotted as the error curve).
    pub rel_err: f64,
    pub feasible: bool,
    pub f_gap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateRow {
    pub label: String,
    pub median_rel_err: f64,
    pub mean_rel_err: f64,
    pub feasible_fraction: f64,
}

/// One persisted trace.
#[derive(Debug, Clone)]
pub struct TraceOutput {
    pub seed: u64,
    pub label: String,
    pub trace: IterateTrace,
}

/// Everything an experiment produced, ready for aggregation and persistence.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub spec: ExperimentSpec,
    pub cells: Vec<CellOutcome>,
    pub aggregates: Vec<AggregateRow>,
    pub traces: Vec<TraceOutput>,
    /// Tuned SAGA configuration when the comparison protocol selected one.
    pub tuned: Option<TunedSaga>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TunedSaga {
    pub gamma: f64,
    pub delta: f64,
    /// Multiple of the per-instance strongly convex theory step.
    pub step_scale: f64,
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

fn aggregate(label: &str, cells: &[&CellOutcome]) -> AggregateRow {
    let errs: Vec<f64> = cells.iter().map(|c| c.rel_err).collect();
    let feasible = cells.iter().filter(|c| c.feasible).count() as f64;
    AggregateRow {
        label: label.to_string(),
        median_rel_err: median(&errs),
        mean_rel_err: mean(&errs),
        feasible_fraction: feasible / cells.len().max(1) as f64,
    }
}

/// Exact terminal feasibility (zero residual), the reported statistic.
fn is_feasible(x: &[f64], poly: &Polyhedron) -> bool {
    feasibility_residual(x, poly) == 0.0
}

type InstanceKey = (usize, usize, usize, u64);
type InstanceValue = (QuadraticObjective, Polyhedron, SlaterCertificate, Vec<f64>);

/// Reference solutions are expensive; share them between experiments that
/// use the same instances (e.g. the sweep and the comparison in one
/// process). Values are deterministic, so caching cannot change results.
fn instance_with_reference(
    n: usize,
    l: usize,
    m: usize,
    master_seed: u64,
) -> Result<InstanceValue, ExperimentError> {
    static CACHE: OnceLock<Mutex<HashMap<InstanceKey, InstanceValue>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(hit) = cache.lock().unwrap().get(&(n, l, m, master_seed)) {
        return Ok(hit.clone());
    }
    let instance_seed = derive_seed(master_seed, "instance", 0);
    let (obj, poly, slater) = generate_regression_instance(n, l, m, instance_seed);
    let x_star = solve_reference(&obj, &poly, &vec![0.0; n], 1e-12).map_err(|source| {
        ExperimentError::Reference {
            seed: master_seed,
            source,
        }
    })?;
    let value = (obj, poly, slater, x_star);
    cache
        .lock()
        .unwrap()
        .insert((n, l, m, master_seed), value.clone());
    Ok(value)
}

/// Fixed δ for the γ-sweep.
pub const SWEEP_DELTA: f64 = 1e-3;

/// Step for the γ-sweep: the largest step that is stable for every γ on
/// the grid, i.e. the recommended 1/(L_f + γ_max·α_max/(2δ)). One step
/// shared across the grid keeps the sweep comparable column to column;
/// anything larger turns the penalty band into a slingshot (one band
/// crossing kicks the iterate by step·γ/m, orders of magnitude past the
/// feasible set's diameter at these γ values).
pub fn sweep_step(obj: &QuadraticObjective, poly: &Polyhedron, gamma_max: f64, delta: f64) -> f64 {
    let (_, l_f) = obj.curvature_bounds();
    1.0 / (l_f + gamma_max * poly.alpha_max() / (2.0 * delta))
}

/// Runs the full gradient method over the γ grid at fixed δ, recording
/// relative-error trajectories and terminal feasibility per γ.
pub fn run_gamma_sweep(spec: &ExperimentSpec) -> Result<RunRecord, ExperimentError> {
    spec.validate()?;
    let grid = spec
        .gamma_grid
        .clone()
        .ok_or_else(|| ExperimentError::BadSpec("gamma sweep needs a gamma grid".into()))?;
    if grid.is_empty() {
        return Err(ExperimentError::BadSpec("gamma grid is empty".into()));
    }

    let gamma_max = grid.iter().copied().fold(0.0, f64::max);
    let per_seed: Result<Vec<_>, ExperimentError> = spec
        .seeds
        .par_iter()
        .map(|&master| {
            let (obj, poly, _slater, x_star) =
                instance_with_reference(spec.n, spec.l, spec.m, master)?;
            let step = sweep_step(&obj, &poly, gamma_max, SWEEP_DELTA);
            let mut cells = Vec::new();
            let mut traces = Vec::new();
            for (gi, &gamma) in grid.iter().enumerate() {
                let label = format!("fullgrad-g{gi}");
                let pp = PenaltyParams::new(gamma, SWEEP_DELTA);
                let run = solve_full_gradient(
                    &obj,
                    &poly,
                    pp,
                    &vec![0.0; spec.n],
                    step,
                    spec.iterations,
                    0.0,
                    spec.record_every,
                    Some(&x_star),
                )
                .map_err(|source| ExperimentError::Cell {
                    seed: master,
                    label: label.clone(),
                    source,
                })?;
                cells.push(CellOutcome {
                    seed: master,
                    label: label.clone(),
                    rel_err: crate::linalg::dist2(&run.x, &x_star),
                    feasible: is_feasible(&run.x, &poly),
                    f_gap: obj.value(&run.x) - obj.value(&x_star),
                });
                traces.push(TraceOutput {
                    seed: master,
                    label,
                    trace: run.trace,
                });
            }
            Ok((cells, traces))
        })
        .collect();

    let mut cells = Vec::new();
    let mut traces = Vec::new();
    for (c, t) in per_seed? {
        cells.extend(c);
        traces.extend(t);
    }
    let aggregates = (0..grid.len())
        .map(|gi| {
            let label = format!("fullgrad-g{gi}");
            let group: Vec<&CellOutcome> = cells.iter().filter(|c| c.label == label).collect();
            aggregate(&label, &group)
        })
        .collect();
    Ok(RunRecord {
        spec: spec.clone(),
        cells,
        aggregates,
        traces,
        tuned: None,
    })
}

/// Tuning protocol for the comparison: a small grid over
/// γ/m ∈ {10, 100, 1000} × δ ∈ {1e-2, 1e-3, 1e-4} × step scale
/// {1, 10, 100}·α_theory (the strongly convex step recommendation for the
/// penalized problem, computed per instance). Configurations whose
/// terminal iterate is infeasible on any seed are discarded; among the
/// rest the smallest median terminal error wins.
pub const TUNE_GAMMA_PER_M: [f64; 3] = [10.0, 100.0, 1000.0];
pub const TUNE_DELTAS: [f64; 3] = [1e-2, 1e-3, 1e-4];
pub const TUNE_STEP_SCALES: [f64; 3] = [1.0, 10.0, 100.0];

/// Strongly convex SAGA step for one instance.
fn theory_step(obj: &QuadraticObjective, poly: &Polyhedron, m: usize, pp: PenaltyParams) -> f64 {
    let (mu_f, l_f) = obj.curvature_bounds();
    1.0 / (2.0 * (mu_f * m as f64 + l_f + pp.gamma() * poly.alpha_max() / (2.0 * pp.delta())))
}

fn tune_saga(
    spec: &ExperimentSpec,
    instances: &[(QuadraticObjective, Polyhedron, SlaterCertificate, Vec<f64>)],
) -> Result<(TunedSaga, Vec<(CellOutcome, TraceOutput)>), ExperimentError> {
    struct Candidate {
        cfg: TunedSaga,
        median_err: f64,
        outputs: Vec<(CellOutcome, TraceOutput)>,
    }
    let mut configs = Vec::new();
    for &gpm in &TUNE_GAMMA_PER_M {
        for &delta in &TUNE_DELTAS {
            for &step_scale in &TUNE_STEP_SCALES {
                configs.push(TunedSaga {
                    gamma: gpm * spec.m as f64,
                    delta,
                    step_scale,
                });
            }
        }
    }
    let candidates: Result<Vec<Option<Candidate>>, ExperimentError> = configs
        .par_iter()
        .map(|cfg| {
            let mut outputs = Vec::new();
            for (idx, &master) in spec.seeds.iter().enumerate() {
                let (obj, poly, _, x_star) = &instances[idx];
                let solver_seed = derive_seed(master, "solver-saga", 0);
                let pp = PenaltyParams::new(cfg.gamma, cfg.delta);
                let step = cfg.step_scale * theory_step(obj, poly, spec.m, pp);
                let run = match solve_saga(
                    obj,
                    poly,
                    pp,
                    &vec![0.0; spec.n],
                    step,
                    spec.iterations,
                    solver_seed,
                    spec.record_every,
                    Some(x_star),
                ) {
                    Ok(run) => run,
                    // a diverging grid point disqualifies the config, nothing more
                    Err(SolverError::Diverged { .. }) => return Ok(None),
                    Err(source) => {
                        return Err(ExperimentError::Cell {
                            seed: master,
                            label: "saga-tune".into(),
                            source,
                        })
                    }
                };
                let feasible = is_feasible(&run.x, poly);
                if !feasible {
                    return Ok(None);
                }
                outputs.push((
                    CellOutcome {
                        seed: master,
                        label: "saga".into(),
                        rel_err: crate::linalg::dist2(&run.x, x_star),
                        feasible,
                        f_gap: obj.value(&run.x) - obj.value(x_star),
                    },
                    TraceOutput {
                        seed: master,
                        label: "saga".into(),
                        trace: run.trace,
                    },
                ));
            }
            let errs: Vec<f64> = outputs.iter().map(|(c, _)| c.rel_err).collect();
            Ok(Some(Candidate {
                cfg: cfg.clone(),
                median_err: median(&errs),
                outputs,
            }))
        })
        .collect();
    let mut best: Option<Candidate> = None;
    for cand in candidates?.into_iter().flatten() {
        let replace = match &best {
            None => true,
            Some(b) => cand.median_err < b.median_err,
        };
        if replace {
            best = Some(cand);
        }
    }
    let best = best.ok_or_else(|| {
        ExperimentError::BadSpec("no tuning configuration kept every seed feasible".into())
    })?;
    Ok((best.cfg, best.outputs))
}

/// Runs the tuned SAGA method and the random-projection baseline on
/// identical instances per seed and aggregates terminal metrics.
pub fn run_method_comparison(spec: &ExperimentSpec) -> Result<RunRecord, ExperimentError> {
    spec.validate()?;
    let wants = |m: Method| spec.methods.iter().any(|c| c.method == m);
    if !wants(Method::Saga) || !wants(Method::RandProj) {
        return Err(ExperimentError::BadSpec(
            "method comparison needs both saga and randproj configs".into(),
        ));
    }

    let instances: Result<Vec<_>, ExperimentError> = spec
        .seeds
        .par_iter()
        .map(|&master| instance_with_reference(spec.n, spec.l, spec.m, master))
        .collect();
    let instances = instances?;

    // explicit (gamma, delta, step) on the SAGA config bypasses tuning
    let saga_cfg = spec
        .methods
        .iter()
        .find(|c| c.method == Method::Saga)
        .unwrap();
    let (tuned, saga_outputs) = match (saga_cfg.gamma, saga_cfg.delta, saga_cfg.step) {
        (Some(gamma), Some(delta), Some(step)) => {
            let cfg = TunedSaga {
                gamma,
                delta,
                step_scale: f64::NAN,
            };
            let outputs: Result<Vec<_>, ExperimentError> = spec
                .seeds
                .par_iter()
                .enumerate()
                .map(|(idx, &master)| {
                    let (obj, poly, _, x_star) = &instances[idx];
                    let run = solve_saga(
                        obj,
                        poly,
                        PenaltyParams::new(gamma, delta),
                        &vec![0.0; spec.n],
                        step,
                        spec.iterations,
                        derive_seed(master, "solver-saga", 0),
                        spec.record_every,
                        Some(x_star),
                    )
                    .map_err(|source| ExperimentError::Cell {
                        seed: master,
                        label: "saga".into(),
                        source,
                    })?;
                    Ok((
                        CellOutcome {
                            seed: master,
                            label: "saga".into(),
                            rel_err: crate::linalg::dist2(&run.x, x_star),
                            feasible: is_feasible(&run.x, poly),
                            f_gap: obj.value(&run.x) - obj.value(x_star),
                        },
                        TraceOutput {
                            seed: master,
                            label: "saga".into(),
                            trace: run.trace,
                        },
                    ))
                })
                .collect();
            (cfg, outputs?)
        }
        _ => tune_saga(spec, &instances)?,
    };

    let randproj_outputs: Result<Vec<_>, ExperimentError> = spec
        .seeds
        .par_iter()
        .enumerate()
        .map(|(idx, &master)| {
            let (obj, poly, _, x_star) = &instances[idx];
            let run = solve_rand_proj(
                obj,
                poly,
                &vec![0.0; spec.n],
                spec.iterations,
                derive_seed(master, "solver-randproj", 0),
                spec.record_every,
                Some(x_star),
            )
            .map_err(|source| ExperimentError::Cell {
                seed: master,
                label: "randproj".into(),
                source,
            })?;
            Ok((
                CellOutcome {
                    seed: master,
                    label: "randproj".into(),
                    rel_err: crate::linalg::dist2(&run.x, x_star),
                    feasible: is_feasible(&run.x, poly),
                    f_gap: obj.value(&run.x) - obj.value(x_star),
                },
                TraceOutput {
                    seed: master,
                    label: "randproj".into(),
                    trace: run.trace,
                },
            ))
        })
        .collect();

    let mut cells = Vec::new();
    let mut traces = Vec::new();
    for (c, t) in saga_outputs.into_iter().chain(randproj_outputs?) {
        cells.push(c);
        traces.push(t);
    }
    let aggregates = ["saga", "randproj"]
        .iter()
        .map(|label| {
            let group: Vec<&CellOutcome> = cells.iter().filter(|c| &c.label == label).collect();
            aggregate(label, &group)
        })
        .collect();
    Ok(RunRecord {
        spec: spec.clone(),
        cells,
        aggregates,
        traces,
        tuned: Some(tuned),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

/// Written alongside every experiment: the spec, seeds, tuned parameters,
/// distribution conventions and content hashes of every emitted file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub master_seeds: Vec<u64>,
    pub spec: ExperimentSpec,
    pub tuned_saga: Option<TunedSaga>,
    /// "variance v" from the generator means std = sqrt(v)
    pub variance_convention: String,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|source| ExperimentError::Io {
            path: parent.display().to_string(),
            source,
        })?;
    }
    let mut f = std::fs::File::create(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(contents)
        .map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
    Ok(())
}

/// Persists per-run CSV traces (`<out>/<experiment>/<seed>/<label>.csv`),
/// the aggregate CSV, and a manifest listing every file with its content
/// hash. Reruns with identical inputs overwrite byte-identical files.
pub fn persist_run(record: &RunRecord, out_dir: &Path) -> Result<Manifest, ExperimentError> {
    let root = out_dir.join(&record.spec.name);
    let mut files = Vec::new();

    let mut traces: Vec<&TraceOutput> = record.traces.iter().collect();
    traces.sort_by(|a, b| (a.seed, &a.label).cmp(&(b.seed, &b.label)));
    for t in traces {
        let rel: PathBuf = [
            record.spec.name.clone(),
            t.seed.to_string(),
            format!("{}.csv", t.label),
        ]
        .iter()
        .collect();
        let path = out_dir.join(&rel);
        let csv = t.trace.to_csv();
        write_file(&path, csv.as_bytes())?;
        files.push(FileEntry {
            path: rel.to_string_lossy().into_owned(),
            sha256: sha256_hex(csv.as_bytes()),
        });
    }

    let mut agg_csv = String::from("label,median_rel_err,mean_rel_err,feasible_fraction\n");
    for row in &record.aggregates {
        agg_csv.push_str(&format!(
            "{},{},{},{}\n",
            row.label, row.median_rel_err, row.mean_rel_err, row.feasible_fraction
        ));
    }
    let agg_rel = PathBuf::from(&record.spec.name).join("aggregate.csv");
    write_file(&out_dir.join(&agg_rel), agg_csv.as_bytes())?;
    files.push(FileEntry {
        path: agg_rel.to_string_lossy().into_owned(),
        sha256: sha256_hex(agg_csv.as_bytes()),
    });

    let mut manifest = Manifest {
        experiment: record.spec.name.clone(),
        master_seeds: record.spec.seeds.clone(),
        spec: record.spec.clone(),
        tuned_saga: record.tuned.clone(),
        variance_convention: "variance v means std = sqrt(v)".to_string(),
        files,
    };
    manifest.files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest_json =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail");
    write_file(&root.join("manifest.json"), manifest_json.as_bytes())?;
    Ok(manifest)
}

/// Content hash of a problem instance, recorded in run sidecars.
pub fn instance_hash(obj: &QuadraticObjective, poly: &Polyhedron) -> String {
    let inst = ProblemInstance::from_parts(obj, poly);
    sha256_hex(inst.to_json().as_bytes())
}
