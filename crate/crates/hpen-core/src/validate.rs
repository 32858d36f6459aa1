//! Named invariant checks behind the `validate` CLI subcommand, plus the
//! independent projection oracles (exact 2D enumeration and grid
//! refinement) used to cross-check Dykstra.
//!
//! Each check is small, seeded and deterministic; the CLI exits nonzero if
//! any of them fails.

use crate::geometry::{self, project_halfspace, project_polyhedron};
use crate::linalg;
use crate::penalty::{self, PenaltyParams};
use crate::problem::{LinearConstraint, Objective, Polyhedron, QuadraticObjective};
use crate::solvers;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
}

impl CheckOutcome {
    fn pass(name: &'static str, details: String) -> Self {
        CheckOutcome {
            name,
            passed: true,
            details,
        }
    }

    fn fail(name: &'static str, details: String) -> Self {
        CheckOutcome {
            name,
            passed: false,
            details,
        }
    }
}

/// Exact projection onto a 2D polyhedron with few constraints by KKT
/// enumeration: the projection is the input itself, a facet foot point, or
/// a vertex. Independent of the Dykstra implementation.
pub fn exact_projection_2d(y: &[f64], poly: &Polyhedron) -> Option<Vec<f64>> {
    assert_eq!(poly.dim(), 2, "exact enumeration oracle is 2D only");
    let feas_tol = 1e-11;
    let feasible = |p: &[f64]| {
        poly.constraints()
            .iter()
            .all(|c| c.violation(p) <= feas_tol * (1.0 + c.b().abs()))
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut consider = |p: Vec<f64>| {
        if feasible(&p) {
            let d = linalg::dist2(y, &p);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, p));
            }
        }
    };
    consider(y.to_vec());
    for c in poly.constraints() {
        // foot point on the boundary hyperplane
        let t = c.violation(y) / (c.norm() * c.norm());
        let mut p = y.to_vec();
        linalg::axpy(&mut p, -t, c.a());
        consider(p);
    }
    let cs = poly.constraints();
    for i in 0..cs.len() {
        for j in (i + 1)..cs.len() {
            let (a1, a2) = (cs[i].a(), cs[j].a());
            let det = a1[0] * a2[1] - a1[1] * a2[0];
            if det.abs() < 1e-14 {
                continue;
            }
            let (b1, b2) = (cs[i].b(), cs[j].b());
            consider(vec![
                (b1 * a2[1] - b2 * a1[1]) / det,
                (a1[0] * b2 - a2[0] * b1) / det,
            ]);
        }
    }
    best.map(|(_, p)| p)
}

/// Brute-force projection by grid search refined around the running
/// optimum. Slow and approximate, but entirely independent of both Dykstra
/// and the KKT enumeration. The returned point is accurate to roughly the
/// final grid resolution (initial radius × 0.5^rounds / 30).
pub fn grid_refine_projection_2d(y: &[f64], poly: &Polyhedron, rounds: usize) -> Option<Vec<f64>> {
    assert_eq!(poly.dim(), 2);
    let feasible = |p: &[f64]| poly.constraints().iter().all(|c| c.violation(p) <= 0.0);
    // generous initial box: each refinement keeps the optimum inside
    // because the running best is already within two grid cells of it
    let mut radius = 8.0;
    let mut center = y.to_vec();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut round = 0;
    while round < rounds {
        let steps = 60;
        for ix in 0..=steps {
            for iy in 0..=steps {
                let p = vec![
                    center[0] - radius + 2.0 * radius * ix as f64 / steps as f64,
                    center[1] - radius + 2.0 * radius * iy as f64 / steps as f64,
                ];
                if feasible(&p) {
                    let d = linalg::dist2(y, &p);
                    if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                        best = Some((d, p));
                    }
                }
            }
        }
        match &best {
            Some((_, p)) => {
                center = p.clone();
                radius *= 0.5;
                round += 1;
            }
            None => {
                radius *= 2.0;
                if radius > 1e6 {
                    return None;
                }
            }
        }
    }
    best.map(|(_, p)| p)
}

fn random_constraint(rng: &mut ChaCha20Rng, n: usize) -> LinearConstraint {
    loop {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        if linalg::norm2(&a) > 0.1 {
            return LinearConstraint::new(a, rng.random_range(-1.0..2.0));
        }
    }
}

fn check_penalty_bounds(seed: u64) -> CheckOutcome {
    let name = "penalty-bounds";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=4);
        let c = random_constraint(&mut rng, n);
        let delta: f64 = rng.random_range(1e-4..2.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let h = penalty::h_delta(&x, &c, delta);
        let cap = delta / (4.0 * c.norm());
        if h < 0.0 {
            return CheckOutcome::fail(name, format!("negative penalty {h}"));
        }
        if c.violation(&x) <= 0.0 && h > cap {
            return CheckOutcome::fail(name, format!("feasible cap violated: {h} > {cap}"));
        }
        if c.violation(&x) > 0.0 && h <= cap {
            return CheckOutcome::fail(name, format!("infeasible floor violated: {h} <= {cap}"));
        }
    }
    CheckOutcome::pass(
        name,
        "10000 samples within feasible cap / infeasible floor".into(),
    )
}

fn check_h0_distance(seed: u64) -> CheckOutcome {
    let name = "h0-equals-distance";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..2_000 {
        let n = rng.random_range(1..=4);
        let c = random_constraint(&mut rng, n);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0..4.0)).collect();
        let h0 = penalty::h_delta(&x, &c, 0.0);
        let dist = project_halfspace(&x, &c).distance;
        let err = (h0 - dist).abs() / (1.0 + dist);
        worst = worst.max(err);
        if err > 1e-14 {
            return CheckOutcome::fail(name, format!("relative error {err}"));
        }
    }
    CheckOutcome::pass(name, format!("max relative error {worst:.2e}"))
}

fn check_delta_monotonicity(seed: u64) -> CheckOutcome {
    let name = "delta-monotonicity";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..1_000 {
        let n = rng.random_range(1..=3);
        let c = random_constraint(&mut rng, n);
        let d1: f64 = rng.random_range(1e-4..1.0);
        let d2: f64 = d1 + rng.random_range(0.0..1.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        if penalty::h_delta(&x, &c, d1) > penalty::h_delta(&x, &c, d2) {
            return CheckOutcome::fail(name, format!("h_{d1} > h_{d2}"));
        }
    }
    CheckOutcome::pass(
        name,
        "1000 random (x, delta, delta') triples monotone".into(),
    )
}

fn check_gradient_fd(seed: u64) -> CheckOutcome {
    let name = "gradient-finite-difference";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let n = 4;
        let phi: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let obj = QuadraticObjective::new(
            crate::linalg::Mat::new(n, n, phi),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let poly = Polyhedron::new((0..6).map(|_| random_constraint(&mut rng, n)).collect());
        let pp = PenaltyParams::new(rng.random_range(0.5..4.0), rng.random_range(0.05..0.5));
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = penalty::penalized_grad(&obj, &poly, pp, &x);
            for k in 0..n {
                let h = 1e-6 * (1.0 + x[k].abs());
                let mut xp = x.clone();
                xp[k] += h;
                let mut xm = x.clone();
                xm[k] -= h;
                let fd = (penalty::penalized_value(&obj, &poly, pp, &xp)
                    - penalty::penalized_value(&obj, &poly, pp, &xm))
                    / (2.0 * h);
                let err = (g[k] - fd).abs() / (1.0 + g[k].abs());
                worst = worst.max(err);
                if err > 1e-6 {
                    return CheckOutcome::fail(
                        name,
                        format!("relative error {err} at coordinate {k}"),
                    );
                }
            }
        }
    }
    CheckOutcome::pass(name, format!("max relative error {worst:.2e}"))
}

fn check_gradient_lipschitz(seed: u64) -> CheckOutcome {
    let name = "gradient-lipschitz";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..10_000 {
        let n = rng.random_range(1..=3);
        let c = random_constraint(&mut rng, n);
        let delta: f64 = rng.random_range(1e-3..1.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        if x == y {
            continue;
        }
        let gx = penalty::h_delta_grad(&x, &c, delta);
        let gy = penalty::h_delta_grad(&y, &c, delta);
        let lhs = linalg::dist2(&gx, &gy);
        let bound = c.norm() / (2.0 * delta) * linalg::dist2(&x, &y);
        if lhs > bound * (1.0 + 1e-12) {
            return CheckOutcome::fail(name, format!("ratio {} exceeds the bound", lhs / bound));
        }
        if linalg::norm2(&gx) > 1.0 + 1e-15 {
            return CheckOutcome::fail(name, "gradient norm exceeded 1".into());
        }
    }
    CheckOutcome::pass(
        name,
        "10000 pairs within the Lipschitz bound, norms at most 1".into(),
    )
}

fn check_projection_oracle(seed: u64) -> CheckOutcome {
    let name = "projection-oracle";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(1..=3);
        let poly = Polyhedron::new((0..m).map(|_| random_constraint(&mut rng, 2)).collect());
        let y: Vec<f64> = (0..2).map(|_| rng.random_range(-3.0..3.0)).collect();
        let Some(oracle) = exact_projection_2d(&y, &poly) else {
            continue;
        };
        let dykstra = project_polyhedron(&y, &poly, 1e-12, 100_000);
        if !dykstra.converged {
            return CheckOutcome::fail(name, "Dykstra failed to converge".into());
        }
        let err = linalg::dist2(&oracle, &dykstra.point);
        worst = worst.max(err);
        if err > 1e-8 {
            return CheckOutcome::fail(name, format!("oracle disagreement {err}"));
        }
    }
    CheckOutcome::pass(name, format!("max disagreement {worst:.2e}"))
}

fn check_projection_properties(seed: u64) -> CheckOutcome {
    let name = "projection-properties";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..30 {
        let n = rng.random_range(2..=4);
        let m = rng.random_range(1..=5);
        let poly = Polyhedron::new((0..m).map(|_| random_constraint(&mut rng, n)).collect());
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let tol = 1e-12;
        let px = project_polyhedron(&x, &poly, tol, 100_000);
        let py = project_polyhedron(&y, &poly, tol, 100_000);
        if !px.converged || !py.converged {
            continue;
        }
        let ppx = project_polyhedron(&px.point, &poly, tol, 100_000);
        if linalg::dist2(&ppx.point, &px.point) > 10.0 * tol {
            return CheckOutcome::fail(name, "projection is not idempotent".into());
        }
        let lhs = linalg::dist2(&px.point, &py.point);
        let rhs = linalg::dist2(&x, &y) * (1.0 + 1e-9);
        if lhs > rhs {
            return CheckOutcome::fail(name, format!("expansion detected: {lhs} > {rhs}"));
        }
    }
    CheckOutcome::pass(
        name,
        "idempotent and nonexpansive on random instances".into(),
    )
}

fn check_level_set_nesting(seed: u64) -> CheckOutcome {
    let name = "level-set-nesting";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = 3;
    let obj = QuadraticObjective::new(crate::linalg::Mat::identity(n), vec![0.3, -0.2, 0.1]);
    let poly = Polyhedron::new((0..4).map(|_| random_constraint(&mut rng, n)).collect());
    for _ in 0..2_000 {
        let gamma = rng.random_range(0.1..5.0);
        let d1: f64 = rng.random_range(0.0..1.0);
        let d2: f64 = d1 + rng.random_range(0.0..1.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let f = obj.value(&x);
        let f_lo = penalty::penalized_value(&obj, &poly, PenaltyParams::new(gamma, d1), &x);
        let f_hi = penalty::penalized_value(&obj, &poly, PenaltyParams::new(gamma, d2), &x);
        if !(f_hi >= f_lo && f_lo >= f) {
            return CheckOutcome::fail(name, format!("nesting violated: {f_hi} >= {f_lo} >= {f}"));
        }
    }
    CheckOutcome::pass(
        name,
        "F nests by delta and dominates f on 2000 samples".into(),
    )
}

fn check_saga_direction_identity(seed: u64) -> CheckOutcome {
    let name = "saga-direction-identity";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = 3;
    let m = 10;
    let obj = QuadraticObjective::new(crate::linalg::Mat::identity(n), vec![0.5, -0.5, 1.0]);
    let poly = Polyhedron::new((0..m).map(|_| random_constraint(&mut rng, n)).collect());
    let pp = PenaltyParams::new(2.0, 0.2);
    let mut state = solvers::SagaState::new(&obj, &poly, pp, &vec![0.1; n]);
    state.x = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let avg = linalg::pairwise_sum_vectors(m, n, &mut |j, buf| {
        buf.copy_from_slice(&state.update_direction(&obj, &poly, pp, j));
    });
    let full = penalty::penalized_grad(&obj, &poly, pp, &state.x);
    for k in 0..n {
        let a = avg[k] / m as f64;
        if (a - full[k]).abs() > 1e-12 * (1.0 + full[k].abs()) {
            return CheckOutcome::fail(name, format!("direction average mismatch at {k}"));
        }
    }
    CheckOutcome::pass(
        name,
        "averaged update direction equals the full gradient".into(),
    )
}

fn check_schedule_conditions(_seed: u64) -> CheckOutcome {
    let name = "schedule-conditions";
    let s = match crate::params::make_schedule(0.25, 1.6) {
        Ok(s) => s,
        Err(e) => return CheckOutcome::fail(name, format!("valid schedule rejected: {e}")),
    };
    if crate::params::make_schedule(0.5, 1.9).is_ok() {
        return CheckOutcome::fail(name, "invalid exponents accepted".into());
    }
    let mut prev = f64::INFINITY;
    for k in 1..=1_000u64 {
        let prod = s.gamma(k) * s.delta(k);
        if prod > prev * (1.0 + 1e-12) {
            return CheckOutcome::fail(name, format!("gamma_k*delta_k increased at k = {k}"));
        }
        prev = prod;
    }
    CheckOutcome::pass(
        name,
        "exponent validation and product monotonicity hold".into(),
    )
}

fn check_determinism(seed: u64) -> CheckOutcome {
    let name = "determinism";
    let (obj, poly, _) = crate::experiments::generate_regression_instance(5, 5, 10, seed);
    let pp = PenaltyParams::new(10.0, 0.01);
    let run = |s| {
        solvers::solve_saga(&obj, &poly, pp, &[0.0; 5], 1e-4, 500, s, 50, None)
            .map(|r| r.trace.to_csv())
    };
    match (run(1), run(1)) {
        (Ok(a), Ok(b)) if a == b => {
            CheckOutcome::pass(name, "identical seeds give identical traces".into())
        }
        (Ok(_), Ok(_)) => CheckOutcome::fail(name, "traces differ between identical runs".into()),
        _ => CheckOutcome::fail(name, "solver failed during determinism check".into()),
    }
}

fn check_shrunk_projection(seed: u64) -> CheckOutcome {
    let name = "shrunk-projection";
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let n = rng.random_range(2..=3);
        // constraints with positive offsets keep the origin strictly inside
        let poly = Polyhedron::new(
            (0..4)
                .map(|_| {
                    let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0f64)).collect();
                    let a = if linalg::norm2(&a) < 0.1 {
                        vec![1.0; n]
                    } else {
                        a
                    };
                    let b = rng.random_range(0.5..2.0);
                    LinearConstraint::new(a, b)
                })
                .collect(),
        );
        let margin = crate::problem::slater_margin(&poly, &vec![0.0; n]);
        let delta = 0.5 * margin / poly.alpha_max().max(1.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let r = geometry::project_shrunk(&x, &poly, delta, 1e-12, 100_000);
        if !r.converged {
            return CheckOutcome::fail(name, "shrunk projection did not converge".into());
        }
        for c in poly.constraints() {
            let h = penalty::h_delta(&r.point, c, delta);
            if h > 1e-20 {
                return CheckOutcome::fail(name, format!("penalty not annihilated: {h}"));
            }
        }
    }
    CheckOutcome::pass(name, "projected points carry zero penalty".into())
}

/// Runs the whole battery; deterministic given the seed.
pub fn run_all(seed: u64) -> Vec<CheckOutcome> {
    vec![
        check_penalty_bounds(derive(seed, 1)),
        check_h0_distance(derive(seed, 2)),
        check_delta_monotonicity(derive(seed, 3)),
        check_gradient_fd(derive(seed, 4)),
        check_gradient_lipschitz(derive(seed, 5)),
        check_projection_oracle(derive(seed, 6)),
        check_projection_properties(derive(seed, 7)),
        check_level_set_nesting(derive(seed, 8)),
        check_saga_direction_identity(derive(seed, 9)),
        check_schedule_conditions(derive(seed, 10)),
        check_shrunk_projection(derive(seed, 11)),
        check_determinism(derive(seed, 12)),
    ]
}

fn derive(seed: u64, salt: u64) -> u64 {
    crate::experiments::derive_seed(seed, "validate", salt)
}
