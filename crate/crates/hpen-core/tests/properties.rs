#![allow(clippy::needless_range_loop)]

//! Property-based invariants over randomly generated inputs.

use hpen_core::linalg::{self, Mat};
use hpen_core::penalty::{self, PenaltyParams};
use hpen_core::problem::{
    objective_gradient, objective_value, LinearConstraint, Polyhedron, ProblemInstance,
    QuadraticObjective,
};
use hpen_core::{project_halfspace, project_polyhedron};
use proptest::prelude::*;

fn finite_range() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6..1e6f64,
        -1.0..1.0f64,
        Just(0.0),
        Just(-0.0),
        Just(1.0 / 3.0),
        Just(f64::MIN_POSITIVE),
    ]
}

fn constraint_strategy(n: usize) -> impl Strategy<Value = LinearConstraint> {
    (proptest::collection::vec(-3.0..3.0f64, n), -2.0..2.0f64)
        .prop_filter_map("nonzero normal", |(a, b)| {
            (linalg::norm2(&a) > 1e-3).then(|| LinearConstraint::new(a, b))
        })
}

proptest! {
    #[test]
    fn instance_json_round_trip_is_bit_exact(
        phi in proptest::collection::vec(finite_range(), 4),
        x0 in proptest::collection::vec(finite_range(), 2),
        a in proptest::collection::vec(-5.0..5.0f64, 2),
        b in finite_range(),
    ) {
        prop_assume!(linalg::norm2(&a) > 1e-6);
        let inst = ProblemInstance {
            n: 2,
            l: 2,
            phi: phi.clone(),
            x0: x0.clone(),
            constraints: vec![hpen_core::problem::ConstraintRecord { a, b }],
        };
        let back = ProblemInstance::from_json(&inst.to_json()).unwrap();
        for (orig, round) in phi.iter().zip(&back.phi) {
            prop_assert_eq!(orig.to_bits(), round.to_bits());
        }
        for (orig, round) in x0.iter().zip(&back.x0) {
            prop_assert_eq!(orig.to_bits(), round.to_bits());
        }
        prop_assert_eq!(b.to_bits(), back.constraints[0].b.to_bits());
    }

    #[test]
    fn penalty_bounds_hold(
        c in constraint_strategy(3),
        delta in 1e-6..2.0f64,
        x in proptest::collection::vec(-4.0..4.0f64, 3),
    ) {
        let h = penalty::h_delta(&x, &c, delta);
        let cap = delta / (4.0 * c.norm());
        prop_assert!(h >= 0.0);
        if c.violation(&x) <= 0.0 {
            prop_assert!(h <= cap);
        } else {
            prop_assert!(h > cap);
        }
    }

    #[test]
    fn penalty_monotone_and_convex(
        c in constraint_strategy(2),
        d1 in 1e-5..1.0f64,
        extra in 0.0..1.0f64,
        x in proptest::collection::vec(-3.0..3.0f64, 2),
        y in proptest::collection::vec(-3.0..3.0f64, 2),
    ) {
        let d2 = d1 + extra;
        prop_assert!(penalty::h_delta(&x, &c, d1) <= penalty::h_delta(&x, &c, d2));
        // midpoint convexity
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let lhs = penalty::h_delta(&mid, &c, d1);
        let rhs = 0.5 * (penalty::h_delta(&x, &c, d1) + penalty::h_delta(&y, &c, d1));
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn h_zero_is_halfspace_distance(
        c in constraint_strategy(3),
        x in proptest::collection::vec(-5.0..5.0f64, 3),
    ) {
        let h0 = penalty::h_delta(&x, &c, 0.0);
        let dist = project_halfspace(&x, &c).distance;
        prop_assert!((h0 - dist).abs() <= 1e-14 * (1.0 + dist));
    }

    #[test]
    fn gradient_norm_capped_at_one(
        c in constraint_strategy(3),
        delta in 1e-4..1.0f64,
        x in proptest::collection::vec(-4.0..4.0f64, 3),
    ) {
        let g = penalty::h_delta_grad(&x, &c, delta);
        prop_assert!(linalg::norm2(&g) <= 1.0 + 1e-15);
    }

    #[test]
    fn projection_idempotent_and_nonexpansive(
        cs in proptest::collection::vec(constraint_strategy(2), 1..4),
        x in proptest::collection::vec(-3.0..3.0f64, 2),
        y in proptest::collection::vec(-3.0..3.0f64, 2),
    ) {
        // near-parallel normals make sliver wedges where a tolerance-level
        // residual amplifies unboundedly under re-projection; idempotence
        // is a statement about non-degenerate geometry
        for i in 0..cs.len() {
            for j in (i + 1)..cs.len() {
                let cosine = linalg::dot(cs[i].a(), cs[j].a()) / (cs[i].norm() * cs[j].norm());
                prop_assume!(cosine.abs() < 0.98);
            }
        }
        let poly = Polyhedron::new(cs);
        let tol = 1e-12;
        let px = project_polyhedron(&x, &poly, tol, 50_000);
        let py = project_polyhedron(&y, &poly, tol, 50_000);
        prop_assume!(px.converged && py.converged);
        let ppx = project_polyhedron(&px.point, &poly, tol, 50_000);
        prop_assert!(linalg::dist2(&ppx.point, &px.point) <= 10.0 * tol);
        prop_assert!(
            linalg::dist2(&px.point, &py.point) <= linalg::dist2(&x, &y) * (1.0 + 1e-9)
        );
    }

    #[test]
    fn level_sets_nest_by_delta(
        gamma in 0.1..5.0f64,
        d1 in 0.0..1.0f64,
        extra in 0.0..1.0f64,
        x in proptest::collection::vec(-2.0..2.0f64, 2),
        cs in proptest::collection::vec(constraint_strategy(2), 1..4),
    ) {
        let obj = QuadraticObjective::new(Mat::identity(2), vec![0.25, -0.5]);
        let poly = Polyhedron::new(cs);
        let f = objective_value(&obj, &x);
        let lo = penalty::penalized_value(&obj, &poly, PenaltyParams::new(gamma, d1), &x);
        let hi = penalty::penalized_value(&obj, &poly, PenaltyParams::new(gamma, d1 + extra), &x);
        prop_assert!(hi >= lo && lo >= f);
    }

    #[test]
    fn quadratic_is_strongly_convex_between_points(
        x in proptest::collection::vec(-3.0..3.0f64, 3),
        y in proptest::collection::vec(-3.0..3.0f64, 3),
        diag in proptest::collection::vec(0.5..2.0f64, 3),
    ) {
        let mut phi = Mat::zeros(3, 3);
        for i in 0..3 {
            phi.set(i, i, diag[i]);
        }
        let obj = QuadraticObjective::new(phi, vec![0.1, -0.2, 0.3]);
        let (mu, l_f) = obj.curvature_bounds();
        let fx = objective_value(&obj, &x);
        let fy = objective_value(&obj, &y);
        let gx = objective_gradient(&obj, &x);
        let gy = objective_gradient(&obj, &y);
        let diff = linalg::sub(&y, &x);
        // strong convexity: f(y) >= f(x) + <g, y-x> + mu/2 |y-x|^2
        let lower = fx + linalg::dot(&gx, &diff) + 0.5 * mu * linalg::dot(&diff, &diff);
        prop_assert!(fy >= lower - 1e-9 * (1.0 + fy.abs()));
        // gradient Lipschitz bound
        let lhs = linalg::dist2(&gx, &gy);
        prop_assert!(lhs <= l_f * linalg::dist2(&x, &y) * (1.0 + 1e-10));
    }
}
