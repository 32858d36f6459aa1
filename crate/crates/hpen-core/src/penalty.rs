//! The smooth one-sided Huber penalty: the scalar kernel p_δ, the
//! per-constraint penalty h_δ, the penalized objective F_γδ and their
//! gradients.
//!
//! The penalty is zero deep inside a halfspace, quadratic in a band of
//! width 2δ around its boundary and linear outside, so it is convex,
//! differentiable for δ > 0, and its gradient is Lipschitz with constant
//! ‖a‖/(2δ). δ = 0 is admitted for values (recovering the exact halfspace
//! distance, useful as a test oracle) but rejected for gradients.

use crate::linalg;
use crate::problem::{LinearConstraint, Objective, Polyhedron};
use serde::{Deserialize, Serialize};

/// The pair (γ, δ) with γ > 0 and δ ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    gamma: f64,
    delta: f64,
}

impl PenaltyParams {
    /// Panics unless γ > 0 and δ ≥ 0.
    pub fn new(gamma: f64, delta: f64) -> Self {
        assert!(gamma > 0.0, "gamma must be positive, got {gamma}");
        assert!(delta >= 0.0, "delta must be nonnegative, got {delta}");
        PenaltyParams { gamma, delta }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// Scalar smoothing kernel: s for s > δ, (s+δ)²/(4δ) on [−δ, δ], else 0.
/// For δ = 0 this is max(s, 0).
#[inline]
pub fn p_delta(s: f64, delta: f64) -> f64 {
    debug_assert!(delta >= 0.0);
    if delta == 0.0 {
        return s.max(0.0);
    }
    if s > delta {
        s
    } else if s >= -delta {
        let t = s + delta;
        t * t / (4.0 * delta)
    } else {
        0.0
    }
}

/// Derivative of the kernel: 1 for s > δ, (s+δ)/(2δ) on [−δ, δ], else 0.
/// Panics at δ = 0 where the kernel is nondifferentiable.
#[inline]
pub fn p_delta_prime(s: f64, delta: f64) -> f64 {
    assert!(
        delta > 0.0,
        "p_delta_prime requires delta > 0 (kernel is nonsmooth at delta = 0)"
    );
    if s > delta {
        1.0
    } else if s >= -delta {
        (s + delta) / (2.0 * delta)
    } else {
        0.0
    }
}

/// h_δ(x; a, b) = p_δ(⟨a,x⟩ − b) / ‖a‖.
pub fn h_delta(x: &[f64], c: &LinearConstraint, delta: f64) -> f64 {
    p_delta(c.violation(x), delta) / c.norm()
}

/// ∇h_δ(x; a, b) = (p′_δ(⟨a,x⟩ − b)/‖a‖) · a. Norm is at most 1.
pub fn h_delta_grad(x: &[f64], c: &LinearConstraint, delta: f64) -> Vec<f64> {
    let scale = p_delta_prime(c.violation(x), delta) / c.norm();
    c.a().iter().map(|&ai| scale * ai).collect()
}

/// Writes ∇h_δ into `out` (hot-loop variant of [`h_delta_grad`]).
pub fn h_delta_grad_into(x: &[f64], c: &LinearConstraint, delta: f64, out: &mut [f64]) {
    let scale = p_delta_prime(c.violation(x), delta) / c.norm();
    let a = c.a();
    for i in 0..a.len() {
        out[i] = scale * a[i];
    }
}

/// F_γδ(x) = f(x) + (γ/m) Σᵢ h_δ(x; aᵢ, bᵢ).
///
/// The constraint sum uses pairwise summation so the average-vs-full
/// gradient identity stays tight up to m ~ 10⁴.
pub fn penalized_value(
    obj: &dyn Objective,
    poly: &Polyhedron,
    pp: PenaltyParams,
    x: &[f64],
) -> f64 {
    assert_eq!(x.len(), poly.dim(), "penalized_value dimension mismatch");
    let terms: Vec<f64> = poly
        .constraints()
        .iter()
        .map(|c| h_delta(x, c, pp.delta))
        .collect();
    let m = poly.len() as f64;
    obj.value(x) + (pp.gamma / m) * linalg::pairwise_sum(&terms)
}

/// ∇F_γδ(x) = ∇f(x) + (γ/m) Σᵢ ∇h_δ(x; aᵢ, bᵢ). Requires δ > 0.
pub fn penalized_grad(
    obj: &dyn Objective,
    poly: &Polyhedron,
    pp: PenaltyParams,
    x: &[f64],
) -> Vec<f64> {
    assert_eq!(x.len(), poly.dim(), "penalized_grad dimension mismatch");
    let mut g = obj.gradient(x);
    let sum = linalg::pairwise_sum_vectors(poly.len(), poly.dim(), &mut |i, buf| {
        h_delta_grad_into(x, poly.constraint(i), pp.delta, buf);
    });
    let coef = pp.gamma / poly.len() as f64;
    for i in 0..g.len() {
        g[i] += coef * sum[i];
    }
    g
}

/// Gradient of the i-th SAGA component gᵢ(x) = f(x) + γ h_δ(x; aᵢ, bᵢ).
///
/// Averaging over all i recovers `penalized_grad` up to summation order.
pub fn component_grad(
    obj: &dyn Objective,
    poly: &Polyhedron,
    pp: PenaltyParams,
    i: usize,
    x: &[f64],
) -> Vec<f64> {
    assert!(
        i < poly.len(),
        "component index {i} out of range (m = {})",
        poly.len()
    );
    let mut g = obj.gradient(x);
    let c = poly.constraint(i);
    // associate exactly as penalized_grad does (gamma times the h-gradient
    // entry) so the m = 1 case telescopes to full gradient descent bitwise
    let scale = p_delta_prime(c.violation(x), pp.delta) / c.norm();
    let a = c.a();
    for k in 0..g.len() {
        g[k] += pp.gamma * (scale * a[k]);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::problem::QuadraticObjective;

    #[test]
    fn p_delta_branches() {
        assert_eq!(p_delta(2.0, 1.0), 2.0); // linear region
        assert_eq!(p_delta(-1.0, 1.0), 0.0); // zero-region boundary
        assert_eq!(p_delta(0.0, 1.0), 0.25); // (0+1)²/4
        assert_eq!(p_delta(1.0, 1.0), 1.0); // both branches agree at s = δ
    }

    #[test]
    fn p_delta_zero_delta_is_plus_part() {
        assert_eq!(p_delta(2.0, 0.0), 2.0);
        assert_eq!(p_delta(0.0, 0.0), 0.0);
        assert_eq!(p_delta(-3.0, 0.0), 0.0);
    }

    #[test]
    fn p_prime_values() {
        assert_eq!(p_delta_prime(0.0, 1.0), 0.5);
        assert_eq!(p_delta_prime(5.0, 1.0), 1.0);
        assert_eq!(p_delta_prime(0.25, 0.5), 0.75);
        assert_eq!(p_delta_prime(-2.0, 1.0), 0.0);
    }

    #[test]
    #[should_panic(expected = "delta > 0")]
    fn p_prime_rejects_zero_delta() {
        p_delta_prime(1.0, 0.0);
    }

    #[test]
    fn h_delta_scalar_constraint() {
        // constraint x − 1 ≤ 0 (a = 1, b = 1)
        let c = LinearConstraint::new(vec![1.0], 1.0);
        assert_eq!(h_delta(&[0.0], &c, 1.0), 0.0); // (−1+1)²/4 = 0
        assert_eq!(h_delta(&[2.0], &c, 1.0), 1.0); // linear branch reaches 1 at x = 2
        assert_eq!(h_delta(&[2.0], &c, 0.0), 1.0); // h₀ = dist to (−∞, 1]
    }

    #[test]
    fn h_delta_distance_at_zero_delta() {
        let c = LinearConstraint::new(vec![3.0, 4.0], 10.0);
        assert_eq!(h_delta(&[6.0, 8.0], &c, 0.0), 8.0); // (50 − 10)/5
    }

    #[test]
    fn h_grad_regions() {
        let c = LinearConstraint::new(vec![3.0, 4.0], 10.0);
        // deep inside: zero vector
        assert_eq!(h_delta_grad(&[-10.0, -10.0], &c, 1.0), vec![0.0, 0.0]);
        // far outside: a/‖a‖ with unit norm
        let g = h_delta_grad(&[6.0, 8.0], &c, 1.0);
        assert!((g[0] - 0.6).abs() < 1e-15);
        assert!((g[1] - 0.8).abs() < 1e-15);
        assert!((linalg::norm2(&g) - 1.0).abs() < 1e-15);
        // s = 0 on a unit-norm 1D constraint: p′ = 1/2
        let c1 = LinearConstraint::new(vec![1.0], 1.0);
        assert_eq!(h_delta_grad(&[1.0], &c1, 1.0), vec![0.5]);
    }

    fn one_d_problem() -> (QuadraticObjective, Polyhedron) {
        // f(x) = x², constraint x ≤ 0
        let obj = QuadraticObjective::new(Mat::identity(1), vec![0.0]);
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0], 0.0)]);
        (obj, poly)
    }

    #[test]
    fn penalized_value_one_d() {
        let (obj, poly) = one_d_problem();
        let pp = PenaltyParams::new(1.0, 1.0);
        // f(0) + 1·(0+1)²/4 = 0.25
        assert_eq!(penalized_value(&obj, &poly, pp, &[0.0]), 0.25);
    }

    #[test]
    fn penalized_value_interior_equals_f() {
        let (obj, poly) = one_d_problem();
        let pp = PenaltyParams::new(7.0, 0.5);
        // margin at x = −2 is 2 > δ: penalty vanishes
        assert_eq!(penalized_value(&obj, &poly, pp, &[-2.0]), 4.0);
    }

    #[test]
    fn penalized_grad_one_d() {
        let (obj, poly) = one_d_problem();
        let pp = PenaltyParams::new(1.0, 1.0);
        // 2·0 + p′(0)·1 = 0.5
        assert_eq!(penalized_grad(&obj, &poly, pp, &[0.0]), vec![0.5]);
    }

    #[test]
    fn penalized_grad_deep_interior_is_objective_grad() {
        let (obj, poly) = one_d_problem();
        let pp = PenaltyParams::new(5.0, 0.25);
        assert_eq!(penalized_grad(&obj, &poly, pp, &[-3.0]), vec![-6.0]);
    }

    #[test]
    fn penalized_grad_pure_penalty_far_outside() {
        // f ≡ 0 via Φ = 0·row? use x0 matching so gradient vanishes
        let obj = QuadraticObjective::new(Mat::new(1, 2, vec![0.0, 0.0]), vec![0.0]);
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![3.0, 4.0], 0.0)]);
        let pp = PenaltyParams::new(2.0, 0.1);
        let g = penalized_grad(&obj, &poly, pp, &[30.0, 40.0]);
        // (γ/m)·a/‖a‖ = 2·(0.6, 0.8)
        assert!((g[0] - 1.2).abs() < 1e-15);
        assert!((g[1] - 1.6).abs() < 1e-15);
    }

    #[test]
    fn component_grad_m1_equals_full() {
        let (obj, poly) = one_d_problem();
        let pp = PenaltyParams::new(3.0, 0.5);
        for x in [-1.5, -0.3, 0.0, 0.4, 2.0] {
            assert_eq!(
                component_grad(&obj, &poly, pp, 0, &[x]),
                penalized_grad(&obj, &poly, pp, &[x])
            );
        }
    }

    #[test]
    fn component_grad_inactive_is_objective_grad() {
        let obj = QuadraticObjective::new(Mat::identity(2), vec![0.5, 0.5]);
        let poly = Polyhedron::new(vec![
            LinearConstraint::new(vec![1.0, 0.0], 10.0),
            LinearConstraint::new(vec![0.0, 1.0], 10.0),
        ]);
        let pp = PenaltyParams::new(4.0, 0.01);
        let x = [0.0, 0.0];
        assert_eq!(component_grad(&obj, &poly, pp, 0, &x), obj.gradient(&x));
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn component_grad_rejects_bad_index() {
        let (obj, poly) = one_d_problem();
        component_grad(&obj, &poly, PenaltyParams::new(1.0, 1.0), 5, &[0.0]);
    }

    #[test]
    fn component_average_identity_at_ten_thousand_constraints() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(23);
        let m = 10_000;
        let n = 3;
        let obj = QuadraticObjective::new(Mat::identity(n), vec![0.2, -0.1, 0.4]);
        let cs: Vec<LinearConstraint> = (0..m)
            .map(|_| {
                let a: Vec<f64> = (0..n)
                    .map(|_| rng.random_range(-1.0..1.0f64) + 0.05)
                    .collect();
                LinearConstraint::new(a, rng.random_range(-0.5..0.5))
            })
            .collect();
        let poly = Polyhedron::new(cs);
        let pp = PenaltyParams::new(2.0, 0.1);
        let x = vec![0.3, -0.6, 0.1];
        let full = penalized_grad(&obj, &poly, pp, &x);
        let avg = linalg::pairwise_sum_vectors(m, n, &mut |i, buf| {
            buf.copy_from_slice(&component_grad(&obj, &poly, pp, i, &x));
        });
        for k in 0..n {
            let a = avg[k] / m as f64;
            assert!(
                ((a - full[k]) / full[k].abs().max(1e-30)).abs() <= 1e-12,
                "tree summation must keep the identity tight at m = 10^4"
            );
        }
    }

    #[test]
    fn component_average_matches_full_gradient() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let m = 40;
        let n = 6;
        let phi: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let obj = QuadraticObjective::new(
            Mat::new(n, n, phi),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        );
        let cs: Vec<LinearConstraint> = (0..m)
            .map(|_| {
                let a: Vec<f64> = (0..n)
                    .map(|_| rng.random_range(-1.0..1.0f64) + 0.1)
                    .collect();
                LinearConstraint::new(a, rng.random_range(-1.0..1.0))
            })
            .collect();
        let poly = Polyhedron::new(cs);
        let pp = PenaltyParams::new(3.0, 0.2);
        for _ in 0..5 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let full = penalized_grad(&obj, &poly, pp, &x);
            let avg = linalg::pairwise_sum_vectors(m, n, &mut |i, buf| {
                let g = component_grad(&obj, &poly, pp, i, &x);
                buf.copy_from_slice(&g);
            });
            for k in 0..n {
                let avg_k = avg[k] / m as f64;
                let denom = full[k].abs().max(1e-30);
                assert!(
                    ((avg_k - full[k]) / denom).abs() <= 1e-12,
                    "component average mismatch at {k}: {avg_k} vs {}",
                    full[k]
                );
            }
        }
    }
}
