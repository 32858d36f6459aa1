//! The constrained problem: a quadratic regression objective over an
//! intersection of halfspaces, plus the analytic quantities (curvature
//! bounds, Slater margins) every other module needs.
//!
//! All types are immutable after construction and safe to share across
//! threads; operations are pure. Dimension mismatches are programming
//! errors and panic.

use crate::linalg::{self, Mat};
use serde::{Deserialize, Serialize};

/// A single halfspace ⟨a, x⟩ − b ≤ 0 with a ≠ 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    a: Vec<f64>,
    b: f64,
    norm: f64,
}

impl LinearConstraint {
    /// Panics if `a` is the zero vector.
    pub fn new(a: Vec<f64>, b: f64) -> Self {
        let norm = linalg::norm2(&a);
        assert!(norm > 0.0, "constraint normal must be nonzero");
        LinearConstraint { a, b, norm }
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Cached ‖a‖.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    /// Signed slack s = ⟨a, x⟩ − b (positive means violated).
    #[inline]
    pub fn violation(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.a.len(), "constraint dimension mismatch");
        linalg::dot(&self.a, x) - self.b
    }
}

/// X = ∩ᵢ {x | ⟨aᵢ, x⟩ ≤ bᵢ}, m ≥ 1 with a common dimension n.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    constraints: Vec<LinearConstraint>,
    n: usize,
}

impl Polyhedron {
    pub fn new(constraints: Vec<LinearConstraint>) -> Self {
        assert!(
            !constraints.is_empty(),
            "polyhedron needs at least one constraint"
        );
        let n = constraints[0].dim();
        for c in &constraints {
            assert_eq!(c.dim(), n, "mixed constraint dimensions");
        }
        Polyhedron { constraints, n }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of constraints m.
    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    /// Always false: construction requires at least one constraint.
    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn constraint(&self, i: usize) -> &LinearConstraint {
        &self.constraints[i]
    }

    /// min over constraints of ‖aᵢ‖.
    pub fn alpha_min(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// max over constraints of ‖aᵢ‖.
    pub fn alpha_max(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// The polyhedron with every bᵢ tightened by `delta`.
    pub fn shrunk(&self, delta: f64) -> Polyhedron {
        let constraints = self
            .constraints
            .iter()
            .map(|c| LinearConstraint::new(c.a().to_vec(), c.b() - delta))
            .collect();
        Polyhedron::new(constraints)
    }
}

/// f(x) = ‖Φx − x⁰‖² with Φ of shape l×n.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    phi: Mat,
    x0: Vec<f64>,
}

/// Minimal oracle contract the solvers need: value, gradient and, when
/// available, curvature bounds and a gradient-norm bound over a ball.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    /// (mu_f, L_f) when known analytically.
    fn curvature(&self) -> Option<(f64, f64)> {
        None
    }
    /// Closed-form bound on ‖∇f‖ over the centered ball of given radius.
    fn grad_norm_bound(&self, _radius: f64) -> Option<f64> {
        None
    }
}

impl QuadraticObjective {
    pub fn new(phi: Mat, x0: Vec<f64>) -> Self {
        assert_eq!(phi.rows(), x0.len(), "x0 length must match rows of phi");
        assert!(phi.rows() > 0 && phi.cols() > 0, "phi must be nonempty");
        QuadraticObjective { phi, x0 }
    }

    pub fn phi(&self) -> &Mat {
        &self.phi
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn n(&self) -> usize {
        self.phi.cols()
    }

    pub fn l(&self) -> usize {
        self.phi.rows()
    }

    /// (mu_f, L_f) = (2 λ_min(ΦᵀΦ), 2 λ_max(ΦᵀΦ)) via cyclic Jacobi.
    pub fn curvature_bounds(&self) -> (f64, f64) {
        let gram = self.phi.gram();
        let ev = linalg::sym_eigenvalues(&gram, 1e-12);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in ev {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        // Gram eigenvalues are nonnegative; Jacobi roundoff may dip below zero.
        ((2.0 * lo).max(0.0), (2.0 * hi).max(0.0))
    }

    /// Spectral norm ‖Φ‖ = sqrt(λ_max(ΦᵀΦ)).
    pub fn spectral_norm(&self) -> f64 {
        let (_, l_f) = self.curvature_bounds();
        (l_f / 2.0).sqrt()
    }

    /// Unconstrained minimizer (solves ΦᵀΦ x = Φᵀ x⁰); None when ΦᵀΦ is singular.
    pub fn unconstrained_minimizer(&self) -> Option<Vec<f64>> {
        let gram = self.phi.gram();
        let rhs = self.phi.mul_vec_transposed(&self.x0);
        linalg::cholesky_solve(&gram, &rhs)
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.n()
    }

    fn value(&self, x: &[f64]) -> f64 {
        objective_value(self, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        objective_gradient(self, x)
    }

    fn curvature(&self) -> Option<(f64, f64)> {
        Some(self.curvature_bounds())
    }

    fn grad_norm_bound(&self, radius: f64) -> Option<f64> {
        // ‖∇f(x)‖ = ‖2Φᵀ(Φx − x⁰)‖ ≤ 2‖Φ‖(‖Φ‖R + ‖x⁰‖) on ‖x‖ ≤ R.
        let phi_norm = self.spectral_norm();
        Some(2.0 * phi_norm * (phi_norm * radius + linalg::norm2(&self.x0)))
    }
}

/// ‖Φx − x⁰‖²
pub fn objective_value(obj: &QuadraticObjective, x: &[f64]) -> f64 {
    assert_eq!(x.len(), obj.n(), "objective dimension mismatch");
    let r = obj.phi.mul_vec(x);
    let mut s = 0.0;
    for i in 0..r.len() {
        let d = r[i] - obj.x0[i];
        s += d * d;
    }
    s
}

/// ∇f(x) = 2Φᵀ(Φx − x⁰)
pub fn objective_gradient(obj: &QuadraticObjective, x: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), obj.n(), "objective dimension mismatch");
    let mut r = obj.phi.mul_vec(x);
    for i in 0..r.len() {
        r[i] -= obj.x0[i];
    }
    let mut g = obj.phi.mul_vec_transposed(&r);
    for v in &mut g {
        *v *= 2.0;
    }
    g
}

/// ε̂ = −max_j (⟨a_j, x⟩ − b_j); positive iff x lies strictly inside.
pub fn slater_margin(poly: &Polyhedron, x: &[f64]) -> f64 {
    assert_eq!(x.len(), poly.dim(), "slater_margin dimension mismatch");
    let worst = poly
        .constraints()
        .iter()
        .map(|c| c.violation(x))
        .fold(f64::NEG_INFINITY, f64::max);
    -worst
}

/// A strictly interior point x̄ with uniform slack ε > 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlaterCertificate {
    pub point: Vec<f64>,
    pub margin: f64,
}

impl SlaterCertificate {
    /// Validates ⟨a_j, x̄⟩ − b_j ≤ −ε for every constraint.
    pub fn verified(poly: &Polyhedron, point: Vec<f64>, margin: f64) -> Option<Self> {
        if margin <= 0.0 || slater_margin(poly, &point) < margin {
            return None;
        }
        Some(SlaterCertificate { point, margin })
    }
}

/// On-disk form of a problem instance (objective + constraints).
///
/// Serialized as `{"n", "l", "phi" (row-major), "x0", "constraints":[{"a","b"}]}`.
/// Doubles round-trip bit-exactly through the JSON encoding.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemInstance {
    pub n: usize,
    pub l: usize,
    pub phi: Vec<f64>,
    pub x0: Vec<f64>,
    pub constraints: Vec<ConstraintRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintRecord {
    pub a: Vec<f64>,
    pub b: f64,
}

impl ProblemInstance {
    pub fn from_parts(obj: &QuadraticObjective, poly: &Polyhedron) -> Self {
        assert_eq!(obj.n(), poly.dim());
        ProblemInstance {
            n: obj.n(),
            l: obj.l(),
            phi: obj.phi().data().to_vec(),
            x0: obj.x0().to_vec(),
            constraints: poly
                .constraints()
                .iter()
                .map(|c| ConstraintRecord {
                    a: c.a().to_vec(),
                    b: c.b(),
                })
                .collect(),
        }
    }

    /// Rebuilds the typed objective/polyhedron, revalidating invariants.
    pub fn into_parts(&self) -> Result<(QuadraticObjective, Polyhedron), String> {
        if self.phi.len() != self.l * self.n {
            return Err(format!(
                "phi has {} entries, expected l*n = {}",
                self.phi.len(),
                self.l * self.n
            ));
        }
        if self.x0.len() != self.l {
            return Err(format!(
                "x0 has {} entries, expected l = {}",
                self.x0.len(),
                self.l
            ));
        }
        if self.constraints.is_empty() {
            return Err("instance has no constraints".to_string());
        }
        let mut cs = Vec::with_capacity(self.constraints.len());
        for (i, c) in self.constraints.iter().enumerate() {
            if c.a.len() != self.n {
                return Err(format!(
                    "constraint {i} has dimension {}, expected {}",
                    c.a.len(),
                    self.n
                ));
            }
            if linalg::norm2(&c.a) == 0.0 {
                return Err(format!("constraint {i} has a zero normal"));
            }
            cs.push(LinearConstraint::new(c.a.clone(), c.b));
        }
        let obj =
            QuadraticObjective::new(Mat::new(self.l, self.n, self.phi.clone()), self.x0.clone());
        Ok((obj, Polyhedron::new(cs)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ident_obj(n: usize) -> QuadraticObjective {
        QuadraticObjective::new(Mat::identity(n), vec![0.0; n])
    }

    #[test]
    fn rectangular_system_supported() {
        // l = 3 observations over n = 2 unknowns
        let obj = QuadraticObjective::new(
            Mat::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
            vec![1.0, 2.0, 3.0],
        );
        assert_eq!(obj.l(), 3);
        assert_eq!(obj.n(), 2);
        assert_eq!(objective_value(&obj, &[1.0, 2.0]), 0.0);
        let g = objective_gradient(&obj, &[0.0, 0.0]);
        // 2*Phi^T(-x0) = -2*(1+3, 2+3)
        assert_eq!(g, vec![-8.0, -10.0]);
        let (mu, l_f) = obj.curvature_bounds();
        assert!(mu > 0.0 && l_f >= mu);
        let x_u = obj.unconstrained_minimizer().unwrap();
        assert!((x_u[0] - 1.0).abs() < 1e-12 && (x_u[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn value_identity_map() {
        let obj = ident_obj(2);
        assert_eq!(objective_value(&obj, &[3.0, 4.0]), 25.0);
    }

    #[test]
    fn value_zero_residual() {
        let obj = QuadraticObjective::new(Mat::identity(2), vec![3.0, 4.0]);
        assert_eq!(objective_value(&obj, &[3.0, 4.0]), 0.0);
    }

    #[test]
    fn value_diagonal_phi() {
        let obj = QuadraticObjective::new(Mat::new(2, 2, vec![1.0, 0.0, 0.0, 2.0]), vec![1.0, 1.0]);
        assert_eq!(objective_value(&obj, &[1.0, 1.0]), 1.0);
    }

    #[test]
    fn gradient_identity_map() {
        let obj = ident_obj(2);
        assert_eq!(objective_gradient(&obj, &[3.0, 4.0]), vec![6.0, 8.0]);
    }

    #[test]
    fn gradient_zero_at_residual_zero() {
        let obj = QuadraticObjective::new(Mat::identity(2), vec![1.0, -2.0]);
        assert_eq!(objective_gradient(&obj, &[1.0, -2.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_diagonal_phi() {
        let obj = QuadraticObjective::new(Mat::new(2, 2, vec![1.0, 0.0, 0.0, 2.0]), vec![1.0, 1.0]);
        assert_eq!(objective_gradient(&obj, &[1.0, 1.0]), vec![0.0, 4.0]);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn value_rejects_bad_dimension() {
        objective_value(&ident_obj(2), &[1.0]);
    }

    #[test]
    fn curvature_identity() {
        assert_eq!(ident_obj(3).curvature_bounds(), (2.0, 2.0));
    }

    #[test]
    fn curvature_diagonal() {
        let obj = QuadraticObjective::new(Mat::new(2, 2, vec![2.0, 0.0, 0.0, 1.0]), vec![0.0, 0.0]);
        let (mu, l) = obj.curvature_bounds();
        assert!((mu - 2.0).abs() < 1e-10);
        assert!((l - 8.0).abs() < 1e-10);
    }

    #[test]
    fn curvature_zero_column() {
        let obj = QuadraticObjective::new(Mat::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]), vec![0.0, 0.0]);
        let (mu, _) = obj.curvature_bounds();
        assert_eq!(mu, 0.0);
    }

    #[test]
    fn slater_margin_examples() {
        // 1D constraint x ≤ 1, x = 0 → 1
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0], 1.0)]);
        assert_eq!(slater_margin(&poly, &[0.0]), 1.0);
        // boundary point → 0
        assert_eq!(slater_margin(&poly, &[1.0]), 0.0);
        // {x1 ≤ 1, x2 ≤ 2}, x = 0 → 1
        let poly2 = Polyhedron::new(vec![
            LinearConstraint::new(vec![1.0, 0.0], 1.0),
            LinearConstraint::new(vec![0.0, 1.0], 2.0),
        ]);
        assert_eq!(slater_margin(&poly2, &[0.0, 0.0]), 1.0);
    }

    #[test]
    fn slater_certificate_checks_margin() {
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0], 1.0)]);
        assert!(SlaterCertificate::verified(&poly, vec![0.0], 1.0).is_some());
        assert!(SlaterCertificate::verified(&poly, vec![0.5], 1.0).is_none());
    }

    #[test]
    #[should_panic(expected = "nonzero")]
    fn constraint_rejects_zero_normal() {
        LinearConstraint::new(vec![0.0, 0.0], 1.0);
    }

    #[test]
    fn alpha_bounds() {
        let poly = Polyhedron::new(vec![
            LinearConstraint::new(vec![3.0, 4.0], 1.0),
            LinearConstraint::new(vec![1.0, 0.0], 1.0),
        ]);
        assert_eq!(poly.alpha_min(), 1.0);
        assert_eq!(poly.alpha_max(), 5.0);
    }

    #[test]
    fn unconstrained_minimizer_solves_normal_equations() {
        let obj = QuadraticObjective::new(Mat::new(2, 2, vec![2.0, 0.0, 0.0, 4.0]), vec![2.0, 8.0]);
        let xu = obj.unconstrained_minimizer().unwrap();
        assert!((xu[0] - 1.0).abs() < 1e-12);
        assert!((xu[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn instance_round_trip_preserves_bits() {
        let obj = QuadraticObjective::new(
            Mat::new(2, 2, vec![0.1 + 0.2, -1.0 / 3.0, 1e-300, 17.25]),
            vec![f64::MIN_POSITIVE, -0.0],
        );
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![0.3, 0.7], 1.0 / 7.0)]);
        let inst = ProblemInstance::from_parts(&obj, &poly);
        let json = inst.to_json();
        let back = ProblemInstance::from_json(&json).unwrap();
        assert_eq!(
            inst.phi.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            back.phi.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(
            inst.x0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            back.x0.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(
            inst.constraints[0].b.to_bits(),
            back.constraints[0].b.to_bits()
        );
    }
}
