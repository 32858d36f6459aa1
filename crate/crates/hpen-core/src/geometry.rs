//! Euclidean projections onto halfspaces and their intersections, plus
//! feasibility metrics.
//!
//! The polyhedron projection runs Dykstra's alternating scheme (plain cyclic
//! projection converges to a point of X but not the nearest one). A working
//! set keeps it fast for large m: Dykstra runs on the constraints that could
//! be active, and the candidate is verified against every constraint before
//! being accepted — if X ⊆ X_W and the projection onto X_W lands in X, it is
//! the projection onto X.

use crate::linalg;
use crate::problem::{LinearConstraint, Polyhedron};

/// Result of a projection: the point, its distance from the input, and how
/// hard Dykstra had to work for it.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    pub distance: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Exact closed-form projection onto {x | ⟨a,x⟩ ≤ b}:
/// Π\[x\] = x − (max{⟨a,x⟩ − b, 0}/‖a‖²) a.
pub fn project_halfspace(x: &[f64], c: &LinearConstraint) -> ProjectionResult {
    assert_eq!(x.len(), c.dim(), "project_halfspace dimension mismatch");
    let viol = c.violation(x);
    if viol <= 0.0 {
        return ProjectionResult {
            point: x.to_vec(),
            distance: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let scale = viol / (c.norm() * c.norm());
    let mut p = x.to_vec();
    linalg::axpy(&mut p, -scale, c.a());
    ProjectionResult {
        point: p,
        distance: viol / c.norm(),
        iterations: 1,
        converged: true,
    }
}

/// max_i max{⟨aᵢ,x⟩ − bᵢ, 0}; zero iff x ∈ X.
pub fn feasibility_residual(x: &[f64], poly: &Polyhedron) -> f64 {
    assert_eq!(
        x.len(),
        poly.dim(),
        "feasibility_residual dimension mismatch"
    );
    poly.constraints()
        .iter()
        .map(|c| c.violation(x).max(0.0))
        .fold(0.0, f64::max)
}

/// Dykstra's algorithm over the listed constraints. Returns the iterate and
/// cycle count; `converged` requires both the cyclic displacement to fall
/// below `tol` and the worst in-set violation to fall below 5·tol within
/// `max_iter` cycles (the displacement alone can undershoot the remaining
/// infeasibility by orders of magnitude).
fn dykstra(
    x: &[f64],
    constraints: &[&LinearConstraint],
    tol: f64,
    max_iter: usize,
) -> (Vec<f64>, usize, bool) {
    let n = x.len();
    let m = constraints.len();
    let mut z = x.to_vec();
    let mut corrections = vec![vec![0.0; n]; m];
    let mut prev = vec![0.0; n];
    for cycle in 1..=max_iter {
        prev.copy_from_slice(&z);
        for (i, c) in constraints.iter().enumerate() {
            // add back this set's correction, project, store the new correction
            let corr = &mut corrections[i];
            for k in 0..n {
                z[k] += corr[k];
            }
            let viol = c.violation(&z);
            if viol > 0.0 {
                let scale = viol / (c.norm() * c.norm());
                for k in 0..n {
                    let projected = z[k] - scale * c.a()[k];
                    corr[k] = z[k] - projected;
                    z[k] = projected;
                }
            } else {
                for v in corr.iter_mut() {
                    *v = 0.0;
                }
            }
        }
        if linalg::dist2(&z, &prev) <= tol {
            let residual = constraints
                .iter()
                .map(|c| c.violation(&z).max(0.0))
                .fold(0.0, f64::max);
            if residual <= 5.0 * tol {
                return (z, cycle, true);
            }
        }
    }
    (z, max_iter, false)
}

/// Projection onto the whole polyhedron.
///
/// The caller is responsible for feasibility of the intersection; on an
/// infeasible instance the working-set Dykstra fails to settle and the
/// result is flagged `converged = false` rather than raising an error.
/// On success the max violation of the result is at most 10·tol.
pub fn project_polyhedron(
    x: &[f64],
    poly: &Polyhedron,
    tol: f64,
    max_iter: usize,
) -> ProjectionResult {
    assert_eq!(x.len(), poly.dim(), "project_polyhedron dimension mismatch");
    assert!(tol > 0.0, "tol must be positive");
    let all = poly.constraints();

    // working set: start from the constraints violated at x
    let mut in_set = vec![false; all.len()];
    let mut working: Vec<usize> = Vec::new();
    for (i, c) in all.iter().enumerate() {
        if c.violation(x) > 0.0 {
            in_set[i] = true;
            working.push(i);
        }
    }
    if working.is_empty() {
        return ProjectionResult {
            point: x.to_vec(),
            distance: 0.0,
            iterations: 0,
            converged: true,
        };
    }

    let mut total_cycles = 0usize;
    let (mut point, mut converged);
    loop {
        let refs: Vec<&LinearConstraint> = working.iter().map(|&i| &all[i]).collect();
        let budget = max_iter.saturating_sub(total_cycles).max(1);
        let (z, cycles, ok) = dykstra(x, &refs, tol, budget);
        total_cycles += cycles;
        point = z;
        converged = ok;
        // verify against every constraint; grow the working set if needed
        let mut grew = false;
        for (i, c) in all.iter().enumerate() {
            if !in_set[i] && c.violation(&point) > 5.0 * tol {
                in_set[i] = true;
                working.push(i);
                grew = true;
            }
        }
        if !grew || total_cycles >= max_iter {
            if grew {
                converged = false;
            }
            break;
        }
    }
    if converged && feasibility_residual(&point, poly) > 10.0 * tol {
        converged = false;
    }
    ProjectionResult {
        distance: linalg::dist2(x, &point),
        point,
        iterations: total_cycles,
        converged,
    }
}

/// Projection onto the shrunk set X_δ (every bᵢ replaced by bᵢ − δ).
///
/// When δ is at most the Slater margin, the result x_in carries zero
/// penalty: h_δ(x_in; aⱼ, bⱼ) = 0 for every j. If the shrunk set is
/// infeasible (δ beyond the margin), Dykstra fails to settle and the
/// result is flagged `converged = false`.
pub fn project_shrunk(
    x: &[f64],
    poly: &Polyhedron,
    delta: f64,
    tol: f64,
    max_iter: usize,
) -> ProjectionResult {
    assert!(delta >= 0.0, "delta must be nonnegative");
    let shrunk = poly.shrunk(delta);
    project_polyhedron(x, &shrunk, tol, max_iter)
}

/// Default Dykstra tolerance for desk-scale polyhedra.
pub const DEFAULT_PROJECTION_TOL: f64 = 1e-10;
/// Default Dykstra cycle budget.
pub const DEFAULT_PROJECTION_MAX_ITER: usize = 100_000;

#[cfg(test)]
mod tests {
    use super::*;

    fn quadrant() -> Polyhedron {
        // {−x₁ ≤ 0, −x₂ ≤ 0} = nonnegative quadrant
        Polyhedron::new(vec![
            LinearConstraint::new(vec![-1.0, 0.0], 0.0),
            LinearConstraint::new(vec![0.0, -1.0], 0.0),
        ])
    }

    #[test]
    fn halfspace_feasible_point_unchanged() {
        let c = LinearConstraint::new(vec![1.0, 1.0], 5.0);
        let r = project_halfspace(&[1.0, 1.0], &c);
        assert_eq!(r.point, vec![1.0, 1.0]);
        assert_eq!(r.distance, 0.0);
    }

    #[test]
    fn halfspace_closed_form() {
        let c = LinearConstraint::new(vec![3.0, 4.0], 10.0);
        let r = project_halfspace(&[6.0, 8.0], &c);
        assert!((r.point[0] - 1.2).abs() < 1e-12);
        assert!((r.point[1] - 1.6).abs() < 1e-12);
        assert!((r.distance - 8.0).abs() < 1e-12);
        assert!(c.violation(&r.point) <= 1e-12 * (1.0 + c.b().abs()));
    }

    #[test]
    fn halfspace_axis_aligned() {
        let c = LinearConstraint::new(vec![0.0, 1.0], 0.0);
        let r = project_halfspace(&[5.0, 3.0], &c);
        assert_eq!(r.point, vec![5.0, 0.0]);
        assert_eq!(r.distance, 3.0);
    }

    #[test]
    fn polyhedron_feasible_point_unchanged() {
        let r = project_polyhedron(&[2.0, 3.0], &quadrant(), 1e-12, 1000);
        assert_eq!(r.point, vec![2.0, 3.0]);
        assert_eq!(r.distance, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn polyhedron_quadrant_corner() {
        let r = project_polyhedron(&[-1.0, -1.0], &quadrant(), 1e-12, 10_000);
        assert!(r.converged);
        assert!(r.point[0].abs() < 1e-10);
        assert!(r.point[1].abs() < 1e-10);
        assert!((r.distance - 2.0f64.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn polyhedron_single_constraint_matches_halfspace() {
        let c = LinearConstraint::new(vec![2.0, -1.0], 1.0);
        let poly = Polyhedron::new(vec![c.clone()]);
        let x = [4.0, 1.0];
        let direct = project_halfspace(&x, &c);
        let via_poly = project_polyhedron(&x, &poly, 1e-12, 1000);
        assert_eq!(direct.point, via_poly.point);
        assert!((direct.distance - via_poly.distance).abs() < 1e-15);
    }

    #[test]
    fn shrunk_one_dimensional() {
        // x ≤ 1 shrunk by 0.5 → (−∞, 0.5]; projecting 3 gives 0.5
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0], 1.0)]);
        let r = project_shrunk(&[3.0], &poly, 0.5, 1e-12, 1000);
        assert!(r.converged);
        assert!((r.point[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn shrunk_interior_point_unchanged() {
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0], 1.0)]);
        let r = project_shrunk(&[0.0], &poly, 0.5, 1e-12, 1000);
        assert_eq!(r.point, vec![0.0]);
    }

    #[test]
    fn shrunk_quadrant_box_projection() {
        // quadrant shrunk by 1: x₁ ≥ 1, x₂ ≥ 1; projection of (−5, 0) is (1, 1)
        let r = project_shrunk(&[-5.0, 0.0], &quadrant(), 1.0, 1e-12, 10_000);
        assert!(r.converged);
        assert!((r.point[0] - 1.0).abs() < 1e-10);
        assert!((r.point[1] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn shrunk_infeasible_reports_nonconvergence() {
        // x ≤ 0 and −x ≤ 0 forces x = 0; shrinking by 0.5 empties the set
        let poly = Polyhedron::new(vec![
            LinearConstraint::new(vec![1.0], 0.0),
            LinearConstraint::new(vec![-1.0], 0.0),
        ]);
        let r = project_shrunk(&[1.0], &poly, 0.5, 1e-10, 200);
        assert!(!r.converged);
    }

    #[test]
    fn residual_examples() {
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0], 1.0)]);
        assert_eq!(feasibility_residual(&[0.0], &poly), 0.0);
        assert_eq!(feasibility_residual(&[3.0], &poly), 2.0);
        // two violated constraints: max semantics
        let poly2 = Polyhedron::new(vec![
            LinearConstraint::new(vec![1.0, 0.0], 0.0),
            LinearConstraint::new(vec![0.0, 1.0], 0.0),
        ]);
        assert_eq!(feasibility_residual(&[1.0, 3.0], &poly2), 3.0);
    }

    #[test]
    fn projection_distance_consistency() {
        let poly = quadrant();
        let x = [-2.0, 5.0];
        let r = project_polyhedron(&x, &poly, 1e-12, 1000);
        assert!((r.distance - linalg::dist2(&x, &r.point)).abs() <= 1e-12);
    }
}
