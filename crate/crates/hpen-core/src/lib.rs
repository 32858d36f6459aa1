#![allow(clippy::needless_range_loop)]

//! Smooth inexact penalty toolkit for convex minimization under linear
//! inequality constraints.
//!
//! The library reformulates `min f(x) s.t. ⟨aᵢ,x⟩ ≤ bᵢ` as the
//! unconstrained problem `min f(x) + (γ/m)·Σᵢ h_δ(x; aᵢ, bᵢ)` built on a
//! smooth one-sided Huber penalty, and provides:
//!
//! - the penalty kernels and their gradients ([`penalty`]),
//! - projections and feasibility metrics ([`geometry`]),
//! - parameter selection with feasibility/accuracy guarantees and
//!   time-varying schedules ([`params`]),
//! - full-gradient, SAGA, time-varying and random-projection solvers plus
//!   a high-accuracy reference ([`solvers`]),
//! - seeded benchmark experiments with CSV/JSON persistence
//!   ([`experiments`]),
//! - an invariant battery for end-to-end validation ([`validate`]).
//!
//! ```
//! use hpen_core::linalg::Mat;
//! use hpen_core::{
//!     solve_full_gradient, LinearConstraint, PenaltyParams, Polyhedron, QuadraticObjective,
//! };
//!
//! // minimize (x - 2)^2 subject to x <= 0
//! let obj = QuadraticObjective::new(Mat::identity(1), vec![2.0]);
//! let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0], 0.0)]);
//!
//! // penalized surrogate with slope 200 and smoothing band 0.01
//! let pp = PenaltyParams::new(200.0, 0.01);
//! let step = 1.0 / (2.0 + pp.gamma() / (2.0 * pp.delta()));
//! let run = solve_full_gradient(&obj, &poly, pp, &[1.0], step, 2_000_000, 1e-9, 1000, None)
//!     .expect("run completes");
//! assert!(run.converged);
//! assert!(hpen_core::feasibility_residual(&run.x, &poly) < 1e-3);
//! assert!(run.x[0].abs() < 0.05, "close to the constrained optimum at 0");
//! ```

pub mod experiments;
pub mod geometry;
pub mod linalg;
pub mod params;
pub mod penalty;
pub mod problem;
pub mod solvers;
pub mod validate;

pub use geometry::{
    feasibility_residual, project_halfspace, project_polyhedron, project_shrunk, ProjectionResult,
};
pub use params::{
    delta_range_feasibility, estimate_grad_bound, estimate_hoffman, gamma_threshold, level_value,
    make_schedule, params_for_accuracy_gap, params_for_accuracy_strong, saga_step_size, ParamError,
    ProblemConstants, Schedule,
};
pub use penalty::{
    component_grad, h_delta, h_delta_grad, p_delta, p_delta_prime, penalized_grad, penalized_value,
    PenaltyParams,
};
pub use problem::{
    objective_gradient, objective_value, slater_margin, LinearConstraint, Objective, Polyhedron,
    ProblemInstance, QuadraticObjective, SlaterCertificate,
};
pub use solvers::{
    solve_full_gradient, solve_rand_proj, solve_reference, solve_saga, solve_time_varying,
    IterateTrace, Method, SolverConfig, SolverError, SolverRun,
};
