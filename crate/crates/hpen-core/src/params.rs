//! Penalty-parameter selection: the threshold Γ, admissible δ ranges, the
//! (γ, δ) pairs meeting a target accuracy δ⁰, level values, SAGA step
//! sizes, and the time-varying schedules.
//!
//! Two problem constants are estimates by nature: the Hoffman constant β
//! (sampled lower bound, user-overridable) and the gradient bound L over
//! the relevant ball (closed form for the quadratic objective, sampling
//! otherwise). Everything downstream treats them as certified inputs;
//! guarantees degrade gracefully when they are only estimates.

use crate::geometry::{self, project_polyhedron};
use crate::linalg;
use crate::penalty::PenaltyParams;
use crate::problem::{Objective, Polyhedron, QuadraticObjective, SlaterCertificate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("delta = {delta} is not admissible: must satisfy 0 < delta < {bound} ({which})")]
    DeltaOutOfRange {
        delta: f64,
        bound: f64,
        which: &'static str,
    },
    #[error("admissible (gamma, delta) set is empty: {0}")]
    EmptyAdmissibleSet(String),
    #[error("strong-convexity accuracy selection requires mu_f > 0")]
    NotStronglyConvex,
    #[error("gamma-delta budget c = {c} must exceed c~ = {c_tilde} for this accuracy target")]
    BudgetTooSmall { c: f64, c_tilde: f64 },
    #[error("level set is unbounded (mu_f = 0): supply a gradient bound with --grad-bound")]
    UnboundedLevelSet,
    #[error("level value requires a feasible anchor point (residual {0})")]
    InfeasibleAnchor(f64),
    #[error("schedule requires 0 < eps <= 1/2, got {0}")]
    BadScheduleEps(f64),
    #[error("schedule exponents violate 1+2e-b<0: 1 + 2*{eps} - {b} = {lhs}")]
    BadScheduleExponents { eps: f64, b: f64, lhs: f64 },
}

/// Certified or estimated constants of one problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Hoffman constant estimate (or user-certified value).
    pub beta_hat: f64,
    /// Gradient-norm bound over the relevant ball (or user override).
    pub l_hat: f64,
    /// Slater margin ε.
    pub epsilon: f64,
    pub mu_f: f64,
    pub l_f: f64,
    /// Budget c for the product γδ; the ball behind `l_hat` used this value.
    pub c: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<(), ParamError> {
        let pos = [
            ("alpha_min", self.alpha_min),
            ("alpha_max", self.alpha_max),
            ("beta_hat", self.beta_hat),
            ("l_hat", self.l_hat),
            ("epsilon", self.epsilon),
            ("l_f", self.l_f),
            ("c", self.c),
        ];
        for (name, v) in pos {
            // NaN fails this check too
            if v.is_nan() || v <= 0.0 {
                return Err(ParamError::EmptyAdmissibleSet(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.mu_f < 0.0 || self.alpha_min > self.alpha_max {
            return Err(ParamError::EmptyAdmissibleSet(
                "alpha_min must not exceed alpha_max".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of the sampling Hoffman estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoffmanEstimate {
    /// Lower bound on the smallest valid β; 0 when no infeasible sample was hit.
    pub beta: f64,
    /// True when every sample was feasible, so the estimate is unusable.
    pub degenerate: bool,
}

/// Sampled lower bound on the Hoffman constant:
/// β̂ = max over infeasible samples of dist(x, X) / Σᵢ dist(x, Xᵢ).
///
/// Samples are uniform over the hypercube [−radius, radius]ⁿ; the numerator
/// uses the polyhedron projection at a tolerance of 1e-9 (the ratio needs
/// nothing finer, and deep-outside projections dominate the cost).
/// Deterministic given the seed; samples are evaluated in parallel.
pub fn estimate_hoffman(
    poly: &Polyhedron,
    rng_seed: u64,
    samples: usize,
    radius: f64,
) -> HoffmanEstimate {
    use rayon::prelude::*;
    assert!(samples >= 1, "need at least one sample");
    assert!(radius > 0.0, "radius must be positive");
    let mut rng = ChaCha20Rng::seed_from_u64(rng_seed);
    let n = poly.dim();
    let points: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..n).map(|_| rng.random_range(-radius..=radius)).collect())
        .collect();
    let ratios: Vec<Option<f64>> = points
        .par_iter()
        .map(|x| {
            if geometry::feasibility_residual(x, poly) == 0.0 {
                return None;
            }
            let mut sum_dists = 0.0;
            for c in poly.constraints() {
                sum_dists += c.violation(x).max(0.0) / c.norm();
            }
            if sum_dists == 0.0 {
                return None;
            }
            let proj = project_polyhedron(x, poly, 1e-9, geometry::DEFAULT_PROJECTION_MAX_ITER);
            proj.converged.then(|| proj.distance / sum_dists)
        })
        .collect();
    let mut best = 0.0f64;
    let mut any_infeasible = false;
    for r in ratios.into_iter().flatten() {
        any_infeasible = true;
        best = best.max(r);
    }
    HoffmanEstimate {
        beta: best,
        degenerate: !any_infeasible,
    }
}

/// Gradient bound together with the ball radius it was certified on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradBound {
    pub bound: f64,
    pub radius: f64,
}

/// Radius of a centered ball containing the penalized solution sets for all
/// γδ ≤ c, and the zero-penalty points constructed from them.
///
/// R = 3·R₁ + β̂·m·ε/α_min where R₁ bounds the level set
/// {f ≤ f(x̂) + c/(4α_min)} around the origin: for the quadratic objective
/// that level set is the ellipsoid f_min + (x−x_u)ᵀΦᵀΦ(x−x_u) ≤ v, so
/// R₁ = ‖x_u‖ + sqrt(v/λ_min). The triple-counting of R₁ absorbs both the
/// solution sets and their feasible projections; the construction errs on
/// the conservative side.
pub fn level_ball_radius(
    obj: &QuadraticObjective,
    poly: &Polyhedron,
    slater: &SlaterCertificate,
    beta_hat: f64,
    c: f64,
) -> Result<f64, ParamError> {
    let (mu_f, _) = obj.curvature_bounds();
    if mu_f <= 0.0 {
        return Err(ParamError::UnboundedLevelSet);
    }
    let x_u = obj
        .unconstrained_minimizer()
        .ok_or(ParamError::UnboundedLevelSet)?;
    let f_min = obj.value(&x_u);
    let f_hat = obj.value(&slater.point);
    let alpha_min = poly.alpha_min();
    let v = f_hat + c / (4.0 * alpha_min) - f_min;
    let lambda_min = mu_f / 2.0;
    let r1 = linalg::norm2(&x_u) + (v.max(0.0) / lambda_min).sqrt();
    let m = poly.len() as f64;
    Ok(3.0 * r1 + beta_hat * m * slater.margin / alpha_min)
}

/// Closed-form gradient bound for the quadratic objective on the ball from
/// [`level_ball_radius`]: L̂ = 2‖Φ‖(‖Φ‖R + ‖x⁰‖).
pub fn estimate_grad_bound(
    obj: &QuadraticObjective,
    poly: &Polyhedron,
    slater: &SlaterCertificate,
    beta_hat: f64,
    c: f64,
) -> Result<GradBound, ParamError> {
    let radius = level_ball_radius(obj, poly, slater, beta_hat, c)?;
    let bound = obj
        .grad_norm_bound(radius)
        .expect("quadratic objective always has a closed-form bound");
    if bound <= 0.0 {
        return Err(ParamError::UnboundedLevelSet);
    }
    Ok(GradBound { bound, radius })
}

/// Sampling fallback for generic objectives: max ‖∇f‖ over `samples` points
/// drawn uniformly from the centered ball of the given radius. Always at
/// most the true supremum, so at most any valid closed form.
pub fn sample_grad_bound(obj: &dyn Objective, radius: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let n = obj.dim();
    let mut best = 0.0f64;
    for _ in 0..samples {
        // direction from a cube sample, radius from u^(1/n): uniform in the ball
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = linalg::norm2(&x);
        if norm == 0.0 {
            continue;
        }
        let u: f64 = rng.random_range(0.0..=1.0);
        let r = radius * u.powf(1.0 / n as f64);
        for v in &mut x {
            *v *= r / norm;
        }
        best = best.max(linalg::norm2(&obj.gradient(&x)));
    }
    best
}

fn check_delta_admissible(
    consts: &ProblemConstants,
    m: usize,
    delta: f64,
) -> Result<(), ParamError> {
    if delta.is_nan() || delta <= 0.0 {
        return Err(ParamError::DeltaOutOfRange {
            delta,
            bound: 0.0,
            which: "delta must be positive",
        });
    }
    if delta >= consts.epsilon {
        return Err(ParamError::DeltaOutOfRange {
            delta,
            bound: consts.epsilon,
            which: "Slater margin epsilon",
        });
    }
    let hoffman_bound = 16.0 * consts.alpha_min * consts.alpha_min
        / (consts.beta_hat * consts.beta_hat * (m as f64) * (m as f64));
    if delta >= hoffman_bound {
        return Err(ParamError::DeltaOutOfRange {
            delta,
            bound: hoffman_bound,
            which: "16*alpha_min^2/(beta^2*m^2)",
        });
    }
    Ok(())
}

/// Γ(δ) = max{ L·(1/(mβ) − √δ/(4α_min))⁻¹, 4mLα_max(1/√δ + βm/α_min) }.
///
/// Any γ ≥ Γ (with δ in its admissible range) makes every minimizer of the
/// penalized problem feasible for the original one.
pub fn gamma_threshold(consts: &ProblemConstants, m: usize, delta: f64) -> Result<f64, ParamError> {
    consts.validate()?;
    check_delta_admissible(consts, m, delta)?;
    let m_f = m as f64;
    let l = consts.l_hat;
    let denom = 1.0 / (m_f * consts.beta_hat) - delta.sqrt() / (4.0 * consts.alpha_min);
    // delta below the Hoffman bound keeps the denominator positive; guard anyway
    if denom <= 0.0 {
        return Err(ParamError::DeltaOutOfRange {
            delta,
            bound: 16.0 * consts.alpha_min * consts.alpha_min
                / (consts.beta_hat * consts.beta_hat * m_f * m_f),
            which: "pole of the first Gamma term",
        });
    }
    let term1 = l / denom;
    let term2 = 4.0
        * m_f
        * l
        * consts.alpha_max
        * (1.0 / delta.sqrt() + consts.beta_hat * m_f / consts.alpha_min);
    Ok(term1.max(term2))
}

/// Largest √δ for which Γ(δ) ≤ c/δ is guaranteed (the two-term bound shared
/// by the feasibility and accuracy selections).
fn sqrt_delta_bound(consts: &ProblemConstants, m: usize, c: f64) -> f64 {
    let m_f = m as f64;
    let l = consts.l_hat;
    let amin = consts.alpha_min;
    let amax = consts.alpha_max;
    let beta = consts.beta_hat;
    let term_a =
        ((c * c + 64.0 * amin * amin * l * c / (m_f * beta)).sqrt() - c) / (8.0 * amin * l);
    let term_b = ((amin * amin + c * beta * amin / (l * amax)).sqrt() - amin) / (2.0 * m_f * beta);
    term_a.min(term_b)
}

fn largest_admissible_delta(
    consts: &ProblemConstants,
    m: usize,
    c: f64,
) -> Result<f64, ParamError> {
    let sqrt_bound = sqrt_delta_bound(consts, m, c);
    if !sqrt_bound.is_finite() || sqrt_bound <= 0.0 {
        return Err(ParamError::EmptyAdmissibleSet(format!(
            "sqrt(delta) bound evaluated to {sqrt_bound}"
        )));
    }
    let m_f = m as f64;
    let strict = consts.epsilon.min(
        16.0 * consts.alpha_min * consts.alpha_min
            / (consts.beta_hat * consts.beta_hat * m_f * m_f),
    );
    // the strict bounds are open; back off by a hair
    let mut delta = (sqrt_bound * sqrt_bound).min(strict * (1.0 - 1e-9));
    // The closed-form bound puts delta exactly where Gamma(delta) = c/delta,
    // and its evaluation cancels catastrophically when c*beta/(L*alpha) is
    // tiny, so the computed delta can land on the wrong side by far more
    // than an ulp. The admissible set is downward closed, so shrink with
    // exponential backoff until the inequality verifiably holds.
    let mut shrink = 1e-9;
    for _ in 0..40 {
        let gamma = gamma_threshold(consts, m, delta)?;
        if gamma <= c / delta {
            return Ok(delta);
        }
        delta *= 1.0 - shrink;
        shrink = (shrink * 4.0).min(0.5);
    }
    Err(ParamError::EmptyAdmissibleSet(
        "no delta satisfies Gamma(delta) <= c/delta under these constants".into(),
    ))
}

/// Largest δ admissible for the feasibility guarantee with budget `consts.c`:
/// satisfies the closed-form bound, stays below min{ε, 16α²_min/(β²m²)},
/// and guarantees Γ(δ) ≤ c/δ so an admissible γ exists.
pub fn delta_range_feasibility(consts: &ProblemConstants, m: usize) -> Result<f64, ParamError> {
    consts.validate()?;
    largest_admissible_delta(consts, m, consts.c)
}

fn params_for_cap(
    consts: &ProblemConstants,
    m: usize,
    c_tilde: f64,
) -> Result<PenaltyParams, ParamError> {
    consts.validate()?;
    if consts.c <= c_tilde {
        return Err(ParamError::BudgetTooSmall {
            c: consts.c,
            c_tilde,
        });
    }
    // largest admissible delta for the cap budget, halved to buffer estimate error
    let delta = 0.5 * largest_admissible_delta(consts, m, c_tilde)?;
    let cap = c_tilde / delta;
    let gamma_min = gamma_threshold(consts, m, delta)?;
    if gamma_min > cap {
        return Err(ParamError::EmptyAdmissibleSet(format!(
            "Gamma(delta) = {gamma_min} exceeds the cap {cap} at delta = {delta}"
        )));
    }
    // geometric mean keeps slack on both sides of [Gamma, cap]
    let gamma = (gamma_min * cap).sqrt().min(cap).max(gamma_min);
    Ok(PenaltyParams::new(gamma, delta))
}

/// (γ, δ) guaranteeing ‖x*_γδ − x*‖² ≤ δ⁰ for a strongly convex objective:
/// δ from the closed-form bound with c̃ = 2μ_f·α_min·δ⁰, then Γ ≤ γ ≤ c̃/δ.
pub fn params_for_accuracy_strong(
    consts: &ProblemConstants,
    m: usize,
    delta0: f64,
) -> Result<PenaltyParams, ParamError> {
    assert!(delta0 > 0.0, "accuracy target must be positive");
    if consts.mu_f <= 0.0 {
        return Err(ParamError::NotStronglyConvex);
    }
    params_for_cap(consts, m, 2.0 * consts.mu_f * consts.alpha_min * delta0)
}

/// (γ, δ) guaranteeing 0 ≤ f(x*_γδ) − f* ≤ δ⁰ without strong convexity:
/// same construction with c̃ = 4·α_min·δ⁰.
pub fn params_for_accuracy_gap(
    consts: &ProblemConstants,
    m: usize,
    delta0: f64,
) -> Result<PenaltyParams, ParamError> {
    assert!(delta0 > 0.0, "accuracy target must be positive");
    params_for_cap(consts, m, 4.0 * consts.alpha_min * delta0)
}

/// Level value t_γδ(x̂) = f(x̂) + γδ/(4α_min); an upper bound on F_γδ(x̂)
/// for any feasible x̂.
pub fn level_value(
    obj: &dyn Objective,
    consts: &ProblemConstants,
    poly: &Polyhedron,
    x_hat: &[f64],
    pp: PenaltyParams,
) -> Result<f64, ParamError> {
    let residual = geometry::feasibility_residual(x_hat, poly);
    if residual > 1e-9 {
        return Err(ParamError::InfeasibleAnchor(residual));
    }
    Ok(obj.value(x_hat) + pp.gamma() * pp.delta() / (4.0 * consts.alpha_min))
}

/// SAGA step size per the penalized problem's component smoothness
/// L_g = L_f + γα_max/(2δ):
/// strongly convex: 1/(2(μ_f·m + L_f + γα_max/(2δ))), else 1/(3·L_g).
pub fn saga_step_size(
    consts: &ProblemConstants,
    m: usize,
    pp: PenaltyParams,
    strongly_convex: bool,
) -> f64 {
    assert!(pp.delta() > 0.0, "SAGA step size needs delta > 0");
    let l_g = consts.l_f + pp.gamma() * consts.alpha_max / (2.0 * pp.delta());
    if strongly_convex {
        1.0 / (2.0 * (consts.mu_f * m as f64 + l_g))
    } else {
        1.0 / (3.0 * l_g)
    }
}

/// Time-varying sequences (s_k, γ_k, δ_k) for the single-loop gradient
/// method, indexed from k = 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    kind: ScheduleKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ScheduleKind {
    /// s_k = k^−(1/2+ε), γ_k = ln(k+1), δ_k = k^−b with 1 + 2ε − b < 0.
    PowerLog { eps: f64, b: f64 },
    /// Degenerate constant schedule; reproduces the fixed-parameter method.
    Constant { gamma: f64, delta: f64, step: f64 },
}

impl Schedule {
    pub fn constant(gamma: f64, delta: f64, step: f64) -> Self {
        assert!(gamma > 0.0 && delta > 0.0 && step > 0.0);
        Schedule {
            kind: ScheduleKind::Constant { gamma, delta, step },
        }
    }

    pub fn gamma(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        match &self.kind {
            ScheduleKind::PowerLog { .. } => ((k + 1) as f64).ln(),
            ScheduleKind::Constant { gamma, .. } => *gamma,
        }
    }

    pub fn delta(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        match &self.kind {
            ScheduleKind::PowerLog { b, .. } => (k as f64).powf(-b),
            ScheduleKind::Constant { delta, .. } => *delta,
        }
    }

    pub fn step(&self, k: u64) -> f64 {
        debug_assert!(k >= 1);
        match &self.kind {
            ScheduleKind::PowerLog { eps, .. } => (k as f64).powf(-(0.5 + eps)),
            ScheduleKind::Constant { step, .. } => *step,
        }
    }

    pub fn exponents(&self) -> Option<(f64, f64)> {
        match &self.kind {
            ScheduleKind::PowerLog { eps, b } => Some((*eps, *b)),
            ScheduleKind::Constant { .. } => None,
        }
    }
}

/// Builds the power-log schedule, validating its convergence conditions.
///
/// Requires 0 < ε ≤ 1/2 and 1 + 2ε − b < 0. The latter forces b > 1, which
/// makes t ↦ ln(t+1)·t^−b decreasing on t ≥ 1 (its derivative has the sign
/// of t/(t+1) − b·ln(t+1), negative once b·ln 2 > 2/3), so γ_k·δ_k is
/// nonincreasing; a spot check over eight decades backs the algebra.
pub fn make_schedule(eps_exp: f64, b_exp: f64) -> Result<Schedule, ParamError> {
    if eps_exp.is_nan() || eps_exp <= 0.0 || eps_exp > 0.5 {
        return Err(ParamError::BadScheduleEps(eps_exp));
    }
    let lhs = 1.0 + 2.0 * eps_exp - b_exp;
    if lhs.is_nan() || lhs >= 0.0 {
        return Err(ParamError::BadScheduleExponents {
            eps: eps_exp,
            b: b_exp,
            lhs,
        });
    }
    let s = Schedule {
        kind: ScheduleKind::PowerLog {
            eps: eps_exp,
            b: b_exp,
        },
    };
    let mut prev = f64::INFINITY;
    for k in [1u64, 2, 3, 5, 10, 100, 1_000, 10_000, 100_000, 1_000_000] {
        let prod = s.gamma(k) * s.delta(k);
        assert!(
            prod <= prev * (1.0 + 1e-12),
            "gamma_k*delta_k increased at k = {k}"
        );
        prev = prod;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::problem::LinearConstraint;

    fn unit_consts(l_hat: f64, beta: f64) -> ProblemConstants {
        ProblemConstants {
            alpha_min: 1.0,
            alpha_max: 1.0,
            beta_hat: beta,
            l_hat,
            epsilon: 1.0,
            mu_f: 2.0,
            l_f: 2.0,
            c: 1.0,
        }
    }

    #[test]
    fn gamma_threshold_worked_example() {
        // L=1, m=2, beta=1, alpha_min=alpha_max=1, delta=0.01:
        // term1 = 1/(0.5 - 0.025) ~ 2.105, term2 = 8*(10+2) = 96
        let consts = unit_consts(1.0, 1.0);
        let g = gamma_threshold(&consts, 2, 0.01).unwrap();
        assert!((g - 96.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_threshold_rejects_boundary_delta() {
        let consts = unit_consts(1.0, 1.0);
        // bound is 16/(1*4) = 4, and epsilon = 1 binds first
        let err = gamma_threshold(&consts, 2, 1.0).unwrap_err();
        assert!(matches!(err, ParamError::DeltaOutOfRange { .. }));
        // exactly at the Hoffman bound with a large epsilon
        let mut c2 = unit_consts(1.0, 1.0);
        c2.epsilon = 100.0;
        let err2 = gamma_threshold(&c2, 2, 4.0).unwrap_err();
        assert!(matches!(err2, ParamError::DeltaOutOfRange { .. }));
    }

    #[test]
    fn gamma_threshold_homogeneous_in_l() {
        let c1 = unit_consts(1.0, 1.0);
        let c2 = unit_consts(2.0, 1.0);
        let g1 = gamma_threshold(&c1, 2, 0.01).unwrap();
        let g2 = gamma_threshold(&c2, 2, 0.01).unwrap();
        assert!((g2 - 2.0 * g1).abs() < 1e-9);
    }

    #[test]
    fn gamma_threshold_monotone_in_problem_size() {
        let consts = unit_consts(1.0, 1.0);
        let deltas = [1e-4, 1e-3, 1e-2];
        for &d in &deltas {
            let base = gamma_threshold(&consts, 2, d).unwrap();
            let more_m = gamma_threshold(&consts, 3, d).unwrap();
            assert!(more_m >= base, "Gamma should not decrease in m");
            let mut bigger_l = consts.clone();
            bigger_l.l_hat = 1.5;
            assert!(gamma_threshold(&bigger_l, 2, d).unwrap() >= base);
            let mut bigger_beta = consts.clone();
            bigger_beta.beta_hat = 1.3;
            assert!(gamma_threshold(&bigger_beta, 2, d).unwrap() >= base);
            let mut bigger_amin = consts.clone();
            bigger_amin.alpha_min = 1.5;
            bigger_amin.alpha_max = 1.5;
            // alpha_max fixed at the larger alpha_min: the alpha_min effect alone
            let mut only_amax = consts.clone();
            only_amax.alpha_max = 1.5;
            let widened = gamma_threshold(&bigger_amin, 2, d).unwrap();
            let amax_only = gamma_threshold(&only_amax, 2, d).unwrap();
            assert!(
                widened <= amax_only,
                "Gamma should not increase in alpha_min at fixed alpha_max"
            );
        }
    }

    #[test]
    fn delta_range_guarantees_gamma_cap() {
        for &c in &[0.25, 1.0, 4.0, 16.0] {
            let mut consts = unit_consts(1.0, 1.0);
            consts.c = c;
            let delta = delta_range_feasibility(&consts, 2).unwrap();
            assert!(delta > 0.0 && delta < consts.epsilon);
            let gamma = gamma_threshold(&consts, 2, delta).unwrap();
            assert!(
                gamma <= c / delta,
                "Gamma {gamma} must be at most c/delta {}",
                c / delta
            );
        }
    }

    #[test]
    fn delta_range_monotone_in_budget() {
        let mut prev = 0.0;
        for &c in &[0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let mut consts = unit_consts(1.0, 1.0);
            consts.c = c;
            let delta = delta_range_feasibility(&consts, 2).unwrap();
            assert!(delta >= prev, "delta_max should not shrink as c grows");
            prev = delta;
        }
    }

    #[test]
    fn accuracy_strong_postconditions() {
        let mut consts = unit_consts(5.0, 1.0);
        consts.c = 1.0;
        let delta0 = 1e-2;
        let pp = params_for_accuracy_strong(&consts, 2, delta0).unwrap();
        let cap = 2.0 * consts.mu_f * consts.alpha_min * delta0 / pp.delta();
        let gamma_min = gamma_threshold(&consts, 2, pp.delta()).unwrap();
        assert!(gamma_min <= pp.gamma() && pp.gamma() <= cap);
        assert!(
            pp.gamma() * pp.delta()
                <= 2.0 * consts.mu_f * consts.alpha_min * delta0 * (1.0 + 1e-12)
        );
    }

    #[test]
    fn accuracy_strong_delta_monotone_in_target() {
        let mut consts = unit_consts(5.0, 1.0);
        consts.c = 10.0;
        let mut prev = 0.0;
        for &d0 in &[1e-3, 3e-3, 1e-2, 3e-2, 1e-1] {
            let pp = params_for_accuracy_strong(&consts, 2, d0).unwrap();
            assert!(pp.delta() >= prev);
            prev = pp.delta();
        }
    }

    #[test]
    fn accuracy_strong_needs_mu() {
        let mut consts = unit_consts(5.0, 1.0);
        consts.mu_f = 0.0;
        assert!(matches!(
            params_for_accuracy_strong(&consts, 2, 1e-2),
            Err(ParamError::NotStronglyConvex)
        ));
    }

    #[test]
    fn accuracy_gap_postconditions() {
        let mut consts = unit_consts(5.0, 1.0);
        consts.c = 1.0;
        let delta0 = 1e-2;
        let pp = params_for_accuracy_gap(&consts, 2, delta0).unwrap();
        let cap = 4.0 * consts.alpha_min * delta0 / pp.delta();
        assert!(pp.gamma() <= cap);
        assert!(gamma_threshold(&consts, 2, pp.delta()).unwrap() <= pp.gamma());
    }

    #[test]
    fn accuracy_variants_agree_when_mu_is_two() {
        // 2·mu_f = 4 with mu_f = 2 and equal alpha_min: identical caps
        let mut consts = unit_consts(5.0, 1.0);
        consts.c = 1.0;
        let s = params_for_accuracy_strong(&consts, 2, 1e-2).unwrap();
        let g = params_for_accuracy_gap(&consts, 2, 1e-2).unwrap();
        assert_eq!(s, g);
    }

    #[test]
    fn budget_must_exceed_cap_product() {
        let mut consts = unit_consts(5.0, 1.0);
        consts.c = 1e-9;
        assert!(matches!(
            params_for_accuracy_strong(&consts, 2, 1e-2),
            Err(ParamError::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn level_value_examples() {
        let obj = QuadraticObjective::new(Mat::identity(1), vec![0.0]);
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0], 1.0)]);
        let consts = unit_consts(1.0, 1.0);
        // delta = 0 gives f(x̂) back
        let t0 = level_value(&obj, &consts, &poly, &[0.5], PenaltyParams::new(3.0, 0.0)).unwrap();
        assert_eq!(t0, 0.25);
        // gamma = 4·alpha_min, delta = 1 adds exactly 1
        let t1 = level_value(&obj, &consts, &poly, &[0.5], PenaltyParams::new(4.0, 1.0)).unwrap();
        assert_eq!(t1, 1.25);
        // infeasible anchor is rejected
        assert!(level_value(&obj, &consts, &poly, &[2.0], PenaltyParams::new(1.0, 1.0)).is_err());
    }

    #[test]
    fn level_value_dominates_penalized_value() {
        use crate::penalty::penalized_value;
        let obj = QuadraticObjective::new(Mat::identity(2), vec![0.3, -0.4]);
        let poly = Polyhedron::new(vec![
            LinearConstraint::new(vec![1.0, 0.0], 1.0),
            LinearConstraint::new(vec![0.0, 1.0], 1.0),
            LinearConstraint::new(vec![-1.0, -1.0], 3.0),
        ]);
        let mut consts = unit_consts(1.0, 1.0);
        consts.alpha_min = poly.alpha_min();
        let pp = PenaltyParams::new(2.5, 0.3);
        for x_hat in [[0.0, 0.0], [0.9, -1.0], [1.0, 1.0]] {
            let t = level_value(&obj, &consts, &poly, &x_hat, pp).unwrap();
            assert!(penalized_value(&obj, &poly, pp, &x_hat) <= t + 1e-12);
        }
    }

    #[test]
    fn saga_step_worked_example() {
        // mu=1, m=1, L_f=1, gamma=2, delta=1, alpha_max=1 → 1/6
        let consts = ProblemConstants {
            alpha_min: 1.0,
            alpha_max: 1.0,
            beta_hat: 1.0,
            l_hat: 1.0,
            epsilon: 1.0,
            mu_f: 1.0,
            l_f: 1.0,
            c: 1.0,
        };
        let step = saga_step_size(&consts, 1, PenaltyParams::new(2.0, 1.0), true);
        assert!((step - 1.0 / 6.0).abs() < 1e-15);
        // non-strong limit: gamma → 0 cannot be represented (gamma > 0); take tiny
        let step2 = saga_step_size(&consts, 1, PenaltyParams::new(1e-300, 1.0), false);
        assert!((step2 - 1.0 / 3.0).abs() < 1e-12);
        // alpha shrinks as delta shrinks
        let a1 = saga_step_size(&consts, 1, PenaltyParams::new(2.0, 1.0), true);
        let a2 = saga_step_size(&consts, 1, PenaltyParams::new(2.0, 0.5), true);
        assert!(a2 < a1);
    }

    #[test]
    fn schedule_worked_example() {
        let s = make_schedule(0.25, 1.6).unwrap();
        assert!((s.gamma(1) * s.delta(1) - (2.0f64).ln()).abs() < 1e-15);
        let g2d2 = s.gamma(2) * s.delta(2);
        assert!((g2d2 - (3.0f64).ln() / 2.0f64.powf(1.6)).abs() < 1e-15);
        assert!(g2d2 < s.gamma(1) * s.delta(1));
    }

    #[test]
    fn schedule_rejects_bad_exponents() {
        // 1 + 2*0.5 - 1.9 = 0.1 >= 0
        assert!(matches!(
            make_schedule(0.5, 1.9),
            Err(ParamError::BadScheduleExponents { .. })
        ));
        assert!(matches!(
            make_schedule(0.0, 3.0),
            Err(ParamError::BadScheduleEps(_))
        ));
        assert!(matches!(
            make_schedule(0.6, 3.0),
            Err(ParamError::BadScheduleEps(_))
        ));
    }

    #[test]
    fn schedule_partial_sums() {
        let s = make_schedule(0.25, 1.6).unwrap();
        // sum of s_k diverges (compare against known slow growth), sum of s_k² stays bounded
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for k in 1..=1_000_000u64 {
            let sk = s.step(k);
            sum += sk;
            sum_sq += sk * sk;
        }
        assert!(sum > 100.0, "partial sum should keep growing, got {sum}");
        // sum k^(-1.5) converges to zeta(1.5) ~ 2.612
        assert!(
            sum_sq < 2.7,
            "squared partial sum should stay bounded, got {sum_sq}"
        );
    }

    #[test]
    fn schedule_limit_conditions() {
        let s = make_schedule(0.25, 1.6).unwrap();
        let ks = [100u64, 1_000, 10_000, 100_000, 1_000_000];
        let sg2: Vec<f64> = ks
            .iter()
            .map(|&k| s.step(k) * s.gamma(k) * s.gamma(k))
            .collect();
        let gds2: Vec<f64> = ks
            .iter()
            .map(|&k| s.gamma(k) * s.delta(k) / (s.step(k) * s.step(k)))
            .collect();
        for w in sg2.windows(2).skip(2) {
            assert!(
                w[1] < w[0],
                "s_k*gamma_k^2 must decrease over the last points"
            );
        }
        for w in gds2.windows(2).skip(2) {
            assert!(
                w[1] < w[0],
                "gamma_k*delta_k/s_k^2 must decrease over the last points"
            );
        }
    }

    #[test]
    fn hoffman_single_constraint_is_one() {
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0, 1.0], 0.0)]);
        let est = estimate_hoffman(&poly, 7, 200, 3.0);
        assert!(!est.degenerate);
        assert!((est.beta - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hoffman_quadrant_ratio() {
        // corner samples contribute dist/sum ~ sqrt(2)/2
        let poly = Polyhedron::new(vec![
            LinearConstraint::new(vec![-1.0, 0.0], 0.0),
            LinearConstraint::new(vec![0.0, -1.0], 0.0),
        ]);
        let est = estimate_hoffman(&poly, 13, 2_000, 2.0);
        assert!(!est.degenerate);
        assert!(est.beta <= 1.0 + 1e-9);
        assert!(
            est.beta >= 0.65,
            "corner samples should push the ratio toward sqrt(2)/2"
        );
    }

    #[test]
    fn hoffman_degenerate_when_all_feasible() {
        // whole sampled cube is feasible for x1 <= 100
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0, 0.0], 100.0)]);
        let est = estimate_hoffman(&poly, 3, 50, 1.0);
        assert!(est.degenerate);
        assert_eq!(est.beta, 0.0);
    }

    #[test]
    fn grad_bound_closed_form() {
        // Phi = I, x0 = 0: on a ball of radius R the bound is 2R
        let obj = QuadraticObjective::new(Mat::identity(3), vec![0.0; 3]);
        assert_eq!(obj.grad_norm_bound(5.0), Some(10.0));
    }

    #[test]
    fn grad_bound_rejects_flat_objective() {
        let obj = QuadraticObjective::new(Mat::new(2, 2, vec![0.0; 4]), vec![0.0; 2]);
        let poly = Polyhedron::new(vec![LinearConstraint::new(vec![1.0, 0.0], 1.0)]);
        let slater = SlaterCertificate {
            point: vec![0.0, 0.0],
            margin: 1.0,
        };
        assert!(matches!(
            estimate_grad_bound(&obj, &poly, &slater, 1.0, 1.0),
            Err(ParamError::UnboundedLevelSet)
        ));
    }

    #[test]
    fn sampled_bound_below_closed_form() {
        let obj =
            QuadraticObjective::new(Mat::new(2, 2, vec![1.0, 0.2, 0.0, 1.5]), vec![0.3, -0.7]);
        let radius = 4.0;
        let closed = obj.grad_norm_bound(radius).unwrap();
        let sampled = sample_grad_bound(&obj, radius, 10_000, 5);
        assert!(
            sampled <= closed,
            "sampled {sampled} must not exceed closed form {closed}"
        );
        assert!(sampled > 0.0);
    }
}
