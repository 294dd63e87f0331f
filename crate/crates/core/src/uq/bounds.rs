//! Sparse-grid error bound and work planner.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("invalid bound parameter: {0}")]
    Invalid(String),
    #[error("{0} overflows for the requested tolerance")]
    Overflow(&'static str),
}

pub type Result<T> = std::result::Result<T, BoundError>;

/// Constants of the sparse-grid estimate and the work planner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundParams {
    /// Rate `σ` (half the analyticity rate `σ̂`).
    pub sigma: f64,
    pub delta_star: f64,
    pub c1: f64,
    pub c2_tilde: f64,
    pub c_d: f64,
    pub d_d: f64,
    /// Decay exponent `l` of the truncation tail.
    pub decay: f64,
    /// Constant `ℰ` linking the tail to the tolerance.
    pub script_e: f64,
    pub c_t: f64,
    pub c_sg: f64,
    pub c_f: f64,
    pub f: f64,
    /// `‖ρ/ρ̂‖_∞`.
    pub density_ratio_sup: f64,
}

impl Default for BoundParams {
    fn default() -> Self {
        let c1 = 0.5;
        let c2_tilde = 1.0;
        Self {
            sigma: 1.0,
            delta_star: (std::f64::consts::E * std::f64::consts::LN_2 - 1.0) / c2_tilde,
            c1,
            c2_tilde,
            c_d: 1.0,
            d_d: 1.0,
            decay: 1.0,
            script_e: 1.0,
            c_t: 1.0,
            c_sg: 1.0,
            c_f: c1 / (1.0 - c1).abs(),
            f: c1.max(1.0),
            density_ratio_sup: 1.0,
        }
    }
}

impl BoundParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma", self.sigma),
            ("delta_star", self.delta_star),
            ("c1", self.c1),
            ("c2_tilde", self.c2_tilde),
            ("c_d", self.c_d),
            ("d_d", self.d_d),
            ("decay", self.decay),
            ("script_e", self.script_e),
            ("c_t", self.c_t),
            ("c_sg", self.c_sg),
            ("c_f", self.c_f),
            ("f", self.f),
            ("density_ratio_sup", self.density_ratio_sup),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(BoundError::Invalid(format!("{name} must be finite and positive, got {v}")));
            }
        }
        if self.c1 == 1.0 {
            return Err(BoundError::Invalid("c1 = 1 makes the prefactor singular".into()));
        }
        Ok(())
    }

    /// `μ₂(N_s) = log 2 / (N_s (1 + log 2N_s))`.
    pub fn mu2(n_s: usize) -> f64 {
        let n = n_s as f64;
        std::f64::consts::LN_2 / (n * (1.0 + (2.0 * n).ln()))
    }

    /// `μ₃ = σ δ* C̃₂ / (1 + log 2N_s)`.
    pub fn mu3(&self, n_s: usize) -> f64 {
        self.sigma * self.delta_star * self.c2_tilde / (1.0 + (2.0 * n_s as f64).ln())
    }

    /// `ln 𝒬(σ, δ*, N_s)`.
    pub fn log_prefactor(&self, n_s: usize) -> f64 {
        self.c1.ln() - self.sigma * self.delta_star * self.c2_tilde + n_s as f64 * self.c1.max(1.0).ln()
            - (1.0 - self.c1).abs().ln()
    }
}

/// Natural log of the sparse-grid interpolation error estimate for `eta`
/// knots.
pub fn log_sparse_grid_error_bound(params: &BoundParams, n_s: usize, eta: f64) -> Result<f64> {
    params.validate()?;
    if n_s == 0 {
        return Err(BoundError::Invalid("N_s must be >= 1".into()));
    }
    if !(eta >= 1.0) {
        return Err(BoundError::Invalid(format!("eta must be >= 1, got {eta}")));
    }
    let n = n_s as f64;
    let rate = n * params.sigma * 2f64.powf(-1.0 / n);
    Ok(params.log_prefactor(n_s) + params.mu3(n_s) * eta.ln() - rate * eta.powf(BoundParams::mu2(n_s)))
}

/// `𝒬 η^{μ₃} exp(-N_s σ 2^{-1/N_s} η^{μ₂})`.
pub fn sparse_grid_error_bound(params: &BoundParams, n_s: usize, eta: f64) -> Result<f64> {
    Ok(log_sparse_grid_error_bound(params, n_s, eta)?.exp())
}

/// Knot count beyond which the bound decreases monotonically in `η`.
pub fn decreasing_threshold(params: &BoundParams, n_s: usize) -> Result<f64> {
    params.validate()?;
    let n = n_s as f64;
    let mu2 = BoundParams::mu2(n_s);
    let rate = n * params.sigma * 2f64.powf(-1.0 / n);
    Ok((params.mu3(n_s) / (rate * mu2)).powf(1.0 / mu2).max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityPlan {
    pub tol: f64,
    /// `(ℰ tol / (C_D (1 + D_D)))^{-1/l}` before rounding.
    pub n_s_bound: f64,
    pub n_s_required: usize,
    /// Base of the knot-count power before the exponent is applied.
    pub eta_base: f64,
    pub eta_exponent: f64,
    pub eta_required: f64,
    pub work_per_solve: f64,
    pub work_total: f64,
}

/// Number of retained dimensions, knots and total work for tolerance `tol`.
pub fn complexity_plan(tol: f64, params: &BoundParams, work_per_solve: f64) -> Result<ComplexityPlan> {
    params.validate()?;
    if !(tol > 0.0) {
        return Err(BoundError::Invalid(format!("tol must be positive, got {tol}")));
    }
    if !(work_per_solve > 0.0 && work_per_solve.is_finite()) {
        return Err(BoundError::Invalid(format!("work per solve must be positive, got {work_per_solve}")));
    }
    let ratio = params.script_e * tol / (params.c_d * (1.0 + params.d_d));
    let n_s_bound = ratio.powf(-1.0 / params.decay);
    if !n_s_bound.is_finite() || n_s_bound > u32::MAX as f64 {
        return Err(BoundError::Overflow("N_s"));
    }
    let n_s_required = (n_s_bound.ceil() as usize).max(1);
    let n = n_s_required as f64;
    let eta_base = 3.0
        * params.density_ratio_sup
        * params.c_sg
        * params.c_t
        * params.c_f
        * params.f.powf(n)
        * params.sigma.exp()
        / tol;
    let eta_exponent = (1.0 + (2.0 * n).ln()) / params.sigma;
    let eta_required = eta_base.powf(eta_exponent).max(1.0).ceil();
    if !eta_base.is_finite() || !eta_required.is_finite() {
        return Err(BoundError::Overflow("eta"));
    }
    let work_total = work_per_solve * eta_required;
    if !work_total.is_finite() {
        return Err(BoundError::Overflow("total work"));
    }
    Ok(ComplexityPlan {
        tol,
        n_s_bound,
        n_s_required,
        eta_base,
        eta_exponent,
        eta_required,
        work_per_solve,
        work_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu2_at_one() {
        let ln2 = std::f64::consts::LN_2;
        assert!((BoundParams::mu2(1) - ln2 / (1.0 + ln2)).abs() < 1e-16);
    }

    #[test]
    fn plan_power_law() {
        let p = BoundParams {
            decay: 1.0,
            c_d: 1.0,
            d_d: 1.0,
            script_e: 1.0,
            ..Default::default()
        };
        // E tol / (C_D (1 + D_D)) = 1/4
        let plan = complexity_plan(0.5, &p, 1.0).unwrap();
        assert_eq!(plan.n_s_required, 4);
        let p2 = BoundParams { decay: 2.0, ..p };
        let a = complexity_plan(1e-3, &p2, 1.0).unwrap();
        let b = complexity_plan(5e-4, &p2, 1.0).unwrap();
        assert!((b.n_s_bound / a.n_s_bound - 2f64.sqrt()).abs() < 1e-12);
        assert!(b.eta_required >= a.eta_required);
    }

    #[test]
    fn huge_tolerance_is_minimal() {
        let plan = complexity_plan(1e12, &BoundParams::default(), 2.0).unwrap();
        assert_eq!(plan.n_s_required, 1);
        assert_eq!(plan.eta_required, 1.0);
        assert_eq!(plan.work_total, 2.0);
    }

    #[test]
    fn tiny_tolerance_overflows() {
        assert!(matches!(
            complexity_plan(1e-300, &BoundParams::default(), 1.0),
            Err(BoundError::Overflow(_))
        ));
        assert!(complexity_plan(0.0, &BoundParams::default(), 1.0).is_err());
    }

    #[test]
    fn invalid_params() {
        let p = BoundParams { sigma: 0.0, ..Default::default() };
        assert!(sparse_grid_error_bound(&p, 2, 10.0).is_err());
        let p = BoundParams { c1: 1.0, ..Default::default() };
        assert!(sparse_grid_error_bound(&p, 2, 10.0).is_err());
        assert!(sparse_grid_error_bound(&BoundParams::default(), 2, 0.5).is_err());
    }
}
