use serde::{Deserialize, Serialize};

use super::{Result, UqError};
use crate::deformation::{DeformationModel, ExperimentModelParams, LeadingMode, SupSampling};
use crate::sparse_grid::Family;
use crate::uq::bounds::BoundParams;

/// Deformation model of the experiment: a vertical stretch of the upper half
/// with linearly decaying trigonometric modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Total stochastic dimension `N`.
    pub n_modes: usize,
    pub correlation_length: f64,
    pub period: f64,
    pub scaling: f64,
    pub decay_exponent: f64,
    /// Half width of the uniform law of the random variables.
    pub variable_half_width: f64,
    pub leading_mode: LeadingMode,
    /// Lattice size used for the `sup` norms of the mode matrices.
    pub sup_vertices: usize,
    /// `α` in the analyticity-region constants.
    pub region_alpha: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let p = ExperimentModelParams::default();
        Self {
            n_modes: p.n_modes,
            correlation_length: p.correlation_length,
            period: p.period,
            scaling: p.scaling,
            decay_exponent: p.decay_exponent,
            variable_half_width: p.variable_half_width,
            leading_mode: p.leading_mode,
            sup_vertices: SupSampling::default().vertices_per_side,
            region_alpha: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn params(&self) -> ExperimentModelParams {
        ExperimentModelParams {
            n_modes: self.n_modes,
            correlation_length: self.correlation_length,
            period: self.period,
            scaling: self.scaling,
            decay_exponent: self.decay_exponent,
            variable_half_width: self.variable_half_width,
            leading_mode: self.leading_mode,
        }
    }

    pub fn build(&self) -> Result<DeformationModel> {
        Ok(DeformationModel::experiment(
            &self.params(),
            SupSampling {
                vertices_per_side: self.sup_vertices,
            },
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Vertices per side of the structured mesh; odd so that `x₂ = 1/2` is a
    /// vertex row.
    pub mesh_n: usize,
    pub dt: f64,
    pub final_time: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Constant diffusion coefficient `a`.
    pub diffusion: f64,
    /// Neumann flux `g₂` on the three non-Dirichlet sides.
    pub neumann_flux: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mesh_n: 65,
            dt: 0.01,
            final_time: 1.0,
            cg_tol: 1e-10,
            cg_max_iter: 10_000,
            diffusion: 1.0,
            neumann_flux: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Retained dimensions `N_s`.
    pub n_s: usize,
    pub level: u32,
    pub family: Family,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_s: 4,
            level: 4,
            family: Family::SM,
        }
    }
}

/// Weight `q` of the quantity of interest on the bottom half.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QoiWeight {
    /// `g(x₁) g(2x₂)` with `g(s) = s(1 - s)`.
    #[default]
    Separable,
    /// `q ≡ 1`.
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySection {
    pub qoi_weight: QoiWeight,
    /// Divide every QoI value by its value on the undeformed square.
    pub normalize: bool,
    /// `N_s` values of the level-convergence study.
    pub converge_ns: Vec<usize>,
    pub w_max: u32,
    /// Reference of the convergence study: dimension (each `N_s` is
    /// compared with its own reference when absent), level above `w_max`
    /// and mesh.
    pub reference_n_s: Option<usize>,
    pub reference_level_offset: u32,
    pub reference_mesh_n: usize,
    /// `N_s` values and level of the truncation study.
    pub truncation_ns: Vec<usize>,
    pub truncation_level: u32,
    /// Dimension of the truncation reference.
    pub truncation_reference_n_s: usize,
}

impl Default for StudySection {
    fn default() -> Self {
        Self {
            qoi_weight: QoiWeight::Separable,
            normalize: true,
            converge_ns: vec![2, 3, 4],
            w_max: 4,
            reference_n_s: None,
            reference_level_offset: 2,
            reference_mesh_n: 65,
            truncation_ns: vec![2, 3, 4, 6],
            truncation_level: 2,
            truncation_reference_n_s: 15,
        }
    }
}

/// Complete description of a collocation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub model: ModelConfig,
    pub solver: SolverConfig,
    pub grid: GridConfig,
    pub study: StudySection,
    pub bounds: BoundParams,
}

fn invalid(msg: impl Into<String>) -> UqError {
    UqError::Config(msg.into())
}

pub(crate) fn check_mesh(mesh_n: usize, what: &str) -> Result<()> {
    if mesh_n < 3 || mesh_n.is_multiple_of(2) {
        return Err(invalid(format!("{what} must be odd and >= 3, got {mesh_n}")));
    }
    Ok(())
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let s = &self.solver;
        let n = m.n_modes;
        if n == 0 {
            return Err(invalid("model.n_modes must be >= 1"));
        }
        if !(m.scaling >= 0.0 && m.scaling.is_finite()) {
            return Err(invalid(format!("model.scaling must be >= 0, got {}", m.scaling)));
        }
        if !(m.decay_exponent >= 0.0) {
            return Err(invalid("model.decay_exponent must be >= 0"));
        }
        if m.sup_vertices < 2 {
            return Err(invalid("model.sup_vertices must be >= 2"));
        }
        check_mesh(s.mesh_n, "solver.mesh_n")?;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return Err(invalid(format!("solver.dt must be positive, got {}", s.dt)));
        }
        if !(s.final_time > 0.0 && s.final_time.is_finite()) {
            return Err(invalid(format!("solver.final_time must be positive, got {}", s.final_time)));
        }
        let ratio = s.final_time / s.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid(format!(
                "solver.dt = {} does not divide solver.final_time = {}",
                s.dt, s.final_time
            )));
        }
        if !(s.cg_tol > 0.0) || s.cg_max_iter == 0 {
            return Err(invalid("solver.cg_tol and solver.cg_max_iter must be positive"));
        }
        if !(s.diffusion > 0.0 && s.diffusion.is_finite()) {
            return Err(invalid("solver.diffusion must be positive"));
        }
        if !s.neumann_flux.is_finite() {
            return Err(invalid("solver.neumann_flux must be finite"));
        }
        let check_ns = |v: usize, what: &str| {
            if v == 0 || v > n {
                Err(invalid(format!("{what} = {v} must lie in 1..={n}")))
            } else {
                Ok(())
            }
        };
        check_ns(self.grid.n_s, "grid.n_s")?;
        let st = &self.study;
        for &v in &st.converge_ns {
            check_ns(v, "study.converge_ns entry")?;
        }
        for &v in &st.truncation_ns {
            check_ns(v, "study.truncation_ns entry")?;
        }
        if let Some(r) = st.reference_n_s {
            check_ns(r, "study.reference_n_s")?;
        }
        check_ns(st.truncation_reference_n_s, "study.truncation_reference_n_s")?;
        check_mesh(st.reference_mesh_n, "study.reference_mesh_n")?;
        if st.reference_mesh_n < s.mesh_n {
            return Err(invalid("study.reference_mesh_n must be >= solver.mesh_n"));
        }
        self.bounds.validate()?;
        Ok(())
    }

    /// Everything that determines a single node solve, with floats written
    /// bit-exactly. Cached values are only reused under an equal string.
    pub fn fidelity_fingerprint(&self, mesh_n: usize) -> String {
        let m = &self.model;
        let s = &self.solver;
        let b = |v: f64| format!("{:016x}", v.to_bits());
        format!(
            "v1;mesh={mesh_n};dt={};T={};tol={};maxit={};a={};g2={};q={:?};N={};L={};Lp={};c={};decay={};hw={};lead={:?}",
            b(s.dt),
            b(s.final_time),
            b(s.cg_tol),
            s.cg_max_iter,
            b(s.diffusion),
            b(s.neumann_flux),
            self.study.qoi_weight,
            m.n_modes,
            b(m.correlation_length),
            b(m.period),
            b(m.scaling),
            b(m.decay_exponent),
            b(m.variable_half_width),
            m.leading_mode,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        StudyConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = StudyConfig::default();
        c.solver.mesh_n = 64;
        assert!(c.validate().is_err());
        let mut c = StudyConfig::default();
        c.grid.n_s = 16;
        assert!(c.validate().is_err());
        let mut c = StudyConfig::default();
        c.solver.dt = 0.3;
        assert!(c.validate().is_err());
        let mut c = StudyConfig::default();
        c.solver.final_time = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn fingerprint_tracks_fidelity_only() {
        let a = StudyConfig::default();
        let mut b = a.clone();
        b.grid.level = 1;
        b.grid.n_s = 2;
        assert_eq!(a.fidelity_fingerprint(65), b.fidelity_fingerprint(65));
        assert_ne!(a.fidelity_fingerprint(65), a.fidelity_fingerprint(33));
        b.solver.dt = 0.005;
        assert_ne!(a.fidelity_fingerprint(65), b.fidelity_fingerprint(65));
    }
}
