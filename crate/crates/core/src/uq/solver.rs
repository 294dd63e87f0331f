use std::time::Instant;

use nalgebra::Matrix2;

use super::cache::CachedSolve;
use super::config::{check_mesh, QoiWeight, StudyConfig};
use super::Result;
use crate::deformation::{coefficient_from_jacobian, DeformationError, DeformationModel, StochasticPoint};
use crate::fem::{
    assemble_neumann_load, backward_euler_solve, separable_weight, CgOptions, FemSpace, Mesh, QoiFunctional,
    Subdomain, TransientProblem,
};

/// Everything needed to evaluate the QoI at one stochastic point: the mesh,
/// the QoI functional and the full `N`-mode model.
///
/// Points of lower dimension are padded with zeros, which reproduces the
/// truncated model exactly.
#[derive(Debug, Clone)]
pub struct CollocationSolver {
    space: FemSpace,
    qoi: QoiFunctional,
    model: DeformationModel,
    dirichlet: Vec<usize>,
    dt: f64,
    final_time: f64,
    diffusion: f64,
    neumann_flux: f64,
    cg: CgOptions,
}

impl CollocationSolver {
    pub fn new(config: &StudyConfig, mesh_n: usize) -> Result<Self> {
        check_mesh(mesh_n, "mesh_n")?;
        let model = config.model.build()?;
        let space = FemSpace::new(Mesh::structured(mesh_n)?)?;
        let qoi = match config.study.qoi_weight {
            QoiWeight::Separable => QoiFunctional::new(&space, separable_weight, Subdomain::BottomHalf)?,
            QoiWeight::Unit => QoiFunctional::new(&space, |_| 1.0, Subdomain::BottomHalf)?,
        };
        let s = &config.solver;
        Ok(Self {
            dirichlet: space.mesh.dirichlet_vertices(),
            space,
            qoi,
            model,
            dt: s.dt,
            final_time: s.final_time,
            diffusion: s.diffusion,
            neumann_flux: s.neumann_flux,
            cg: CgOptions {
                tol: s.cg_tol,
                max_iter: s.cg_max_iter,
            },
        })
    }

    pub fn model(&self) -> &DeformationModel {
        &self.model
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    /// Final-time nodal solution at `y`.
    pub fn solve_state(&self, y: &StochasticPoint) -> Result<(Vec<f64>, usize)> {
        let y = y.padded(self.model.dim());
        let ne = self.space.num_elements();
        let mut coefficients = Vec::with_capacity(ne);
        let mut weights = Vec::with_capacity(ne);
        for &x in self.space.barycenters() {
            let j = self.model.jacobian(x, &y)?;
            let det = j.determinant();
            if !(det > 0.0) {
                return Err(DeformationError::SingularJacobian { det, x }.into());
            }
            let g: Matrix2<f64> = coefficient_from_jacobian(&j, self.diffusion);
            coefficients.push(g);
            weights.push(det);
        }
        let problem = TransientProblem {
            stiffness: self.space.stiffness(&coefficients)?,
            mass: self.space.mass(&weights)?,
            load: assemble_neumann_load(&self.space, self.neumann_flux, &self.model, &y)?,
            initial: vec![0.0; self.space.num_dofs()],
            dt: self.dt,
            final_time: self.final_time,
            dirichlet: self.dirichlet.clone(),
        };
        let sol = backward_euler_solve(&problem, self.cg)?;
        Ok((sol.state, sol.iterations))
    }

    /// Un-normalized QoI at `y`, with solver statistics.
    pub fn solve(&self, y: &StochasticPoint) -> Result<CachedSolve> {
        let start = Instant::now();
        let (state, iterations) = self.solve_state(y)?;
        Ok(CachedSolve {
            qoi_raw: self.qoi.evaluate(&state),
            iterations,
            seconds: start.elapsed().as_secs_f64(),
        })
    }
}
