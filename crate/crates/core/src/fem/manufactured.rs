use std::f64::consts::PI;
use std::fmt;

use nalgebra::Matrix2;

use super::assembly::FemSpace;
use super::mesh::{BoundaryLayout, Mesh};
use super::sparse::CgOptions;
use super::stepping::{backward_euler_solve_forced, TransientProblem};
use super::Result;
use crate::deformation::Point;

type SpaceTime = Box<dyn Fn(Point, f64) -> f64 + Send + Sync>;

/// A heat-equation problem `u_t - Δu = f` with known exact solution.
pub struct ManufacturedCase {
    pub exact: SpaceTime,
    pub forcing: SpaceTime,
    pub layout: BoundaryLayout,
    pub final_time: f64,
    /// `dt = dt_factor · h²`.
    pub dt_factor: f64,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("layout", &self.layout)
            .field("final_time", &self.final_time)
            .field("dt_factor", &self.dt_factor)
            .finish_non_exhaustive()
    }
}

impl ManufacturedCase {
    /// `u = sin(πx₁) sin(πx₂) e^{-t}`, so `f = (2π² - 1) u`.
    pub fn heat_sine() -> Self {
        let u = |x: Point, t: f64| (PI * x[0]).sin() * (PI * x[1]).sin() * (-t).exp();
        Self {
            exact: Box::new(u),
            forcing: Box::new(move |x, t| (2.0 * PI * PI - 1.0) * u(x, t)),
            layout: BoundaryLayout::AllDirichlet,
            final_time: 0.125,
            dt_factor: 1.0,
        }
    }

    pub fn zero() -> Self {
        Self {
            exact: Box::new(|_, _| 0.0),
            forcing: Box::new(|_, _| 0.0),
            ..Self::heat_sine()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub mesh_sizes: Vec<usize>,
    pub h: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares slope of `log error` against `log h`; `None` when an
    /// error vanishes.
    pub rate: Option<f64>,
}

// degree-4 rule with 6 points (barycentric coordinates, weights sum to 1)
const QUAD6: [([f64; 3], f64); 6] = [
    ([0.445948490915965, 0.445948490915965, 0.108103018168070], 0.223381589678011),
    ([0.445948490915965, 0.108103018168070, 0.445948490915965], 0.223381589678011),
    ([0.108103018168070, 0.445948490915965, 0.445948490915965], 0.223381589678011),
    ([0.091576213509771, 0.091576213509771, 0.816847572980459], 0.109951743655322),
    ([0.091576213509771, 0.816847572980459, 0.091576213509771], 0.109951743655322),
    ([0.816847572980459, 0.091576213509771, 0.091576213509771], 0.109951743655322),
];

fn l2_error(space: &FemSpace, u: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let mesh = &space.mesh;
    let mut err = 0.0;
    for (k, tri) in mesh.triangles.iter().enumerate() {
        let p = tri.map(|v| mesh.vertices[v]);
        for (lam, w) in QUAD6 {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let uh = lam[0] * u[tri[0]] + lam[1] * u[tri[1]] + lam[2] * u[tri[2]];
            err += w * space.areas()[k] * (uh - exact(x)).powi(2);
        }
    }
    err.sqrt()
}

/// Final-time `L²` errors over the given meshes and the fitted rate.
pub fn manufactured_convergence(case: &ManufacturedCase, mesh_sizes: &[usize]) -> Result<ConvergenceReport> {
    let mut h = Vec::new();
    let mut errors = Vec::new();
    for &n in mesh_sizes {
        let space = FemSpace::new(Mesh::structured_with(n, case.layout)?)?;
        let nd = space.num_dofs();
        let hk = space.mesh.h();
        let steps = (case.final_time / (case.dt_factor * hk * hk)).round().max(1.0);
        let dt = case.final_time / steps;
        let stiffness = space.stiffness(&vec![Matrix2::identity(); space.num_elements()])?;
        let mass = space.mass(&vec![1.0; space.num_elements()])?;
        let initial: Vec<f64> = space.mesh.vertices.iter().map(|&x| (case.exact)(x, 0.0)).collect();
        let problem = TransientProblem {
            stiffness,
            mass,
            load: vec![0.0; nd],
            initial,
            dt,
            final_time: case.final_time,
            dirichlet: space.mesh.dirichlet_vertices(),
        };
        let mut nodal = vec![0.0; nd];
        let verts = space.mesh.vertices.clone();
        let forcing = |t: f64, b: &mut [f64]| {
            for (v, x) in nodal.iter_mut().zip(&verts) {
                *v = (case.forcing)(*x, t);
            }
            problem.mass.mul_vec_into(&nodal, b);
        };
        let sol = backward_euler_solve_forced(
            &problem,
            CgOptions { tol: 1e-12, ..CgOptions::default() },
            forcing,
            |_, _, _| {},
        )?;
        h.push(hk);
        errors.push(l2_error(&space, &sol.state, |x| (case.exact)(x, case.final_time)));
    }
    let rate = if errors.iter().all(|&e| e > 0.0) && errors.len() >= 2 {
        let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
        let ys: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
        Some(fit_slope(&xs, &ys))
    } else {
        None
    };
    Ok(ConvergenceReport {
        mesh_sizes: mesh_sizes.to_vec(),
        h,
        errors,
        rate,
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
