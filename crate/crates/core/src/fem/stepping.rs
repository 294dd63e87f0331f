use super::sparse::{pcg, CgOptions, CsrMatrix};
use super::{FemError, Result};

/// `M u' + K u = b` on `(0, T]` with homogeneous Dirichlet dofs.
#[derive(Debug, Clone)]
pub struct TransientProblem {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub load: Vec<f64>,
    pub initial: Vec<f64>,
    pub dt: f64,
    pub final_time: f64,
    /// Constrained dofs, pinned to zero.
    pub dirichlet: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransientSolution {
    pub state: Vec<f64>,
    pub steps: usize,
    /// Conjugate-gradient iterations summed over all steps.
    pub iterations: usize,
}

impl TransientProblem {
    /// Number of steps; `dt` must divide `T` up to round-off.
    pub fn steps(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(FemError::InvalidProblem(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.final_time > 0.0 && self.final_time.is_finite()) {
            return Err(FemError::InvalidProblem(format!(
                "final time must be positive, got {}",
                self.final_time
            )));
        }
        let ratio = self.final_time / self.dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) || steps < 1.0 {
            return Err(FemError::InvalidProblem(format!(
                "dt = {} does not divide T = {}",
                self.dt, self.final_time
            )));
        }
        Ok(steps as usize)
    }

    fn validate(&self) -> Result<usize> {
        let n = self.mass.n;
        if !self.stiffness.same_pattern(&self.mass) {
            return Err(FemError::PatternMismatch);
        }
        if self.load.len() != n || self.initial.len() != n {
            return Err(FemError::InvalidProblem(format!(
                "vector lengths (load {}, initial {}) differ from {n} dofs",
                self.load.len(),
                self.initial.len()
            )));
        }
        if let Some(&d) = self.dirichlet.iter().find(|&&d| d >= n) {
            return Err(FemError::InvalidProblem(format!("dirichlet dof {d} out of range")));
        }
        self.steps()
    }
}

/// Backward Euler: `(M + dt K) u^{k+1} = M u^k + dt b`.
pub fn backward_euler_solve(problem: &TransientProblem, opts: CgOptions) -> Result<TransientSolution> {
    backward_euler_solve_observed(problem, opts, |_, _, _| {})
}

/// As [`backward_euler_solve`], calling `observer(step, t, u)` after every
/// step.
pub fn backward_euler_solve_observed<O>(
    problem: &TransientProblem,
    opts: CgOptions,
    observer: O,
) -> Result<TransientSolution>
where
    O: FnMut(usize, f64, &[f64]),
{
    let load = problem.load.clone();
    run(problem, opts, |_, b: &mut [f64]| b.copy_from_slice(&load), observer)
}

/// Time-dependent load: `forcing(t, b)` fills the load vector at `t^{k+1}`;
/// `problem.load` is ignored.
pub fn backward_euler_solve_forced<F, O>(
    problem: &TransientProblem,
    opts: CgOptions,
    forcing: F,
    observer: O,
) -> Result<TransientSolution>
where
    F: FnMut(f64, &mut [f64]),
    O: FnMut(usize, f64, &[f64]),
{
    run(problem, opts, forcing, observer)
}

fn run<F, O>(problem: &TransientProblem, opts: CgOptions, mut forcing: F, mut observer: O) -> Result<TransientSolution>
where
    F: FnMut(f64, &mut [f64]),
    O: FnMut(usize, f64, &[f64]),
{
    let steps = problem.validate()?;
    let n = problem.mass.n;
    let dt = problem.dt;
    let mut mask = vec![false; n];
    for &d in &problem.dirichlet {
        mask[d] = true;
    }
    let mut system = problem.mass.add_scaled(dt, &problem.stiffness)?;
    system.constrain(&mask);

    let mut u = problem.initial.clone();
    for (ui, &m) in u.iter_mut().zip(&mask) {
        if m {
            *ui = 0.0;
        }
    }
    let mut rhs = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut iterations = 0;
    for k in 1..=steps {
        let t = k as f64 * dt;
        forcing(t, &mut b);
        problem.mass.mul_vec_into(&u, &mut rhs);
        for i in 0..n {
            rhs[i] = if mask[i] { 0.0 } else { rhs[i] + dt * b[i] };
        }
        let stats = pcg(&system, &rhs, &mut u, opts)?;
        iterations += stats.iterations;
        observer(k, t, &u);
    }
    Ok(TransientSolution {
        state: u,
        steps,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_mass, assemble_stiffness, FemSpace, Mesh};
    use nalgebra::Matrix2;

    fn scalar(v: f64) -> CsrMatrix {
        let mut m = CsrMatrix::identity(1);
        m.values[0] = v;
        m
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = FemSpace::new(Mesh::structured(5).unwrap()).unwrap();
        let p = TransientProblem {
            stiffness: assemble_stiffness(&s, |_| Matrix2::identity()).unwrap(),
            mass: assemble_mass(&s, |_| 1.0).unwrap(),
            load: vec![0.0; 25],
            initial: vec![0.0; 25],
            dt: 0.1,
            final_time: 1.0,
            dirichlet: s.mesh.dirichlet_vertices(),
        };
        let sol = backward_euler_solve(&p, CgOptions::default()).unwrap();
        assert_eq!(sol.steps, 10);
        assert!(sol.state.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_recurrences() {
        // K = 0: u_k = u0 + k dt b / m
        let p = TransientProblem {
            stiffness: scalar(0.0),
            mass: scalar(2.0),
            load: vec![3.0],
            initial: vec![0.5],
            dt: 0.25,
            final_time: 2.0,
            dirichlet: vec![],
        };
        let sol = backward_euler_solve(&p, CgOptions { tol: 1e-14, ..Default::default() }).unwrap();
        assert!((sol.state[0] - (0.5 + 2.0 * 3.0 / 2.0)).abs() < 1e-13);

        // k > 0: u_{k+1} = (m u_k + dt b) / (m + dt k)
        let p = TransientProblem { stiffness: scalar(4.0), ..p };
        let mut expect = 0.5;
        for _ in 0..8 {
            expect = (2.0 * expect + 0.25 * 3.0) / (2.0 + 0.25 * 4.0);
        }
        let sol = backward_euler_solve(&p, CgOptions { tol: 1e-14, ..Default::default() }).unwrap();
        assert!((sol.state[0] - expect).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_step() {
        let p = TransientProblem {
            stiffness: scalar(1.0),
            mass: scalar(1.0),
            load: vec![0.0],
            initial: vec![0.0],
            dt: 0.3,
            final_time: 1.0,
            dirichlet: vec![],
        };
        assert!(matches!(backward_euler_solve(&p, CgOptions::default()), Err(FemError::InvalidProblem(_))));
        let p = TransientProblem { dt: -0.1, ..p };
        assert!(backward_euler_solve(&p, CgOptions::default()).is_err());
    }

    #[test]
    fn approaches_steady_state_monotonically() {
        let s = FemSpace::new(Mesh::structured(9).unwrap()).unwrap();
        let k = assemble_stiffness(&s, |_| Matrix2::identity()).unwrap();
        let m = assemble_mass(&s, |_| 1.0).unwrap();
        let load = s.neumann_load(1.0, |_, _| Ok(1.0)).unwrap();
        let dir = s.mesh.dirichlet_vertices();
        let mut mask = vec![false; s.num_dofs()];
        for &d in &dir {
            mask[d] = true;
        }
        let mut kc = k.clone();
        kc.constrain(&mask);
        let rhs: Vec<f64> = load.iter().zip(&mask).map(|(&b, &m)| if m { 0.0 } else { b }).collect();
        let (steady, _) = crate::fem::solve_linear(&kc, &rhs, 1e-13).unwrap();
        let p = TransientProblem {
            stiffness: k,
            mass: m,
            load,
            initial: vec![0.0; s.num_dofs()],
            dt: 0.05,
            final_time: 3.0,
            dirichlet: dir,
        };
        let mut dist = Vec::new();
        backward_euler_solve_observed(&p, CgOptions { tol: 1e-13, ..Default::default() }, |_, _, u| {
            dist.push(u.iter().zip(&steady).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt());
        })
        .unwrap();
        assert!(dist.windows(2).all(|w| w[1] <= w[0]));
        assert!(dist.last().unwrap() / dist[0] < 1e-2);
    }
}
