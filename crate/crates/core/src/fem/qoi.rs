use super::assembly::FemSpace;
use super::{FemError, Result};
use crate::deformation::Point;

/// Integration region of the quantity of interest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Subdomain {
    /// `x₂ < 0.5`; must be resolved by a vertex row.
    #[default]
    BottomHalf,
    Whole,
}

/// `q(x₁, x₂) = g(x₁) g(2 x₂)` with `g(s) = s(1 - s)`.
pub fn separable_weight(x: Point) -> f64 {
    let g = |s: f64| s * (1.0 - s);
    g(x[0]) * g(2.0 * x[1])
}

/// The linear functional `u ↦ Σ_{K ⊂ D} ∫_K q u_h`, stored as one
/// coefficient per dof.
#[derive(Debug, Clone, PartialEq)]
pub struct QoiFunctional {
    coefficients: Vec<f64>,
}

impl QoiFunctional {
    /// `q` is sampled once per element at the barycenter; the P1 factor is
    /// integrated exactly.
    pub fn new<Q>(space: &FemSpace, q: Q, subdomain: Subdomain) -> Result<Self>
    where
        Q: Fn(Point) -> f64,
    {
        let mesh = &space.mesh;
        let mut coefficients = vec![0.0; space.num_dofs()];
        for (k, tri) in mesh.triangles.iter().enumerate() {
            if subdomain == Subdomain::BottomHalf {
                const TOL: f64 = 1e-12;
                let below = tri.iter().all(|&v| mesh.vertices[v][1] <= 0.5 + TOL);
                let above = tri.iter().all(|&v| mesh.vertices[v][1] >= 0.5 - TOL);
                if !below && !above {
                    return Err(FemError::UnalignedSubdomain(k));
                }
                if space.barycenters()[k][1] >= 0.5 {
                    continue;
                }
            }
            let share = q(space.barycenters()[k]) * space.areas()[k] / 3.0;
            for &v in tri {
                coefficients[v] += share;
            }
        }
        Ok(Self { coefficients })
    }

    pub fn evaluate(&self, u: &[f64]) -> f64 {
        self.coefficients.iter().zip(u).map(|(c, v)| c * v).sum()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

pub fn evaluate_qoi<Q>(space: &FemSpace, u: &[f64], q: Q, subdomain: Subdomain) -> Result<f64>
where
    Q: Fn(Point) -> f64,
{
    Ok(QoiFunctional::new(space, q, subdomain)?.evaluate(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Mesh;

    #[test]
    fn area_and_zero() {
        let s = FemSpace::new(Mesh::structured(9).unwrap()).unwrap();
        let ones = vec![1.0; s.num_dofs()];
        let v = evaluate_qoi(&s, &ones, |_| 1.0, Subdomain::BottomHalf).unwrap();
        assert!((v - 0.5).abs() < 1e-14);
        let w = evaluate_qoi(&s, &ones, |_| 1.0, Subdomain::Whole).unwrap();
        assert!((w - 1.0).abs() < 1e-14);
        assert_eq!(evaluate_qoi(&s, &vec![0.0; s.num_dofs()], separable_weight, Subdomain::BottomHalf).unwrap(), 0.0);
    }

    #[test]
    fn unaligned_subdomain() {
        let s = FemSpace::new(Mesh::structured(4).unwrap()).unwrap();
        assert!(matches!(
            QoiFunctional::new(&s, |_| 1.0, Subdomain::BottomHalf),
            Err(FemError::UnalignedSubdomain(_))
        ));
    }

    #[test]
    fn linear_in_u() {
        let s = FemSpace::new(Mesh::structured(11).unwrap()).unwrap();
        let q = QoiFunctional::new(&s, separable_weight, Subdomain::BottomHalf).unwrap();
        let u1: Vec<f64> = (0..s.num_dofs()).map(|i| (i as f64 * 0.3).sin()).collect();
        let u2: Vec<f64> = (0..s.num_dofs()).map(|i| (i as f64 * 0.7).cos()).collect();
        let sum: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + b).collect();
        assert!((q.evaluate(&sum) - q.evaluate(&u1) - q.evaluate(&u2)).abs() < 1e-15);
    }
}
