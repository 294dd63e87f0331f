use nalgebra::Matrix2;

use super::mesh::{BoundaryTag, Mesh};
use super::sparse::CsrMatrix;
use super::{FemError, Result};
use crate::deformation::{DeformationModel, Point, StochasticPoint};

/// Per-mesh data reused by every assembly: element gradients, areas and the
/// CSR positions of each local entry.
#[derive(Debug, Clone)]
pub struct FemSpace {
    pub mesh: Mesh,
    pattern: CsrMatrix,
    areas: Vec<f64>,
    grads: Vec<[[f64; 2]; 3]>,
    slots: Vec<[usize; 9]>,
    barycenters: Vec<Point>,
}

impl FemSpace {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let nv = mesh.num_vertices();
        let mut rows: Vec<Vec<usize>> = (0..nv).map(|i| vec![i]).collect();
        for t in &mesh.triangles {
            for &a in t {
                for &b in t {
                    rows[a].push(b);
                }
            }
        }
        let pattern = CsrMatrix::from_pattern(rows);
        let mut areas = Vec::with_capacity(mesh.triangles.len());
        let mut grads = Vec::with_capacity(mesh.triangles.len());
        let mut slots = Vec::with_capacity(mesh.triangles.len());
        let mut barycenters = Vec::with_capacity(mesh.triangles.len());
        for (k, tri) in mesh.triangles.iter().enumerate() {
            let area = mesh.signed_area(k);
            if !(area > 0.0) {
                return Err(FemError::InvalidMesh(format!("element {k} has non-positive area {area}")));
            }
            let p = tri.map(|v| mesh.vertices[v]);
            let inv = 1.0 / (2.0 * area);
            let mut g = [[0.0; 2]; 3];
            for (a, ga) in g.iter_mut().enumerate() {
                let (b, c) = ((a + 1) % 3, (a + 2) % 3);
                *ga = [(p[b][1] - p[c][1]) * inv, (p[c][0] - p[b][0]) * inv];
            }
            let mut s = [0usize; 9];
            for a in 0..3 {
                for b in 0..3 {
                    let (i, j) = (tri[a], tri[b]);
                    let (lo, hi) = (pattern.row_offsets[i], pattern.row_offsets[i + 1]);
                    s[3 * a + b] = lo + pattern.col_indices[lo..hi].binary_search(&j).unwrap();
                }
            }
            areas.push(area);
            grads.push(g);
            slots.push(s);
            barycenters.push(mesh.barycenter(k));
        }
        Ok(Self {
            mesh,
            pattern,
            areas,
            grads,
            slots,
            barycenters,
        })
    }

    pub fn num_dofs(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.triangles.len()
    }

    pub fn barycenters(&self) -> &[Point] {
        &self.barycenters
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn zero_matrix(&self) -> CsrMatrix {
        self.pattern.clone()
    }

    /// Stiffness with one constant coefficient matrix per element.
    pub fn stiffness(&self, coefficients: &[Matrix2<f64>]) -> Result<CsrMatrix> {
        let mut k = self.pattern.clone();
        for (e, g) in coefficients.iter().enumerate() {
            if g.iter().any(|v| !v.is_finite()) {
                return Err(FemError::NonFiniteCoefficient(e));
            }
            let (g00, g11) = (g[(0, 0)], g[(1, 1)]);
            let g01 = 0.5 * (g[(0, 1)] + g[(1, 0)]);
            let grads = &self.grads[e];
            let area = self.areas[e];
            let s = &self.slots[e];
            for a in 0..3 {
                let [ax, ay] = grads[a];
                let (gx, gy) = (g00 * ax + g01 * ay, g01 * ax + g11 * ay);
                for b in a..3 {
                    let [bx, by] = grads[b];
                    let v = area * (gx * bx + gy * by);
                    k.values[s[3 * a + b]] += v;
                    if b != a {
                        k.values[s[3 * b + a]] += v;
                    }
                }
            }
        }
        Ok(k)
    }

    /// Consistent P1 mass scaled by one weight per element.
    pub fn mass(&self, weights: &[f64]) -> Result<CsrMatrix> {
        let mut m = self.pattern.clone();
        for (e, &w) in weights.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(FemError::NonPositiveWeight { element: e, weight: w });
            }
            let s = &self.slots[e];
            let diag = w * self.areas[e] / 6.0;
            let off = w * self.areas[e] / 12.0;
            for a in 0..3 {
                for b in 0..3 {
                    m.values[s[3 * a + b]] += if a == b { diag } else { off };
                }
            }
        }
        Ok(m)
    }

    /// Trapezoidal Neumann load `Σ_edges ∫ factor · g₂ · φ_i`, with the
    /// boundary factor `det(∂F) |∂F⁻ᵀ n|` evaluated at the edge midpoint.
    pub fn neumann_load<F>(&self, g2: f64, mut factor: F) -> Result<Vec<f64>>
    where
        F: FnMut(Point, [f64; 2]) -> Result<f64>,
    {
        let mut b = vec![0.0; self.num_dofs()];
        for edge in &self.mesh.boundary_edges {
            if edge.tag != BoundaryTag::Neumann {
                continue;
            }
            let [i, j] = edge.vertices;
            let (p, q) = (self.mesh.vertices[i], self.mesh.vertices[j]);
            let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
            let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
            let f = factor(mid, edge.normal)?;
            let contribution = 0.5 * len * f * g2;
            b[i] += contribution;
            b[j] += contribution;
        }
        Ok(b)
    }
}

/// Stiffness for a coefficient field sampled at element barycenters.
pub fn assemble_stiffness<G>(space: &FemSpace, field: G) -> Result<CsrMatrix>
where
    G: Fn(Point) -> Matrix2<f64>,
{
    let coefficients: Vec<Matrix2<f64>> = space.barycenters.iter().map(|&x| field(x)).collect();
    space.stiffness(&coefficients)
}

/// Mass for a positive weight field sampled at element barycenters.
pub fn assemble_mass<W>(space: &FemSpace, weight: W) -> Result<CsrMatrix>
where
    W: Fn(Point) -> f64,
{
    let weights: Vec<f64> = space.barycenters.iter().map(|&x| weight(x)).collect();
    space.mass(&weights)
}

/// Neumann load of flux `g₂` mapped through the deformation at `y`.
pub fn assemble_neumann_load(
    space: &FemSpace,
    g2: f64,
    model: &DeformationModel,
    y: &StochasticPoint,
) -> Result<Vec<f64>> {
    space.neumann_load(g2, |mid, n| Ok(boundary_factor(&model.jacobian(mid, y)?, n)))
}

/// `det(J) |J⁻ᵀ n| / |n|`.
pub fn boundary_factor(j: &Matrix2<f64>, n: [f64; 2]) -> f64 {
    let det = j.determinant();
    // det · J⁻ᵀ = cof(J)
    let v = [j[(1, 1)] * n[0] - j[(1, 0)] * n[1], -j[(0, 1)] * n[0] + j[(0, 0)] * n[1]];
    let num = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let nn = (n[0] * n[0] + n[1] * n[1]).sqrt();
    num * det.signum() / nn
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::ExperimentModelParams;
    use crate::deformation::SupSampling;

    fn space(n: usize) -> FemSpace {
        FemSpace::new(Mesh::structured(n).unwrap()).unwrap()
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let s = space(6);
        let k = assemble_stiffness(&s, |_| Matrix2::identity()).unwrap();
        for i in 0..k.n {
            let row: f64 = k.row(i).map(|(_, v)| v).sum();
            assert!(row.abs() < 1e-13, "row {i} sums to {row}");
        }
        // interior row of the structured P1 Laplacian is the 5-point stencil
        let c = 2 * 6 + 2;
        assert!((k.get(c, c) - 4.0).abs() < 1e-13);
        assert!((k.get(c, c + 1) + 1.0).abs() < 1e-13);
        assert!((k.get(c, c + 6) + 1.0).abs() < 1e-13);
        assert_eq!(k.get(c, c + 7), 0.0);
        assert_eq!(k.asymmetry(), 0.0);
    }

    #[test]
    fn stiffness_is_linear_in_coefficient() {
        let s = space(7);
        let g1 = |x: Point| Matrix2::new(1.0 + x[0], 0.2 * x[1], 0.2 * x[1], 2.0 - x[0] * x[1]);
        let g2 = |x: Point| Matrix2::new(0.5, -0.1 * x[0], -0.1 * x[0], 1.0 + x[1] * x[1]);
        let k1 = assemble_stiffness(&s, g1).unwrap();
        let k2 = assemble_stiffness(&s, g2).unwrap();
        let k = assemble_stiffness(&s, |x| g1(x) * 2.0 - g2(x) * 3.0).unwrap();
        let comb = k1.add_scaled(-1.5, &k2).unwrap();
        for (a, b) in k.values.iter().zip(&comb.values) {
            assert!((a - 2.0 * b).abs() < 1e-13);
        }
        let ki = assemble_stiffness(&s, |_| Matrix2::identity()).unwrap();
        let k2i = assemble_stiffness(&s, |_| Matrix2::identity() * 2.0).unwrap();
        for (a, b) in ki.values.iter().zip(&k2i.values) {
            assert_eq!(2.0 * a, *b);
        }
        assert_eq!(k1.asymmetry(), 0.0);
    }

    #[test]
    fn non_finite_coefficient_rejected() {
        let s = space(3);
        let e = assemble_stiffness(&s, |_| Matrix2::new(f64::NAN, 0.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(e, FemError::NonFiniteCoefficient(0)));
    }

    #[test]
    fn mass_properties() {
        let s = space(9);
        let m = assemble_mass(&s, |_| 1.0).unwrap();
        assert!((m.sum() - 1.0).abs() < 1e-13);
        assert_eq!(m.asymmetry(), 0.0);
        let one = space(2);
        let m1 = assemble_mass(&one, |_| 1.0).unwrap();
        // vertices 0 and 3 (the diagonal) are shared by both triangles, area 1/2 each
        let a = 0.5;
        assert!((m1.get(1, 1) - 2.0 * a / 12.0).abs() < 1e-15);
        assert!((m1.get(1, 3) - a / 12.0).abs() < 1e-15);
        assert_eq!(m1.get(1, 2), 0.0);
        assert!((m1.get(0, 0) - 4.0 * a / 12.0).abs() < 1e-15);
        assert!(matches!(
            assemble_mass(&s, |_| 0.0),
            Err(FemError::NonPositiveWeight { .. })
        ));
        let rhs: Vec<f64> = (0..m.n).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let (_, stats) = crate::fem::solve_linear(&m, &rhs, 1e-10).unwrap();
        assert!(stats.relative_residual <= 1e-10);
    }

    #[test]
    fn identity_neumann_load() {
        let s = space(5);
        let model =
            DeformationModel::experiment(&ExperimentModelParams::default(), SupSampling { vertices_per_side: 5 })
                .unwrap();
        let y = StochasticPoint::zeros(model.dim());
        let b = assemble_neumann_load(&s, 1.0, &model, &y).unwrap();
        let h = 0.25;
        assert!((b.iter().sum::<f64>() - 3.0).abs() < 1e-14);
        assert!((b[0] - h).abs() < 1e-15); // corner: two neumann edges
        assert!((b[1] - h).abs() < 1e-15);
        assert!((b[20] - h / 2.0).abs() < 1e-15); // top-left: one neumann edge
        assert_eq!(b[12], 0.0);
        let direct = s.neumann_load(1.0, |_, _| Ok(1.0)).unwrap();
        assert_eq!(b, direct);
    }

    #[test]
    fn boundary_factor_matches_tangent_stretch() {
        // Nanson: det(J)|J^{-T} n| = |J t| for the unit tangent t ⟂ n in 2D
        let j = Matrix2::new(1.0, 0.0, 0.3, 1.4);
        let f = boundary_factor(&j, [-1.0, 0.0]);
        assert!((f - 1.4).abs() < 1e-15);
        let f = boundary_factor(&j, [0.0, -1.0]);
        assert!((f - (1.0f64 + 0.09).sqrt()).abs() < 1e-15);
    }
}
