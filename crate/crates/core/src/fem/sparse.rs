use super::{FemError, Result};

/// Compressed sparse row matrix with sorted column indices in every row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the pattern given by per-row column lists.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_indices.extend(r);
            row_offsets.push(col_indices.len());
        }
        let nnz = col_indices.len();
        Self {
            n,
            row_offsets,
            col_indices,
            values: vec![0.0; nnz],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_pattern((0..n).map(|i| vec![i]).collect());
        m.values.fill(1.0);
        m
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && self.row_offsets == other.row_offsets && self.col_indices == other.col_indices
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        self.col_indices[s..e].binary_search(&j).ok().map(|k| s + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`; the entry must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
        self.col_indices[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_indices[k]];
            }
            *yi = acc;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `self + alpha · other` on a shared pattern.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        if !self.same_pattern(other) {
            return Err(FemError::PatternMismatch);
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(out)
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    /// Replaces rows and columns of constrained dofs by identity rows.
    pub fn constrain(&mut self, mask: &[bool]) {
        for i in 0..self.n {
            let (s, e) = (self.row_offsets[i], self.row_offsets[i + 1]);
            for k in s..e {
                let j = self.col_indices[k];
                if mask[i] || mask[j] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |A - Aᵀ|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradients, starting from `x`.
///
/// Stops when `‖b - Ax‖ ≤ tol · ‖b‖`.
pub fn pcg(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: CgOptions) -> Result<SolveStats> {
    let n = a.n;
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut r = a.mul_vec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rnorm = dot(&r, &r).sqrt();
    if rnorm <= opts.tol * bnorm {
        return Ok(SolveStats {
            iterations: 0,
            relative_residual: rnorm / bnorm,
        });
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=opts.max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(FemError::NotConverged {
                iterations: it,
                relative_residual: rnorm / bnorm,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= opts.tol * bnorm {
            return Ok(SolveStats {
                iterations: it,
                relative_residual: rnorm / bnorm,
            });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(FemError::NotConverged {
        iterations: opts.max_iter,
        relative_residual: rnorm / bnorm,
    })
}

/// Solves `A x = b` from a zero initial guess.
pub fn solve_linear(a: &CsrMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    let mut x = vec![0.0; a.n];
    let stats = pcg(
        a,
        b,
        &mut x,
        CgOptions {
            tol,
            ..CgOptions::default()
        },
    )?;
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_in_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let (x, stats) = solve_linear(&a, &b, 1e-10).unwrap();
        assert_eq!(x, b);
        assert_eq!(stats.iterations, 1);
    }

    #[test]
    fn random_spd_matches_dense_cholesky() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 10;
        let g = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let spd = &g * g.transpose() + DMatrix::identity(n, n) * n as f64;
        let mut a = CsrMatrix::from_pattern((0..n).map(|_| (0..n).collect()).collect());
        for i in 0..n {
            for j in 0..n {
                a.add(i, j, spd[(i, j)]);
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (x, stats) = solve_linear(&a, &b, 1e-12).unwrap();
        let exact = spd.clone().cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
        for i in 0..n {
            assert!((x[i] - exact[i]).abs() < 1e-9);
        }
        let r = a.mul_vec(&x);
        let res: f64 = r.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res / bn <= 1e-12 * 1.0001);
        assert!(stats.relative_residual <= 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let n = 50;
        let mut a = CsrMatrix::from_pattern(
            (0..n)
                .map(|i| {
                    let mut r = vec![i];
                    if i > 0 {
                        r.push(i - 1);
                    }
                    if i + 1 < n {
                        r.push(i + 1);
                    }
                    r
                })
                .collect(),
        );
        for i in 0..n {
            a.add(i, i, 2.0);
            if i > 0 {
                a.add(i, i - 1, -1.0);
            }
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let e = pcg(&a, &b, &mut x, CgOptions { tol: 1e-14, max_iter: 3 }).unwrap_err();
        assert!(matches!(e, FemError::NotConverged { iterations: 3, .. }));
    }
}
