//! Isotropic Smolyak sparse grids on `[-1, 1]^d` built from Clenshaw-Curtis
//! abscissas, using the combination technique.
//!
//! Nodes are identified by exact integer keys: the Clenshaw-Curtis node
//! `-cos(π j / (m - 1))` is stored as the reduced fraction `j / (m - 1)`, so
//! deduplication across tensor rules never compares floating-point values.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("level must be >= 1, got {0}")]
    Level(u32),
    #[error("dimension must be >= 1")]
    Dimension,
    #[error("unknown grid family `{0}`")]
    UnknownFamily(String),
    #[error("index set is not downward closed: {0:?} is missing")]
    NotDownwardClosed(Vec<u32>),
    #[error("expected {expected} node values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("point has {got} coordinates, grid dimension is {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("density ratio must be positive, got {0} at node {1}")]
    DensityRatio(f64, usize),
}

pub type Result<T> = std::result::Result<T, GridError>;

/// Index-set families: Smolyak (doubling growth, total level), total degree,
/// hyperbolic cross and full tensor product (linear growth).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Family {
    SM,
    TD,
    HC,
    TP,
}

impl FromStr for Family {
    type Err = GridError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SM" => Ok(Family::SM),
            "TD" => Ok(Family::TD),
            "HC" => Ok(Family::HC),
            "TP" => Ok(Family::TP),
            _ => Err(GridError::UnknownFamily(s.to_string())),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::SM => "SM",
            Family::TD => "TD",
            Family::HC => "HC",
            Family::TP => "TP",
        };
        f.write_str(s)
    }
}

impl Family {
    /// Number of 1D points `m(i)` at level `i ≥ 1`.
    pub fn points(self, i: u32) -> usize {
        match self {
            Family::SM => doubling_points(i),
            Family::TD | Family::HC | Family::TP => i as usize,
        }
    }

    /// Level function `g(i)`; an index is admissible when `g(i) ≤ w`.
    pub fn level(self, index: &[u32]) -> u64 {
        match self {
            Family::SM | Family::TD => index.iter().map(|&i| (i - 1) as u64).sum(),
            Family::TP => index.iter().map(|&i| (i - 1) as u64).max().unwrap_or(0),
            Family::HC => index.iter().map(|&i| i as u64).product::<u64>() - 1,
        }
    }

    /// Smallest level `i` with `m(i) ≥ p + 1`, i.e. the level at which the
    /// 1D interpolant first reproduces degree `p`.
    pub fn level_for_degree(self, p: u32) -> u32 {
        (1..).find(|&i| self.points(i) > p as usize).unwrap()
    }
}

/// `m(1) = 1`, `m(i) = 2^{i-1} + 1`.
pub fn doubling_points(i: u32) -> usize {
    if i <= 1 {
        1
    } else {
        (1usize << (i - 1)) + 1
    }
}

/// `f(0) = 0`, `f(1) = 1`, `f(p) = ⌈log₂ p⌉`.
pub fn smolyak_degree_level(p: u32) -> u32 {
    match p {
        0 => 0,
        1 => 1,
        _ => 32 - (p - 1).leading_zeros(),
    }
}

/// Reduced fraction `num / den` identifying the abscissa `-cos(π num / den)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Abscissa {
    pub num: u32,
    pub den: u32,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Abscissa {
    /// Node `j` (0-based) of the `m`-point Clenshaw-Curtis rule.
    pub fn of_rule(j: usize, m: usize) -> Self {
        if m == 1 {
            return Self { num: 1, den: 2 };
        }
        let (j, n) = (j as u32, (m - 1) as u32);
        let g = gcd(j, n);
        Self { num: j / g, den: n / g }
    }

    pub fn value(self) -> f64 {
        // -cos(π t) = sin(π (t - 1/2)); exact at 0 and ±1, odd-symmetric
        let num = 2 * self.num as i64 - self.den as i64;
        (PI * num as f64 / (2 * self.den) as f64).sin()
    }
}

impl Ord for Abscissa {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u64 * other.den as u64).cmp(&(other.num as u64 * self.den as u64))
    }
}

impl PartialOrd for Abscissa {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Canonical key of a grid node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeKey(pub Vec<Abscissa>);

impl NodeKey {
    pub fn point(&self) -> Vec<f64> {
        self.0.iter().map(|a| a.value()).collect()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The same node seen in a higher-dimensional space (extra coordinates 0).
    pub fn padded(&self, n: usize) -> NodeKey {
        let mut v = self.0.clone();
        v.resize(n.max(v.len()), Abscissa { num: 1, den: 2 });
        NodeKey(v)
    }
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, a) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(":")?;
            }
            write!(f, "{}/{}", a.num, a.den)?;
        }
        Ok(())
    }
}

impl FromStr for NodeKey {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(':')
            .map(|part| {
                let (n, d) = part.split_once('/').ok_or_else(|| format!("bad key component `{part}`"))?;
                let num = n.trim().parse::<u32>().map_err(|e| e.to_string())?;
                let den = d.trim().parse::<u32>().map_err(|e| e.to_string())?;
                if den == 0 || num > den || gcd(num, den) != 1 {
                    return Err(format!("non-canonical key component `{part}`"));
                }
                Ok(Abscissa { num, den })
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(NodeKey)
    }
}

/// Nodes of the `m`-point Clenshaw-Curtis rule, ascending.
fn cc_nodes_m(m: usize) -> Vec<f64> {
    (0..m).map(|j| Abscissa::of_rule(j, m).value()).collect()
}

/// Clenshaw-Curtis weights for the uniform density `1/2` on `[-1, 1]`.
fn cc_weights_m(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![1.0];
    }
    let n = m - 1;
    (0..m)
        .map(|j| {
            let theta = j as f64 * PI / n as f64;
            let mut s = 1.0;
            for k in 1..=n / 2 {
                let b = if 2 * k == n { 1.0 } else { 2.0 };
                s -= b * (2.0 * k as f64 * theta).cos() / (4.0 * (k * k) as f64 - 1.0);
            }
            let c = if j == 0 || j == n { 1.0 } else { 2.0 };
            // weights on [-1, 1] sum to 2; halve for the density
            0.5 * c * s / n as f64
        })
        .collect()
}

/// Nested Clenshaw-Curtis nodes at level `i`: `m(i) = 1` for `i = 1`,
/// `2^{i-1} + 1` otherwise.
pub fn cc_nodes_1d(i: u32) -> Result<Vec<f64>> {
    if i < 1 {
        return Err(GridError::Level(i));
    }
    Ok(cc_nodes_m(doubling_points(i)))
}

/// Quadrature weights matching [`cc_nodes_1d`] for the density `1/2`.
pub fn cc_weights_1d(i: u32) -> Result<Vec<f64>> {
    if i < 1 {
        return Err(GridError::Level(i));
    }
    Ok(cc_weights_m(doubling_points(i)))
}

/// Multi-indices `i ∈ N_+^d` with `g(i) ≤ w`, lexicographically sorted.
pub fn admissible_indices(dim: usize, w: u32, family: Family) -> Result<Vec<Vec<u32>>> {
    if dim == 0 {
        return Err(GridError::Dimension);
    }
    let mut out = Vec::new();
    let mut cur = vec![1u32; dim];
    enumerate(&mut cur, 0, w as u64, family, &mut out);
    out.sort();
    Ok(out)
}

fn enumerate(cur: &mut Vec<u32>, pos: usize, w: u64, family: Family, out: &mut Vec<Vec<u32>>) {
    if pos == cur.len() {
        out.push(cur.clone());
        return;
    }
    let mut i = 1;
    loop {
        cur[pos] = i;
        // g is increasing in each argument, so the prefix with ones elsewhere
        // decides whether larger i can still be admissible
        let saved: Vec<u32> = cur[pos + 1..].to_vec();
        for v in &mut cur[pos + 1..] {
            *v = 1;
        }
        let ok = family.level(cur) <= w;
        cur[pos + 1..].copy_from_slice(&saved);
        if !ok {
            break;
        }
        enumerate(cur, pos + 1, w, family, out);
        i += 1;
    }
    cur[pos] = 1;
}

/// Combination coefficients `c_i = Σ_{e ∈ {0,1}^d, i+e ∈ I} (-1)^{|e|}`.
///
/// Returns the coefficient of every index of the set (zeros included).
pub fn combination_coefficients(index_set: &[Vec<u32>]) -> Result<Vec<i64>> {
    let set: HashSet<&[u32]> = index_set.iter().map(|v| v.as_slice()).collect();
    for idx in index_set {
        for n in 0..idx.len() {
            if idx[n] > 1 {
                let mut below = idx.clone();
                below[n] -= 1;
                if !set.contains(below.as_slice()) {
                    return Err(GridError::NotDownwardClosed(below));
                }
            }
        }
    }
    let mut coeffs = Vec::with_capacity(index_set.len());
    for idx in index_set {
        let d = idx.len();
        let mut c = 0i64;
        let mut probe = idx.clone();
        for mask in 0u64..(1u64 << d) {
            let mut parity = 1i64;
            for n in 0..d {
                if mask >> n & 1 == 1 {
                    probe[n] = idx[n] + 1;
                    parity = -parity;
                } else {
                    probe[n] = idx[n];
                }
            }
            if set.contains(probe.as_slice()) {
                c += parity;
            }
        }
        coeffs.push(c);
    }
    Ok(coeffs)
}

/// One tensor-product rule of the combination formula.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTerm {
    pub index: Vec<u32>,
    pub coefficient: i64,
}

/// A sparse-grid rule: retained tensor terms, canonical nodes and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGridRule {
    pub dim: usize,
    pub level: u32,
    pub family: Family,
    /// Terms with nonzero combination coefficient.
    pub terms: Vec<TensorTerm>,
    /// Nodes in canonical (key) order.
    pub keys: Vec<NodeKey>,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    lookup: HashMap<NodeKey, usize>,
}

fn tensor_for_each<F: FnMut(&[usize])>(sizes: &[usize], mut f: F) {
    let mut idx = vec![0usize; sizes.len()];
    loop {
        f(&idx);
        let mut n = 0;
        loop {
            if n == sizes.len() {
                return;
            }
            idx[n] += 1;
            if idx[n] < sizes[n] {
                break;
            }
            idx[n] = 0;
            n += 1;
        }
    }
}

/// Builds the isotropic rule of level `w` in dimension `dim`.
pub fn build_grid(dim: usize, w: u32, family: Family) -> Result<SparseGridRule> {
    let indices = admissible_indices(dim, w, family)?;
    let coeffs = combination_coefficients(&indices)?;
    let terms: Vec<TensorTerm> = indices
        .into_iter()
        .zip(coeffs)
        .filter(|(_, c)| *c != 0)
        .map(|(index, coefficient)| TensorTerm { index, coefficient })
        .collect();

    let mut weight_of: BTreeMap<NodeKey, f64> = BTreeMap::new();
    for term in &terms {
        let ms: Vec<usize> = term.index.iter().map(|&i| family.points(i)).collect();
        let ws: Vec<Vec<f64>> = ms.iter().map(|&m| cc_weights_m(m)).collect();
        tensor_for_each(&ms, |j| {
            let key = NodeKey(j.iter().zip(&ms).map(|(&jn, &m)| Abscissa::of_rule(jn, m)).collect());
            let w: f64 = j.iter().zip(&ws).map(|(&jn, wn)| wn[jn]).product();
            *weight_of.entry(key).or_insert(0.0) += term.coefficient as f64 * w;
        });
    }

    let mut keys = Vec::with_capacity(weight_of.len());
    let mut weights = Vec::with_capacity(weight_of.len());
    for (k, w) in weight_of {
        keys.push(k);
        weights.push(w);
    }
    let nodes = keys.iter().map(|k| k.point()).collect();
    let lookup = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
    Ok(SparseGridRule {
        dim,
        level: w,
        family,
        terms,
        keys,
        nodes,
        weights,
        lookup,
    })
}

fn lagrange_basis(nodes: &[f64], j: usize, y: f64) -> f64 {
    let mut v = 1.0;
    for (k, &xk) in nodes.iter().enumerate() {
        if k != j {
            v *= (y - xk) / (nodes[j] - xk);
        }
    }
    v
}

impl SparseGridRule {
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn index_of(&self, key: &NodeKey) -> Option<usize> {
        self.lookup.get(key).copied()
    }

    fn check_values(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(GridError::ValueCount {
                expected: self.len(),
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Evaluates the sparse-grid interpolant of `values` at `y`.
    pub fn interpolate(&self, values: &[f64], y: &[f64]) -> Result<f64> {
        self.check_values(values)?;
        if y.len() != self.dim {
            return Err(GridError::PointDimension {
                expected: self.dim,
                got: y.len(),
            });
        }
        let mut total = 0.0;
        for term in &self.terms {
            let ms: Vec<usize> = term.index.iter().map(|&i| self.family.points(i)).collect();
            let pts: Vec<Vec<f64>> = ms.iter().map(|&m| cc_nodes_m(m)).collect();
            let basis: Vec<Vec<f64>> = pts
                .iter()
                .zip(y)
                .map(|(p, &yn)| (0..p.len()).map(|j| lagrange_basis(p, j, yn)).collect())
                .collect();
            let mut s = 0.0;
            tensor_for_each(&ms, |j| {
                let key = NodeKey(j.iter().zip(&ms).map(|(&jn, &m)| Abscissa::of_rule(jn, m)).collect());
                let l: f64 = j.iter().zip(&basis).map(|(&jn, b)| b[jn]).product();
                s += values[self.lookup[&key]] * l;
            });
            total += term.coefficient as f64 * s;
        }
        Ok(total)
    }

    /// `Σ weight · value` in canonical node order.
    pub fn quadrature(&self, values: &[f64]) -> Result<f64> {
        self.check_values(values)?;
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }

    /// Mean and variance of the interpolant, optionally reweighted by a
    /// per-node density ratio `ρ/ρ̂`.
    pub fn moments(&self, values: &[f64], density_ratio: Option<&[f64]>) -> Result<Moments> {
        self.check_values(values)?;
        if let Some(r) = density_ratio {
            self.check_values(r)?;
            if let Some((k, &v)) = r.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
                return Err(GridError::DensityRatio(v, k));
            }
        }
        let ratio = |k: usize| density_ratio.map_or(1.0, |r| r[k]);
        let mut mean = 0.0;
        let mut second = 0.0;
        for (k, (&w, &v)) in self.weights.iter().zip(values).enumerate() {
            mean += w * v * ratio(k);
            second += w * v * v * ratio(k);
        }
        let mut variance = second - mean * mean;
        if variance < 0.0 {
            if variance < -1e-10 {
                log::warn!("negative variance {variance:e} from quadrature error clamped to 0");
            }
            variance = 0.0;
        }
        Ok(Moments { mean, variance })
    }

    /// Plain-text table `node_key, y_1..y_d, weight`.
    pub fn dump(&self) -> String {
        let mut s = String::from("node_key");
        for n in 1..=self.dim {
            s.push_str(&format!(",y_{n}"));
        }
        s.push_str(",weight\n");
        for ((k, p), w) in self.keys.iter().zip(&self.nodes).zip(&self.weights) {
            s.push_str(&k.to_string());
            for v in p {
                s.push_str(&format!(",{v:.16e}"));
            }
            s.push_str(&format!(",{w:.16e}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_low_levels() {
        assert_eq!(cc_nodes_1d(1).unwrap(), vec![0.0]);
        assert_eq!(cc_nodes_1d(2).unwrap(), vec![-1.0, 0.0, 1.0]);
        let n3 = cc_nodes_1d(3).unwrap();
        let r = 0.5f64.sqrt();
        for (a, b) in n3.iter().zip([-1.0, -r, 0.0, r, 1.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert!(cc_nodes_1d(0).is_err());
    }

    #[test]
    fn weights_low_levels() {
        assert_eq!(cc_weights_1d(1).unwrap(), vec![1.0]);
        let w = cc_weights_1d(2).unwrap();
        for (a, b) in w.iter().zip([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn degree_levels() {
        assert_eq!(
            (0..10).map(smolyak_degree_level).collect::<Vec<_>>(),
            vec![0, 1, 1, 2, 2, 3, 3, 3, 3, 4]
        );
        assert_eq!(Family::SM.level_for_degree(0), 1);
        assert_eq!(Family::SM.level_for_degree(2), 2);
        assert_eq!(Family::SM.level_for_degree(3), 3);
    }

    #[test]
    fn index_sets() {
        assert_eq!(admissible_indices(2, 0, Family::SM).unwrap(), vec![vec![1, 1]]);
        assert_eq!(
            admissible_indices(2, 1, Family::SM).unwrap(),
            vec![vec![1, 1], vec![1, 2], vec![2, 1]]
        );
        assert_eq!(admissible_indices(3, 2, Family::SM).unwrap().len(), 10);
        assert_eq!(admissible_indices(2, 2, Family::TP).unwrap().len(), 9);
        // HC: i1 * i2 <= 3
        assert_eq!(admissible_indices(2, 2, Family::HC).unwrap().len(), 5);
        assert!(admissible_indices(0, 2, Family::SM).is_err());
        assert!("XX".parse::<Family>().is_err());
    }

    #[test]
    fn coefficients() {
        let set = admissible_indices(2, 1, Family::SM).unwrap();
        let c = combination_coefficients(&set).unwrap();
        assert_eq!(c, vec![-1, 1, 1]);
        assert_eq!(combination_coefficients(&[vec![1, 1, 1]]).unwrap(), vec![1]);
        assert!(matches!(
            combination_coefficients(&[vec![1, 1], vec![1, 3]]),
            Err(GridError::NotDownwardClosed(_))
        ));
        for d in 1..5 {
            for w in 0..5 {
                let s = admissible_indices(d, w, Family::SM).unwrap();
                assert_eq!(combination_coefficients(&s).unwrap().iter().sum::<i64>(), 1);
            }
        }
    }

    #[test]
    fn small_grids() {
        let g = build_grid(2, 1, Family::SM).unwrap();
        assert_eq!(g.len(), 5);
        let mut pts = g.nodes.clone();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            pts,
            vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]]
        );
        assert_eq!(build_grid(2, 2, Family::SM).unwrap().len(), 13);
        for w in 0..6 {
            let g = build_grid(1, w, Family::SM).unwrap();
            let n = cc_nodes_1d(w + 1).unwrap();
            let wt = cc_weights_1d(w + 1).unwrap();
            assert_eq!(g.nodes.iter().map(|p| p[0]).collect::<Vec<_>>(), n);
            for (a, b) in g.weights.iter().zip(&wt) {
                assert_relative_eq!(*a, *b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn key_roundtrip_and_order() {
        let g = build_grid(3, 3, Family::SM).unwrap();
        for k in &g.keys {
            assert_eq!(&k.to_string().parse::<NodeKey>().unwrap(), k);
        }
        assert!(g.keys.windows(2).all(|w| w[0] < w[1]));
        assert!("1/4:2/4".parse::<NodeKey>().is_err());
    }

    #[test]
    fn moments_examples() {
        let g = build_grid(2, 2, Family::SM).unwrap();
        let c = vec![3.5; g.len()];
        let m = g.moments(&c, None).unwrap();
        assert_relative_eq!(m.mean, 3.5, epsilon = 1e-13);
        assert!(m.variance < 1e-12);
        let lin: Vec<f64> = g.nodes.iter().map(|p| p[0]).collect();
        let m = g.moments(&lin, None).unwrap();
        assert!(m.mean.abs() < 1e-15);
        assert_relative_eq!(m.variance, 1.0 / 3.0, epsilon = 1e-13);
        let ones = vec![1.0; g.len()];
        assert_eq!(g.moments(&lin, Some(&ones)).unwrap(), g.moments(&lin, None).unwrap());
        let bad = vec![0.0; g.len()];
        assert!(g.moments(&lin, Some(&bad)).is_err());
        assert!(g.quadrature(&[1.0]).is_err());
    }

    #[test]
    fn dump_has_header_and_rows() {
        let g = build_grid(2, 1, Family::SM).unwrap();
        let d = g.dump();
        let lines: Vec<&str> = d.lines().collect();
        assert_eq!(lines[0], "node_key,y_1,y_2,weight");
        assert_eq!(lines.len(), 6);
    }
}
