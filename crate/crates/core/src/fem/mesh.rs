use super::{FemError, Result};
use crate::deformation::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// Which sides of the square carry homogeneous Dirichlet data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryLayout {
    /// `x₂ = 1` is Dirichlet, the other three sides Neumann.
    #[default]
    TopDirichlet,
    AllDirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: BoundaryTag,
    /// Unit outward normal of the reference square on this edge.
    pub normal: [f64; 2],
}

/// A P1 triangulation of the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Vertices per side for structured meshes.
    pub n: usize,
}

impl Mesh {
    /// `n × n` lattice, each cell split along its lower-left to upper-right
    /// diagonal.
    pub fn structured(n: usize) -> Result<Self> {
        Self::structured_with(n, BoundaryLayout::TopDirichlet)
    }

    pub fn structured_with(n: usize, layout: BoundaryLayout) -> Result<Self> {
        if n < 2 {
            return Err(FemError::InvalidMesh(format!("need n >= 2 vertices per side, got {n}")));
        }
        let h = 1.0 / (n - 1) as f64;
        let coord = |i: usize| if i == n - 1 { 1.0 } else { i as f64 * h };
        let id = |i: usize, j: usize| j * n + i;
        let mut vertices = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vertices.push([coord(i), coord(j)]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * (n - 1) * (n - 1));
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let tag_for = |top: bool| match (layout, top) {
            (BoundaryLayout::AllDirichlet, _) | (_, true) => BoundaryTag::Dirichlet,
            _ => BoundaryTag::Neumann,
        };
        let mut boundary_edges = Vec::with_capacity(4 * (n - 1));
        for i in 0..n - 1 {
            boundary_edges.push(BoundaryEdge {
                vertices: [id(i, 0), id(i + 1, 0)],
                tag: tag_for(false),
                normal: [0.0, -1.0],
            });
        }
        for j in 0..n - 1 {
            boundary_edges.push(BoundaryEdge {
                vertices: [id(n - 1, j), id(n - 1, j + 1)],
                tag: tag_for(false),
                normal: [1.0, 0.0],
            });
        }
        for i in (0..n - 1).rev() {
            boundary_edges.push(BoundaryEdge {
                vertices: [id(i + 1, n - 1), id(i, n - 1)],
                tag: tag_for(true),
                normal: [0.0, 1.0],
            });
        }
        for j in (0..n - 1).rev() {
            boundary_edges.push(BoundaryEdge {
                vertices: [id(0, j + 1), id(0, j)],
                tag: tag_for(false),
                normal: [-1.0, 0.0],
            });
        }
        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            n,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Mesh width of a structured mesh.
    pub fn h(&self) -> f64 {
        1.0 / (self.n - 1) as f64
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn barycenter(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Sorted, deduplicated Dirichlet vertices.
    pub fn dirichlet_vertices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == BoundaryTag::Dirichlet)
            .flat_map(|e| e.vertices)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_vertices()];
        for v in self.dirichlet_vertices() {
            mask[v] = true;
        }
        mask
    }

    /// Plain-text dump: vertex list, triangle list and nodal values.
    pub fn dump_field(&self, values: &[f64]) -> String {
        let mut s = format!("VERTICES {}\n", self.vertices.len());
        for (p, v) in self.vertices.iter().zip(values) {
            s.push_str(&format!("{:.16e} {:.16e} {:.16e}\n", p[0], p[1], v));
        }
        s.push_str(&format!("TRIANGLES {}\n", self.triangles.len()));
        for t in &self.triangles {
            s.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
        }
        s
    }
}
