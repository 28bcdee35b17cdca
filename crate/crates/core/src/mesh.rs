//! Structured simplicial meshes of the cube `K_R = (−R/2, R/2)^d` and of the
//! periodic unit cell.

use crate::error::{HomogError, Result};

/// A P1 element: vertex indices, constant shape-function gradients, measure
/// and barycenter. Only the first `dim + 1` vertices are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    pub nodes: [usize; 3],
    pub grads: [[f64; 2]; 3],
    pub measure: f64,
    pub centroid: [f64; 2],
}

/// A uniform grid with `h = 1/n_per_cell`; each grid square is split into two
/// triangles along its lower-left to upper-right diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuredMesh {
    /// Edge of the sampling cube, rounded to a multiple of `h`.
    pub r: f64,
    pub n_per_cell: usize,
    pub dim: usize,
    /// Grid intervals per dimension.
    pub intervals: usize,
    pub h: f64,
    /// Periodic unit cell with opposite faces identified.
    pub periodic: bool,
}

impl StructuredMesh {
    pub fn new(r: f64, n_per_cell: usize, dim: usize) -> Result<Self> {
        if !(r >= 1.0) {
            return Err(HomogError::InvalidMesh(format!("R must be at least 1, got {r}")));
        }
        Self::check_common(n_per_cell, dim)?;
        let intervals = (r * n_per_cell as f64).round() as usize;
        let h = 1.0 / n_per_cell as f64;
        Ok(Self {
            r: intervals as f64 / n_per_cell as f64,
            n_per_cell,
            dim,
            intervals,
            h,
            periodic: false,
        })
    }

    /// The unit cell `(−1/2, 1/2)^d` with periodic identification; it has
    /// `n_per_cell^d` distinct nodes.
    pub fn periodic_cell(n_per_cell: usize, dim: usize) -> Result<Self> {
        Self::check_common(n_per_cell, dim)?;
        Ok(Self {
            r: 1.0,
            n_per_cell,
            dim,
            intervals: n_per_cell,
            h: 1.0 / n_per_cell as f64,
            periodic: true,
        })
    }

    fn check_common(n_per_cell: usize, dim: usize) -> Result<()> {
        if n_per_cell < 4 {
            return Err(HomogError::InvalidMesh(format!(
                "need at least 4 intervals per unit length, got {n_per_cell}"
            )));
        }
        if !(1..=2).contains(&dim) {
            return Err(HomogError::InvalidMesh(format!("dimension must be 1 or 2, got {dim}")));
        }
        Ok(())
    }

    /// Nodes per dimension.
    pub fn nodes_per_dim(&self) -> usize {
        if self.periodic {
            self.intervals
        } else {
            self.intervals + 1
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_dim().pow(self.dim as u32)
    }

    pub fn n_elements(&self) -> usize {
        match self.dim {
            1 => self.intervals,
            _ => 2 * self.intervals * self.intervals,
        }
    }

    fn grid_index(&self, k: usize) -> (usize, usize) {
        let m = self.nodes_per_dim();
        (k % m, k / m)
    }

    pub fn node_coords(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.grid_index(k);
        let lo = -0.5 * self.r;
        let y = if self.dim == 2 { lo + j as f64 * self.h } else { 0.0 };
        [lo + i as f64 * self.h, y]
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        if self.periodic {
            return false;
        }
        let (i, j) = self.grid_index(k);
        let m = self.intervals;
        i == 0 || i == m || (self.dim == 2 && (j == 0 || j == m))
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.n_nodes()).map(|k| self.is_boundary(k)).collect()
    }

    fn node_at(&self, i: usize, j: usize) -> usize {
        let m = self.nodes_per_dim();
        if self.periodic {
            (i % m) + (j % m) * m
        } else {
            i + j * m
        }
    }

    pub fn element(&self, e: usize) -> Element {
        let h = self.h;
        let lo = -0.5 * self.r;
        if self.dim == 1 {
            let i = e;
            return Element {
                nodes: [self.node_at(i, 0), self.node_at(i + 1, 0), 0],
                grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2]],
                measure: h,
                centroid: [lo + (i as f64 + 0.5) * h, 0.0],
            };
        }
        let sq = e / 2;
        let (i, j) = (sq % self.intervals, sq / self.intervals);
        let (x0, y0) = (lo + i as f64 * h, lo + j as f64 * h);
        let area = 0.5 * h * h;
        if e % 2 == 0 {
            // (i,j), (i+1,j), (i+1,j+1)
            Element {
                nodes: [self.node_at(i, j), self.node_at(i + 1, j), self.node_at(i + 1, j + 1)],
                grads: [[-1.0 / h, 0.0], [1.0 / h, -1.0 / h], [0.0, 1.0 / h]],
                measure: area,
                centroid: [x0 + 2.0 * h / 3.0, y0 + h / 3.0],
            }
        } else {
            // (i,j), (i+1,j+1), (i,j+1)
            Element {
                nodes: [self.node_at(i, j), self.node_at(i + 1, j + 1), self.node_at(i, j + 1)],
                grads: [[0.0, -1.0 / h], [1.0 / h, 0.0], [-1.0 / h, 1.0 / h]],
                measure: area,
                centroid: [x0 + h / 3.0, y0 + 2.0 * h / 3.0],
            }
        }
    }

    /// Vertices per element.
    pub fn element_vertices(&self) -> usize {
        self.dim + 1
    }

    /// Total measure of the meshed domain.
    pub fn volume(&self) -> f64 {
        self.r.powi(self.dim as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        let m = StructuredMesh::new(2.0, 4, 2).unwrap();
        assert_eq!((m.n_nodes(), m.n_elements()), (81, 128));
        let m1 = StructuredMesh::new(2.0, 4, 1).unwrap();
        assert_eq!((m1.n_nodes(), m1.n_elements()), (9, 8));
        let p = StructuredMesh::periodic_cell(8, 2).unwrap();
        assert_eq!((p.n_nodes(), p.n_elements()), (64, 128));
    }

    #[test]
    fn r_rounds_to_grid() {
        let m = StructuredMesh::new(2.1, 10, 2).unwrap();
        assert_eq!(m.intervals, 21);
        assert_eq!(m.r, 2.1);
        let m = StructuredMesh::new(2.13, 10, 2).unwrap();
        assert_eq!(m.r, 2.1);
    }

    #[test]
    fn invalid_inputs() {
        assert!(StructuredMesh::new(0.5, 8, 2).is_err());
        assert!(StructuredMesh::new(2.0, 3, 2).is_err());
        assert!(StructuredMesh::new(2.0, 8, 3).is_err());
    }

    #[test]
    fn nodes_span_the_cube() {
        let m = StructuredMesh::new(3.0, 4, 2).unwrap();
        let first = m.node_coords(0);
        let last = m.node_coords(m.n_nodes() - 1);
        assert_eq!(first, [-1.5, -1.5]);
        assert_eq!(last, [1.5, 1.5]);
        let boundary = m.boundary_mask().iter().filter(|b| **b).count();
        assert_eq!(boundary, 4 * 12);
    }

    #[test]
    fn element_measures_sum_to_volume() {
        for (r, n) in [(1.0, 4), (2.5, 8), (3.0, 16)] {
            let m = StructuredMesh::new(r, n, 2).unwrap();
            let total: f64 = (0..m.n_elements()).map(|e| m.element(e).measure).sum();
            assert!((total - m.volume()).abs() <= 1e-10 * m.volume());
        }
    }

    #[test]
    fn gradients_reproduce_linear_functions() {
        let m = StructuredMesh::new(2.0, 4, 2).unwrap();
        let g = [0.7, -1.3];
        for e in 0..m.n_elements() {
            let el = m.element(e);
            let mut grad = [0.0; 2];
            for a in 0..3 {
                let x = m.node_coords(el.nodes[a]);
                let u = g[0] * x[0] + g[1] * x[1];
                grad[0] += u * el.grads[a][0];
                grad[1] += u * el.grads[a][1];
            }
            assert!((grad[0] - g[0]).abs() < 1e-12 && (grad[1] - g[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn periodic_cell_wraps() {
        let p = StructuredMesh::periodic_cell(4, 2).unwrap();
        // last square in the first row touches node column 0
        let el = p.element(2 * 3);
        assert_eq!(el.nodes, [3, 0, 4]);
        assert!(!p.is_boundary(0));
    }
}
