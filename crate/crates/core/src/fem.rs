//! P1 finite-element operators on structured meshes: stiffness for
//! `∫ ∇φ_j · a ∇φ_i`, lumped mass, filtered lumped mass and the weak
//! divergence loads `b_i[φ] = −∫ a e_i · ∇φ`.
//!
//! The coefficient is evaluated once per element at the barycenter; this
//! one-point rule is exact for P1 gradients and piecewise-constant `a`.

use crate::coeffs::CoefficientField;
use crate::error::{HomogError, Result};
use crate::filters::FilterSpec;
use crate::mesh::{Element, StructuredMesh};
use crate::par;
use crate::sparse::CsrMatrix;
use crate::tensor::{self, Tensor};

#[derive(Debug, Clone)]
pub struct FemSystem {
    pub mesh: StructuredMesh,
    pub stiffness: CsrMatrix,
    /// Lumped mass (row sums of the consistent mass matrix).
    pub mass: Vec<f64>,
    /// One load vector per direction.
    pub loads: Vec<Vec<f64>>,
    /// Coefficient at each element barycenter.
    pub elem_coeffs: Vec<Tensor>,
    pub filter: Option<FilterSpec>,
    /// Normalized nodal filter values; `filtered_mass = filter_weights · mass`
    /// sums to exactly one.
    pub filter_weights: Option<Vec<f64>>,
    pub filtered_mass: Option<Vec<f64>>,
    pub dirichlet: bool,
}

impl FemSystem {
    /// Assembles stiffness, lumped mass and loads without boundary conditions.
    pub fn assemble(mesh: &StructuredMesh, field: &CoefficientField) -> Self {
        let elem_coeffs = element_coefficients(mesh, field);
        let stiffness = assemble_stiffness_with(mesh, &elem_coeffs);
        let mass = assemble_lumped_mass(mesh);
        let loads = (0..mesh.dim)
            .map(|i| assemble_load_with(mesh, &elem_coeffs, i))
            .collect();
        Self {
            mesh: mesh.clone(),
            stiffness,
            mass,
            loads,
            elem_coeffs,
            filter: None,
            filter_weights: None,
            filtered_mass: None,
            dirichlet: false,
        }
    }

    /// The periodic unit-cell system for the cell problems. Its stiffness is
    /// singular with the constants as kernel.
    pub fn periodic_cell(n_per_cell: usize, dim: usize, field: &CoefficientField) -> Result<Self> {
        match field.period {
            Some(p) if (p - 1.0).abs() < 1e-12 => {}
            _ => return Err(HomogError::NotPeriodic),
        }
        let mesh = StructuredMesh::periodic_cell(n_per_cell, dim)?;
        Ok(Self::assemble(&mesh, field))
    }

    pub fn dim(&self) -> usize {
        self.mesh.dim
    }

    pub fn n_dofs(&self) -> usize {
        self.mesh.n_nodes()
    }

    /// Attaches the filtered lumped mass for `spec`.
    pub fn with_filter(mut self, spec: FilterSpec) -> Result<Self> {
        let weights = assemble_filter_weights(&self.mesh, &self.mass, &spec)?;
        self.filtered_mass = Some(weights.iter().zip(&self.mass).map(|(w, m)| w * m).collect());
        self.filter_weights = Some(weights);
        self.filter = Some(spec);
        Ok(self)
    }

    /// Homogeneous Dirichlet conditions on `∂K_R`: boundary rows and columns
    /// of the stiffness become identity, boundary load entries become zero.
    /// The lumped mass is kept.
    pub fn apply_dirichlet(mut self) -> Self {
        let mask = self.mesh.boundary_mask();
        for i in 0..self.stiffness.n() {
            let (cols, vals) = self.stiffness.row_mut(i);
            for (c, v) in cols.iter().zip(vals.iter_mut()) {
                if mask[i] {
                    *v = if *c == i { 1.0 } else { 0.0 };
                } else if mask[*c] {
                    *v = 0.0;
                }
            }
        }
        for load in &mut self.loads {
            for (b, &m) in load.iter_mut().zip(&mask) {
                if m {
                    *b = 0.0;
                }
            }
        }
        self.dirichlet = true;
        self
    }

    /// Filtered average `Σ_e |e| w̄_e a_e` with the element weight `w̄_e` the
    /// mean of the normalized nodal filter values. Equals
    /// `Σ_k μ(x_k) M_kk a` for constant `a`.
    pub fn filtered_coefficient_average(&self) -> Tensor {
        let weights = self.filter_weights.as_deref();
        let mut acc = tensor::ZERO;
        for e in 0..self.mesh.n_elements() {
            let el = self.mesh.element(e);
            let w = element_weight(&self.mesh, &el, weights);
            let a = &self.elem_coeffs[e];
            for i in 0..2 {
                for j in 0..2 {
                    acc[i][j] += w * el.measure * a[i][j];
                }
            }
        }
        acc
    }

    /// `Σ_e |e| w̄_e (∇u_i + e_i)·a_e(∇u_j + e_j)` for nodal fields `u`.
    /// Without a filter the plain mean over the mesh is used.
    pub fn filtered_flux(&self, correctors: &[Vec<f64>]) -> Tensor {
        let dim = self.dim();
        let weights = self.filter_weights.as_deref();
        let volume = self.mesh.volume();
        let rows: Vec<Tensor> = par::map_range(0..self.mesh.n_elements(), |e| {
            let el = self.mesh.element(e);
            let w = match weights {
                Some(_) => element_weight(&self.mesh, &el, weights),
                None => 1.0 / volume,
            };
            let a = &self.elem_coeffs[e];
            let mut grads = [[0.0; 2]; 2];
            for (i, u) in correctors.iter().enumerate() {
                grads[i] = element_gradient(&el, dim, u);
                grads[i][i] += 1.0;
            }
            let mut out = tensor::ZERO;
            for i in 0..dim {
                for j in 0..dim {
                    let mut s = 0.0;
                    for k in 0..dim {
                        for l in 0..dim {
                            s += grads[i][k] * a[k][l] * grads[j][l];
                        }
                    }
                    out[i][j] = w * el.measure * s;
                }
            }
            out
        });
        rows.iter().fold(tensor::ZERO, |acc, t| tensor::add(&acc, t))
    }
}

fn element_weight(mesh: &StructuredMesh, el: &Element, weights: Option<&[f64]>) -> f64 {
    match weights {
        None => 1.0 / mesh.volume(),
        Some(w) => {
            let nv = mesh.element_vertices();
            el.nodes[..nv].iter().map(|&k| w[k]).sum::<f64>() / nv as f64
        }
    }
}

pub fn element_gradient(el: &Element, dim: usize, u: &[f64]) -> [f64; 2] {
    let mut g = [0.0; 2];
    for a in 0..=dim {
        let ua = u[el.nodes[a]];
        g[0] += ua * el.grads[a][0];
        g[1] += ua * el.grads[a][1];
    }
    g
}

pub fn element_coefficients(mesh: &StructuredMesh, field: &CoefficientField) -> Vec<Tensor> {
    let dim = mesh.dim;
    par::map_range(0..mesh.n_elements(), |e| {
        let c = mesh.element(e).centroid;
        field.eval(&c[..dim])
    })
}

/// `A_ij = Σ_e ∇φ_j · a(x_e) ∇φ_i |e|`.
pub fn assemble_stiffness(mesh: &StructuredMesh, field: &CoefficientField) -> CsrMatrix {
    assemble_stiffness_with(mesh, &element_coefficients(mesh, field))
}

fn assemble_stiffness_with(mesh: &StructuredMesh, coeffs: &[Tensor]) -> CsrMatrix {
    let dim = mesh.dim;
    let nv = mesh.element_vertices();
    // local matrices in parallel, scattered sequentially in element order
    let locals: Vec<[[f64; 3]; 3]> = par::map_range(0..mesh.n_elements(), |e| {
        let el = mesh.element(e);
        let a = &coeffs[e];
        let mut k = [[0.0; 3]; 3];
        for p in 0..nv {
            let mut agp = [0.0; 2];
            for r in 0..dim {
                for c in 0..dim {
                    agp[r] += a[r][c] * el.grads[p][c];
                }
            }
            for q in 0..nv {
                let mut s = 0.0;
                for r in 0..dim {
                    s += el.grads[q][r] * agp[r];
                }
                k[q][p] = s * el.measure;
            }
        }
        k
    });
    let mut triplets = Vec::with_capacity(mesh.n_elements() * nv * nv);
    for (e, k) in locals.iter().enumerate() {
        let el = mesh.element(e);
        for p in 0..nv {
            for q in 0..nv {
                triplets.push((el.nodes[p], el.nodes[q], k[p][q]));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_nodes(), triplets)
}

/// `M_ii = Σ_{e ∋ i} |e| / (d + 1)`.
pub fn assemble_lumped_mass(mesh: &StructuredMesh) -> Vec<f64> {
    let nv = mesh.element_vertices();
    let mut m = vec![0.0; mesh.n_nodes()];
    for e in 0..mesh.n_elements() {
        let el = mesh.element(e);
        for &k in &el.nodes[..nv] {
            m[k] += el.measure / nv as f64;
        }
    }
    m
}

/// Nodal filter values `μ_L(x_k)`, rescaled so that `Σ_k μ_k M_kk = 1`.
fn assemble_filter_weights(mesh: &StructuredMesh, mass: &[f64], spec: &FilterSpec) -> Result<Vec<f64>> {
    if spec.l > mesh.r * (1.0 + 1e-12) {
        return Err(HomogError::AveragingBoxTooLarge { l: spec.l, r: mesh.r });
    }
    let dim = mesh.dim;
    let mut w: Vec<f64> = (0..mesh.n_nodes())
        .map(|k| spec.weight(&mesh.node_coords(k)[..dim]))
        .collect();
    let total: f64 = w.iter().zip(mass).map(|(w, m)| w * m).sum();
    if !(total > 0.0) {
        return Err(HomogError::InvalidParameter(format!(
            "averaging box L = {} contains no mesh nodes",
            spec.l
        )));
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Filtered lumped mass `μ_L(x_k)·M_kk`, normalized to unit total.
pub fn assemble_filtered_mass(mesh: &StructuredMesh, spec: &FilterSpec) -> Result<Vec<f64>> {
    let mass = assemble_lumped_mass(mesh);
    let w = assemble_filter_weights(mesh, &mass, spec)?;
    Ok(w.iter().zip(&mass).map(|(w, m)| w * m).collect())
}

/// `b_i[φ_k] = −Σ_e (a(x_e) e_i)·∇φ_k |e|`.
pub fn assemble_load(mesh: &StructuredMesh, field: &CoefficientField, direction: usize) -> Vec<f64> {
    assemble_load_with(mesh, &element_coefficients(mesh, field), direction)
}

fn assemble_load_with(mesh: &StructuredMesh, coeffs: &[Tensor], direction: usize) -> Vec<f64> {
    let dim = mesh.dim;
    let nv = mesh.element_vertices();
    let mut b = vec![0.0; mesh.n_nodes()];
    for (e, a) in coeffs.iter().enumerate() {
        let el = mesh.element(e);
        for p in 0..nv {
            let mut s = 0.0;
            for r in 0..dim {
                s += a[r][direction] * el.grads[p][r];
            }
            b[el.nodes[p]] -= s * el.measure;
        }
    }
    b
}
