//! Averaging kernels of order `q` on the box `K_L`.
//!
//! The one-dimensional kernel is `μ(x) = c_q (1 − 4x²)^q` on `[−1/2, 1/2]`,
//! which has unit mass, is non-negative, and has its first `q − 1`
//! derivatives vanishing at `±1/2`. The box kernel is the scaled tensor
//! product `μ_L(x) = L^{-d} Π μ(x_i / L)`. `q = 0` gives the uniform average.

use crate::error::{HomogError, Result};
use crate::quadrature::GaussLegendre;

/// Unit-mass constant of `(1 − 4x²)^q` on `[−1/2, 1/2]`:
/// `c_q = 2 Γ(q + 3/2) / (√π q!) = 2 Π_{k=0}^{q} (k + 1/2) / q!`.
pub fn filter_normalization(q: u32) -> f64 {
    let mut c = 2.0;
    for k in 0..=q {
        c *= k as f64 + 0.5;
    }
    for k in 1..=q {
        c /= k as f64;
    }
    c
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub q: u32,
    pub l: f64,
    pub dim: usize,
    pub c_q: f64,
}

impl FilterSpec {
    pub fn new(q: u32, l: f64, dim: usize) -> Result<Self> {
        if !(l > 0.0) || !(1..=2).contains(&dim) {
            return Err(HomogError::InvalidParameter(format!(
                "filter needs L > 0 and d in {{1, 2}} (got L = {l}, d = {dim})"
            )));
        }
        Ok(Self {
            q,
            l,
            dim,
            c_q: filter_normalization(q),
        })
    }

    /// The reference kernel `μ` on `[−1/2, 1/2]`.
    pub fn kernel_1d(&self, s: f64) -> f64 {
        if s.abs() > 0.5 {
            return 0.0;
        }
        self.c_q * (1.0 - 4.0 * s * s).powi(self.q as i32)
    }

    /// `μ_L(x)`; only the first `dim` coordinates of `x` are read.
    pub fn weight(&self, x: &[f64]) -> f64 {
        x.iter()
            .take(self.dim)
            .map(|xi| self.kernel_1d(xi / self.l) / self.l)
            .product()
    }

    pub fn peak(&self) -> f64 {
        (self.c_q / self.l).powi(self.dim as i32)
    }
}

/// `|∫_{K_L} f μ_L − ∫_K f|` for a 1-periodic `f`, in `dim` dimensions.
///
/// Both integrals use composite Gauss–Legendre rules on unit-length panels
/// (the kernel is polynomial on its support and `f` is smooth), refined
/// until successive values agree to `1e-15`.
pub fn averaging_error_probe<F>(f: F, q: u32, l: f64, dim: usize) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let spec = FilterSpec::new(q, l, dim)?;
    let filtered = refine(|panels| tensor_rule(&f, |x| spec.weight(x), l, panels, dim));
    let cell = refine(|panels| tensor_rule(&f, |_| 1.0, 1.0, panels, dim));
    Ok((filtered - cell).abs())
}

fn refine(rule: impl Fn(usize) -> f64) -> f64 {
    let mut panels = 4;
    let mut prev = rule(panels);
    loop {
        panels *= 2;
        let next = rule(panels);
        if (next - prev).abs() <= 1e-15 * next.abs().max(1.0) || panels >= 64 {
            return next;
        }
        prev = next;
    }
}

/// Tensor-product composite rule for `∫_{(−e/2, e/2)^d} f·w` with
/// `panels_per_unit` panels per unit length (at least one panel overall).
fn tensor_rule(
    f: &impl Fn(&[f64]) -> f64,
    w: impl Fn(&[f64]) -> f64,
    edge: f64,
    panels_per_unit: usize,
    dim: usize,
) -> f64 {
    let gl = GaussLegendre::new(12);
    let panels = ((edge * panels_per_unit as f64).ceil() as usize).max(1);
    let width = edge / panels as f64;
    let mut nodes = Vec::with_capacity(panels * gl.nodes.len());
    for p in 0..panels {
        let a = -0.5 * edge + p as f64 * width;
        for (t, wt) in gl.nodes.iter().zip(&gl.weights) {
            nodes.push((a + 0.5 * width * (t + 1.0), 0.5 * width * wt));
        }
    }
    let mut sum = 0.0;
    if dim == 1 {
        for &(x, wx) in &nodes {
            let p = [x];
            sum += wx * f(&p) * w(&p);
        }
    } else {
        for &(y, wy) in &nodes {
            let mut row = 0.0;
            for &(x, wx) in &nodes {
                let p = [x, y];
                row += wx * f(&p) * w(&p);
            }
            sum += wy * row;
        }
    }
    sum
}
