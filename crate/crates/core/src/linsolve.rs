//! Preconditioned conjugate gradients, zero-mean projection for the singular
//! periodic system, and spectral-radius bounds for explicit time stepping.

use crate::par;
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    Jacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    pub tol: f64,
    /// `None` means `20·√N`.
    pub max_iter: Option<usize>,
    pub precond: Preconditioner,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            precond: Preconditioner::Jacobi,
        }
    }
}

impl CgOptions {
    pub fn max_iter_for(&self, n: usize) -> usize {
        self.max_iter
            .unwrap_or_else(|| ((20.0 * (n as f64).sqrt()).ceil() as usize).max(20))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖b − A x‖ / ‖b‖`, recomputed from the returned iterate.
    pub final_residual: f64,
    pub converged: bool,
    pub matvecs: usize,
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], opts: &CgOptions) -> (Vec<f64>, SolveReport) {
    cg_impl(a, b, opts, None)
}

/// Solves the singular periodic system `A x = b` (kernel = constants,
/// `Σ b = 0`) and returns the solution with zero `mass`-weighted mean.
/// The iterate is projected after every update.
pub fn cg_solve_projected(
    a: &CsrMatrix,
    b: &[f64],
    mass: &[f64],
    opts: &CgOptions,
) -> (Vec<f64>, SolveReport) {
    // remove any round-off component of b along the kernel
    let shift = b.iter().sum::<f64>() / b.len() as f64;
    let b: Vec<f64> = b.iter().map(|v| v - shift).collect();
    cg_impl(a, &b, opts, Some(mass))
}

fn cg_impl(
    a: &CsrMatrix,
    b: &[f64],
    opts: &CgOptions,
    zero_mean: Option<&[f64]>,
) -> (Vec<f64>, SolveReport) {
    let n = a.n();
    let b_norm = par::dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return (
            x,
            SolveReport {
                iterations: 0,
                final_residual: 0.0,
                converged: true,
                matvecs: 0,
            },
        );
    }
    let inv_diag: Vec<f64> = match opts.precond {
        Preconditioner::None => vec![1.0; n],
        Preconditioner::Jacobi => a
            .diagonal()
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
            .collect(),
    };
    let max_iter = opts.max_iter_for(n);
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, m)| r * m).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = par::dot(&r, &z);
    let mut matvecs = 0;
    let mut iterations = 0;
    let mut rel = 1.0;

    while iterations < max_iter {
        a.mul_vec(&p, &mut ap);
        matvecs += 1;
        iterations += 1;
        let pap = par::dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += step * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= step * ap);
        if let Some(m) = zero_mean {
            project_zero_mean_in_place(&mut x, m);
        }
        rel = par::dot(&r, &r).sqrt() / b_norm;
        if rel <= opts.tol {
            // confirm against the true residual; restart from it if drifted
            let true_rel = residual(a, &x, b) / b_norm;
            matvecs += 1;
            if true_rel <= opts.tol {
                rel = true_rel;
                break;
            }
            let ax = a.apply(&x);
            r.iter_mut().zip(b.iter().zip(&ax)).for_each(|(r, (b, ax))| *r = b - ax);
            z.iter_mut().zip(r.iter().zip(&inv_diag)).for_each(|(z, (r, m))| *z = r * m);
            p.copy_from_slice(&z);
            rz = par::dot(&r, &z);
            continue;
        }
        z.iter_mut().zip(r.iter().zip(&inv_diag)).for_each(|(z, (r, m))| *z = r * m);
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(p, z)| *p = z + beta * *p);
    }
    let final_residual = if rel <= opts.tol {
        rel
    } else {
        matvecs += 1;
        residual(a, &x, b) / b_norm
    };
    (
        x,
        SolveReport {
            iterations,
            final_residual,
            converged: final_residual <= opts.tol,
            matvecs,
        },
    )
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.apply(x);
    b.iter().zip(&ax).map(|(b, ax)| (b - ax).powi(2)).sum::<f64>().sqrt()
}

/// `x − (Σ M_ii x_i / Σ M_ii)·1`.
pub fn project_zero_mean(x: &[f64], mass: &[f64]) -> Vec<f64> {
    let mut out = x.to_vec();
    project_zero_mean_in_place(&mut out, mass);
    out
}

pub fn project_zero_mean_in_place(x: &mut [f64], mass: &[f64]) {
    let total: f64 = mass.iter().sum();
    let mean = par::dot(mass, x) / total;
    x.iter_mut().for_each(|v| *v -= mean);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    /// `max_i Σ_j |A_ij| / M_ii`, a guaranteed upper bound on `ρ(M⁻¹A)`.
    pub gershgorin: f64,
    /// Rayleigh quotient after 20 power iterations (a lower estimate).
    pub power: f64,
    /// `max(gershgorin, 1.05·power)`.
    pub bound: f64,
}

/// Bounds the spectral radius of `M⁻¹A` for symmetric `A` and positive
/// diagonal `M`.
pub fn estimate_spectral_radius(a: &CsrMatrix, mass: &[f64]) -> SpectralEstimate {
    let n = a.n();
    let gershgorin = (0..n)
        .map(|i| a.row_abs_sum(i) / mass[i])
        .fold(0.0, f64::max);

    // power iteration on the symmetric form M^{-1/2} A M^{-1/2}
    let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).fract())
        .collect();
    let mut w = vec![0.0; n];
    let mut scaled = vec![0.0; n];
    let mut power = 0.0;
    for _ in 0..20 {
        let norm = par::dot(&v, &v).sqrt();
        if norm == 0.0 {
            break;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        scaled.iter_mut().zip(v.iter().zip(&inv_sqrt)).for_each(|(s, (v, m))| *s = v * m);
        a.mul_vec(&scaled, &mut w);
        w.iter_mut().zip(&inv_sqrt).for_each(|(w, m)| *w *= m);
        power = par::dot(&v, &w);
        std::mem::swap(&mut v, &mut w);
    }
    SpectralEstimate {
        gershgorin,
        power,
        bound: gershgorin.max(1.05 * power),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d_dirichlet(n: usize) -> CsrMatrix {
        let h = 1.0 / (n + 1) as f64;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 / h));
            if i + 1 < n {
                t.push((i, i + 1, -1.0 / h));
                t.push((i + 1, i, -1.0 / h));
            }
        }
        CsrMatrix::from_triplets(n, t)
    }

    /// Dense Gaussian elimination with partial pivoting, used as an oracle.
    fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
        let n = a.n();
        let mut m: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j)).collect()).collect();
        let mut rhs = b.to_vec();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs())).unwrap();
            m.swap(k, piv);
            rhs.swap(k, piv);
            for i in k + 1..n {
                let f = m[i][k] / m[k][k];
                for j in k..n {
                    m[i][j] -= f * m[k][j];
                }
                rhs[i] -= f * rhs[k];
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
            x[i] = (rhs[i] - s) / m[i][i];
        }
        x
    }

    #[test]
    fn identity_in_one_iteration() {
        let a = CsrMatrix::identity(5);
        let b = [1.0, -2.0, 3.0, 0.5, 0.0];
        let (x, rep) = cg_solve(&a, &b, &CgOptions::default());
        assert_eq!(x, b.to_vec());
        assert!(rep.converged && rep.iterations <= 1);
    }

    #[test]
    fn two_by_two_system() {
        let a = CsrMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        for precond in [Preconditioner::None, Preconditioner::Jacobi] {
            let opts = CgOptions { precond, ..CgOptions::default() };
            let (x, rep) = cg_solve(&a, &[1.0, 2.0], &opts);
            assert!(rep.converged);
            assert!((x[0] - 1.0 / 11.0).abs() < 1e-12);
            assert!((x[1] - 7.0 / 11.0).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_matches_dense_oracle() {
        let a = laplacian_1d_dirichlet(64);
        let b: Vec<f64> = (0..64).map(|i| ((i as f64) * 0.3).sin() + 0.1).collect();
        let (x, rep) = cg_solve(&a, &b, &CgOptions::default());
        assert!(rep.converged && rep.final_residual <= 1e-10);
        let xd = dense_solve(&a, &b);
        let err = x.iter().zip(&xd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = laplacian_1d_dirichlet(8);
        let (x, rep) = cg_solve(&a, &[0.0; 8], &CgOptions::default());
        assert!(x.iter().all(|&v| v == 0.0) && rep.converged);
    }

    #[test]
    fn non_convergence_is_reported() {
        let a = laplacian_1d_dirichlet(200);
        let b = vec![1.0; 200];
        let opts = CgOptions { max_iter: Some(3), ..CgOptions::default() };
        let (_, rep) = cg_solve(&a, &b, &opts);
        assert!(!rep.converged && rep.iterations == 3);
    }

    #[test]
    fn projection_properties() {
        let m = [0.5, 1.0, 2.0, 0.25];
        let c = project_zero_mean(&[3.0; 4], &m);
        assert!(c.iter().all(|v| v.abs() < 1e-15));
        let x = [1.0, -2.0, 0.3, 7.0];
        let p = project_zero_mean(&x, &m);
        let mean: f64 = p.iter().zip(&m).map(|(p, m)| p * m).sum::<f64>();
        assert!(mean.abs() < 1e-14);
        let pp = project_zero_mean(&p, &m);
        for (a, b) in p.iter().zip(&pp) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn projected_cg_on_periodic_laplacian() {
        let n = 50;
        let h = 1.0 / n as f64;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 / h));
            t.push((i, (i + 1) % n, -1.0 / h));
            t.push((i, (i + n - 1) % n, -1.0 / h));
        }
        let a = CsrMatrix::from_triplets(n, t);
        let mass = vec![h; n];
        let b: Vec<f64> = (0..n).map(|i| h * (2.0 * std::f64::consts::PI * i as f64 * h).cos()).collect();
        let (x, rep) = cg_solve_projected(&a, &b, &mass, &CgOptions::default());
        assert!(rep.converged, "{rep:?}");
        let mean: f64 = x.iter().zip(&mass).map(|(x, m)| x * m).sum();
        assert!(mean.abs() < 1e-12);
        let r = residual(&a, &x, &b) / b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r <= 1e-10);
    }

    #[test]
    fn gershgorin_for_1d_laplacian() {
        // row (-1, 2, -1)/h with lumped mass h: bound 4/h^2
        let n = 63;
        let h = 1.0 / 64.0;
        let a = laplacian_1d_dirichlet(n);
        let est = estimate_spectral_radius(&a, &vec![h; n]);
        assert!((est.gershgorin - 16384.0).abs() < 1e-8);
        let exact = 4.0 / (h * h) * (std::f64::consts::PI * n as f64 * h / 2.0).sin().powi(2);
        assert!(est.gershgorin >= exact);
        assert!(est.power <= est.gershgorin);
    }

    #[test]
    fn diagonal_spectral_radius() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let est = estimate_spectral_radius(&a, &[1.0; 5]);
        assert_eq!(est.gershgorin, 5.0);
        assert!(est.power <= 5.0 + 1e-12);
    }

    #[test]
    fn power_estimate_below_gershgorin_on_random_spd() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let n = 12;
            let mut t = Vec::new();
            for i in 0..n {
                let mut off = 0.0;
                for j in 0..i {
                    if rng.random_bool(0.3) {
                        let v: f64 = rng.random_range(-1.0..1.0);
                        t.push((i, j, v));
                        t.push((j, i, v));
                        off += 2.0 * v.abs();
                    }
                }
                t.push((i, i, off + rng.random_range(0.5..3.0)));
            }
            let a = CsrMatrix::from_triplets(n, t);
            let mass: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
            let est = estimate_spectral_radius(&a, &mass);
            assert!(est.power <= est.gershgorin * (1.0 + 1e-12));
        }
    }
}
