//! Explicit stabilized time integration of the Dirichlet parabolic cell
//! problems `M u' = −A u`, `u(0) = M⁻¹ b_i`, with on-the-fly accumulation of
//! the filtered correlations `q_ij(t) = Σ_k u^i_k M^f_kk u^j_k`.
//!
//! The integrator is the damped second-order Runge–Kutta–Chebyshev method.
//! In adaptive mode every accepted step is one full step compared with two
//! half steps; the half-step result is kept and both half-step nodes are
//! sampled, so each accepted step contributes an equally spaced Simpson
//! triple.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{HomogError, Result};
use crate::fem::FemSystem;
use crate::linsolve::estimate_spectral_radius;
use crate::par;
use crate::sparse::CsrMatrix;
use crate::tensor::{self, Tensor};

pub const DEFAULT_DAMPING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    Fixed,
    Adaptive,
}

impl std::str::FromStr for TimeMode {
    type Err = HomogError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "adaptive" => Ok(Self::Adaptive),
            _ => Err(HomogError::InvalidParameter(format!(
                "time mode must be fixed or adaptive, got {s}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeOptions {
    pub mode: TimeMode,
    /// Fixed mode only; `None` uses [`default_n_steps`].
    pub n_steps: Option<usize>,
    /// Adaptive mode only; `None` means `h²/10`.
    pub tol_t: Option<f64>,
    pub damping: f64,
}

impl Default for TimeOptions {
    fn default() -> Self {
        Self {
            mode: TimeMode::Adaptive,
            n_steps: None,
            tol_t: None,
            damping: DEFAULT_DAMPING,
        }
    }
}

impl TimeOptions {
    pub fn fixed(n_steps: Option<usize>) -> Self {
        Self {
            mode: TimeMode::Fixed,
            n_steps,
            ..Self::default()
        }
    }

    pub fn adaptive(tol_t: Option<f64>) -> Self {
        Self {
            mode: TimeMode::Adaptive,
            tol_t,
            ..Self::default()
        }
    }

    pub fn tolerance_for(&self, h: f64) -> f64 {
        self.tol_t.unwrap_or(h * h / 10.0)
    }
}

/// `max(64, ⌈8·T·√ρ̂⌉)` capped at 4096 and rounded up to even.
pub fn default_n_steps(t_final: f64, rho_hat: f64) -> usize {
    let n = ((8.0 * t_final * rho_hat.sqrt()).ceil() as usize).clamp(64, 4096);
    n + n % 2
}

/// Chebyshev values `T_j(x)`, `T_j'(x)`, `T_j''(x)` for `j = 0..=s`.
fn chebyshev_table(s: usize, x: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut t = vec![0.0; s + 1];
    let mut d1 = vec![0.0; s + 1];
    let mut d2 = vec![0.0; s + 1];
    t[0] = 1.0;
    t[1] = x;
    d1[1] = 1.0;
    for j in 2..=s {
        t[j] = 2.0 * x * t[j - 1] - t[j - 2];
        d1[j] = 2.0 * t[j - 1] + 2.0 * x * d1[j - 1] - d1[j - 2];
        d2[j] = 4.0 * d1[j - 1] + 2.0 * x * d2[j - 1] - d2[j - 2];
    }
    (t, d1, d2)
}

/// Recurrence coefficients of the `s`-stage damped RKC2 method.
#[derive(Debug, Clone)]
pub struct RkcCoefficients {
    pub s: usize,
    pub w0: f64,
    pub w1: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu_tilde: Vec<f64>,
    pub gamma_tilde: Vec<f64>,
    /// `a_s` and `b_s` of the stability polynomial `a_s + b_s T_s(w0 + w1 z)`.
    pub a_s: f64,
    pub b_s: f64,
}

impl RkcCoefficients {
    pub fn new(s: usize, damping: f64) -> Self {
        assert!(s >= 2, "RKC2 needs at least two stages");
        let w0 = 1.0 + damping / (s * s) as f64;
        let (t, d1, d2) = chebyshev_table(s, w0);
        let w1 = d1[s] / d2[s];
        let mut b = vec![0.0; s + 1];
        for j in 2..=s {
            b[j] = d2[j] / (d1[j] * d1[j]);
        }
        b[0] = b[2];
        b[1] = b[2];
        let mut mu = vec![0.0; s + 1];
        let mut nu = vec![0.0; s + 1];
        let mut mu_tilde = vec![0.0; s + 1];
        let mut gamma_tilde = vec![0.0; s + 1];
        mu_tilde[1] = b[1] * w1;
        for j in 2..=s {
            mu[j] = 2.0 * b[j] * w0 / b[j - 1];
            nu[j] = -b[j] / b[j - 2];
            mu_tilde[j] = 2.0 * b[j] * w1 / b[j - 1];
            gamma_tilde[j] = -(1.0 - b[j - 1] * t[j - 1]) * mu_tilde[j];
        }
        Self {
            s,
            w0,
            w1,
            mu,
            nu,
            mu_tilde,
            gamma_tilde,
            a_s: 1.0 - b[s] * t[s],
            b_s: b[s],
        }
    }

    /// Real stability boundary `(1 + w0)/w1`.
    pub fn stability_boundary(&self) -> f64 {
        (1.0 + self.w0) / self.w1
    }

    /// Stability polynomial `R_s(z)` for real `z`.
    pub fn stability_polynomial(&self, z: f64) -> f64 {
        let (t, _, _) = chebyshev_table(self.s, self.w0 + self.w1 * z);
        self.a_s + self.b_s * t[self.s]
    }
}

/// Smallest `s ≥ 2` whose stability interval `[−(1 + w0)/w1, 0]` contains
/// `−dt·ρ̂`.
pub fn select_stages(dt: f64, rho_hat: f64, damping: f64) -> usize {
    let target = dt * rho_hat;
    // the boundary is close to (2/3)(s² − 1)(1 − 2ε/15); start just below it
    let guess = ((1.5 * target / (1.0 - 2.0 * damping / 15.0) + 1.0).sqrt().floor() as usize).max(2);
    let boundary = |s: usize| RkcCoefficients::new(s, damping).stability_boundary();
    let mut s = guess;
    while s > 2 && boundary(s - 1) >= target {
        s -= 1;
    }
    while boundary(s) < target {
        s += 1;
    }
    s
}

/// The semi-discrete operator `u ↦ −M⁻¹ A u` with optional Dirichlet nodes
/// kept at zero.
pub struct HeatOperator<'a> {
    stiffness: &'a CsrMatrix,
    inv_mass: Vec<f64>,
    fixed: Option<Vec<bool>>,
    /// Upper bound on the spectral radius of `M⁻¹A` on the free nodes.
    pub rho: f64,
    pub damping: f64,
    matvecs: AtomicUsize,
}

impl<'a> HeatOperator<'a> {
    pub fn new(stiffness: &'a CsrMatrix, mass: &[f64], fixed: Option<Vec<bool>>, damping: f64) -> Self {
        let rho = free_spectral_bound(stiffness, mass, fixed.as_deref());
        Self {
            stiffness,
            inv_mass: mass.iter().map(|m| 1.0 / m).collect(),
            fixed,
            rho,
            damping,
            matvecs: AtomicUsize::new(0),
        }
    }

    /// Operator of a Dirichlet (or periodic) FEM system.
    pub fn from_system(sys: &'a FemSystem, damping: f64) -> Self {
        let fixed = sys.dirichlet.then(|| sys.mesh.boundary_mask());
        Self::new(&sys.stiffness, &sys.mass, fixed, damping)
    }

    pub fn n(&self) -> usize {
        self.inv_mass.len()
    }

    pub fn matvecs(&self) -> usize {
        self.matvecs.load(Ordering::Relaxed)
    }

    fn zero_fixed(&self, v: &mut [f64]) {
        if let Some(mask) = &self.fixed {
            for (x, &m) in v.iter_mut().zip(mask) {
                if m {
                    *x = 0.0;
                }
            }
        }
    }

    /// `out = −M⁻¹ A u`, zero on fixed nodes.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        self.stiffness.mul_vec(u, out);
        self.matvecs.fetch_add(1, Ordering::Relaxed);
        out.iter_mut().zip(&self.inv_mass).for_each(|(o, m)| *o *= -m);
        self.zero_fixed(out);
    }

    /// One RKC2 step of size `dt` with `s` stages.
    pub fn rkc_step(&self, u: &[f64], dt: f64, s: usize) -> Result<Vec<f64>> {
        let c = RkcCoefficients::new(s, self.damping);
        let n = u.len();
        let mut f0 = vec![0.0; n];
        self.apply(u, &mut f0);
        let mut y_prev: Vec<f64> = u.to_vec();
        let mut y_cur: Vec<f64> = u.iter().zip(&f0).map(|(u, f)| u + c.mu_tilde[1] * dt * f).collect();
        let mut f = vec![0.0; n];
        let mut y_next = vec![0.0; n];
        for j in 2..=s {
            self.apply(&y_cur, &mut f);
            let (mu, nu) = (c.mu[j], c.nu[j]);
            let keep = 1.0 - mu - nu;
            let (mt, gt) = (c.mu_tilde[j] * dt, c.gamma_tilde[j] * dt);
            for k in 0..n {
                y_next[k] = keep * u[k] + mu * y_cur[k] + nu * y_prev[k] + mt * f[k] + gt * f0[k];
            }
            std::mem::swap(&mut y_prev, &mut y_cur);
            std::mem::swap(&mut y_cur, &mut y_next);
        }
        self.zero_fixed(&mut y_cur);
        if !y_cur.iter().all(|v| v.is_finite()) {
            return Err(HomogError::Diverged { t: dt });
        }
        Ok(y_cur)
    }
}

fn free_spectral_bound(a: &CsrMatrix, mass: &[f64], fixed: Option<&[bool]>) -> f64 {
    match fixed {
        None => estimate_spectral_radius(a, mass).bound,
        Some(mask) => (0..a.n())
            .filter(|&i| !mask[i])
            .map(|i| a.row(i).filter(|(j, _)| !mask[*j]).map(|(_, v)| v.abs()).sum::<f64>() / mass[i])
            .fold(0.0, f64::max),
    }
}

/// `u0 = M⁻¹ b_i`, zero on the Dirichlet boundary.
pub fn initial_condition(sys: &FemSystem, i: usize) -> Vec<f64> {
    let mut u: Vec<f64> = sys.loads[i].iter().zip(&sys.mass).map(|(b, m)| b / m).collect();
    if sys.dirichlet {
        for (k, v) in u.iter_mut().enumerate() {
            if sys.mesh.is_boundary(k) {
                *v = 0.0;
            }
        }
    }
    u
}

/// Weights of the three-point Newton–Cotes rule on `t0 < t1 < t2`.
pub fn simpson_weights(t0: f64, t1: f64, t2: f64) -> [f64; 3] {
    let (h0, h1) = (t1 - t0, t2 - t1);
    let h = h0 + h1;
    [
        h / 6.0 * (2.0 - h1 / h0),
        h * h * h / (6.0 * h0 * h1),
        h / 6.0 * (2.0 - h0 / h1),
    ]
}

/// `∫ v dt` over the sample times: quadratic interpolation on the
/// consecutive triples `(0,1,2), (2,3,4), …`, and the trapezoid rule on a
/// leftover last interval.
pub fn simpson_nonuniform(samples: &[(f64, f64)]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(HomogError::InsufficientPoints(samples.len()));
    }
    if let Some(k) = samples.windows(2).position(|w| !(w[1].0 > w[0].0)) {
        return Err(HomogError::NonIncreasingTimes(k + 1));
    }
    let mut sum = 0.0;
    let mut k = 0;
    while k + 2 < samples.len() {
        let (a, b, c) = (samples[k], samples[k + 1], samples[k + 2]);
        let w = simpson_weights(a.0, b.0, c.0);
        sum += w[0] * a.1 + w[1] * b.1 + w[2] * c.1;
        k += 2;
    }
    if k + 1 < samples.len() {
        let (a, b) = (samples[k], samples[k + 1]);
        sum += 0.5 * (b.0 - a.0) * (a.1 + b.1);
    }
    Ok(sum)
}

/// Streaming version of [`simpson_nonuniform`] for vector-valued samples.
#[derive(Debug, Clone, Default)]
pub struct SimpsonAccumulator {
    sum: Vec<f64>,
    anchor: Option<(f64, Vec<f64>)>,
    middle: Option<(f64, Vec<f64>)>,
}

impl SimpsonAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, v: &[f64]) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; v.len()];
        }
        match (self.anchor.take(), self.middle.take()) {
            (None, _) => self.anchor = Some((t, v.to_vec())),
            (Some(a), None) => {
                self.anchor = Some(a);
                self.middle = Some((t, v.to_vec()));
            }
            (Some((t0, v0)), Some((t1, v1))) => {
                let w = simpson_weights(t0, t1, t);
                for k in 0..v.len() {
                    self.sum[k] += w[0] * v0[k] + w[1] * v1[k] + w[2] * v[k];
                }
                self.anchor = Some((t, v.to_vec()));
            }
        }
    }

    pub fn finish(mut self) -> Vec<f64> {
        if let (Some((t0, v0)), Some((t1, v1))) = (self.anchor, self.middle) {
            let half = 0.5 * (t1 - t0);
            for k in 0..v0.len() {
                self.sum[k] += half * (v0[k] + v1[k]);
            }
        }
        self.sum
    }
}

/// Per-direction states and the sampled traces.
#[derive(Debug, Clone)]
pub struct ParabolicState {
    pub t: f64,
    pub u: Vec<Vec<f64>>,
    /// `(t_k, q(t_k))`, one list per filtered mass.
    pub samples: Vec<Vec<(f64, Tensor)>>,
    /// `(t_k, ‖u^i(t_k)‖_M)` per direction.
    pub decay: Vec<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvolutionStats {
    pub steps: usize,
    pub rejected: usize,
    pub matvecs: usize,
    /// Largest `‖u(t_{k+1})‖_M / ‖u(t_k)‖_M` over accepted nodes.
    pub max_energy_ratio: f64,
}

fn mass_norm(mass: &[f64], u: &[f64]) -> f64 {
    par::weighted_dot(mass, u, u).sqrt()
}

/// Advances every initial state to `t_final` and calls `observer` at `t = 0`
/// and after every accepted node. Directions share one time grid.
pub fn evolve<O>(
    op: &HeatOperator,
    mass: &[f64],
    u0: Vec<Vec<f64>>,
    t_final: f64,
    opts: &TimeOptions,
    tol: f64,
    mut observer: O,
) -> Result<EvolutionStats>
where
    O: FnMut(f64, &[Vec<f64>]),
{
    if !(t_final > 0.0) {
        return Err(HomogError::InvalidParameter(format!("final time must be positive, got {t_final}")));
    }
    let start = op.matvecs();
    let mut stats = EvolutionStats::default();
    let mut u = u0;
    let mut norms: Vec<f64> = u.iter().map(|v| mass_norm(mass, v)).collect();
    observer(0.0, &u);

    let mut record = |t: f64, next: &[Vec<f64>], norms: &mut Vec<f64>, stats: &mut EvolutionStats| {
        for (i, v) in next.iter().enumerate() {
            let n = mass_norm(mass, v);
            let ratio = if norms[i] > 0.0 { n / norms[i] } else if n > 0.0 { f64::INFINITY } else { 0.0 };
            stats.max_energy_ratio = stats.max_energy_ratio.max(ratio);
            norms[i] = n;
        }
        observer(t, next);
    };

    match opts.mode {
        TimeMode::Fixed => {
            let n = opts.n_steps.unwrap_or_else(|| default_n_steps(t_final, op.rho));
            let n = n.max(2) + n % 2;
            let dt = t_final / n as f64;
            let s = select_stages(dt, op.rho, op.damping);
            for k in 1..=n {
                let next = step_all(op, &u, dt, s)?;
                let t = if k == n { t_final } else { k as f64 * dt };
                record(t, &next, &mut norms, &mut stats);
                u = next;
                stats.steps += 1;
            }
        }
        TimeMode::Adaptive => {
            let mut t = 0.0;
            // the roughest modes decay on the scale 1/ρ
            let mut dt = (1.0 / op.rho).min(t_final);
            let dt_min = 1e-14 * t_final;
            while t < t_final {
                let last = t + dt >= t_final * (1.0 - 1e-12);
                if last {
                    dt = t_final - t;
                }
                let s_full = select_stages(dt, op.rho, op.damping);
                let s_half = select_stages(0.5 * dt, op.rho, op.damping);
                let trial: Vec<(Vec<f64>, Vec<f64>, f64)> = par::map_range(0..u.len(), |i| {
                    let full = op.rkc_step(&u[i], dt, s_full)?;
                    let mid = op.rkc_step(&u[i], 0.5 * dt, s_half)?;
                    let end = op.rkc_step(&mid, 0.5 * dt, s_half)?;
                    let diff: Vec<f64> = full.iter().zip(&end).map(|(a, b)| a - b).collect();
                    let scale = mass_norm(mass, &end);
                    let e = mass_norm(mass, &diff) / 3.0;
                    let rel = if e == 0.0 { 0.0 } else { e / scale.max(1e-300) };
                    Ok((mid, end, rel))
                })
                .into_iter()
                .collect::<Result<_>>()?;
                let err = trial.iter().map(|(_, _, e)| *e).fold(0.0, f64::max);
                if err <= tol || dt <= dt_min {
                    let (mids, ends): (Vec<_>, Vec<_>) = trial.into_iter().map(|(m, e, _)| (m, e)).unzip();
                    record(t + 0.5 * dt, &mids, &mut norms, &mut stats);
                    t = if last { t_final } else { t + dt };
                    record(t, &ends, &mut norms, &mut stats);
                    u = ends;
                    stats.steps += 1;
                } else {
                    stats.rejected += 1;
                }
                let factor = if err == 0.0 { 2.0 } else { (0.9 * (tol / err).cbrt()).clamp(0.2, 2.0) };
                dt *= factor;
            }
        }
    }
    stats.matvecs = op.matvecs() - start;
    Ok(stats)
}

fn step_all(op: &HeatOperator, u: &[Vec<f64>], dt: f64, s: usize) -> Result<Vec<Vec<f64>>> {
    par::map_range(0..u.len(), |i| op.rkc_step(&u[i], dt, s))
        .into_iter()
        .collect()
}

/// `q_ij = Σ_k u^i_k w_k u^j_k`.
pub fn correlation(weights: &[f64], u: &[Vec<f64>]) -> Tensor {
    let mut q = tensor::ZERO;
    for i in 0..u.len() {
        for j in i..u.len() {
            let v = par::weighted_dot(weights, &u[i], &u[j]);
            q[i][j] = v;
            q[j][i] = v;
        }
    }
    q
}

#[derive(Debug, Clone)]
pub struct ParabolicOutcome {
    /// `J = ∫_0^T q dt`, one per filtered mass.
    pub j: Vec<Tensor>,
    pub state: ParabolicState,
    pub stats: EvolutionStats,
    pub tol_t: f64,
}

/// Evolves the `d` cell problems of a Dirichlet system to `t_final` and
/// integrates `q_ij` for every mass in `weights`.
pub fn evolve_and_integrate_weights(
    sys: &FemSystem,
    t_final: f64,
    opts: &TimeOptions,
    weights: &[&[f64]],
) -> Result<ParabolicOutcome> {
    let dim = sys.dim();
    let op = HeatOperator::from_system(sys, opts.damping);
    let u0: Vec<Vec<f64>> = (0..dim).map(|i| initial_condition(sys, i)).collect();
    let tol = opts.tolerance_for(sys.mesh.h);
    let mut samples: Vec<Vec<(f64, Tensor)>> = vec![Vec::new(); weights.len()];
    let mut decay: Vec<Vec<(f64, f64)>> = vec![Vec::new(); dim];
    let mut last_u = Vec::new();
    let mut last_t = 0.0;
    let stats = evolve(&op, &sys.mass, u0, t_final, opts, tol, |t, u| {
        for (w, s) in weights.iter().zip(samples.iter_mut()) {
            s.push((t, correlation(w, u)));
        }
        for (i, v) in u.iter().enumerate() {
            decay[i].push((t, mass_norm(&sys.mass, v)));
        }
        if t >= t_final {
            last_u = u.to_vec();
        }
        last_t = t;
    })?;
    let mut j = Vec::with_capacity(weights.len());
    for s in &samples {
        let mut jt = tensor::ZERO;
        for a in 0..dim {
            for b in a..dim {
                let series: Vec<(f64, f64)> = s.iter().map(|(t, q)| (*t, q[a][b])).collect();
                let v = simpson_nonuniform(&series)?;
                jt[a][b] = v;
                jt[b][a] = v;
            }
        }
        j.push(jt);
    }
    Ok(ParabolicOutcome {
        j,
        state: ParabolicState {
            t: last_t,
            u: last_u,
            samples,
            decay,
        },
        stats,
        tol_t: tol,
    })
}

/// [`evolve_and_integrate_weights`] with the system's own filtered mass.
pub fn evolve_and_integrate(sys: &FemSystem, t_final: f64, opts: &TimeOptions) -> Result<ParabolicOutcome> {
    let fm = sys.filtered_mass.as_deref().ok_or_else(|| {
        HomogError::InvalidParameter("parabolic integration needs a filtered mass".into())
    })?;
    evolve_and_integrate_weights(sys, t_final, opts, &[fm])
}
