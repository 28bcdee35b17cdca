//! Coefficient fields `a(x)`: symmetric, uniformly elliptic tensor fields
//! evaluated pointwise at the unit-cell scale.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{HomogError, Result};
use crate::par;
use crate::tensor::{self, Tensor};

/// Default number of lattice points per dimension and per unit length used
/// when estimating ellipticity bounds.
pub const DEFAULT_BOUND_SAMPLES: usize = 512;

/// A 1-periodic positive profile used by laminates.
#[derive(Clone)]
pub enum Profile {
    /// `mean + amplitude·sin(2πx)`
    Sine { mean: f64, amplitude: f64 },
    Constant(f64),
    /// `first` on `[0, 1/2)`, `second` on `[1/2, 1)` (taken modulo 1).
    TwoPhase { first: f64, second: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Profile {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Sine { mean, amplitude } => mean + amplitude * (2.0 * PI * x).sin(),
            Profile::Constant(c) => *c,
            Profile::TwoPhase { first, second } => {
                if x.rem_euclid(1.0) < 0.5 {
                    *first
                } else {
                    *second
                }
            }
            Profile::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Sine { mean, amplitude } => write!(f, "Sine({mean} + {amplitude} sin)"),
            Profile::Constant(c) => write!(f, "Constant({c})"),
            Profile::TwoPhase { first, second } => write!(f, "TwoPhase({first}, {second})"),
            Profile::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// One term `cos(k·x + phase)` of the truncated random Fourier series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub k: [f64; 2],
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LognormalParams {
    pub seed: u64,
    pub n_modes: usize,
    pub sigma: f64,
    pub corr_len: f64,
    pub waves: Vec<Wave>,
}

impl LognormalParams {
    fn generate(seed: u64, n_modes: usize, sigma: f64, corr_len: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0 / corr_len).expect("corr_len checked positive");
        let waves = (0..n_modes)
            .map(|_| {
                let k = [normal.sample(&mut rng), normal.sample(&mut rng)];
                let phase = rng.random_range(0.0..2.0 * PI);
                Wave { k, phase }
            })
            .collect();
        Self {
            seed,
            n_modes,
            sigma,
            corr_len,
            waves,
        }
    }

    /// The Gaussian exponent `g(x)`.
    pub fn gaussian(&self, x: &[f64]) -> f64 {
        let amp = self.sigma * (2.0 / self.n_modes as f64).sqrt();
        let sum: f64 = self
            .waves
            .iter()
            .map(|w| {
                let kx: f64 = x.iter().zip(w.k.iter()).map(|(xi, ki)| xi * ki).sum();
                (kx + w.phase).cos()
            })
            .sum();
        amp * sum
    }
}

struct RowExtrema {
    min: (f64, Vec<f64>),
    max: (f64, Vec<f64>),
    bad: Option<Vec<f64>>,
}

impl Default for RowExtrema {
    fn default() -> Self {
        Self {
            min: (f64::INFINITY, Vec::new()),
            max: (f64::NEG_INFINITY, Vec::new()),
            bad: None,
        }
    }
}

#[derive(Clone)]
pub enum FieldKind {
    Constant(Tensor),
    GloriaLeBris,
    Laminate(Profile),
    Checkerboard { c1: f64, c2: f64 },
    Lognormal(LognormalParams),
    Custom(Arc<dyn Fn(&[f64]) -> Tensor + Send + Sync>),
}

impl fmt::Debug for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldKind::Constant(a) => write!(f, "Constant({a:?})"),
            FieldKind::GloriaLeBris => write!(f, "GloriaLeBris"),
            FieldKind::Laminate(p) => write!(f, "Laminate({p:?})"),
            FieldKind::Checkerboard { c1, c2 } => write!(f, "Checkerboard({c1}, {c2})"),
            FieldKind::Lognormal(p) => write!(
                f,
                "Lognormal(seed={}, modes={}, sigma={}, corr_len={})",
                p.seed, p.n_modes, p.sigma, p.corr_len
            ),
            FieldKind::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// A symmetric coefficient field with ellipticity bounds `alpha ≤ beta`.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub kind: FieldKind,
    pub alpha: f64,
    pub beta: f64,
    /// Cell period (1 for the periodic families), `None` when non-periodic.
    pub period: Option<f64>,
}

impl CoefficientField {
    pub fn constant(a: Tensor) -> Self {
        let (lo, hi) = tensor::sym_eigen_range(&a, 2);
        Self {
            kind: FieldKind::Constant(a),
            alpha: lo,
            beta: hi,
            period: Some(1.0),
        }
    }

    pub fn constant_isotropic(c: f64) -> Self {
        Self::constant(tensor::scaled_identity(c))
    }

    /// The smooth isotropic two-dimensional test tensor
    /// `[(2+1.8 sin 2πx1)/(2+1.8 cos 2πx2) + (2+sin 2πx2)/(2+1.8 cos 2πx1)]·Id`.
    pub fn gloria_lebris() -> Self {
        let mut field = Self {
            kind: FieldKind::GloriaLeBris,
            alpha: f64::NAN,
            beta: f64::NAN,
            period: Some(1.0),
        };
        field
            .ellipticity_bounds(DEFAULT_BOUND_SAMPLES, 1.0)
            .expect("test tensor is elliptic");
        field
    }

    /// `a(x) = profile(x1)·Id`.
    pub fn laminate_1d(profile: Profile) -> Self {
        let mut field = Self {
            kind: FieldKind::Laminate(profile),
            alpha: f64::NAN,
            beta: f64::NAN,
            period: Some(1.0),
        };
        if let Err(e) = field.ellipticity_bounds(DEFAULT_BOUND_SAMPLES, 1.0) {
            panic!("laminate profile must be bounded away from 0: {e}");
        }
        field
    }

    /// Checkerboard: `c1·Id` on the two diagonal quarter cells, `c2·Id` on the
    /// off-diagonal ones.
    pub fn checkerboard(c1: f64, c2: f64) -> Result<Self> {
        if !(c1 > 0.0 && c2 > 0.0) {
            return Err(HomogError::InvalidParameter(format!(
                "checkerboard values must be positive, got ({c1}, {c2})"
            )));
        }
        Ok(Self {
            kind: FieldKind::Checkerboard { c1, c2 },
            alpha: c1.min(c2),
            beta: c1.max(c2),
            period: Some(1.0),
        })
    }

    /// `a(x) = exp(g(x))·Id` for a fixed realization `g` of a truncated random
    /// Fourier series with squared-exponential covariance of length `corr_len`.
    /// Bounds are initially sampled on a box of edge 8; call
    /// [`CoefficientField::ellipticity_bounds`] for the box actually used.
    pub fn lognormal(seed: u64, n_modes: usize, sigma: f64, corr_len: f64) -> Result<Self> {
        if n_modes == 0 || !(sigma >= 0.0) || !(corr_len > 0.0) {
            return Err(HomogError::InvalidParameter(format!(
                "lognormal needs n_modes >= 1, sigma >= 0, corr_len > 0 \
                 (got {n_modes}, {sigma}, {corr_len})"
            )));
        }
        let mut field = Self {
            kind: FieldKind::Lognormal(LognormalParams::generate(seed, n_modes, sigma, corr_len)),
            alpha: f64::NAN,
            beta: f64::NAN,
            period: None,
        };
        field.ellipticity_bounds(DEFAULT_BOUND_SAMPLES, 8.0)?;
        Ok(field)
    }

    /// A user-supplied field. Bounds and periodicity are taken on trust.
    pub fn custom(
        f: impl Fn(&[f64]) -> Tensor + Send + Sync + 'static,
        alpha: f64,
        beta: f64,
        period: Option<f64>,
    ) -> Self {
        Self {
            kind: FieldKind::Custom(Arc::new(f)),
            alpha,
            beta,
            period,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.period.is_some()
    }

    pub fn eval(&self, x: &[f64]) -> Tensor {
        match &self.kind {
            FieldKind::Constant(a) => *a,
            FieldKind::GloriaLeBris => {
                let (x1, x2) = (x[0], x.get(1).copied().unwrap_or(0.0));
                let (s1, c1) = (2.0 * PI * x1).sin_cos();
                let (s2, c2) = (2.0 * PI * x2).sin_cos();
                let v = (2.0 + 1.8 * s1) / (2.0 + 1.8 * c2) + (2.0 + s2) / (2.0 + 1.8 * c1);
                tensor::scaled_identity(v)
            }
            FieldKind::Laminate(p) => tensor::scaled_identity(p.eval(x[0])),
            FieldKind::Checkerboard { c1, c2 } => {
                let lo1 = x[0].rem_euclid(1.0) < 0.5;
                let lo2 = x.get(1).copied().unwrap_or(0.0).rem_euclid(1.0) < 0.5;
                tensor::scaled_identity(if lo1 == lo2 { *c1 } else { *c2 })
            }
            FieldKind::Lognormal(p) => tensor::scaled_identity(p.gaussian(x).exp()),
            FieldKind::Custom(f) => f(x),
        }
    }

    /// Estimates `(alpha, beta)` as the extreme eigenvalues of `a` over a
    /// lattice of `n_samples_per_dim` points per dimension spanning the cube
    /// of edge `box_edge` centred at the origin, and stores them.
    ///
    /// Constant and checkerboard fields have closed-form bounds and ignore the
    /// lattice.
    pub fn ellipticity_bounds(&mut self, n_samples_per_dim: usize, box_edge: f64) -> Result<(f64, f64)> {
        if n_samples_per_dim < 2 {
            return Err(HomogError::InvalidParameter(
                "ellipticity sampling needs at least 2 points per dimension".into(),
            ));
        }
        match self.kind {
            FieldKind::Constant(_) | FieldKind::Checkerboard { .. } => {
                return Ok((self.alpha, self.beta));
            }
            _ => {}
        }
        let dim = self.natural_dim();
        let n = n_samples_per_dim;
        let step = box_edge / (n - 1) as f64;
        let lo = -0.5 * box_edge;
        let point = |i: usize, j: usize| -> Vec<f64> {
            if dim == 1 {
                vec![lo + i as f64 * step]
            } else {
                vec![lo + i as f64 * step, lo + j as f64 * step]
            }
        };
        let rows: Vec<RowExtrema> = par::map_range(0..if dim == 1 { 1 } else { n }, |j| {
            let mut acc = RowExtrema::default();
            for i in 0..n {
                let x = point(i, j);
                let (emin, emax) = tensor::sym_eigen_range(&self.eval(&x), dim);
                if !(emin > 0.0) && acc.bad.is_none() {
                    acc.bad = Some(x.clone());
                }
                if emin < acc.min.0 {
                    acc.min = (emin, x.clone());
                }
                if emax > acc.max.0 {
                    acc.max = (emax, x);
                }
            }
            acc
        });
        let mut min = (f64::INFINITY, Vec::new());
        let mut max = (f64::NEG_INFINITY, Vec::new());
        for row in rows {
            if let Some(x) = row.bad {
                let eigenvalue = tensor::sym_eigen_range(&self.eval(&x), dim).0;
                return Err(HomogError::NotElliptic { x, eigenvalue });
            }
            if row.min.0 < min.0 {
                min = row.min;
            }
            if row.max.0 > max.0 {
                max = row.max;
            }
        }
        // polish the lattice extrema with a compass search inside the box
        let half = 0.5 * box_edge;
        let alpha = self.compass(min.1, step, half, dim, |a| a.0);
        let beta = -self.compass(max.1, step, half, dim, |a| -a.1);
        self.alpha = alpha;
        self.beta = beta;
        Ok((alpha, beta))
    }

    /// Minimizes `objective(eigen range)` by compass search from `start`.
    fn compass(
        &self,
        start: Vec<f64>,
        step: f64,
        half: f64,
        dim: usize,
        objective: impl Fn((f64, f64)) -> f64,
    ) -> f64 {
        let eval = |x: &[f64]| objective(tensor::sym_eigen_range(&self.eval(x), dim));
        let mut x = start;
        let mut best = eval(&x);
        let mut h = step;
        while h > 1e-11 * half.max(1.0) {
            let mut improved = false;
            for k in 0..dim {
                for sign in [-1.0, 1.0] {
                    let mut y = x.clone();
                    y[k] = (y[k] + sign * h).clamp(-half, half);
                    let v = eval(&y);
                    if v < best {
                        best = v;
                        x = y;
                        improved = true;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        best
    }

    /// Laminates are genuinely one-dimensional; every other family is sampled
    /// in the plane.
    fn natural_dim(&self) -> usize {
        match self.kind {
            FieldKind::Laminate(_) => 1,
            _ => 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::LazyLock;

    fn assert_tensor_eq(a: Tensor, b: Tensor, tol: f64) {
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).abs() <= tol, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn constant_field_evaluates_to_itself() {
        let f = CoefficientField::constant_isotropic(2.0);
        assert_eq!(f.eval(&[0.3, 0.7]), [[2.0, 0.0], [0.0, 2.0]]);
        assert_eq!((f.alpha, f.beta), (2.0, 2.0));
    }

    #[test]
    fn gloria_lebris_at_origin() {
        let f = CoefficientField::gloria_lebris();
        let s = 2.0 * (2.0 / 3.8);
        assert_tensor_eq(f.eval(&[0.0, 0.0]), tensor::scaled_identity(s), 1e-15);
    }

    #[test]
    fn gloria_lebris_at_its_peak() {
        // term1 = 3.8/0.2 = 19, term2 = (2 + sin π)/(2 + 1.8 cos(π/2)) = 1
        let f = CoefficientField::gloria_lebris();
        assert_tensor_eq(f.eval(&[0.25, 0.5]), tensor::scaled_identity(20.0), 1e-12);
        assert!(f.beta >= 19.0);
        assert!(f.alpha > 0.0 && f.alpha < f.beta);
    }

    #[test]
    fn laminate_values_and_bounds() {
        let f = CoefficientField::laminate_1d(Profile::Sine { mean: 2.0, amplitude: 1.0 });
        assert_tensor_eq(f.eval(&[0.25, 0.9]), tensor::scaled_identity(3.0), 1e-15);
        assert!((f.alpha - 1.0).abs() < 0.01);
        assert!((f.beta - 3.0).abs() < 0.01);

        let c = CoefficientField::laminate_1d(Profile::Constant(5.0));
        assert_eq!(c.eval(&[0.123, 0.4]), tensor::scaled_identity(5.0));
    }

    #[test]
    fn checkerboard_layout() {
        let f = CoefficientField::checkerboard(1.0, 4.0).unwrap();
        assert_eq!(f.eval(&[0.25, 0.25]), tensor::scaled_identity(1.0));
        assert_eq!(f.eval(&[0.75, 0.25]), tensor::scaled_identity(4.0));
        assert_eq!(f.eval(&[-0.25, -0.25]), tensor::scaled_identity(1.0));
        assert_eq!(f.eval(&[0.25, -0.25]), tensor::scaled_identity(4.0));
        assert_eq!((f.alpha, f.beta), (1.0, 4.0));

        let same = CoefficientField::checkerboard(3.0, 3.0).unwrap();
        assert_eq!(same.eval(&[0.1, 0.8]), tensor::scaled_identity(3.0));
        assert!(CoefficientField::checkerboard(0.0, 1.0).is_err());
    }

    #[test]
    fn checkerboard_bounds_are_exact() {
        let mut f = CoefficientField::checkerboard(1.0, 4.0).unwrap();
        assert_eq!(f.ellipticity_bounds(64, 1.0).unwrap(), (1.0, 4.0));
    }

    #[test]
    fn lognormal_with_zero_variance_is_identity() {
        let f = CoefficientField::lognormal(7, 16, 0.0, 0.5).unwrap();
        assert_eq!(f.eval(&[1.3, -2.2]), tensor::scaled_identity(1.0));
    }

    #[test]
    fn lognormal_sample_mean_is_near_zero() {
        let f = CoefficientField::lognormal(1, 64, 0.5, 0.5).unwrap();
        let FieldKind::Lognormal(p) = &f.kind else { unreachable!() };
        let n = 256;
        let mut vals = Vec::with_capacity(n * n);
        // a box large enough to contain many correlation lengths
        let edge = 64.0;
        for j in 0..n {
            for i in 0..n {
                let x = [-edge / 2.0 + edge * i as f64 / n as f64, -edge / 2.0 + edge * j as f64 / n as f64];
                vals.push(p.gaussian(&x));
            }
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        assert!(mean.abs() <= 3.0 * var.sqrt() / 256.0, "mean {mean}, std {}", var.sqrt());
    }

    #[test]
    fn lognormal_rejects_bad_parameters() {
        assert!(CoefficientField::lognormal(1, 0, 0.5, 0.5).is_err());
        assert!(CoefficientField::lognormal(1, 4, 0.5, 0.0).is_err());
    }

    #[test]
    fn non_elliptic_field_is_reported() {
        let mut f = CoefficientField::custom(
            |x: &[f64]| tensor::scaled_identity(x[0]),
            1.0,
            1.0,
            None,
        );
        match f.ellipticity_bounds(16, 2.0) {
            Err(HomogError::NotElliptic { eigenvalue, .. }) => assert!(eigenvalue <= 0.0),
            other => panic!("expected NotElliptic, got {other:?}"),
        }
    }

    static ALL_FIELDS: LazyLock<Vec<CoefficientField>> = LazyLock::new(|| {
        vec![
            CoefficientField::constant([[2.0, 0.5], [0.5, 1.0]]),
            CoefficientField::gloria_lebris(),
            CoefficientField::laminate_1d(Profile::Sine { mean: 2.0, amplitude: 1.0 }),
            CoefficientField::laminate_1d(Profile::TwoPhase { first: 1.0, second: 4.0 }),
            CoefficientField::checkerboard(1.0, 4.0).unwrap(),
            CoefficientField::lognormal(3, 32, 0.5, 0.5).unwrap(),
        ]
    });

    fn all_fields() -> &'static [CoefficientField] {
        &ALL_FIELDS
    }

    proptest! {
        #[test]
        fn every_field_is_symmetric(x1 in -4.0f64..4.0, x2 in -4.0f64..4.0) {
            for f in all_fields() {
                let a = f.eval(&[x1, x2]);
                prop_assert_eq!(a[0][1], a[1][0]);
            }
        }

        #[test]
        fn periodic_fields_wrap(x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, k in 0usize..2) {
            for f in all_fields().iter().filter(|f| f.is_periodic()) {
                let p = f.period.unwrap();
                let mut y = [x1, x2];
                y[k] += p;
                let a = f.eval(&[x1, x2]);
                let b = f.eval(&y);
                // the two-phase fields jump; skip points within rounding of an interface
                let near_jump = [x1, x2].iter().any(|v| {
                    let r = v.rem_euclid(0.5);
                    r < 1e-9 || r > 0.5 - 1e-9
                });
                if !near_jump {
                    for i in 0..2 { for j in 0..2 {
                        prop_assert!((a[i][j] - b[i][j]).abs() <= 1e-12);
                    }}
                }
            }
        }

        #[test]
        fn sampled_eigenvalues_lie_within_bounds(x1 in -0.5f64..0.5, x2 in -0.5f64..0.5) {
            for f in all_fields().iter().filter(|f| f.is_periodic()) {
                let (lo, hi) = tensor::sym_eigen_range(&f.eval(&[x1, x2]), 2);
                prop_assert!(lo >= f.alpha * (1.0 - 1e-9));
                prop_assert!(hi <= f.beta * (1.0 + 1e-9));
            }
        }

    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn lognormal_is_deterministic(seed in 0u64..1000, x1 in -5.0f64..5.0, x2 in -5.0f64..5.0) {
            let a = CoefficientField::lognormal(seed, 8, 0.7, 0.4).unwrap();
            let b = CoefficientField::lognormal(seed, 8, 0.7, 0.4).unwrap();
            let (FieldKind::Lognormal(pa), FieldKind::Lognormal(pb)) = (&a.kind, &b.kind) else { unreachable!() };
            prop_assert_eq!(pa, pb);
            prop_assert_eq!(a.eval(&[x1, x2]), b.eval(&[x1, x2]));
        }
    }
}
