//! Small fixed-size tensors. Everything in the crate works in d ≤ 2, so a
//! 2×2 array is used throughout; in d = 1 only the `[0][0]` entry is live.

pub type Tensor = [[f64; 2]; 2];

pub const ZERO: Tensor = [[0.0; 2]; 2];

pub fn scaled_identity(s: f64) -> Tensor {
    [[s, 0.0], [0.0, s]]
}

pub fn add(a: &Tensor, b: &Tensor) -> Tensor {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub fn sub(a: &Tensor, b: &Tensor) -> Tensor {
    [
        [a[0][0] - b[0][0], a[0][1] - b[0][1]],
        [a[1][0] - b[1][0], a[1][1] - b[1][1]],
    ]
}

/// Extreme eigenvalues of the leading `dim`×`dim` block of a symmetric tensor.
pub fn sym_eigen_range(a: &Tensor, dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (a[0][0], a[0][0]);
    }
    let half_tr = 0.5 * (a[0][0] + a[1][1]);
    let diff = 0.5 * (a[0][0] - a[1][1]);
    let rad = (diff * diff + a[0][1] * a[1][0]).sqrt();
    (half_tr - rad, half_tr + rad)
}

/// Frobenius norm of the leading `dim`×`dim` block.
pub fn frobenius(a: &Tensor, dim: usize) -> f64 {
    let mut s = 0.0;
    for row in a.iter().take(dim) {
        for v in row.iter().take(dim) {
            s += v * v;
        }
    }
    s.sqrt()
}

pub fn max_abs(a: &Tensor, dim: usize) -> f64 {
    let mut m: f64 = 0.0;
    for row in a.iter().take(dim) {
        for v in row.iter().take(dim) {
            m = m.max(v.abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_range_of_diagonal() {
        let (lo, hi) = sym_eigen_range(&[[1.0, 0.0], [0.0, 4.0]], 2);
        assert_eq!((lo, hi), (1.0, 4.0));
    }

    #[test]
    fn eigen_range_of_coupled() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3
        let (lo, hi) = sym_eigen_range(&[[2.0, 1.0], [1.0, 2.0]], 2);
        assert!((lo - 1.0).abs() < 1e-15 && (hi - 3.0).abs() < 1e-15);
    }

    #[test]
    fn frobenius_respects_dim() {
        let a = [[3.0, 0.0], [0.0, 4.0]];
        assert_eq!(frobenius(&a, 2), 5.0);
        assert_eq!(frobenius(&a, 1), 3.0);
    }
}
