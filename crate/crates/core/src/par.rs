//! Data-parallel helpers. With the `parallel` feature the loops run on the
//! rayon pool; without it they fall back to plain iterators. Results are
//! always collected in index order so that downstream reductions are
//! independent of the thread count.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many items the sequential path is used even when the
/// `parallel` feature is on.
#[cfg_attr(not(feature = "parallel"), allow(dead_code))]
pub const MIN_PARALLEL_LEN: usize = 4096;

pub fn map_range<T, F>(range: Range<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        range.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        range.map(f).collect()
    }
}

/// Weighted dot product `Σ w_k x_k y_k`, summed in fixed-size blocks so the
/// rounding is the same with and without threads.
pub fn weighted_dot(w: &[f64], x: &[f64], y: &[f64]) -> f64 {
    const BLOCK: usize = 1024;
    let block = |b: usize| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(x.len());
        let mut s = 0.0;
        for k in lo..hi {
            s += w[k] * x[k] * y[k];
        }
        s
    };
    let n_blocks = x.len().div_ceil(BLOCK);
    #[cfg(feature = "parallel")]
    let partial: Vec<f64> = if x.len() >= MIN_PARALLEL_LEN {
        (0..n_blocks).into_par_iter().map(block).collect()
    } else {
        (0..n_blocks).map(block).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partial: Vec<f64> = (0..n_blocks).map(block).collect();
    partial.iter().sum()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    const BLOCK: usize = 1024;
    let block = |b: usize| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(x.len());
        x[lo..hi].iter().zip(&y[lo..hi]).map(|(a, b)| a * b).sum::<f64>()
    };
    let n_blocks = x.len().div_ceil(BLOCK);
    #[cfg(feature = "parallel")]
    let partial: Vec<f64> = if x.len() >= MIN_PARALLEL_LEN {
        (0..n_blocks).into_par_iter().map(block).collect()
    } else {
        (0..n_blocks).map(block).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let partial: Vec<f64> = (0..n_blocks).map(block).collect();
    partial.iter().sum()
}
