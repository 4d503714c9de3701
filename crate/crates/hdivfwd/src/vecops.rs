//! Dense vector kernels with thread-count-independent reductions.
//!
//! Reductions are computed over fixed-size chunks whose partial sums are
//! combined in index order, so results are bit-identical for any number of
//! rayon worker threads.

use rayon::prelude::*;

const CHUNK: usize = 4096;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let partials: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>())
        .collect();
    partials.iter().sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sum(a: &[f64]) -> f64 {
    let partials: Vec<f64> = a.par_chunks(CHUNK).map(|x| x.iter().sum::<f64>()).collect();
    partials.iter().sum()
}

pub fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    sum(a) / a.len() as f64
}

/// Subtract the mean in place (the mean-zero gauge for Neumann problems).
pub fn project_mean_zero(a: &mut [f64]) {
    let m = mean(a);
    a.par_iter_mut().for_each(|x| *x -= m);
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// x = x * alpha + y
pub fn scale_add(alpha: f64, x: &mut [f64], y: &[f64]) {
    x.par_iter_mut().zip(y.par_iter()).for_each(|(xi, yi)| *xi = alpha * *xi + yi);
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.par_iter_mut().for_each(|xi| *xi *= alpha);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
