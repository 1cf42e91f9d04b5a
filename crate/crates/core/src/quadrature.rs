//! Gauss-Legendre quadrature: nodes/weights by Newton iteration on the
//! three-term recurrence, plus tensor-product integration over boxes.
//!
//! An n-point rule integrates polynomials through degree 2n-1 exactly; the
//! C^3 cuboid profiles and kernel factors integrated here are piecewise
//! smooth, so node-doubling comparisons give a usable error estimate.

use crate::error::{Error, Result};

/// Nodes (ascending) and weights of the n-point rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi-style first guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 1..n {
                let p2 = ((2 * k + 1) as f64 * x * p1 - k as f64 * p0) / (k + 1) as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x; // cos guess starts near +1; fill ascending from -1
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// The n-point rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|t| t * half).collect(),
    )
}

/// Tensor-product integration of f over the box given by per-axis rules.
pub fn tensor_integrate<F: Fn(&[f64]) -> f64 + Sync>(
    axes: &[(Vec<f64>, Vec<f64>)],
    f: F,
) -> f64 {
    use rayon::prelude::*;
    let d = axes.len();
    assert!(d >= 1);
    // parallelize over the first axis; inner axes by odometer
    let partials: Vec<f64> = (0..axes[0].0.len())
        .into_par_iter()
        .map(|i0| {
            let mut x = vec![0.0; d];
            x[0] = axes[0].0[i0];
            let mut sum = 0.0;
            let mut idx = vec![0usize; d];
            'outer: loop {
                let mut w = axes[0].1[i0];
                for a in 1..d {
                    x[a] = axes[a].0[idx[a]];
                    w *= axes[a].1[idx[a]];
                }
                sum += w * f(&x);
                for a in (1..d).rev() {
                    idx[a] += 1;
                    if idx[a] < axes[a].0.len() {
                        continue 'outer;
                    }
                    idx[a] = 0;
                }
                break;
            }
            sum
        })
        .collect();
    partials.iter().sum()
}

/// Integrate with node doubling until the relative change drops below `tol`
/// (or `max_refinements` is hit). Returns (value, last relative change,
/// refinements used). `base` holds per-axis (node count, lo, hi).
pub fn adaptive_tensor_integrate<F: Fn(&[f64]) -> f64 + Sync>(
    base: &[(usize, f64, f64)],
    f: F,
    tol: f64,
    max_refinements: usize,
) -> Result<(f64, f64, usize)> {
    let rules = |mult: usize| -> Vec<(Vec<f64>, Vec<f64>)> {
        base.iter()
            .map(|&(n, a, b)| gauss_legendre_on(n * mult, a, b))
            .collect()
    };
    let mut prev = tensor_integrate(&rules(1), &f);
    for r in 1..=max_refinements {
        let cur = tensor_integrate(&rules(1 << r), &f);
        let denom = cur.abs().max(prev.abs());
        let change = if denom == 0.0 { 0.0 } else { (cur - prev).abs() / denom };
        if change < tol {
            return Ok((cur, change, r));
        }
        prev = cur;
    }
    Err(Error::QuadratureNoConvergence(format!(
        "node doubling stalled after {max_refinements} refinements (last value {prev:.6e})"
    )))
}
