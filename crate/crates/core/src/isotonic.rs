//! Weighted isotonic regression by pool-adjacent-violators.

use alloc::vec::Vec;

/// Nondecreasing vector minimising `Σ w_i (x_i - y_i)^2`. Weights must be positive.
pub fn isotonic_regression(y: &[f64], w: &[f64]) -> Vec<f64> {
    assert_eq!(y.len(), w.len());
    // blocks: (weighted mean, total weight, length)
    let mut mean: Vec<f64> = Vec::with_capacity(y.len());
    let mut weight: Vec<f64> = Vec::with_capacity(y.len());
    let mut len: Vec<usize> = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        mean.push(y[i]);
        weight.push(w[i]);
        len.push(1);
        while mean.len() > 1 {
            let k = mean.len() - 1;
            if mean[k - 1] <= mean[k] {
                break;
            }
            let wt = weight[k - 1] + weight[k];
            let mu = (mean[k - 1] * weight[k - 1] + mean[k] * weight[k]) / wt;
            let l = len[k - 1] + len[k];
            mean.pop();
            weight.pop();
            len.pop();
            mean[k - 1] = mu;
            weight[k - 1] = wt;
            len[k - 1] = l;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (m, l) in mean.iter().zip(len.iter()) {
        for _ in 0..*l {
            out.push(*m);
        }
    }
    out
}

/// Projection onto `{x nondecreasing, lo <= x <= hi}` in the `w`-weighted norm.
pub fn project_monotone_box(y: &[f64], w: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut x = isotonic_regression(y, w);
    for v in x.iter_mut() {
        *v = v.clamp(lo, hi);
    }
    x
}
