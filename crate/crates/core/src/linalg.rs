//! Banded solves used by the Newton iterations.

use alloc::vec::Vec;

/// Solves a symmetric tridiagonal system with diagonal `d` and off-diagonal
/// `e` (`e[i]` couples `i` and `i+1`). No pivoting: meant for SPD matrices.
pub fn solve_tridiagonal(d: &[f64], e: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = d.len();
    assert!(e.len() + 1 >= n && rhs.len() == n);
    if n == 0 {
        return Vec::new();
    }
    let mut c = alloc::vec![0.0; n];
    let mut x = alloc::vec![0.0; n];
    let mut piv = d[0];
    x[0] = rhs[0] / piv;
    for i in 1..n {
        c[i - 1] = e[i - 1] / piv;
        piv = d[i] - e[i - 1] * c[i - 1];
        x[i] = (rhs[i] - e[i - 1] * x[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Symmetric cyclic tridiagonal solve: `e[n-1]` couples `n-1` and `0`.
/// Sherman-Morrison on top of [`solve_tridiagonal`].
pub fn solve_cyclic_tridiagonal(d: &[f64], e: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = d.len();
    assert!(n >= 3 && e.len() == n && rhs.len() == n);
    let corner = e[n - 1];
    let gamma = -d[0];
    let mut dd = d.to_vec();
    dd[0] -= gamma;
    dd[n - 1] -= corner * corner / gamma;
    let y = solve_tridiagonal(&dd, &e[..n - 1], rhs);
    let mut u = alloc::vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = corner;
    let z = solve_tridiagonal(&dd, &e[..n - 1], &u);
    let fact = (y[0] + corner * y[n - 1] / gamma) / (1.0 + z[0] + corner * z[n - 1] / gamma);
    y.iter().zip(z.iter()).map(|(a, b)| a - fact * b).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn apply(d: &[f64], e: &[f64], x: &[f64], cyclic: bool) -> Vec<f64> {
        let n = d.len();
        let mut y: Vec<f64> = (0..n).map(|i| d[i] * x[i]).collect();
        for i in 0..n - 1 {
            y[i] += e[i] * x[i + 1];
            y[i + 1] += e[i] * x[i];
        }
        if cyclic {
            y[0] += e[n - 1] * x[n - 1];
            y[n - 1] += e[n - 1] * x[0];
        }
        y
    }

    #[test]
    fn solves_spd_systems() {
        let n = 9;
        let d: Vec<f64> = (0..n).map(|i| 4.0 + i as f64 * 0.1).collect();
        let e: Vec<f64> = (0..n).map(|i| -1.0 + 0.05 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let x = solve_tridiagonal(&d, &e[..n - 1], &b);
        let r = apply(&d, &e[..n - 1], &x, false);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
        let x = solve_cyclic_tridiagonal(&d, &e, &b);
        let r = apply(&d, &e, &x, true);
        for i in 0..n {
            assert!((r[i] - b[i]).abs() < 1e-12);
        }
    }
}
