//! Dense real eigenbases of the grid Laplacian (Fourier on periodic axes,
//! cosine on walled axes) and the spectral heat solution.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::entropy::GridDensity;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Orthonormal eigenvectors of the 3-point Laplacian along one axis.
#[derive(Debug, Clone)]
pub struct AxisBasis {
    pub n: usize,
    /// Row-major `n x n`: entry `(j, c)` is mode `c` at cell `j`.
    pub mat: Vec<f64>,
    /// Angular frequency of each mode.
    pub freq: Vec<f64>,
    /// Eigenvalue of the discrete `-Δ` for each mode.
    pub lap: Vec<f64>,
}

impl AxisBasis {
    pub fn trivial() -> Self {
        Self { n: 1, mat: alloc::vec![1.0], freq: alloc::vec![0.0], lap: alloc::vec![0.0] }
    }

    /// Fourier modes on a periodic axis of the given length.
    pub fn periodic(n: usize, length: f64) -> Self {
        let h = length / n as f64;
        let mut mat = alloc::vec![0.0; n * n];
        let mut freq = Vec::with_capacity(n);
        let mut lap = Vec::with_capacity(n);
        let nf = n as f64;
        let mut c = 0;
        let mut push = |c: usize, k: usize, f: &dyn Fn(usize) -> f64, mat: &mut Vec<f64>| {
            for j in 0..n {
                mat[j * n + c] = f(j);
            }
            freq.push(2.0 * PI * k as f64 / length);
            let s = libm::sin(PI * k as f64 / nf);
            lap.push(4.0 / (h * h) * s * s);
        };
        push(c, 0, &|_| 1.0 / libm::sqrt(nf), &mut mat);
        c += 1;
        let mut k = 1;
        while 2 * k < n {
            let a = libm::sqrt(2.0 / nf);
            push(c, k, &|j| a * libm::cos(2.0 * PI * (k * j) as f64 / nf), &mut mat);
            push(c + 1, k, &|j| a * libm::sin(2.0 * PI * (k * j) as f64 / nf), &mut mat);
            c += 2;
            k += 1;
        }
        if n % 2 == 0 {
            push(c, n / 2, &|j| if j % 2 == 0 { 1.0 } else { -1.0 } / libm::sqrt(nf), &mut mat);
        }
        Self { n, mat, freq, lap }
    }

    /// Cosine modes (zero-flux walls) on an axis of the given length.
    pub fn neumann(n: usize, length: f64) -> Self {
        let h = length / n as f64;
        let nf = n as f64;
        let mut mat = alloc::vec![0.0; n * n];
        let mut freq = Vec::with_capacity(n);
        let mut lap = Vec::with_capacity(n);
        for k in 0..n {
            let a = if k == 0 { libm::sqrt(1.0 / nf) } else { libm::sqrt(2.0 / nf) };
            for j in 0..n {
                mat[j * n + k] = a * libm::cos(PI * k as f64 * (j as f64 + 0.5) / nf);
            }
            freq.push(PI * k as f64 / length);
            let s = libm::sin(PI * k as f64 / (2.0 * nf));
            lap.push(4.0 / (h * h) * s * s);
        }
        Self { n, mat, freq, lap }
    }

    pub fn for_axis(grid: &Grid, axis: usize) -> Self {
        if axis >= grid.dim() {
            return Self::trivial();
        }
        let n = grid.n[axis];
        let l = grid.domain.length(axis);
        if grid.domain.periodic[axis] {
            Self::periodic(n, l)
        } else {
            Self::neumann(n, l)
        }
    }
}

/// Pair of axis bases for a grid.
#[derive(Debug, Clone)]
pub struct GridBasis {
    pub b0: AxisBasis,
    pub b1: AxisBasis,
}

impl GridBasis {
    pub fn new(grid: &Grid) -> Self {
        Self { b0: AxisBasis::for_axis(grid, 0), b1: AxisBasis::for_axis(grid, 1) }
    }

    /// Field (index `i + n0 j`) to mode coefficients (same layout).
    pub fn forward(&self, field: &[f64]) -> Vec<f64> {
        self.transform(field, true)
    }

    pub fn inverse(&self, coef: &[f64]) -> Vec<f64> {
        self.transform(coef, false)
    }

    fn transform(&self, x: &[f64], fwd: bool) -> Vec<f64> {
        let (n0, n1) = (self.b0.n, self.b1.n);
        assert_eq!(x.len(), n0 * n1);
        // axis 0
        let mut tmp = alloc::vec![0.0; n0 * n1];
        for j in 0..n1 {
            let row = &x[j * n0..(j + 1) * n0];
            for c in 0..n0 {
                let mut s = 0.0;
                for (i, v) in row.iter().enumerate() {
                    let b = if fwd { self.b0.mat[i * n0 + c] } else { self.b0.mat[c * n0 + i] };
                    s += b * v;
                }
                tmp[j * n0 + c] = s;
            }
        }
        if n1 == 1 {
            return tmp;
        }
        let mut out = alloc::vec![0.0; n0 * n1];
        for c1 in 0..n1 {
            for j in 0..n1 {
                let b = if fwd { self.b1.mat[j * n1 + c1] } else { self.b1.mat[c1 * n1 + j] };
                if b == 0.0 {
                    continue;
                }
                let src = &tmp[j * n0..(j + 1) * n0];
                let dst = &mut out[c1 * n0..(c1 + 1) * n0];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += b * s;
                }
            }
        }
        out
    }

    /// Multiplies every mode by `symbol(discrete -Δ eigenvalue, continuous |k|^2)`.
    pub fn apply_symbol(&self, field: &[f64], symbol: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut c = self.forward(field);
        let n0 = self.b0.n;
        for (idx, v) in c.iter_mut().enumerate() {
            let (i, j) = (idx % n0, idx / n0);
            let lap = self.b0.lap[i] + self.b1.lap[j];
            let k2 = self.b0.freq[i] * self.b0.freq[i] + self.b1.freq[j] * self.b1.freq[j];
            *v *= symbol(lap, k2);
        }
        self.inverse(&c)
    }
}

/// Exact heat flow `∂t ρ = Δρ` of the trigonometric interpolant of `rho0` on a
/// fully periodic grid.
pub fn spectral_heat(rho0: &GridDensity, t: f64) -> Result<GridDensity> {
    let g = &rho0.grid;
    if (0..g.dim()).any(|a| !g.domain.periodic[a]) {
        return Err(Error::Invalid("spectral reference needs a periodic grid"));
    }
    let basis = GridBasis::new(g);
    let v = basis.apply_symbol(&rho0.values, |_, k2| libm::exp(-k2 * t));
    GridDensity::normalized(g.clone(), v.into_iter().map(|x| x.max(0.0)).collect())
}
