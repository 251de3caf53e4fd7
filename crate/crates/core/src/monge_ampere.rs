//! Monge-Ampère measures of discrete convex functions, convexity
//! certificates and the determinant / Laplacian lower-bound checks.
//!
//! In 1D a potential lives on an arbitrary increasing point list; the
//! measure of a vertex is the jump of the slope of the piecewise-linear
//! interpolant there. In 2D it lives on a rectangular lattice; the mass of a
//! vertex is the area of its subdifferential, read off the Union-Jack
//! interpolant when that interpolant is convex and computed exactly as an
//! intersection of half-planes otherwise.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::isotonic::isotonic_regression;

/// A vertex whose measure density exceeds this multiple of both neighbours'
/// densities is reported as an atom.
pub const ATOM_JUMP: f64 = 8.0;

/// Default quadrature guard added to every slack budget.
pub const GUARD: f64 = 1e-3;

/// Discrete potential on an increasing 1D point list.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential1D {
    pub x: Vec<f64>,
    /// Lower convex envelope of `raw` at the points.
    pub u: Vec<f64>,
    pub raw: Vec<f64>,
    /// `max(raw - u)`.
    pub delta_conv: f64,
}

/// Rectangular lattice of points `origin + (i h_0, j h_1)`, index `i + n_0 j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub n: [usize; 2],
    pub origin: [f64; 2],
    pub h: [f64; 2],
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, k: usize) -> [f64; 2] {
        let (i, j) = (k % self.n[0], k / self.n[0]);
        [self.origin[0] + i as f64 * self.h[0], self.origin[1] + j as f64 * self.h[1]]
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n[0] * j
    }

    /// Cell centres of a 2D grid.
    pub fn of_grid(grid: &Grid) -> Self {
        Self { n: [grid.n[0], grid.n[1]], origin: [grid.center_axis(0, 0), grid.center_axis(1, 0)], h: grid.h }
    }

    fn is_interior(&self, k: usize) -> bool {
        let (i, j) = (k % self.n[0], k / self.n[0]);
        i > 0 && j > 0 && i + 1 < self.n[0] && j + 1 < self.n[1]
    }
}

/// Discrete potential on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential2D {
    pub lattice: Lattice,
    pub u: Vec<f64>,
    pub raw: Vec<f64>,
    pub delta_conv: f64,
    /// Whether the Union-Jack interpolant of `u` is convex.
    pub uj_convex: bool,
}

/// Potential of either dimension.
#[derive(Debug, Clone, PartialEq)]
pub enum ConvexPotential {
    One(Potential1D),
    Two(Potential2D),
}

impl ConvexPotential {
    pub fn delta_conv(&self) -> f64 {
        match self {
            ConvexPotential::One(p) => p.delta_conv,
            ConvexPotential::Two(p) => p.delta_conv,
        }
    }
}

/// Per-vertex measure. `mass[k]` is zero outside `window`; atoms are
/// included in `mass` and also listed separately.
#[derive(Debug, Clone, PartialEq)]
pub struct MongeAmpereMeasure {
    pub mass: Vec<f64>,
    /// Dual-cell volume of every vertex.
    pub volume: Vec<f64>,
    pub window: Vec<usize>,
    pub atoms: Vec<([f64; 2], f64)>,
}

impl MongeAmpereMeasure {
    pub fn total(&self) -> f64 {
        self.window.iter().map(|&k| self.mass[k]).sum()
    }
}

/// Outcome of a determinant lower-bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaCheck {
    pub ok: bool,
    pub worst_cell: usize,
    /// `min mass / (λ^d vol)` over the window (`+inf` when `λ = 0`).
    pub worst_ratio: f64,
    /// Allowed shortfall per unit volume.
    pub slack: f64,
}

/// Outcome of the weak Laplacian check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmgmCheck {
    pub ok: bool,
    /// `min (Σ φ Δu / Σ φ) - d λ` over all test bumps.
    pub margin: f64,
    pub slack: f64,
}

// ---------------------------------------------------------------- 1D

/// Lower convex envelope on an increasing point list (pool-adjacent-violators
/// on slopes weighted by the gaps, which yields the greatest convex minorant).
pub fn convexify_1d(x: &[f64], raw: &[f64]) -> Result<Potential1D> {
    let n = x.len();
    if n != raw.len() || n < 2 {
        return Err(Error::Invalid("need at least two points with values"));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) || raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("points must increase and values must be finite"));
    }
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let slopes: Vec<f64> = (0..n - 1).map(|i| (raw[i + 1] - raw[i]) / dx[i]).collect();
    let s = isotonic_regression(&slopes, &dx);
    let mut u = Vec::with_capacity(n);
    u.push(raw[0]);
    for i in 0..n - 1 {
        u.push(u[i] + s[i] * dx[i]);
    }
    let delta_conv = raw.iter().zip(&u).map(|(a, b)| a - b).fold(0.0, f64::max);
    Ok(Potential1D { x: x.to_vec(), u, raw: raw.to_vec(), delta_conv })
}

/// Slope jumps at the interior vertices.
pub fn ma_measure_1d(p: &Potential1D) -> MongeAmpereMeasure {
    let n = p.x.len();
    let mut mass = alloc::vec![0.0; n];
    let mut volume = alloc::vec![0.0; n];
    let slope = |i: usize| (p.u[i + 1] - p.u[i]) / (p.x[i + 1] - p.x[i]);
    let window: Vec<usize> = (1..n - 1).collect();
    for &i in &window {
        mass[i] = (slope(i) - slope(i - 1)).max(0.0);
        volume[i] = 0.5 * (p.x[i + 1] - p.x[i - 1]);
    }
    let dens = |i: usize| if volume[i] > 0.0 { mass[i] / volume[i] } else { 0.0 };
    let floor = 1e-9 * window.iter().map(|&i| mass[i]).sum::<f64>();
    let mut atoms = Vec::new();
    for &i in &window {
        let nb = dens(i - 1).max(dens(i + 1));
        if mass[i] > floor && dens(i) > ATOM_JUMP * nb {
            atoms.push(([p.x[i], 0.0], mass[i]));
        }
    }
    MongeAmpereMeasure { mass, volume, window, atoms }
}

fn local_h_1d(p: &Potential1D, i: usize) -> f64 {
    (p.x[i] - p.x[i - 1]).min(p.x[i + 1] - p.x[i])
}

/// `mass >= (λ - slack) vol` at every interior vertex, with
/// `slack = δ_conv / h + guard`.
pub fn ma_lower_bound_check_1d(p: &Potential1D, lambda: f64, guard: f64) -> MaCheck {
    let mu = ma_measure_1d(p);
    let hmin = mu.window.iter().map(|&i| local_h_1d(p, i)).fold(f64::INFINITY, f64::min);
    let slack = p.delta_conv / hmin + guard;
    check_masses(&mu, lambda, 1, slack)
}

fn check_masses(mu: &MongeAmpereMeasure, lambda: f64, d: usize, slack: f64) -> MaCheck {
    let target = libm::pow(lambda.max(0.0), d as f64);
    let mut ok = true;
    let mut worst_cell = mu.window.first().copied().unwrap_or(0);
    let mut worst_ratio = f64::INFINITY;
    let mut worst_excess = f64::INFINITY;
    for &k in &mu.window {
        let v = mu.volume[k];
        let excess = mu.mass[k] / v - target;
        if excess < -slack {
            ok = false;
        }
        if target > 0.0 {
            let r = mu.mass[k] / (target * v);
            if r < worst_ratio {
                worst_ratio = r;
                worst_cell = k;
            }
        } else if excess < worst_excess {
            worst_excess = excess;
            worst_cell = k;
        }
    }
    MaCheck { ok, worst_cell, worst_ratio, slack }
}

/// Weak form `Σ φ_i μ_i >= λ Σ φ_i vol_i` for nodal hats of index radius 1..3.
pub fn amgm_subharmonic_check_1d(p: &Potential1D, lambda: f64, guard: f64) -> AmgmCheck {
    let mu = ma_measure_1d(p);
    let n = p.x.len();
    let mut margin = f64::INFINITY;
    for w in 1..=3usize {
        for c in 1..n - 1 {
            if c < w || c + w > n - 1 {
                continue;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for i in (c + 1 - w)..(c + w) {
                let phi = 1.0 - (i as f64 - c as f64).abs() / w as f64;
                num += phi * mu.mass[i];
                den += phi * mu.volume[i];
            }
            if den > 0.0 {
                margin = margin.min(num / den - lambda);
            }
        }
    }
    let hmin = mu.window.iter().map(|&i| local_h_1d(p, i)).fold(f64::INFINITY, f64::min);
    let slack = p.delta_conv / hmin + guard;
    AmgmCheck { ok: margin >= -slack, margin, slack }
}

// ---------------------------------------------------------------- 2D helpers

fn tri_gradient(a: [f64; 2], b: [f64; 2], c: [f64; 2], ua: f64, ub: f64, uc: f64) -> [f64; 2] {
    let (e1, e2) = ([b[0] - a[0], b[1] - a[1]], [c[0] - a[0], c[1] - a[1]]);
    let det = e1[0] * e2[1] - e1[1] * e2[0];
    let (d1, d2) = (ub - ua, uc - ua);
    [(d1 * e2[1] - d2 * e1[1]) / det, (e1[0] * d2 - e2[0] * d1) / det]
}

/// Union-Jack triangles: the diagonal of square `(i, j)` runs from its lower
/// left corner when `i + j` is even, from its lower right corner otherwise.
pub fn uj_triangles(l: &Lattice) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(2 * l.len());
    for j in 0..l.n[1].saturating_sub(1) {
        for i in 0..l.n[0].saturating_sub(1) {
            let (a, b, c, d) = (l.index(i, j), l.index(i + 1, j), l.index(i, j + 1), l.index(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                out.push([a, b, d]);
                out.push([a, d, c]);
            } else {
                out.push([a, b, c]);
                out.push([b, d, c]);
            }
        }
    }
    out
}

fn scale_of(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |a, v| a.max(v.abs())) + 1.0
}

/// Local convexity across every interior edge of the Union-Jack mesh.
pub fn uj_is_convex(l: &Lattice, u: &[f64], tol: f64) -> bool {
    let tris = uj_triangles(l);
    let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (t, tri) in tris.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            edges.entry((a.min(b), a.max(b))).or_default().push(t);
        }
    }
    for ((a, b), ts) in edges {
        if ts.len() != 2 {
            continue;
        }
        let t0 = tris[ts[0]];
        let t1 = tris[ts[1]];
        let opp = *t1.iter().find(|v| **v != a && **v != b).unwrap();
        let g = tri_gradient(l.point(t0[0]), l.point(t0[1]), l.point(t0[2]), u[t0[0]], u[t0[1]], u[t0[2]]);
        let pa = l.point(a);
        let po = l.point(opp);
        let plane = u[a] + g[0] * (po[0] - pa[0]) + g[1] * (po[1] - pa[1]);
        if u[opp] < plane - tol {
            return false;
        }
    }
    true
}

/// Lower convex envelope of the lattice values at one lattice point, as the
/// linear program `min Σ λ_k u_k` over convex weights reproducing the point.
/// Revised simplex on a 3x3 basis; Dantzig pricing with Bland's rule after
/// a run of degenerate pivots.
fn envelope_at(l: &Lattice, u: &[f64], v: usize, tol: f64) -> f64 {
    let n0 = l.n[0];
    let (i, j) = (v % n0, v / n0);
    let a = if i + 1 < n0 { l.index(i + 1, j) } else { l.index(i - 1, j) };
    let b = if j + 1 < l.n[1] { l.index(i, j + 1) } else { l.index(i, j - 1) };
    let mut basis = [v, a, b];
    let mut lam = [1.0, 0.0, 0.0];
    let col = |k: usize| {
        let p = l.point(k);
        [p[0], p[1], 1.0]
    };
    let mut degenerate = 0usize;
    for _ in 0..10_000 {
        // B has columns col(basis[c]); invert it
        let bm = [col(basis[0]), col(basis[1]), col(basis[2])];
        let m = |r: usize, c: usize| bm[c][r];
        let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        let mut inv = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
                let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
                inv[r][c] = (m(r1, c1) * m(r2, c2) - m(r1, c2) * m(r2, c1)) / det;
            }
        }
        // duals: π^T = u_B^T B^{-1}
        let ub = [u[basis[0]], u[basis[1]], u[basis[2]]];
        let pi: [f64; 3] = core::array::from_fn(|c| (0..3).map(|r| ub[r] * inv[r][c]).sum());
        let bland = degenerate > 20;
        let mut enter = None;
        let mut best = -tol;
        for k in 0..l.len() {
            if basis.contains(&k) {
                continue;
            }
            let ck = col(k);
            let r = u[k] - (pi[0] * ck[0] + pi[1] * ck[1] + pi[2] * ck[2]);
            if r < best {
                enter = Some(k);
                if bland {
                    break;
                }
                best = r;
            }
        }
        let Some(k) = enter else {
            return (0..3).map(|r| lam[r] * ub[r]).sum();
        };
        let ck = col(k);
        let dir: [f64; 3] = core::array::from_fn(|r| (0..3).map(|c| inv[r][c] * ck[c]).sum());
        let mut leave = None;
        let mut theta = f64::INFINITY;
        for r in 0..3 {
            if dir[r] > 1e-12 {
                let t = lam[r] / dir[r];
                if t < theta - 1e-15 || (t <= theta + 1e-15 && leave.map_or(true, |q: usize| basis[r] < basis[q])) {
                    theta = t;
                    leave = Some(r);
                }
            }
        }
        let Some(q) = leave else {
            // unbounded cannot happen for a bounded polytope; keep the current value
            return (0..3).map(|r| lam[r] * ub[r]).sum();
        };
        degenerate = if theta <= 1e-15 { degenerate + 1 } else { 0 };
        for r in 0..3 {
            lam[r] -= theta * dir[r];
        }
        lam[q] = theta;
        basis[q] = k;
    }
    (0..3).map(|r| lam[r] * u[basis[r]]).sum()
}

/// Lower convex envelope of lattice values. When the Union-Jack interpolant
/// is already convex the envelope is the data itself.
pub fn convexify_2d(l: &Lattice, raw: &[f64]) -> Result<Potential2D> {
    if raw.len() != l.len() || l.n[0] < 2 || l.n[1] < 2 {
        return Err(Error::Invalid("lattice values do not match the lattice"));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("values must be finite"));
    }
    let tol = 1e-13 * scale_of(raw);
    if uj_is_convex(l, raw, tol) {
        return Ok(Potential2D { lattice: *l, u: raw.to_vec(), raw: raw.to_vec(), delta_conv: 0.0, uj_convex: true });
    }
    let u: Vec<f64> = (0..l.len()).map(|v| envelope_at(l, raw, v, tol).min(raw[v])).collect();
    let delta_conv = raw.iter().zip(&u).map(|(a, b)| a - b).fold(0.0, f64::max);
    let uj_convex = uj_is_convex(l, &u, tol);
    Ok(Potential2D { lattice: *l, u, raw: raw.to_vec(), delta_conv, uj_convex })
}

/// Convex hull area of a small point set (monotone chain).
pub fn hull_area(points: &[[f64; 2]]) -> f64 {
    let mut p: Vec<[f64; 2]> = points.to_vec();
    p.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap().then(a[1].partial_cmp(&b[1]).unwrap()));
    p.dedup();
    if p.len() < 3 {
        return 0.0;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let it: Vec<[f64; 2]> = if pass == 0 { p.clone() } else { p.iter().rev().cloned().collect() };
        for q in it {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    polygon_area(&hull)
}

fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s.abs()
}

/// Clips a convex polygon to `{p : p·d <= c}`.
fn clip(poly: &[[f64; 2]], d: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let fa = a[0] * d[0] + a[1] * d[1] - c;
        let fb = b[0] * d[0] + b[1] * d[1] - c;
        if fa <= 0.0 {
            out.push(a);
        }
        if (fa < 0.0 && fb > 0.0) || (fa > 0.0 && fb < 0.0) {
            let t = fa / (fa - fb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Exact subdifferential of the convex envelope at an interior vertex:
/// `{p : u_k >= u_v + p·(x_k - x_v) for all k}`.
pub fn subdifferential_polygon(l: &Lattice, u: &[f64], v: usize) -> Vec<[f64; 2]> {
    let n0 = l.n[0];
    let (i, j) = (v % n0, v / n0);
    let (hx, hy) = (l.h[0], l.h[1]);
    let lo0 = (u[v] - u[l.index(i - 1, j)]) / hx;
    let hi0 = (u[l.index(i + 1, j)] - u[v]) / hx;
    let lo1 = (u[v] - u[l.index(i, j - 1)]) / hy;
    let hi1 = (u[l.index(i, j + 1)] - u[v]) / hy;
    if hi0 < lo0 || hi1 < lo1 {
        return Vec::new();
    }
    let mut poly = alloc::vec![[lo0, lo1], [hi0, lo1], [hi0, hi1], [lo0, hi1]];
    let xv = l.point(v);
    for k in 0..l.len() {
        if k == v {
            continue;
        }
        let xk = l.point(k);
        poly = clip(&poly, [xk[0] - xv[0], xk[1] - xv[1]], u[k] - u[v]);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

fn incident_gradients(l: &Lattice, u: &[f64], v: usize) -> Vec<[f64; 2]> {
    let n0 = l.n[0];
    let (i, j) = (v % n0, v / n0);
    let mut out = Vec::with_capacity(8);
    for (si, sj) in [(i - 1, j - 1), (i, j - 1), (i - 1, j), (i, j)] {
        let (a, b, c, d) = (l.index(si, sj), l.index(si + 1, sj), l.index(si, sj + 1), l.index(si + 1, sj + 1));
        let tris = if (si + sj) % 2 == 0 { [[a, b, d], [a, d, c]] } else { [[a, b, c], [b, d, c]] };
        for t in tris {
            if t.contains(&v) {
                out.push(tri_gradient(l.point(t[0]), l.point(t[1]), l.point(t[2]), u[t[0]], u[t[1]], u[t[2]]));
            }
        }
    }
    out
}

/// Subdifferential area of one interior vertex.
pub fn vertex_mass(p: &Potential2D, v: usize) -> f64 {
    if p.uj_convex {
        hull_area(&incident_gradients(&p.lattice, &p.u, v))
    } else {
        polygon_area(&subdifferential_polygon(&p.lattice, &p.u, v))
    }
}

/// Measure on a window of interior vertices.
pub fn ma_measure_2d(p: &Potential2D, window: &[usize]) -> Result<MongeAmpereMeasure> {
    let l = &p.lattice;
    if window.iter().any(|&k| k >= l.len() || !l.is_interior(k)) {
        return Err(Error::Invalid("window touches the lattice boundary"));
    }
    let mut mass = alloc::vec![0.0; l.len()];
    let volume = alloc::vec![l.h[0] * l.h[1]; l.len()];
    for &k in window {
        mass[k] = vertex_mass(p, k);
    }
    let floor = 1e-9 * window.iter().map(|&k| mass[k]).sum::<f64>();
    let mut atoms = Vec::new();
    let n0 = l.n[0];
    for &k in window {
        let nb = [k - 1, k + 1, k - n0, k + n0].iter().map(|&q| mass[q]).fold(0.0, f64::max);
        if mass[k] > floor && mass[k] > ATOM_JUMP * nb {
            atoms.push((l.point(k), mass[k]));
        }
    }
    Ok(MongeAmpereMeasure { mass, volume, window: window.to_vec(), atoms })
}

/// All vertices at least `halo` steps away from the lattice boundary.
pub fn interior_window(l: &Lattice, halo: usize) -> Vec<usize> {
    let halo = halo.max(1);
    let mut out = Vec::new();
    for j in halo..l.n[1].saturating_sub(halo) {
        for i in halo..l.n[0].saturating_sub(halo) {
            out.push(l.index(i, j));
        }
    }
    out
}

pub fn ma_lower_bound_check_2d(p: &Potential2D, lambda: f64, window: &[usize], guard: f64) -> Result<MaCheck> {
    let mu = ma_measure_2d(p, window)?;
    let h = p.lattice.h[0].min(p.lattice.h[1]);
    let slack = 2.0 * p.delta_conv / h + guard;
    Ok(check_masses(&mu, lambda, 2, slack))
}

/// Weak form `Σ φ Δ_h u >= 2 λ Σ φ` for tensor hats of radius 1..3 whose
/// support (plus one ring) lies in the window.
pub fn amgm_subharmonic_check_2d(p: &Potential2D, lambda: f64, window: &[usize], guard: f64) -> AmgmCheck {
    let l = &p.lattice;
    let n0 = l.n[0];
    let inside: BTreeMap<usize, ()> = window.iter().map(|&k| (k, ())).collect();
    let (hx, hy) = (l.h[0], l.h[1]);
    let lap = |k: usize| {
        (p.u[k - 1] - 2.0 * p.u[k] + p.u[k + 1]) / (hx * hx) + (p.u[k - n0] - 2.0 * p.u[k] + p.u[k + n0]) / (hy * hy)
    };
    let mut margin = f64::INFINITY;
    for &c in window {
        let (ci, cj) = ((c % n0) as isize, (c / n0) as isize);
        for w in 1..=3isize {
            let mut num = 0.0;
            let mut den = 0.0;
            let mut fits = true;
            'outer: for dj in (1 - w)..w {
                for di in (1 - w)..w {
                    let (i, j) = (ci + di, cj + dj);
                    if i < 0 || j < 0 {
                        fits = false;
                        break 'outer;
                    }
                    let k = l.index(i as usize, j as usize);
                    if !inside.contains_key(&k) {
                        fits = false;
                        break 'outer;
                    }
                    let phi = (1.0 - di.abs() as f64 / w as f64) * (1.0 - dj.abs() as f64 / w as f64);
                    num += phi * lap(k);
                    den += phi;
                }
            }
            if fits && den > 0.0 {
                margin = margin.min(num / den - 2.0 * lambda);
            }
        }
    }
    let h = hx.min(hy);
    let slack = 2.0 * p.delta_conv / h + guard;
    AmgmCheck { ok: margin >= -slack, margin, slack }
}

/// Periodic values on a 2D torus grid extended to a one-cell halo. The
/// returned lattice carries the unwrapped coordinates of every halo point.
pub fn periodic_extension(grid: &Grid, v: &[f64]) -> Result<(Lattice, Vec<f64>, Vec<[f64; 2]>)> {
    if grid.dim() != 2 || !(grid.domain.periodic[0] && grid.domain.periodic[1]) {
        return Err(Error::Invalid("torus lift needs a 2D torus grid"));
    }
    let (n0, n1) = (grid.n[0], grid.n[1]);
    let l = Lattice { n: [n0 + 2, n1 + 2], origin: [grid.center_axis(0, 0) - grid.h[0], grid.center_axis(1, 0) - grid.h[1]], h: grid.h };
    let (l0, l1) = (grid.domain.length(0), grid.domain.length(1));
    let mut out = alloc::vec![0.0; l.len()];
    let mut shifts = alloc::vec![[0.0; 2]; l.len()];
    for j in 0..n1 + 2 {
        for i in 0..n0 + 2 {
            let (si, sj) = (i as isize - 1, j as isize - 1);
            let (wi, wj) = (si.rem_euclid(n0 as isize) as usize, sj.rem_euclid(n1 as isize) as usize);
            let shift = [((si - wi as isize) / n0 as isize) as f64 * l0, ((sj - wj as isize) / n1 as isize) as f64 * l1];
            out[l.index(i, j)] = v[grid.index(wi, wj)];
            shifts[l.index(i, j)] = shift;
        }
    }
    Ok((l, out, shifts))
}

/// Lifts a periodic potential `u = |x|^2/2 + per` on a 2D torus grid to the
/// fundamental cell plus a one-cell halo via `u(x + n) = u(x) + n·x + |n|^2/2`.
/// Returns the lattice and values; the original cells form the window
/// `interior_window(&lattice, 1)`.
pub fn torus_lift(grid: &Grid, u: &[f64]) -> Result<(Lattice, Vec<f64>)> {
    let (l, mut out, shifts) = periodic_extension(grid, u)?;
    for k in 0..l.len() {
        let n = shifts[k];
        let x = l.point(k);
        // x is the unwrapped point, so the base point is x - n
        let base = [x[0] - n[0], x[1] - n[1]];
        out[k] += n[0] * base[0] + n[1] * base[1] + 0.5 * (n[0] * n[0] + n[1] * n[1]);
    }
    Ok((l, out))
}

/// Dispatches on the grid dimension. Periodic 2D grids are lifted first.
pub fn convexify(u_raw: &[f64], grid: &Grid) -> Result<ConvexPotential> {
    if grid.dim() == 1 {
        let x = grid.centers_axis(0);
        return convexify_1d(&x, u_raw).map(ConvexPotential::One);
    }
    if grid.domain.periodic[0] && grid.domain.periodic[1] {
        let (l, v) = torus_lift(grid, u_raw)?;
        return convexify_2d(&l, &v).map(ConvexPotential::Two);
    }
    convexify_2d(&Lattice::of_grid(grid), u_raw).map(ConvexPotential::Two)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn line(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn parabola_is_already_convex() {
        let x = line(41, -1.0, 1.0);
        let u: Vec<f64> = x.iter().map(|v| 0.5 * v * v).collect();
        let p = convexify_1d(&x, &u).unwrap();
        assert!(p.delta_conv < 1e-15);
        let mu = ma_measure_1d(&p);
        for &i in &mu.window {
            assert!((mu.mass[i] / mu.volume[i] - 1.0).abs() < 1e-10);
        }
        assert!(mu.atoms.is_empty());
    }

    #[test]
    fn concave_becomes_chord() {
        let x = line(41, -1.0, 1.0);
        let u: Vec<f64> = x.iter().map(|v| -v * v).collect();
        let p = convexify_1d(&x, &u).unwrap();
        assert!((p.delta_conv - 1.0).abs() < 1e-12);
        assert!(p.u.iter().all(|v| (v + 1.0).abs() < 1e-12));
    }

    #[test]
    fn kinks_are_atoms() {
        let x = line(41, -1.0, 1.0);
        let u: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let mu = ma_measure_1d(&convexify_1d(&x, &u).unwrap());
        assert_eq!(mu.atoms.len(), 1);
        assert!(mu.atoms[0].0[0].abs() < 1e-12 && (mu.atoms[0].1 - 2.0).abs() < 1e-12);
        let x = line(21, 0.0, 1.0);
        let u: Vec<f64> = x.iter().map(|v| (v - 0.3).max(0.0)).collect();
        let mu = ma_measure_1d(&convexify_1d(&x, &u).unwrap());
        assert_eq!(mu.atoms.len(), 1);
        assert!((mu.atoms[0].0[0] - 0.3).abs() < 1e-12 && (mu.atoms[0].1 - 1.0).abs() < 1e-12);
        let c = amgm_subharmonic_check_1d(&convexify_1d(&x, &u).unwrap(), 0.0, 0.0);
        assert!(c.ok);
    }

    #[test]
    fn lower_bound_examples() {
        let x = line(51, -1.0, 1.0);
        let u: Vec<f64> = x.iter().map(|v| 0.5 * v * v).collect();
        let c = ma_lower_bound_check_1d(&convexify_1d(&x, &u).unwrap(), 1.0, GUARD);
        assert!(c.ok && (c.worst_ratio - 1.0).abs() < 1e-9);
        let u: Vec<f64> = x.iter().map(|v| 0.25 * v * v).collect();
        let c = ma_lower_bound_check_1d(&convexify_1d(&x, &u).unwrap(), 0.6, GUARD);
        assert!(!c.ok && (c.worst_ratio - 0.5 / 0.6).abs() < 1e-9);
    }

    #[test]
    fn affine_shift_leaves_measure() {
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.37).sin() * 0.01 + i as f64 * 0.1).collect();
        let u: Vec<f64> = x.iter().map(|v| libm::exp(*v)).collect();
        let w: Vec<f64> = x.iter().zip(&u).map(|(a, b)| b + 3.0 * a - 1.0).collect();
        let m1 = ma_measure_1d(&convexify_1d(&x, &u).unwrap());
        let m2 = ma_measure_1d(&convexify_1d(&x, &w).unwrap());
        for (a, b) in m1.mass.iter().zip(&m2.mass) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    fn lattice(n: usize) -> Lattice {
        let h = 2.0 / (n - 1) as f64;
        Lattice { n: [n, n], origin: [-1.0, -1.0], h: [h, h] }
    }

    #[test]
    fn quadratic_2d_masses() {
        let l = lattice(11);
        let u: Vec<f64> = (0..l.len()).map(|k| {
            let x = l.point(k);
            0.5 * (x[0] * x[0] + x[1] * x[1])
        }).collect();
        let p = convexify_2d(&l, &u).unwrap();
        assert!(p.uj_convex && p.delta_conv == 0.0);
        let w = interior_window(&l, 1);
        let mu = ma_measure_2d(&p, &w).unwrap();
        let area = w.len() as f64 * l.h[0] * l.h[1];
        assert!((mu.total() - area).abs() < 1e-9);
        let c = amgm_subharmonic_check_2d(&p, 1.0, &w, 0.0);
        assert!(c.margin.abs() < 1e-9);
        // A = [[2, 0.5], [0.5, 1]]
        let u: Vec<f64> = (0..l.len()).map(|k| {
            let x = l.point(k);
            0.5 * (2.0 * x[0] * x[0] + x[0] * x[1] + x[1] * x[1])
        }).collect();
        let p = convexify_2d(&l, &u).unwrap();
        let mu = ma_measure_2d(&p, &w).unwrap();
        for &k in &w {
            assert!((mu.mass[k] - 1.75 * l.h[0] * l.h[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn cone_concentrates_at_apex() {
        let l = lattice(11);
        let u: Vec<f64> = (0..l.len()).map(|k| {
            let x = l.point(k);
            x[0].abs().max(x[1].abs())
        }).collect();
        let p = convexify_2d(&l, &u).unwrap();
        let w = interior_window(&l, 1);
        let mu = ma_measure_2d(&p, &w).unwrap();
        assert!((mu.total() - 2.0).abs() < 1e-9, "{}", mu.total());
        let apex = l.index(5, 5);
        assert!(mu.mass[apex] > 1.0);
        assert!(mu.atoms.iter().any(|a| a.0 == l.point(apex)));
        let diamond = hull_area(&[[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]);
        assert!((diamond - 2.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_of_a_dent() {
        let l = lattice(9);
        let mut u: Vec<f64> = (0..l.len()).map(|k| {
            let x = l.point(k);
            x[0] * x[0] + x[1] * x[1]
        }).collect();
        let c = l.index(4, 4);
        u[c] += 0.3;
        let p = convexify_2d(&l, &u).unwrap();
        // the neighbours give the chord value 0 + h^2 at the centre
        assert!((p.u[c] - l.h[0] * l.h[0]).abs() < 1e-12, "{}", p.u[c]);
        assert!((p.delta_conv - (0.3 - l.h[0] * l.h[0])).abs() < 1e-12);
        for k in 0..l.len() {
            if k != c {
                assert!((p.u[k] - u[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn half_plane_and_hull_agree_on_convex_data() {
        let l = lattice(8);
        let u: Vec<f64> = (0..l.len()).map(|k| {
            let x = l.point(k);
            libm::exp(x[0]) + libm::cosh(0.7 * x[1]) + x[1] * x[1]
        }).collect();
        let p = convexify_2d(&l, &u).unwrap();
        assert!(p.uj_convex);
        for v in interior_window(&l, 1) {
            let a = hull_area(&incident_gradients(&l, &u, v));
            let b = polygon_area(&subdifferential_polygon(&l, &u, v));
            assert!((a - b).abs() < 1e-9 * (1.0 + a), "{a} vs {b}");
        }
    }

    #[test]
    fn torus_lift_of_the_identity_potential() {
        let g = build_grid(Domain::torus2(), &[8, 8]).unwrap();
        let u: Vec<f64> = (0..g.len()).map(|k| {
            let x = g.center(k);
            0.5 * (x[0] * x[0] + x[1] * x[1])
        }).collect();
        let (l, v) = torus_lift(&g, &u).unwrap();
        for k in 0..l.len() {
            let x = l.point(k);
            assert!((v[k] - 0.5 * (x[0] * x[0] + x[1] * x[1])).abs() < 1e-12);
        }
        let p = convexify_2d(&l, &v).unwrap();
        let c = ma_lower_bound_check_2d(&p, 1.0, &interior_window(&l, 1), GUARD).unwrap();
        assert!(c.ok && (c.worst_ratio - 1.0).abs() < 1e-9);
    }

    #[test]
    fn window_must_be_interior() {
        let l = lattice(6);
        let u = alloc::vec![0.0; l.len()];
        let p = convexify_2d(&l, &u).unwrap();
        assert!(ma_measure_2d(&p, &[0]).is_err());
    }

    #[test]
    fn stability_under_small_bumps() {
        let l = lattice(12);
        let base: Vec<f64> = (0..l.len()).map(|k| {
            let x = l.point(k);
            0.5 * (x[0] * x[0] + 2.0 * x[1] * x[1])
        }).collect();
        let w = interior_window(&l, 2);
        let m0 = ma_measure_2d(&convexify_2d(&l, &base).unwrap(), &w).unwrap().total();
        for eta in [1e-3, 1e-4] {
            let u: Vec<f64> = base.iter().enumerate().map(|(k, b)| {
                let x = l.point(k);
                b + eta * libm::exp(-4.0 * (x[0] * x[0] + x[1] * x[1]))
            }).collect();
            let m = ma_measure_2d(&convexify_2d(&l, &u).unwrap(), &w).unwrap().total();
            assert!((m - m0).abs() <= 40.0 * eta, "eta {eta}: {}", (m - m0).abs());
        }
    }

    proptest! {
        #[test]
        fn ma_pass_implies_amgm_pass(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = lattice(9);
            let a = rng.gen_range(0.3..2.0);
            let b = rng.gen_range(0.3..2.0);
            let c = rng.gen_range(-0.2..0.2);
            let q = rng.gen_range(0.0..0.5);
            let u: Vec<f64> = (0..l.len()).map(|k| {
                let x = l.point(k);
                0.5 * (a * x[0] * x[0] + 2.0 * c * x[0] * x[1] + b * x[1] * x[1]) + q * libm::exp(x[0] - x[1])
            }).collect();
            let p = convexify_2d(&l, &u).unwrap();
            let w = interior_window(&l, 1);
            let mu = ma_measure_2d(&p, &w).unwrap();
            let lam = w.iter().map(|&k| libm::sqrt(mu.mass[k] / mu.volume[k])).fold(f64::INFINITY, f64::min) * (1.0 - 1e-12);
            let ma = ma_lower_bound_check_2d(&p, lam, &w, 0.0).unwrap();
            let am = amgm_subharmonic_check_2d(&p, lam, &w, 0.0);
            prop_assert!(ma.ok);
            prop_assert!(am.margin >= -1e-9, "{}", am.margin);
        }

        #[test]
        fn partition_additivity(seed in 0u64..100) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = lattice(10);
            let u: Vec<f64> = (0..l.len()).map(|k| {
                let x = l.point(k);
                x[0] * x[0] + x[1] * x[1] + rng.gen_range(0.0..0.01)
            }).collect();
            let p = convexify_2d(&l, &u).unwrap();
            let w = interior_window(&l, 1);
            let (left, right): (Vec<usize>, Vec<usize>) = w.iter().partition(|&&k| k % 2 == 0);
            let t = ma_measure_2d(&p, &w).unwrap().total();
            let a = ma_measure_2d(&p, &left).unwrap().total();
            let b = ma_measure_2d(&p, &right).unwrap().total();
            prop_assert!((t - a - b).abs() < 1e-12);
            prop_assert!(p.u.iter().zip(&u).all(|(e, r)| *e <= *r + 1e-12));
        }
    }
}
