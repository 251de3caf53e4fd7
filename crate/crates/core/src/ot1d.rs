//! Exact optimal transport on the line and on the circle through quantile
//! functions.

use alloc::vec::Vec;

use crate::entropy::GridDensity;
use crate::error::{Error, Result};
use crate::grid::{DomainKind, Grid};

pub use crate::transport::w2_bruteforce;

/// Piecewise-linear quantile function on `(0, 1)`.
///
/// On `(knots[j], knots[j+1])` it runs linearly from `lo[j]` to `hi[j]`.
/// Jumps between pieces are allowed (gaps in the support), and `lo == hi`
/// encodes an atom.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFunction {
    pub knots: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl QuantileFunction {
    pub fn new(knots: Vec<f64>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let q = Self { knots, lo, hi };
        if q.knots.len() != q.lo.len() + 1 || q.lo.len() != q.hi.len() || q.lo.is_empty() {
            return Err(Error::Invalid("quantile pieces are inconsistent"));
        }
        if q.knots[0] != 0.0 || (q.knots[q.knots.len() - 1] - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid("quantile knots must span [0, 1]"));
        }
        if !q.is_monotone() {
            return Err(Error::Invalid("quantile function must be nondecreasing"));
        }
        Ok(q)
    }

    pub fn pieces(&self) -> usize {
        self.lo.len()
    }

    pub fn is_monotone(&self) -> bool {
        for j in 0..self.pieces() {
            if self.knots[j + 1] < self.knots[j] || self.hi[j] < self.lo[j] {
                return false;
            }
            if j + 1 < self.pieces() && self.lo[j + 1] < self.hi[j] {
                return false;
            }
        }
        true
    }

    /// Weighted atoms; weights are normalised to unit mass.
    pub fn from_atoms(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::Invalid("atoms and weights differ in length"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Invalid("atom weights must be nonnegative with positive sum"));
        }
        let mut idx: Vec<usize> = (0..points.len()).collect();
        idx.sort_by(|a, b| points[*a].partial_cmp(&points[*b]).unwrap());
        let mut knots = alloc::vec![0.0];
        let mut lo = Vec::new();
        let mut acc = 0.0;
        for &i in &idx {
            if weights[i] == 0.0 {
                continue;
            }
            acc += weights[i] / total;
            knots.push(acc);
            lo.push(points[i]);
        }
        *knots.last_mut().unwrap() = 1.0;
        let hi = lo.clone();
        Self::new(knots, lo, hi)
    }

    /// Value at `s` in `[0, 1]` (right-continuous inside jumps).
    pub fn eval(&self, s: f64) -> f64 {
        let p = self.pieces();
        let j = match self.knots[1..].iter().position(|k| *k > s) {
            Some(j) => j,
            None => p - 1,
        };
        let (a, b) = (self.knots[j], self.knots[j + 1]);
        if b <= a {
            return self.lo[j];
        }
        let t = ((s - a) / (b - a)).clamp(0.0, 1.0);
        self.lo[j] + t * (self.hi[j] - self.lo[j])
    }

    /// Values at the midpoints `(j + 1/2)/n`.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let mut j = 0;
        for k in 0..n {
            let s = (k as f64 + 0.5) / n as f64;
            while j + 1 < self.pieces() && self.knots[j + 1] <= s {
                j += 1;
            }
            let (a, b) = (self.knots[j], self.knots[j + 1]);
            let t = if b > a { ((s - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
            out.push(self.lo[j] + t * (self.hi[j] - self.lo[j]));
        }
        out
    }

    pub fn mean(&self) -> f64 {
        (0..self.pieces()).map(|j| (self.knots[j + 1] - self.knots[j]) * 0.5 * (self.lo[j] + self.hi[j])).sum()
    }

    pub fn second_moment(&self) -> f64 {
        (0..self.pieces())
            .map(|j| {
                let (a, b) = (self.lo[j], self.hi[j]);
                (self.knots[j + 1] - self.knots[j]) * (a * a + a * b + b * b) / 3.0
            })
            .sum()
    }

    /// CDF at `x`: the mass lying at or left of `x` (atoms at `x` included).
    pub fn cdf(&self, x: f64) -> f64 {
        let mut s = 0.0;
        for j in 0..self.pieces() {
            let w = self.knots[j + 1] - self.knots[j];
            if x >= self.hi[j] {
                s += w;
            } else if x > self.lo[j] {
                s += w * (x - self.lo[j]) / (self.hi[j] - self.lo[j]);
                break;
            } else {
                break;
            }
        }
        s
    }

    /// Restriction to `[a, b]` (as a list of pieces on the original `s` axis).
    fn slice(&self, a: f64, b: f64, shift_s: f64, shift_x: f64, out: &mut QuantileFunction) {
        for j in 0..self.pieces() {
            let (k0, k1) = (self.knots[j], self.knots[j + 1]);
            let s0 = k0.max(a);
            let s1 = k1.min(b);
            if s1 <= s0 {
                continue;
            }
            let val = |s: f64| {
                if k1 > k0 {
                    self.lo[j] + (s - k0) / (k1 - k0) * (self.hi[j] - self.lo[j])
                } else {
                    self.lo[j]
                }
            };
            out.knots.push(s1 + shift_s);
            out.lo.push(val(s0) + shift_x);
            out.hi.push(val(s1) + shift_x);
        }
    }

    /// `s -> Q̃(s + θ)` on `[0, 1]`, where `Q̃(s + k) = Q(s) + k L` is the
    /// periodic lift for a circle of length `L`.
    pub fn rotated(&self, theta: f64, period: f64) -> QuantileFunction {
        let k0 = libm::floor(theta);
        let f = theta - k0;
        let mut out = QuantileFunction { knots: alloc::vec![0.0], lo: Vec::new(), hi: Vec::new() };
        self.slice(f, 1.0, -f, k0 * period, &mut out);
        self.slice(0.0, f, 1.0 - f, (k0 + 1.0) * period, &mut out);
        *out.knots.last_mut().unwrap() = 1.0;
        out
    }
}

/// Exact inverse of the piecewise-linear CDF of a grid density (1D).
pub fn density_to_quantile(rho: &GridDensity) -> Result<QuantileFunction> {
    let g = &rho.grid;
    if g.dim() != 1 {
        return Err(Error::Invalid("quantiles need a 1D grid"));
    }
    let h = g.h[0];
    let total: f64 = rho.values.iter().sum::<f64>() * h;
    let mut knots = alloc::vec![0.0];
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    let mut acc = 0.0;
    for (i, v) in rho.values.iter().enumerate() {
        if *v <= 0.0 {
            continue;
        }
        acc += v * h / total;
        knots.push(acc);
        lo.push(g.edge_axis(0, i));
        hi.push(g.edge_axis(0, i + 1));
    }
    if lo.is_empty() {
        return Err(Error::Invalid("density has no mass"));
    }
    *knots.last_mut().unwrap() = 1.0;
    Ok(QuantileFunction { knots, lo, hi })
}

/// Cell masses of the measure described by `q`, divided by the cell width.
/// On periodic grids positions are reduced modulo the period.
pub fn quantile_to_density(q: &QuantileFunction, grid: &Grid) -> Result<GridDensity> {
    let weights: Vec<f64> = (0..q.pieces()).map(|j| q.knots[j + 1] - q.knots[j]).collect();
    pieces_to_density(&weights, &q.lo, &q.hi, grid)
}

/// Like [`quantile_to_density`] for pieces `[lo_j, hi_j]` carrying mass
/// `weights_j` uniformly. Taking the weights directly keeps masses far below
/// the resolution of the cumulative knots.
pub fn pieces_to_density(weights: &[f64], lo: &[f64], hi: &[f64], grid: &Grid) -> Result<GridDensity> {
    if grid.dim() != 1 {
        return Err(Error::Invalid("quantiles need a 1D grid"));
    }
    let n = grid.n[0];
    let h = grid.h[0];
    let lo0 = grid.domain.lo[0];
    let l = grid.domain.length(0);
    let periodic = grid.domain.periodic[0];
    let mut mass = alloc::vec![0.0; n];
    let cell_of = |x: f64| -> usize {
        let k = libm::floor((x - lo0) / h) as i64;
        if periodic {
            k.rem_euclid(n as i64) as usize
        } else {
            k.clamp(0, n as i64 - 1) as usize
        }
    };
    for (j, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let (a, b) = (lo[j], hi[j]);
        if b - a <= 1e-15 * (1.0 + a.abs()) {
            mass[cell_of(a)] += w;
            continue;
        }
        if !periodic && (a < lo0 - 1e-12 * l || b > lo0 + l + 1e-12 * l) {
            return Err(Error::Invalid("quantile leaves the domain"));
        }
        let dens = w / (b - a);
        // walk the cells covered by [a, b]
        let mut x = a;
        while x < b {
            let k = libm::floor((x - lo0) / h);
            let mut edge = lo0 + (k + 1.0) * h;
            if edge <= x {
                edge = x + h;
            }
            let y = edge.min(b);
            mass[cell_of(0.5 * (x + y))] += dens * (y - x);
            x = y;
        }
    }
    let values = mass.into_iter().map(|m| m / h).collect();
    GridDensity::normalized(grid.clone(), values)
}

/// Exact `W_2` between two piecewise-linear quantile functions.
pub fn w2_quantile(q1: &QuantileFunction, q2: &QuantileFunction) -> f64 {
    libm::sqrt(w2_squared(q1, q2))
}

pub fn w2_squared(q1: &QuantileFunction, q2: &QuantileFunction) -> f64 {
    let (mut i, mut j) = (0usize, 0usize);
    let mut s = 0.0;
    let mut total = 0.0;
    let val = |q: &QuantileFunction, k: usize, x: f64| {
        let (a, b) = (q.knots[k], q.knots[k + 1]);
        if b > a {
            q.lo[k] + ((x - a) / (b - a)).clamp(0.0, 1.0) * (q.hi[k] - q.lo[k])
        } else {
            q.lo[k]
        }
    };
    while i < q1.pieces() && j < q2.pieces() {
        let e = q1.knots[i + 1].min(q2.knots[j + 1]);
        if e > s {
            let a = val(q1, i, s) - val(q2, j, s);
            let b = val(q1, i, e) - val(q2, j, e);
            total += (e - s) * (a * a + a * b + b * b) / 3.0;
            s = e;
        }
        if q1.knots[i + 1] <= e {
            i += 1;
        }
        if q2.knots[j + 1] <= e {
            j += 1;
        }
    }
    total
}

/// Monotone map sampled at cell centres of a source grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMap1D {
    pub grid: Grid,
    pub image: Vec<f64>,
}

impl TransportMap1D {
    pub fn is_monotone(&self) -> bool {
        self.image.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Kantorovich (`psi`, `phi`) and Brenier (`u`, `v`) potentials at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// `T(x_i) = Q_mu(F_rho(x_i))`.
pub fn monotone_map(rho: &GridDensity, mu: &GridDensity) -> Result<TransportMap1D> {
    let qr = density_to_quantile(rho)?;
    let qm = density_to_quantile(mu)?;
    let g = &rho.grid;
    let image = (0..g.len()).map(|i| qm.eval(qr.cdf(g.center(i)[0]))).collect();
    Ok(TransportMap1D { grid: g.clone(), image })
}

/// Exhaustive c-transform `φ(y) = min_x ½ d(x, y)^2 - ψ(x)` over the sample
/// points `xs`. `period` selects the circle distance.
pub fn c_transform(psi: &[f64], xs: &[f64], ys: &[f64], period: Option<f64>) -> Vec<f64> {
    ys.iter()
        .map(|&y| {
            let mut best = f64::INFINITY;
            for (x, p) in xs.iter().zip(psi) {
                let mut d = y - x;
                if let Some(l) = period {
                    d -= l * libm::round(d / l);
                }
                let c = 0.5 * d * d - p;
                if c < best {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Integrates `T` from the left edge (`u(lo) = 0`, trapezoid rule between
/// centres) and completes the potential pair.
pub fn brenier_potential_from_map(t: &TransportMap1D) -> Result<PotentialPair> {
    if !t.is_monotone() {
        return Err(Error::Invalid("map is not monotone"));
    }
    let g = &t.grid;
    let xs = g.centers_axis(0);
    let n = xs.len();
    let lo = g.domain.lo[0];
    let t_lo = t.image[0] - 0.5 * (t.image[1] - t.image[0]);
    let mut u = alloc::vec![0.0; n];
    u[0] = 0.5 * (t_lo + t.image[0]) * (xs[0] - lo);
    for i in 1..n {
        u[i] = u[i - 1] + 0.5 * (t.image[i - 1] + t.image[i]) * (xs[i] - xs[i - 1]);
    }
    let psi: Vec<f64> = xs.iter().zip(&u).map(|(x, u)| 0.5 * x * x - u).collect();
    let period = if g.domain.periodic[0] { Some(g.domain.length(0)) } else { None };
    let phi = c_transform(&psi, &xs, &xs, period);
    let v = xs.iter().zip(&phi).map(|(y, p)| 0.5 * y * y - p).collect();
    Ok(PotentialPair { psi, phi, u, v })
}

/// Quantile cost on the circle for the cut `θ`.
pub fn circle_cost(qr: &QuantileFunction, qm: &QuantileFunction, theta: f64, period: f64) -> f64 {
    w2_squared(qr, &qm.rotated(theta, period))
}

/// Optimal cut for circle transport: coarse scan on 256 nodes followed by
/// golden-section refinement. Returns `(θ, W_2^2)`.
pub fn circle_optimal_cut(qr: &QuantileFunction, qm: &QuantileFunction, period: f64) -> (f64, f64) {
    // the mean displacement is θ L + mean_mu - mean_rho; optimal maps move by at most L/2
    let c = (qr.mean() - qm.mean()) / period;
    let (a, b) = (c - 0.5, c + 0.5);
    let nodes = 256;
    let mut best = (a, f64::INFINITY);
    for k in 0..=nodes {
        let th = a + (b - a) * k as f64 / nodes as f64;
        let v = circle_cost(qr, qm, th, period);
        if v < best.1 {
            best = (th, v);
        }
    }
    let step = (b - a) / nodes as f64;
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let r = 0.5 * (libm::sqrt(5.0) - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = circle_cost(qr, qm, x1, period);
    let mut f2 = circle_cost(qr, qm, x2, period);
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = circle_cost(qr, qm, x1, period);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = circle_cost(qr, qm, x2, period);
        }
    }
    let th = 0.5 * (lo + hi);
    let v = circle_cost(qr, qm, th, period);
    if v <= best.1 {
        (th, v)
    } else {
        best
    }
}

/// Optimal transport from `rho` to `mu` on a 1D torus. The map is returned
/// as a lift, so `T(x) - x` lies in `[-L/2, L/2]`. The last entry is `W_2`.
pub fn circle_ot(rho: &GridDensity, mu: &GridDensity) -> Result<(TransportMap1D, PotentialPair, f64)> {
    let g = &rho.grid;
    if g.domain.kind != DomainKind::Torus1 || *g != mu.grid {
        return Err(Error::Mismatch("circle transport needs two densities on the same 1D torus"));
    }
    let period = g.domain.length(0);
    let qr = density_to_quantile(rho)?;
    let qm = density_to_quantile(mu)?;
    let (theta, cost) = circle_optimal_cut(&qr, &qm, period);
    let qs = qm.rotated(theta, period);
    let xs = g.centers_axis(0);
    let image: Vec<f64> = xs.iter().map(|&x| qs.eval(qr.cdf(x))).collect();
    let map = TransportMap1D { grid: g.clone(), image };
    // ψ' = x - T(x), integrated between centres
    let n = xs.len();
    let mut psi = alloc::vec![0.0; n];
    for i in 1..n {
        let d0 = xs[i - 1] - map.image[i - 1];
        let d1 = xs[i] - map.image[i];
        psi[i] = psi[i - 1] + 0.5 * (d0 + d1) * (xs[i] - xs[i - 1]);
    }
    let phi = c_transform(&psi, &xs, &xs, Some(period));
    let u = xs.iter().zip(&psi).map(|(x, p)| 0.5 * x * x - p).collect();
    let v = xs.iter().zip(&phi).map(|(y, p)| 0.5 * y * y - p).collect();
    Ok((map, PotentialPair { psi, phi, u, v }, libm::sqrt(cost.max(0.0))))
}
