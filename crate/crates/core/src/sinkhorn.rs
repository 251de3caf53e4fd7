//! Entropic optimal transport between grid densities for the cost
//! `d(x, y)^2 / 2`, with torus distances on periodic axes.
//!
//! Potentials are kept in the log domain. Each half-iteration evaluates
//! `-ε log Σ_j K_ij exp(g_j/ε) b_j` by shifting the exponent by its maximum
//! and applying the separable Gaussian kernel axis by axis. Rows whose shifted
//! sum underflows fall back to an exact log-sum-exp.

use alloc::vec::Vec;

use crate::entropy::GridDensity;
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const DEFAULT_MAX_ITER: usize = 20_000;

/// Dense 1D kernels `exp(-d(x_i, x_j)^2 / 2ε)` and costs per axis.
#[derive(Debug, Clone)]
pub struct SeparableKernel {
    pub n: [usize; 2],
    pub eps: f64,
    /// `cost[a][i * n_a + j] = d_a(x_i, x_j)^2 / 2`.
    pub cost: [Vec<f64>; 2],
    pub kern: [Vec<f64>; 2],
}

impl SeparableKernel {
    pub fn new(grid: &Grid, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::Invalid("eps must be positive"));
        }
        let mut n = [1usize; 2];
        let mut cost: [Vec<f64>; 2] = [alloc::vec![0.0], alloc::vec![0.0]];
        for a in 0..grid.dim() {
            n[a] = grid.n[a];
            let xs = grid.centers_axis(a);
            let mut c = alloc::vec![0.0; n[a] * n[a]];
            for i in 0..n[a] {
                for j in 0..n[a] {
                    let d = grid.displacement(a, xs[i], xs[j]);
                    c[i * n[a] + j] = 0.5 * d * d;
                }
            }
            cost[a] = c;
        }
        let kern = [
            cost[0].iter().map(|c| libm::exp(-c / eps)).collect(),
            cost[1].iter().map(|c| libm::exp(-c / eps)).collect(),
        ];
        Ok(Self { n, eps, cost, kern })
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `out_i = Σ_j M0(i0, j0) M1(i1, j1) v_j` for per-axis matrices.
    pub fn apply_with(&self, m0: &[f64], m1: &[f64], v: &[f64]) -> Vec<f64> {
        let (n0, n1) = (self.n[0], self.n[1]);
        let mut tmp = alloc::vec![0.0; n0 * n1];
        for j1 in 0..n1 {
            let col = &v[j1 * n0..(j1 + 1) * n0];
            let dst = &mut tmp[j1 * n0..(j1 + 1) * n0];
            for i0 in 0..n0 {
                let row = &m0[i0 * n0..(i0 + 1) * n0];
                dst[i0] = row.iter().zip(col).map(|(a, b)| a * b).sum();
            }
        }
        if n1 == 1 {
            return tmp;
        }
        let mut out = alloc::vec![0.0; n0 * n1];
        for i1 in 0..n1 {
            let dst = &mut out[i1 * n0..(i1 + 1) * n0];
            for j1 in 0..n1 {
                let k = m1[i1 * n1 + j1];
                if k == 0.0 {
                    continue;
                }
                let src = &tmp[j1 * n0..(j1 + 1) * n0];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += k * s;
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.apply_with(&self.kern[0], &self.kern[1], v)
    }

    fn cost_at(&self, i: usize, j: usize) -> f64 {
        let (n0, n1) = (self.n[0], self.n[1]);
        let (i0, i1) = (i % n0, i / n0);
        let (j0, j1) = (j % n0, j / n0);
        self.cost[0][i0 * n0 + j0] + self.cost[1][i1 * n1 + j1]
    }

    /// `-ε log Σ_j exp(-c_ij/ε) exp(w_j)` for every `i`, with `w` already
    /// divided by `ε` and including `log b`.
    pub fn soft_min(&self, w: &[f64]) -> Vec<f64> {
        let eps = self.eps;
        let s = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let v: Vec<f64> = w.iter().map(|x| libm::exp(x - s)).collect();
        let kv = self.apply(&v);
        let mut out = Vec::with_capacity(kv.len());
        for (i, k) in kv.iter().enumerate() {
            if *k > 1e-280 && k.is_finite() {
                out.push(-eps * (libm::log(*k) + s));
            } else {
                out.push(self.exact_row(i, w));
            }
        }
        out
    }

    fn exact_row(&self, i: usize, w: &[f64]) -> f64 {
        let eps = self.eps;
        let mut best = f64::NEG_INFINITY;
        for (j, wj) in w.iter().enumerate() {
            best = best.max(wj - self.cost_at(i, j) / eps);
        }
        if best == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for (j, wj) in w.iter().enumerate() {
            acc += libm::exp(wj - self.cost_at(i, j) / eps - best);
        }
        -eps * (libm::log(acc) + best)
    }
}

/// Dual potentials of the entropic problem
/// `min <C, π> + ε KL(π | a ⊗ b)` and convergence information.
#[derive(Debug, Clone)]
pub struct EntropicPlan {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub eps: f64,
    /// L¹ marginal violations (cell masses).
    pub err_rho: f64,
    pub err_mu: f64,
    pub iterations: usize,
    /// `<α, a> + <β, b>`, the optimal value.
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct SinkhornOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Starting `(α, β)`.
    pub warm: Option<(Vec<f64>, Vec<f64>)>,
}

impl SinkhornOptions {
    pub fn new(tol: f64) -> Self {
        Self { tol, max_iter: DEFAULT_MAX_ITER, warm: None }
    }
}

fn log_weights(rho: &GridDensity) -> (Vec<f64>, Vec<f64>) {
    let h = rho.grid.cell_volume();
    let a: Vec<f64> = rho.values.iter().map(|v| v * h).collect();
    let la = a.iter().map(|v| if *v > 0.0 { libm::log(*v) } else { f64::NEG_INFINITY }).collect();
    (a, la)
}

fn check_pair(rho: &GridDensity, mu: &GridDensity) -> Result<()> {
    if rho.grid != mu.grid {
        return Err(Error::Mismatch("entropic transport needs a shared grid"));
    }
    Ok(())
}

/// Sinkhorn with a fresh kernel.
pub fn sinkhorn(rho: &GridDensity, mu: &GridDensity, eps: f64, tol: f64) -> Result<EntropicPlan> {
    let k = SeparableKernel::new(&rho.grid, eps)?;
    sinkhorn_with(&k, rho, mu, &SinkhornOptions::new(tol))
}

pub fn sinkhorn_with(k: &SeparableKernel, rho: &GridDensity, mu: &GridDensity, opts: &SinkhornOptions) -> Result<EntropicPlan> {
    check_pair(rho, mu)?;
    if k.len() != rho.grid.len() {
        return Err(Error::Mismatch("kernel and grid sizes differ"));
    }
    let eps = k.eps;
    let (a, la) = log_weights(rho);
    let (b, lb) = log_weights(mu);
    let (mut f, mut g) = match &opts.warm {
        Some((f, g)) if f.len() == a.len() && g.len() == b.len() => (f.clone(), g.clone()),
        _ => (alloc::vec![0.0; a.len()], alloc::vec![0.0; b.len()]),
    };
    let update = |pot: &[f64], lw: &[f64]| -> Vec<f64> {
        let w: Vec<f64> = pot.iter().zip(lw).map(|(p, l)| p / eps + l).collect();
        k.soft_min(&w)
    };
    let mut err = f64::INFINITY;
    let mut it = 0;
    while it < opts.max_iter {
        it += 1;
        g = update(&f, &la);
        let f_new = update(&g, &lb);
        err = a
            .iter()
            .zip(f.iter().zip(&f_new))
            .map(|(ai, (fo, fnw))| if *ai > 0.0 { ai * (1.0 - libm::exp((fo - fnw) / eps)).abs() } else { 0.0 })
            .sum();
        f = f_new;
        if err <= opts.tol {
            break;
        }
    }
    // the last update made the rows exact; measure the columns
    let g_check = update(&f, &la);
    let err_mu: f64 = b
        .iter()
        .zip(g.iter().zip(&g_check))
        .map(|(bi, (go, gn))| if *bi > 0.0 { bi * (1.0 - libm::exp((go - gn) / eps)).abs() } else { 0.0 })
        .sum();
    if err > opts.tol && err_mu > opts.tol {
        return Err(Error::NoConvergence { what: "sinkhorn", iterations: it, residual: err });
    }
    let value = dot_finite(&f, &a) + dot_finite(&g, &b);
    Ok(EntropicPlan { alpha: f, beta: g, eps, err_rho: 0.0, err_mu, iterations: it, value })
}

fn dot_finite(p: &[f64], w: &[f64]) -> f64 {
    p.iter().zip(w).map(|(x, y)| if *y > 0.0 { x * y } else { 0.0 }).sum()
}

/// Symmetric problem `OT_ε(ρ, ρ)` by the averaged fixed point
/// `p <- (p + T(p))/2`. Returns the potential and the value `2 <p, a>`.
pub fn sinkhorn_symmetric(k: &SeparableKernel, rho: &GridDensity, tol: f64, warm: Option<&[f64]>) -> Result<(Vec<f64>, f64)> {
    let eps = k.eps;
    let (a, la) = log_weights(rho);
    let mut p = match warm {
        Some(w) if w.len() == a.len() => w.to_vec(),
        _ => alloc::vec![0.0; a.len()],
    };
    for it in 0..DEFAULT_MAX_ITER {
        let w: Vec<f64> = p.iter().zip(&la).map(|(x, l)| x / eps + l).collect();
        let t = k.soft_min(&w);
        let err: f64 = a
            .iter()
            .zip(p.iter().zip(&t))
            .map(|(ai, (po, tn))| if *ai > 0.0 { ai * (1.0 - libm::exp((po - tn) / eps)).abs() } else { 0.0 })
            .sum();
        for (x, y) in p.iter_mut().zip(&t) {
            *x = 0.5 * (*x + y);
        }
        if err <= tol {
            let v = 2.0 * dot_finite(&p, &a);
            return Ok((p, v));
        }
        if it + 1 == DEFAULT_MAX_ITER {
            return Err(Error::NoConvergence { what: "symmetric sinkhorn", iterations: it + 1, residual: err });
        }
    }
    unreachable!()
}

/// Debiased divergence `OT_ε(ρ,μ) - OT_ε(ρ,ρ)/2 - OT_ε(μ,μ)/2`.
pub fn sinkhorn_divergence(rho: &GridDensity, mu: &GridDensity, eps: f64, tol: f64) -> Result<f64> {
    let k = SeparableKernel::new(&rho.grid, eps)?;
    let pl = sinkhorn_with(&k, rho, mu, &SinkhornOptions::new(tol))?;
    let (_, vr) = sinkhorn_symmetric(&k, rho, tol, None)?;
    let (_, vm) = sinkhorn_symmetric(&k, mu, tol, None)?;
    Ok(pl.value - 0.5 * vr - 0.5 * vm)
}

/// `<C, π>` of the plan, by the separable structure.
pub fn transport_cost(k: &SeparableKernel, plan: &EntropicPlan, rho: &GridDensity, mu: &GridDensity) -> f64 {
    let eps = k.eps;
    let (a, _) = log_weights(rho);
    let (_, lb) = log_weights(mu);
    let s = plan.beta.iter().zip(&lb).map(|(g, l)| g / eps + l).fold(f64::NEG_INFINITY, f64::max);
    let v: Vec<f64> = plan.beta.iter().zip(&lb).map(|(g, l)| libm::exp(g / eps + l - s)).collect();
    let kc0: Vec<f64> = k.kern[0].iter().zip(&k.cost[0]).map(|(a, c)| a * c).collect();
    let kc1: Vec<f64> = k.kern[1].iter().zip(&k.cost[1]).map(|(a, c)| a * c).collect();
    let t0 = k.apply_with(&kc0, &k.kern[1], &v);
    let t1 = k.apply_with(&k.kern[0], &kc1, &v);
    let mut total = 0.0;
    for i in 0..a.len() {
        if a[i] > 0.0 {
            let scale = a[i] * libm::exp(plan.alpha[i] / eps + s);
            total += scale * (t0[i] + t1[i]);
        }
    }
    total
}

/// Per-cell barycentric image `Σ_y y π(x,y) / ρ(x)`; on periodic axes the
/// average is the circular mean of the angles `2π y / L`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricMap {
    pub grid: Grid,
    pub image: Vec<[f64; 2]>,
    /// Cells where the circular mean is ill-defined (resultant below 1e-3).
    pub ill_defined: Vec<bool>,
}

impl BarycentricMap {
    /// Displacement `T(x) - x` with torus wrapping.
    pub fn displacement(&self, i: usize) -> [f64; 2] {
        let x = self.grid.center(i);
        let mut d = [0.0; 2];
        for a in 0..self.grid.dim() {
            d[a] = self.grid.displacement(a, x[a], self.image[i][a]);
        }
        d
    }
}

pub fn barycentric_map(k: &SeparableKernel, plan: &EntropicPlan, rho: &GridDensity, mu: &GridDensity) -> BarycentricMap {
    let grid = rho.grid.clone();
    let eps = k.eps;
    let (_, lb) = log_weights(mu);
    let s = plan.beta.iter().zip(&lb).map(|(g, l)| g / eps + l).fold(f64::NEG_INFINITY, f64::max);
    let v: Vec<f64> = plan.beta.iter().zip(&lb).map(|(g, l)| libm::exp(g / eps + l - s)).collect();
    let row = k.apply(&v);
    let n = grid.len();
    let mut image = alloc::vec![[0.0; 2]; n];
    let mut ill = alloc::vec![false; n];
    for a in 0..grid.dim() {
        let coord: Vec<f64> = (0..n).map(|j| grid.center(j)[a]).collect();
        if grid.domain.periodic[a] {
            let l = grid.domain.length(a);
            let lo = grid.domain.lo[a];
            let th: Vec<f64> = coord.iter().map(|y| 2.0 * core::f64::consts::PI * (y - lo) / l).collect();
            let vc: Vec<f64> = v.iter().zip(&th).map(|(x, t)| x * libm::cos(*t)).collect();
            let vs: Vec<f64> = v.iter().zip(&th).map(|(x, t)| x * libm::sin(*t)).collect();
            let (c, sn) = (k.apply(&vc), k.apply(&vs));
            for i in 0..n {
                let (cx, sx) = (c[i] / row[i], sn[i] / row[i]);
                if libm::sqrt(cx * cx + sx * sx) < 1e-3 {
                    ill[i] = true;
                }
                let mut ang = libm::atan2(sx, cx);
                if ang < 0.0 {
                    ang += 2.0 * core::f64::consts::PI;
                }
                image[i][a] = lo + l * ang / (2.0 * core::f64::consts::PI);
            }
        } else {
            let vy: Vec<f64> = v.iter().zip(&coord).map(|(x, y)| x * y).collect();
            let t = k.apply(&vy);
            for i in 0..n {
                image[i][a] = t[i] / row[i];
            }
        }
    }
    BarycentricMap { grid, image, ill_defined: ill }
}

/// `x + (T_{ρ→μ}(x) - x) - (T_{ρ→ρ}(x) - x)`. The self-transport term carries
/// the same `√ε` pull away from walls, so subtracting it removes the leading
/// boundary bias of the barycentric image. A `√ε (√T' - 1)` remainder stays.
pub fn debiased_barycentric_map(k: &SeparableKernel, rho: &GridDensity, mu: &GridDensity, tol: f64) -> Result<BarycentricMap> {
    let opts = SinkhornOptions::new(tol);
    let cross = sinkhorn_with(k, rho, mu, &opts)?;
    let own = sinkhorn_with(k, rho, rho, &opts)?;
    let mut map = barycentric_map(k, &cross, rho, mu);
    let base = barycentric_map(k, &own, rho, rho);
    let g = &rho.grid;
    for i in 0..g.len() {
        let x = g.center(i);
        let (dc, ds) = (map.displacement(i), base.displacement(i));
        for a in 0..g.dim() {
            let mut y = x[a] + dc[a] - ds[a];
            if g.domain.periodic[a] {
                let (lo, l) = (g.domain.lo[a], g.domain.length(a));
                y = lo + (y - lo) - l * libm::floor((y - lo) / l);
            }
            map.image[i][a] = y;
        }
        map.ill_defined[i] |= base.ill_defined[i];
    }
    Ok(map)
}

/// Dense log-domain Sinkhorn for small atom instances. Returns `<C, π>`,
/// the optimal value and the plan (row-major).
pub fn entropic_ot_dense(a: &[f64], b: &[f64], cost: &[f64], eps: f64, tol: f64) -> Result<(f64, f64, Vec<f64>)> {
    let (n, m) = (a.len(), b.len());
    if cost.len() != n * m || n == 0 || m == 0 || !(eps > 0.0) {
        return Err(Error::Invalid("bad dense instance"));
    }
    let la: Vec<f64> = a.iter().map(|v| libm::log(*v)).collect();
    let lb: Vec<f64> = b.iter().map(|v| libm::log(*v)).collect();
    let lse = |vals: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = vals.collect();
        let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + libm::log(v.iter().map(|x| libm::exp(x - mx)).sum::<f64>())
    };
    let mut f = alloc::vec![0.0; n];
    let mut g = alloc::vec![0.0; m];
    for it in 0..DEFAULT_MAX_ITER {
        for j in 0..m {
            g[j] = -eps * lse(&mut (0..n).map(|i| (f[i] - cost[i * m + j]) / eps + la[i]));
        }
        let mut err = 0.0;
        for i in 0..n {
            let fi = -eps * lse(&mut (0..m).map(|j| (g[j] - cost[i * m + j]) / eps + lb[j]));
            err += a[i] * (1.0 - libm::exp((f[i] - fi) / eps)).abs();
            f[i] = fi;
        }
        if err <= tol {
            break;
        }
        if it + 1 == DEFAULT_MAX_ITER {
            return Err(Error::NoConvergence { what: "dense sinkhorn", iterations: it + 1, residual: err });
        }
    }
    let mut plan = alloc::vec![0.0; n * m];
    let mut c = 0.0;
    for i in 0..n {
        for j in 0..m {
            let p = a[i] * b[j] * libm::exp((f[i] + g[j] - cost[i * m + j]) / eps);
            plan[i * m + j] = p;
            c += p * cost[i * m + j];
        }
    }
    let value = f.iter().zip(a).map(|(x, y)| x * y).sum::<f64>() + g.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    Ok((c, value, plan))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, Domain};
    use crate::transport::ot_bruteforce;

    fn bump(g: &Grid, c: [f64; 2], s: f64) -> GridDensity {
        bump_on(g, c, s, 0.05)
    }

    fn bump_on(g: &Grid, c: [f64; 2], s: f64, floor: f64) -> GridDensity {
        GridDensity::from_fn(g.clone(), |x| {
            let mut r2 = 0.0;
            for a in 0..g.dim() {
                let d = g.displacement(a, c[a], x[a]);
                r2 += d * d;
            }
            floor + libm::exp(-0.5 * r2 / (s * s))
        })
        .unwrap()
    }

    #[test]
    fn marginals_converge() {
        let g = build_grid(Domain::torus2(), &[24, 24]).unwrap();
        let rho = bump(&g, [0.3, 0.4], 0.1);
        let mu = bump(&g, [0.6, 0.5], 0.15);
        let plan = sinkhorn(&rho, &mu, 5e-3, 1e-9).unwrap();
        assert!(plan.err_mu <= 1e-8, "{}", plan.err_mu);
        // explicit row and column sums of the plan
        let k = SeparableKernel::new(&g, 5e-3).unwrap();
        let (a, _) = log_weights(&rho);
        let (b, _) = log_weights(&mu);
        let mut rows = alloc::vec![0.0; a.len()];
        let mut cols = alloc::vec![0.0; b.len()];
        for i in 0..a.len() {
            for j in 0..b.len() {
                let p = a[i] * b[j] * libm::exp((plan.alpha[i] + plan.beta[j] - k.cost_at(i, j)) / k.eps);
                rows[i] += p;
                cols[j] += p;
            }
        }
        let er: f64 = rows.iter().zip(&a).map(|(x, y)| (x - y).abs()).sum();
        let ec: f64 = cols.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
        assert!(er < 1e-8 && ec < 1e-8, "{er} {ec}");
    }

    #[test]
    fn symmetric_in_arguments() {
        let g = build_grid(Domain::square(), &[16, 16]).unwrap();
        let rho = bump(&g, [0.3, 0.4], 0.1);
        let mu = bump(&g, [0.6, 0.5], 0.15);
        let s1 = sinkhorn_divergence(&rho, &mu, 1e-2, 1e-11).unwrap();
        let s2 = sinkhorn_divergence(&mu, &rho, 1e-2, 1e-11).unwrap();
        assert!((s1 - s2).abs() < 1e-9 && s1 > 0.0);
        assert!(sinkhorn_divergence(&rho, &rho, 1e-2, 1e-11).unwrap().abs() < 1e-9);
    }

    #[test]
    fn identity_pair_has_identity_map() {
        let g = build_grid(Domain::torus2(), &[32, 32]).unwrap();
        let rho = bump(&g, [0.5, 0.5], 0.2);
        let k = SeparableKernel::new(&g, 1e-3).unwrap();
        let plan = sinkhorn_with(&k, &rho, &rho, &SinkhornOptions::new(1e-10)).unwrap();
        let map = barycentric_map(&k, &plan, &rho, &rho);
        let worst = (0..g.len()).map(|i| {
            let d = map.displacement(i);
            libm::sqrt(d[0] * d[0] + d[1] * d[1])
        }).fold(0.0, f64::max);
        assert!(worst < 0.02, "{worst}");
        assert!(map.ill_defined.iter().all(|b| !b));
    }

    #[test]
    fn debiased_map_of_identical_pair_is_identity() {
        let g = build_grid(Domain::square(), &[24, 24]).unwrap();
        let rho = bump_on(&g, [0.3, 0.6], 0.2, 0.1);
        let k = SeparableKernel::new(&g, 2e-3).unwrap();
        let map = debiased_barycentric_map(&k, &rho, &rho, 1e-11).unwrap();
        for i in 0..g.len() {
            let d = map.displacement(i);
            assert!(d[0].abs() < 1e-9 && d[1].abs() < 1e-9, "{d:?}");
        }
    }

    #[test]
    fn debiasing_shrinks_the_wall_error() {
        // ρ = 1 + cos(πx)/2 against uniform: T(x) = x + sin(πx)/(2π)
        let g = build_grid(Domain::square(), &[32, 32]).unwrap();
        let rho = GridDensity::from_fn(g.clone(), |x| 1.0 + 0.5 * libm::cos(core::f64::consts::PI * x[0])).unwrap();
        let mu = GridDensity::uniform(g.clone());
        let k = SeparableKernel::new(&g, 2e-3).unwrap();
        let exact = |x: f64| x + libm::sin(core::f64::consts::PI * x) / (2.0 * core::f64::consts::PI);
        let plan = sinkhorn_with(&k, &rho, &mu, &SinkhornOptions::new(1e-10)).unwrap();
        let plain = barycentric_map(&k, &plan, &rho, &mu);
        let deb = debiased_barycentric_map(&k, &rho, &mu, 1e-10).unwrap();
        let err = |m: &BarycentricMap| (0..g.len()).map(|i| (m.image[i][0] - exact(g.center(i)[0])).abs()).fold(0.0, f64::max);
        let (ep, ed) = (err(&plain), err(&deb));
        // the plain error is the √ε boundary layer, about 0.8 √ε
        assert!(ep > 0.02, "{ep}");
        assert!(ed < 0.5 * ep, "{ed} vs {ep}");
        // the second axis is uniform on both sides: no motion after debiasing
        assert!((0..g.len()).all(|i| deb.displacement(i)[1].abs() < 1e-9));
    }

    #[test]
    fn translated_bump_moves_rigidly() {
        let g = build_grid(Domain::torus2(), &[64, 64]).unwrap();
        // a positive background may stay in place, so only the bump itself
        // is expected to move rigidly
        let rho = bump_on(&g, [0.4, 0.5], 0.08, 1e-4);
        let mu = bump_on(&g, [0.5, 0.55], 0.08, 1e-4);
        let top = rho.max();
        let k = SeparableKernel::new(&g, 1e-3).unwrap();
        let plan = sinkhorn_with(&k, &rho, &mu, &SinkhornOptions::new(1e-9)).unwrap();
        let map = barycentric_map(&k, &plan, &rho, &mu);
        let mut worst: f64 = 0.0;
        for i in (0..g.len()).filter(|&i| rho.values[i] > 0.2 * top) {
            let d = map.displacement(i);
            worst = worst.max((d[0] - 0.1).abs()).max((d[1] - 0.05).abs());
        }
        assert!(worst < 0.02, "{worst}");
        let plain = plan.value;
        let (_, vr) = sinkhorn_symmetric(&k, &rho, 1e-9, None).unwrap();
        let (_, vm) = sinkhorn_symmetric(&k, &mu, 1e-9, None).unwrap();
        let debiased = plain - 0.5 * vr - 0.5 * vm;
        assert!(debiased >= 0.0);
        // the debiased value sits near the exact W_2^2/2 of a rigid shift
        assert!((debiased - 0.5 * (0.01 + 0.0025)).abs() < 5e-4, "{debiased}");
    }

    #[test]
    fn dense_entropic_cost_approaches_the_exact_cost() {
        let x = [0.0, 1.0];
        let y = [0.2, 0.9];
        let a = [0.3, 0.7];
        let b = [0.6, 0.4];
        let cost: Vec<f64> = x.iter().flat_map(|p| y.iter().map(move |q| 0.5 * (p - q) * (p - q))).collect();
        let (exact, _) = ot_bruteforce(&a, &b, &cost).unwrap();
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let (c, _, _) = entropic_ot_dense(&a, &b, &cost, eps, 1e-13).unwrap();
            let gap = c - exact;
            assert!(gap >= -1e-12 && gap < prev);
            prev = gap;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn separable_cost_matches_dense_sum() {
        let g = build_grid(Domain::square(), &[10, 9]).unwrap();
        let rho = bump(&g, [0.3, 0.4], 0.2);
        let mu = bump(&g, [0.6, 0.5], 0.2);
        let k = SeparableKernel::new(&g, 2e-2).unwrap();
        let plan = sinkhorn_with(&k, &rho, &mu, &SinkhornOptions::new(1e-12)).unwrap();
        let c = transport_cost(&k, &plan, &rho, &mu);
        let (a, _) = log_weights(&rho);
        let (b, _) = log_weights(&mu);
        let mut dense = 0.0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                let cij = k.cost_at(i, j);
                dense += cij * a[i] * b[j] * libm::exp((plan.alpha[i] + plan.beta[j] - cij) / k.eps);
            }
        }
        assert!((c - dense).abs() < 1e-12 * dense.max(1.0));
    }

    #[test]
    fn underflow_rows_fall_back() {
        let g = build_grid(Domain::interval(0.0, 1.0), &[40]).unwrap();
        let k = SeparableKernel::new(&g, 1e-4).unwrap();
        // far weights dominate the shift, near ones vanish after exp
        let w: Vec<f64> = (0..40).map(|j| if j < 20 { 0.0 } else { 900.0 }).collect();
        let out = k.soft_min(&w);
        for (i, o) in out.iter().enumerate() {
            assert!(o.is_finite());
            assert!((o - k.exact_row(i, &w)).abs() < 1e-9 * (1.0 + o.abs()));
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g1 = build_grid(Domain::square(), &[8, 8]).unwrap();
        let g2 = build_grid(Domain::square(), &[9, 8]).unwrap();
        let r1 = GridDensity::uniform(g1);
        let r2 = GridDensity::uniform(g2);
        assert!(sinkhorn(&r1, &r2, 1e-2, 1e-9).is_err());
        assert!(sinkhorn(&r1, &r1, 0.0, 1e-9).is_err());
    }
}
