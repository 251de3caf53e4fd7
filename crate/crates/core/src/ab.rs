//! The recursion `X_{k+1} = F^{-1}(X_k)` with `F(X) = X/(1-X)^{d(m-1)+2}`,
//! trajectory checks of the determinant and Laplacian lower bounds, and the
//! local `L^1`-`L^∞` bound.

use alloc::vec::Vec;

use crate::entropy::{ab_constant, f_m_prime, m_c1, GridDensity, SchemeParams};
use crate::error::{Error, Result};
use crate::jko1d::SchemeTrajectory;
use crate::monge_ampere::{
    amgm_subharmonic_check_1d, amgm_subharmonic_check_2d, convexify_1d, convexify_2d, ma_lower_bound_check_1d,
    ma_lower_bound_check_2d, ma_measure_1d, ma_measure_2d, Lattice, GUARD,
};

fn check_regime(d: usize, m: f64) -> Result<()> {
    if !(d == 1 || d == 2) || !(m > 0.0 && m > m_c1(d)) || !m.is_finite() {
        return Err(Error::Regime { m, d });
    }
    Ok(())
}

/// The exponent `d(m-1)+2`.
pub fn exponent(d: usize, m: f64) -> f64 {
    d as f64 * (m - 1.0) + 2.0
}

#[allow(non_snake_case)]
pub fn F(x: f64, d: usize, m: f64) -> Result<f64> {
    check_regime(d, m)?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain("F needs 0 <= X < 1"));
    }
    Ok(x / libm::pow(1.0 - x, exponent(d, m)))
}

/// Unique `X` in `[0, 1)` with `F(X) = Y`: bisection until
/// `|F(X) - Y| <= tol max(1, Y)`, then one Newton step kept only if it helps.
#[allow(non_snake_case)]
pub fn F_inverse(y: f64, d: usize, m: f64, tol: f64) -> Result<f64> {
    check_regime(d, m)?;
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::Domain("F_inverse needs a finite Y >= 0"));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let a = exponent(d, m);
    let f = |x: f64| x / libm::pow(1.0 - x, a);
    let scale = y.max(1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x = 0.5;
    for _ in 0..200 {
        x = 0.5 * (lo + hi);
        let fx = f(x);
        if (fx - y).abs() <= tol * scale || hi - lo <= f64::EPSILON * hi {
            break;
        }
        if fx < y {
            lo = x;
        } else {
            hi = x;
        }
    }
    let r = f(x) - y;
    let q = 1.0 - x;
    let df = libm::pow(q, -a) + a * x * libm::pow(q, -a - 1.0);
    let xn = x - r / df;
    if (0.0..1.0).contains(&xn) && (f(xn) - y).abs() < r.abs() {
        x = xn;
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ABSequence {
    pub d: usize,
    pub m: f64,
    /// `d(m-1)+2`.
    pub alpha: f64,
    /// `d/(d(m-1)+2)`.
    pub ab_constant: f64,
    /// `values[k-1] = X_k`.
    pub values: Vec<f64>,
    /// `k alpha X_k`.
    pub diagnostic: Vec<f64>,
}

impl ABSequence {
    /// `X_k` for `k >= 1`; `X_0` is read as `1` too.
    pub fn x(&self, k: usize) -> f64 {
        self.values[k.max(1) - 1]
    }
}

pub fn ab_sequence(d: usize, m: f64, k_max: usize) -> Result<ABSequence> {
    check_regime(d, m)?;
    if k_max == 0 {
        return Err(Error::Invalid("the sequence needs K >= 1"));
    }
    let alpha = exponent(d, m);
    let mut values = Vec::with_capacity(k_max);
    values.push(1.0);
    for k in 1..k_max {
        values.push(F_inverse(values[k - 1], d, m, 1e-15)?);
    }
    let diagnostic = values.iter().enumerate().map(|(i, x)| (i + 1) as f64 * alpha * x).collect();
    Ok(ABSequence { d, m, alpha, ab_constant: ab_constant(d, m), values, diagnostic })
}

/// Pressure samples of one iterate, ready for the checks.
#[derive(Debug, Clone, PartialEq)]
pub enum Samples {
    /// Increasing points (1D), e.g. mass-coordinate midpoints.
    Line { x: Vec<f64>, pressure: Vec<f64> },
    /// Lattice values with the evaluation window.
    Plane { lattice: Lattice, pressure: Vec<f64>, window: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSample {
    pub k: usize,
    pub t: f64,
    pub samples: Samples,
    /// Largest density of the iterate.
    pub linf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbOptions {
    /// Relative allowance in the time-continuous bound.
    pub eps: f64,
    /// First time at which the time-continuous bound is checked.
    pub t0: f64,
    pub guard: f64,
    /// Fraction of the support half-width on which the pointwise 1D `Δp`
    /// bound is read. The discrete free boundary carries a layer of a few
    /// pieces whose second differences mix in the singular part of `Δp`.
    pub inner: f64,
}

impl Default for AbOptions {
    fn default() -> Self {
        Self { eps: 0.1, t0: 0.0, guard: GUARD, inner: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ABRow {
    pub k: usize,
    pub t: f64,
    pub one_minus_x: f64,
    /// `min (mass/vol)^{1/d}` over the window.
    pub min_det: f64,
    pub ma_ok: bool,
    pub slack: f64,
    /// Weak `Δu - d(1-X_k)`.
    pub lap_u_margin: f64,
    pub lap_u_ok: bool,
    /// Weak `Δp + d X_k/τ` (the same test functions).
    pub lap_p_margin: f64,
    pub lap_p_ok: bool,
    /// Pointwise `min Δp + (1+ε)α/t` (NaN before `t0`).
    pub item3_margin: f64,
    pub item3_ok: bool,
    pub linf: f64,
}

impl ABRow {
    pub fn ok(&self) -> bool {
        self.ma_ok && self.lap_u_ok && self.lap_p_ok && self.item3_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ABReport {
    pub d: usize,
    pub m: f64,
    pub tau: f64,
    pub eps: f64,
    pub rows: Vec<ABRow>,
}

impl ABReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(ABRow::ok)
    }

    pub fn worst_ma_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.min_det / r.one_minus_x).fold(f64::INFINITY, f64::min)
    }

    pub fn worst_item3_margin(&self) -> f64 {
        self.rows.iter().filter(|r| !r.item3_margin.is_nan()).map(|r| r.item3_margin).fold(f64::INFINITY, f64::min)
    }
}

/// Second divided differences on an increasing point list.
pub fn laplacian_1d(x: &[f64], v: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(n.saturating_sub(2));
    for j in 1..n.saturating_sub(1) {
        let sr = (v[j + 1] - v[j]) / (x[j + 1] - x[j]);
        let sl = (v[j] - v[j - 1]) / (x[j] - x[j - 1]);
        out.push(2.0 * (sr - sl) / (x[j + 1] - x[j - 1]));
    }
    out
}

/// Five-point Laplacian on the window.
pub fn laplacian_2d(l: &Lattice, v: &[f64], window: &[usize]) -> Vec<f64> {
    let n0 = l.n[0];
    let (hx, hy) = (l.h[0], l.h[1]);
    window
        .iter()
        .map(|&k| (v[k - 1] - 2.0 * v[k] + v[k + 1]) / (hx * hx) + (v[k - n0] - 2.0 * v[k] + v[k + n0]) / (hy * hy))
        .collect()
}

/// Runs every check on a list of iterates.
pub fn ab_check_samples(samples: &[PotentialSample], params: &SchemeParams, opts: &AbOptions) -> Result<ABReport> {
    let (d, m, tau) = (params.d, params.m, params.tau);
    let kmax = samples.iter().map(|s| s.k).max().unwrap_or(1).max(1);
    let seq = ab_sequence(d, m, kmax)?;
    let alpha_c = ab_constant(d, m);
    let mut rows = Vec::with_capacity(samples.len());
    for s in samples {
        if s.k == 0 {
            continue;
        }
        let xk = seq.x(s.k);
        let lam = 1.0 - xk;
        let (ma, am, dp, min_det) = match &s.samples {
            Samples::Line { x, pressure } => {
                let raw: Vec<f64> = x.iter().zip(pressure).map(|(x, p)| tau * p + 0.5 * x * x).collect();
                let pot = convexify_1d(x, &raw)?;
                let ma = ma_lower_bound_check_1d(&pot, lam, opts.guard);
                let am = amgm_subharmonic_check_1d(&pot, lam, opts.guard);
                let mu = ma_measure_1d(&pot);
                let min_det = mu.window.iter().map(|&i| mu.mass[i] / mu.volume[i]).fold(f64::INFINITY, f64::min);
                let (c, r) = (0.5 * (x[0] + x[x.len() - 1]), 0.5 * (x[x.len() - 1] - x[0]));
                let lap = laplacian_1d(x, pressure);
                let dp = lap.into_iter().enumerate().filter(|(i, _)| libm::fabs(x[i + 1] - c) <= opts.inner * r).map(|(_, v)| v).collect();
                (ma, am, dp, min_det)
            }
            Samples::Plane { lattice, pressure, window } => {
                let raw: Vec<f64> = (0..lattice.len())
                    .map(|k| {
                        let x = lattice.point(k);
                        tau * pressure[k] + 0.5 * (x[0] * x[0] + x[1] * x[1])
                    })
                    .collect();
                let pot = convexify_2d(lattice, &raw)?;
                let ma = ma_lower_bound_check_2d(&pot, lam, window, opts.guard)?;
                let am = amgm_subharmonic_check_2d(&pot, lam, window, opts.guard);
                let mu = ma_measure_2d(&pot, window)?;
                let min_det = window.iter().map(|&k| libm::sqrt(mu.mass[k] / mu.volume[k])).fold(f64::INFINITY, f64::min);
                (ma, am, laplacian_2d(lattice, pressure, window), min_det)
            }
        };
        let lap_u_margin = am.margin;
        // Δp = (Δu - d)/τ, so the weak pressure margin is the u margin over τ
        let lap_p_margin = am.margin / tau;
        let p_slack = am.slack / tau;
        let (item3_margin, item3_ok) = if s.t >= opts.t0 && s.t > 0.0 {
            let bound = -(1.0 + opts.eps) * alpha_c / s.t;
            let worst = dp.iter().fold(f64::INFINITY, |a, v| a.min(*v));
            (worst - bound, worst >= bound)
        } else {
            (f64::NAN, true)
        };
        rows.push(ABRow {
            k: s.k,
            t: s.t,
            one_minus_x: lam,
            min_det,
            ma_ok: ma.ok,
            slack: ma.slack,
            lap_u_margin,
            lap_u_ok: am.ok,
            lap_p_margin,
            lap_p_ok: lap_p_margin >= -p_slack,
            item3_margin,
            item3_ok,
            linf: s.linf,
        });
    }
    Ok(ABReport { d, m, tau, eps: opts.eps, rows })
}

/// Pressure samples of a 1D trajectory, taken at the mass-coordinate
/// midpoints of every minimizer.
pub fn samples_1d(traj: &SchemeTrajectory) -> Result<Vec<PotentialSample>> {
    let m = traj.params.m;
    let mut out = Vec::with_capacity(traj.steps.len());
    for st in traj.steps.iter().skip(1) {
        let step = st.step.as_ref().ok_or(Error::Invalid("trajectory step without stored potentials"))?;
        let eta = &step.eta;
        let x: Vec<f64> = (0..eta.pieces()).map(|j| eta.midpoint(j)).collect();
        let pressure: Vec<f64> = (0..eta.pieces()).map(|j| f_m_prime(eta.density(j), m)).collect::<Result<_>>()?;
        out.push(PotentialSample { k: st.k, t: st.t, samples: Samples::Line { x, pressure }, linf: st.density.max() });
    }
    Ok(out)
}

pub fn ab_check_trajectory(traj: &SchemeTrajectory, opts: &AbOptions) -> Result<ABReport> {
    ab_check_samples(&samples_1d(traj)?, &traj.params, opts)
}

/// Volume of the unit ball.
pub fn unit_ball_volume(d: usize) -> f64 {
    if d == 1 {
        2.0
    } else {
        core::f64::consts::PI
    }
}

/// Mean of `|x|^2` over the unit ball.
pub fn c_d(d: usize) -> f64 {
    d as f64 / (d as f64 + 2.0)
}

/// The constant in the smallness condition `r^{2+d(m-1)} <= C/K` for
/// `m < 1`: the radius at which the right side of the bound reaches zero.
pub fn smallness_constant(d: usize, m: f64) -> f64 {
    libm::pow(unit_ball_volume(d), 1.0 - m) / c_d(d)
}

/// Bound on `sup_{B_r} g` for a unit-mass density whose transformed pressure
/// `h_m(g)` (`log g`, `-g^{m-1}` or `g^{m-1}`) satisfies `Δh_m >= -2dK` on a
/// ball of radius `r`:
///
/// * `m = 1`: `e^{c_d K r^2}/(ω_d r^d)`
/// * `m < 1`: `(ω_d^{1-m} r^{d(1-m)} - c_d K r^2)^{1/(m-1)}`, `None` when
///   the bracket is not positive
/// * `m > 1`: `((ω_d r^d)^{1-m} + c_d K r^2)^{1/(m-1)}`; rigorous for
///   `m <= 2`, where `z^{m-1}` is concave, and a surrogate above that
pub fn l1_linfty_bound(m: f64, d: usize, k: f64, r: f64) -> Result<Option<f64>> {
    check_regime(d, m)?;
    if !(r > 0.0) || !(k >= 0.0) || !r.is_finite() || !k.is_finite() {
        return Err(Error::Invalid("radius must be positive and K nonnegative"));
    }
    let w = unit_ball_volume(d);
    let rd = libm::pow(r, d as f64);
    let q = c_d(d) * k * r * r;
    if m == 1.0 {
        return Ok(Some(libm::exp(q) / (w * rd)));
    }
    if m < 1.0 {
        let b = libm::pow(w * rd, 1.0 - m) - q;
        if b <= 0.0 {
            return Ok(None);
        }
        return Ok(Some(libm::pow(b, 1.0 / (m - 1.0))));
    }
    Ok(Some(libm::pow(libm::pow(w * rd, 1.0 - m) + q, 1.0 / (m - 1.0))))
}

/// Converts a lower bound `Δp >= -k_p` on the pressure `f_m'(ρ)` into the
/// `K` of [`l1_linfty_bound`].
pub fn pressure_bound_to_k(m: f64, d: usize, k_p: f64) -> f64 {
    let factor = if m == 1.0 { 1.0 } else { (m - 1.0).abs() / m };
    factor * k_p / (2.0 * d as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinftyCheck {
    pub sup_norm: f64,
    pub bound_m: f64,
    pub ok: bool,
    /// Step index whose `X_k` fixed the bound.
    pub k0: usize,
}

/// Ball `center + radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

/// `max` over iterates with `t >= t0` of the density on the ball, against
/// the bound with `K` taken from `d X_k/τ` at the first such iterate.
pub fn linfty_bound_check_densities(
    records: &[(usize, f64, &GridDensity)],
    params: &SchemeParams,
    ball: Ball,
    t0: f64,
) -> Result<LinftyCheck> {
    let first = records.iter().find(|r| r.1 >= t0).ok_or(Error::Invalid("no iterate at or after t0"))?;
    let g = &first.2.grid;
    let d = params.d;
    for a in 0..d {
        let l = g.domain.length(a);
        let fits = if g.domain.periodic[a] {
            4.0 * ball.radius <= l
        } else {
            ball.center[a] - 2.0 * ball.radius >= g.domain.lo[a] && ball.center[a] + 2.0 * ball.radius <= g.domain.hi[a]
        };
        if !fits {
            return Err(Error::Invalid("ball too large: B_2r must lie in the domain"));
        }
    }
    let k0 = first.0.max(1);
    let seq = ab_sequence(d, params.m, k0)?;
    let k_p = d as f64 * seq.x(k0) / params.tau;
    let bound_m = l1_linfty_bound(params.m, d, pressure_bound_to_k(params.m, d, k_p), ball.radius)?
        .ok_or(Error::Invalid("radius above the smallness threshold"))?;
    let mut sup_norm = 0.0f64;
    for (_, t, rho) in records {
        if *t < t0 {
            continue;
        }
        for i in 0..rho.grid.len() {
            let x = rho.grid.center(i);
            let mut r2 = 0.0;
            for a in 0..d {
                let dx = rho.grid.displacement(a, ball.center[a], x[a]);
                r2 += dx * dx;
            }
            if r2 <= ball.radius * ball.radius {
                sup_norm = sup_norm.max(rho.values[i]);
            }
        }
    }
    Ok(LinftyCheck { sup_norm, bound_m, ok: sup_norm <= bound_m, k0 })
}

pub fn linfty_bound_check(traj: &SchemeTrajectory, ball: Ball, t0: f64) -> Result<LinftyCheck> {
    let recs: Vec<(usize, f64, &GridDensity)> = traj.steps.iter().map(|s| (s.k, s.t, &s.density)).collect();
    linfty_bound_check_densities(&recs, &traj.params, ball, t0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::{exact_profile, ExactProfile, ProfileKind};
    use crate::grid::{build_grid, Domain};
    use crate::jko1d::{run_scheme, SolverOptions};

    #[test]
    fn f_examples() {
        assert_eq!(F(0.0, 1, 2.0).unwrap(), 0.0);
        assert!((F(0.5, 1, 2.0).unwrap() - 4.0).abs() < 1e-14);
        assert!(F(1.0, 1, 2.0).is_err());
        assert!(F(-0.1, 1, 2.0).is_err());
        assert!(F(0.5, 2, 0.0).is_err());
        for i in 0..100 {
            let x = i as f64 / 100.0;
            assert!(F(x, 2, 1.5).unwrap() >= x);
        }
    }

    #[test]
    fn inverse_round_trip_and_golden_value() {
        let x2 = F_inverse(1.0, 2, 1.0, 1e-15).unwrap();
        // root of X^2 - 3X + 1 in (0, 1)
        let exact = (3.0 - libm::sqrt(5.0)) / 2.0;
        assert!((x2 - exact).abs() < 1e-12);
        assert_eq!(F_inverse(0.0, 1, 2.0, 1e-15).unwrap(), 0.0);
        for (d, m) in [(1, 1.0), (1, 2.0), (2, 1.5), (1, 0.7)] {
            for e in -6..=6 {
                let y = libm::pow(10.0, e as f64);
                let x = F_inverse(y, d, m, 1e-15).unwrap();
                let back = F(x, d, m).unwrap();
                assert!((back - y).abs() <= 1e-12 * y.max(1.0), "{d} {m} {y}: {back}");
            }
        }
    }

    #[test]
    fn sequence_decreases_like_one_over_alpha_k() {
        let s = ab_sequence(1, 2.0, 10_000).unwrap();
        assert_eq!(s.values[0], 1.0);
        assert!(s.values.windows(2).all(|w| w[1] < w[0] && w[1] > 0.0));
        for k in 1..s.values.len() {
            let x = s.values[k];
            assert!((F(x, 1, 2.0).unwrap() - s.values[k - 1]).abs() <= 1e-12 * s.values[k - 1].max(1e-300).max(1.0));
        }
        assert!((s.diagnostic[9_999] - 1.0).abs() < 0.02);
        let inc = 1.0 / s.values[9_999] - 1.0 / s.values[9_998];
        assert!((inc - s.alpha).abs() < 0.01 * s.alpha);
    }

    #[test]
    fn ab_constant_values() {
        assert!((ab_constant(1, 2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((ab_constant(2, 1.0) - 1.0).abs() < 1e-15);
        assert!((ab_constant(1, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bound_examples() {
        assert!((l1_linfty_bound(1.0, 1, 0.0, 1.0).unwrap().unwrap() - 0.5).abs() < 1e-15);
        assert!((l1_linfty_bound(0.5, 1, 0.0, 1.0).unwrap().unwrap() - 0.5).abs() < 1e-14);
        assert_eq!(l1_linfty_bound(0.5, 1, 1e6, 1.0).unwrap(), None);
        assert!(l1_linfty_bound(0.0, 2, 0.0, 1.0).is_err());
    }

    #[test]
    fn bound_monotonicity() {
        for m in [0.6, 1.0, 1.5, 2.0] {
            let mut prev = 0.0;
            for i in 0..20 {
                let k = i as f64 * 0.5;
                let b = l1_linfty_bound(m, 1, k, 0.3).unwrap().unwrap();
                assert!(b >= prev);
                prev = b;
            }
        }
        // m < 1: decreasing in r up to the bracket maximum, then the
        // sentinel past the threshold
        let (m, d, k) = (0.5, 1, 2.0);
        let beta = d as f64 * (1.0 - m);
        let r_star = libm::pow(smallness_constant(d, m) / k, 1.0 / (2.0 - beta));
        let r_min = r_star * libm::pow(beta / 2.0, 1.0 / (2.0 - beta));
        let mut prev = f64::INFINITY;
        let mut r = 0.05;
        let mut seen_fail = false;
        while r < 2.0 * r_star {
            match l1_linfty_bound(m, d, k, r).unwrap() {
                Some(b) => {
                    assert!(!seen_fail);
                    if r < r_min {
                        assert!(b <= prev);
                    } else if r > r_min + 0.01 {
                        assert!(b >= prev);
                    }
                    prev = b;
                    assert!(r < r_star * (1.0 + 1e-12));
                }
                None => {
                    seen_fail = true;
                    assert!(r >= r_star * (1.0 - 1e-12));
                }
            }
            r += 0.01;
        }
        assert!(seen_fail);
    }

    #[test]
    fn uniform_torus_run_has_identity_potential() {
        let g = build_grid(Domain::torus1(), &[64]).unwrap();
        let rho = GridDensity::uniform(g);
        let params = SchemeParams::new(1.0, 0.01, 1);
        let traj = run_scheme(&rho, &params, 5, &SolverOptions::default(), 0.0).unwrap();
        let rep = ab_check_trajectory(&traj, &AbOptions::default()).unwrap();
        assert_eq!(rep.rows.len(), 5);
        for r in &rep.rows {
            assert!(r.ok(), "{r:?}");
            assert!((r.min_det - 1.0).abs() < 1e-6);
        }
        let c = linfty_bound_check(&traj, Ball { center: [0.5, 0.0], radius: 0.2 }, 0.02).unwrap();
        assert!(c.ok && (c.sup_norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_barenblatt_pressure_laplacian() {
        let p = ExactProfile::new(ProfileKind::BarenblattPme, 2.0, 1, [0.0; 2]).unwrap();
        let x: Vec<f64> = (0..200).map(|i| -0.8 + 1.6 * i as f64 / 199.0).collect();
        let rs = p.support_radius(1.0);
        let pr: Vec<f64> = x.iter().map(|&x| 2.0 * p.density([x * rs, 0.0], 1.0)).collect();
        let xs: Vec<f64> = x.iter().map(|v| v * rs).collect();
        for v in laplacian_1d(&xs, &pr) {
            assert!((v + 1.0 / 3.0).abs() < 1e-9, "{v}");
        }
        let g = build_grid(Domain::truncated_line(4.0), &[256]).unwrap();
        let rho = exact_profile(&p, &g, 1.0).unwrap();
        assert!(rho.max() <= p.sup(1.0) + 1e-9);
    }

    #[test]
    fn errors() {
        let g = build_grid(Domain::interval(0.0, 1.0), &[16]).unwrap();
        let rho = GridDensity::uniform(g);
        let params = SchemeParams::new(1.0, 0.01, 1);
        let traj = run_scheme(&rho, &params, 2, &SolverOptions::default(), 0.0).unwrap();
        assert!(linfty_bound_check(&traj, Ball { center: [0.5, 0.0], radius: 0.4 }, 0.0).is_err());
        assert!(ab_sequence(1, 1.0, 0).is_err());
    }
}
