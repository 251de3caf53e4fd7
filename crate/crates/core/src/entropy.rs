//! The entropy family `f_m`, its convex conjugate, pressures, the entropy
//! functional and self-similar reference solutions.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{build_grid, DomainKind, Grid};

/// Densities for `m <= 1` are clamped below at this value to dodge underflow.
pub const FLOOR: f64 = 1e-300;

pub fn m_c1(d: usize) -> f64 {
    1.0 - 2.0 / d as f64
}

pub fn m_c2(d: usize) -> f64 {
    1.0 - 2.0 / (d as f64 + 2.0)
}

/// Threshold for displacement convexity of the entropy.
pub fn m_geo(d: usize) -> f64 {
    1.0 - 1.0 / d as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    pub m: f64,
    pub tau: f64,
    pub d: usize,
}

impl SchemeParams {
    pub fn new(m: f64, tau: f64, d: usize) -> Self {
        Self { m, tau, d }
    }

    /// Checks `m > m_c1`, plus `m > m_c2` on truncations of unbounded domains.
    pub fn validate(&self, kind: DomainKind) -> Result<()> {
        if !(self.d == 1 || self.d == 2) || kind.dim() != self.d {
            return Err(Error::Invalid("dimension must be 1 or 2 and match the domain"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Invalid("time step must be positive"));
        }
        let bound = if kind.is_truncated() { m_c2(self.d) } else { m_c1(self.d) };
        if !(self.m > 0.0 && self.m > bound) || !self.m.is_finite() {
            return Err(Error::Regime { m: self.m, d: self.d });
        }
        Ok(())
    }
}

/// Nonnegative per-cell density of unit mass.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridDensity {
    /// Wraps values that already have unit mass (within 1e-9).
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch("value count differs from cell count"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid("densities must be finite and nonnegative"));
        }
        let mass = grid.integrate(&values);
        if (mass - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid("density must have unit mass"));
        }
        Ok(Self { grid, values })
    }

    /// Rescales nonnegative values to unit mass.
    pub fn normalized(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch("value count differs from cell count"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid("densities must be finite and nonnegative"));
        }
        let mass = grid.integrate(&values);
        if !(mass > 0.0) {
            return Err(Error::Invalid("density has zero mass"));
        }
        for v in values.iter_mut() {
            *v /= mass;
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at cell centres and normalises.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(grid.center(i))).collect();
        Self::normalized(grid, values)
    }

    pub fn uniform(grid: Grid) -> Self {
        let v = 1.0 / grid.total_measure();
        let values = alloc::vec![v; grid.len()];
        Self { grid, values }
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Raises every value to at least [`FLOOR`].
    pub fn apply_floor(&mut self) {
        for v in self.values.iter_mut() {
            if *v < FLOOR {
                *v = FLOOR;
            }
        }
    }

    /// Mean and standard deviation along axis 0 (1D grids).
    pub fn mean_std(&self) -> (f64, f64) {
        let h = self.grid.cell_volume();
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.center(i)[0];
            m1 += v * h * x;
            m2 += v * h * x * x;
        }
        // piecewise constant density: add the in-cell variance
        let var = m2 - m1 * m1 + self.grid.h[0] * self.grid.h[0] / 12.0;
        (m1, libm::sqrt(var.max(0.0)))
    }
}

/// `f_m(z)`: `z^m/(m-1)` for `m != 1`, `z log z` for `m = 1`.
pub fn f_m(z: f64, m: f64) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain("f_m needs a finite nonnegative argument"));
    }
    if m == 1.0 {
        return Ok(if z == 0.0 { 0.0 } else { z * libm::log(z) });
    }
    if z == 0.0 {
        if m > 1.0 {
            return Ok(0.0);
        }
        return Err(Error::Domain("f_m(0) is excluded for m < 1"));
    }
    Ok(libm::pow(z, m) / (m - 1.0))
}

/// Pressure `m/(m-1) z^{m-1}` or `log z`. This is `f_m'` up to the additive
/// constant 1 at `m = 1`, which no potential can see.
pub fn f_m_prime(z: f64, m: f64) -> Result<f64> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::Domain("f_m' needs a finite nonnegative argument"));
    }
    if z == 0.0 {
        if m > 1.0 {
            return Ok(0.0);
        }
        return Err(Error::Domain("pressure of a vanishing density for m <= 1"));
    }
    if m == 1.0 {
        Ok(libm::log(z))
    } else {
        Ok(m / (m - 1.0) * libm::pow(z, m - 1.0))
    }
}

/// Inverse of `f_m'` on its range.
pub fn f_m_prime_inv(p: f64, m: f64) -> f64 {
    if m == 1.0 {
        libm::exp(p)
    } else {
        let q = p * (m - 1.0) / m;
        if q <= 0.0 {
            0.0
        } else {
            libm::pow(q, 1.0 / (m - 1.0))
        }
    }
}

/// Constant in `f_m^*(s) = c_m |s|^{m/(m-1)}`, i.e. `(|m-1|/m)^{m/(m-1)}`.
pub fn conjugate_constant(m: f64) -> f64 {
    libm::pow((m - 1.0).abs() / m, m / (m - 1.0))
}

/// Convex conjugate `f_m^*(s) = sup_{z>=0} (z s - f_m(z))`.
/// Returns `+inf` for `m < 1, s >= 0`.
pub fn f_m_conjugate(s: f64, m: f64) -> f64 {
    if m == 1.0 {
        return libm::exp(s - 1.0);
    }
    let e = m / (m - 1.0);
    if m > 1.0 {
        if s <= 0.0 {
            0.0
        } else {
            conjugate_constant(m) * libm::pow(s, e)
        }
    } else if s >= 0.0 {
        f64::INFINITY
    } else {
        conjugate_constant(m) * libm::pow(-s, e)
    }
}

/// Per-cell `f_m'(rho)`.
pub fn pressure(rho: &GridDensity, params: &SchemeParams) -> Result<Vec<f64>> {
    rho.values.iter().map(|&v| f_m_prime(v, params.m)).collect()
}

/// Quadrature of `f_m(rho)` over the grid.
pub fn entropy(rho: &GridDensity, m: f64) -> Result<f64> {
    let mut s = 0.0;
    for &v in &rho.values {
        s += f_m(v, m)?;
    }
    Ok(s * rho.grid.cell_volume())
}

/// Builds `eta = M^{d/2} rho(sqrt(M) .)` on the correspondingly shrunk grid and
/// returns `(E_m[eta], predicted)`, where the prediction is
/// `M^{d(m-1)/2} E_m[rho]` for `m != 1` and `E_1[rho] + (d/2) log M` for `m = 1`.
///
/// `limit` is the truncation radius of the ambient box; the rescaled grid
/// must stay inside it.
pub fn entropy_scaling_check(rho: &GridDensity, big_m: f64, m: f64, limit: Option<f64>) -> Result<(f64, f64)> {
    if !(big_m > 0.0) {
        return Err(Error::Invalid("scaling factor must be positive"));
    }
    let d = rho.grid.dim();
    let s = 1.0 / libm::sqrt(big_m);
    let domain = rho.grid.domain.scaled(s);
    if let Some(r) = limit {
        for a in 0..d {
            if domain.lo[a] < -r || domain.hi[a] > r {
                return Err(Error::Invalid("rescaled support leaves the truncation box"));
            }
        }
    }
    let n: Vec<usize> = rho.grid.n[..d].to_vec();
    let grid = build_grid(domain, &n)?;
    let amp = libm::pow(big_m, d as f64 / 2.0);
    let values: Vec<f64> = rho.values.iter().map(|v| v * amp).collect();
    let eta = GridDensity { grid, values };
    let lhs = entropy(&eta, m)?;
    let e = entropy(rho, m)?;
    let rhs = if m == 1.0 {
        e + 0.5 * d as f64 * libm::log(big_m)
    } else {
        e * libm::pow(big_m, d as f64 * (m - 1.0) / 2.0)
    };
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    GaussianHeat,
    BarenblattPme,
    BarenblattFde,
}

/// Self-similar solution of `∂t ρ = Δρ^m` started from a unit Dirac mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactProfile {
    pub kind: ProfileKind,
    pub m: f64,
    pub d: usize,
    pub center: [f64; 2],
    /// Normalisation constant `A` of the Barenblatt profile (unused for the Gaussian).
    pub a: f64,
}

/// `α_{d,m} = d/(d(m-1)+2)`.
pub fn ab_constant(d: usize, m: f64) -> f64 {
    d as f64 / (d as f64 * (m - 1.0) + 2.0)
}

impl ExactProfile {
    pub fn new(kind: ProfileKind, m: f64, d: usize, center: [f64; 2]) -> Result<Self> {
        if !(d == 1 || d == 2) {
            return Err(Error::Invalid("dimension must be 1 or 2"));
        }
        let ok = match kind {
            ProfileKind::GaussianHeat => m == 1.0,
            ProfileKind::BarenblattPme => m > 1.0,
            ProfileKind::BarenblattFde => m < 1.0 && m > 0.0 && m > m_c1(d),
        };
        if !ok || !m.is_finite() {
            return Err(Error::Regime { m, d });
        }
        let mut p = Self { kind, m, d, center, a: 1.0 };
        if kind != ProfileKind::GaussianHeat {
            p.a = p.solve_a()?;
        }
        Ok(p)
    }

    /// Self-similarity exponent `β = 1/(d(m-1)+2)`.
    pub fn beta(&self) -> f64 {
        1.0 / (self.d as f64 * (self.m - 1.0) + 2.0)
    }

    fn kappa(&self) -> f64 {
        self.beta() * (self.m - 1.0).abs() / (2.0 * self.m)
    }

    /// Profile at `t = 1` as a function of `|ξ|²`.
    fn shape(&self, r2: f64, a: f64) -> f64 {
        let k = self.kappa();
        match self.kind {
            ProfileKind::GaussianHeat => libm::exp(-r2 / 4.0) / libm::pow(4.0 * core::f64::consts::PI, self.d as f64 / 2.0),
            ProfileKind::BarenblattPme => {
                let b = a - k * r2;
                if b <= 0.0 {
                    0.0
                } else {
                    libm::pow(b, 1.0 / (self.m - 1.0))
                }
            }
            ProfileKind::BarenblattFde => libm::pow(a + k * r2, 1.0 / (self.m - 1.0)),
        }
    }

    /// Mass of the `t = 1` profile for constant `a`, by radial quadrature.
    fn profile_mass(&self, a: f64) -> f64 {
        let k = self.kappa();
        let q = 1.0 / (self.m - 1.0);
        let d = self.d;
        let two_pi = 2.0 * core::f64::consts::PI;
        match self.kind {
            ProfileKind::GaussianHeat => 1.0,
            ProfileKind::BarenblattPme => {
                // ξ = R sin θ
                let r = libm::sqrt(a / k);
                let g = |th: f64| {
                    let c = libm::cos(th);
                    let base = libm::pow((a * c * c).max(0.0), q) * r * c;
                    if d == 1 {
                        2.0 * base
                    } else {
                        two_pi * base * r * libm::sin(th)
                    }
                };
                tanh_sinh(g, 0.0, core::f64::consts::FRAC_PI_2)
            }
            ProfileKind::BarenblattFde => {
                // ξ = sqrt(a/k) tan θ
                let s = libm::sqrt(a / k);
                let g = |th: f64| {
                    let c = libm::cos(th);
                    if c <= 0.0 {
                        return 0.0;
                    }
                    let f = libm::pow(a, q) * libm::pow(c, -2.0 * q);
                    let jac = s / (c * c);
                    if d == 1 {
                        2.0 * f * jac
                    } else {
                        two_pi * f * jac * s * libm::tan(th)
                    }
                };
                tanh_sinh(g, 0.0, core::f64::consts::FRAC_PI_2)
            }
        }
    }

    /// Bisection on `log A` for unit mass.
    fn solve_a(&self) -> Result<f64> {
        let increasing = self.kind == ProfileKind::BarenblattPme;
        let (mut lo, mut hi) = (-40.0f64, 40.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let mass = self.profile_mass(libm::exp(mid));
            if (mass > 1.0) == increasing {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let a = libm::exp(0.5 * (lo + hi));
        let mass = self.profile_mass(a);
        if !((mass - 1.0).abs() < 1e-10) {
            return Err(Error::NoConvergence { what: "profile normalisation", iterations: 200, residual: mass - 1.0 });
        }
        Ok(a)
    }

    /// Density at point `x` and time `t > 0`.
    pub fn density(&self, x: [f64; 2], t: f64) -> f64 {
        let mut r2 = 0.0;
        for a in 0..self.d {
            let dx = x[a] - self.center[a];
            r2 += dx * dx;
        }
        match self.kind {
            ProfileKind::GaussianHeat => {
                libm::exp(-r2 / (4.0 * t)) / libm::pow(4.0 * core::f64::consts::PI * t, self.d as f64 / 2.0)
            }
            _ => {
                let b = self.beta();
                let s = libm::pow(t, -b);
                libm::pow(t, -(self.d as f64) * b) * self.shape(r2 * s * s, self.a)
            }
        }
    }

    /// Radius of the support at time `t` (infinite unless compactly supported).
    pub fn support_radius(&self, t: f64) -> f64 {
        match self.kind {
            ProfileKind::BarenblattPme => libm::sqrt(self.a / self.kappa()) * libm::pow(t, self.beta()),
            _ => f64::INFINITY,
        }
    }

    /// Exact `Δ f_m'(ρ)` inside the support: `-α_{d,m}/t`.
    pub fn pressure_laplacian(&self, t: f64) -> f64 {
        -ab_constant(self.d, self.m) / t
    }

    /// Largest density value, attained at the centre.
    pub fn sup(&self, t: f64) -> f64 {
        self.density(self.center, t)
    }
}

/// Samples the profile at cell centres and normalises the result on the grid.
pub fn exact_profile(profile: &ExactProfile, grid: &Grid, t: f64) -> Result<GridDensity> {
    if !(t > 0.0) {
        return Err(Error::Invalid("profile time must be positive"));
    }
    if grid.dim() != profile.d {
        return Err(Error::Mismatch("profile and grid dimensions differ"));
    }
    let mut rho = GridDensity::from_fn(grid.clone(), |x| profile.density(x, t))?;
    if profile.m <= 1.0 {
        rho.apply_floor();
    }
    Ok(rho)
}

/// Double-exponential quadrature on `[a, b]`; tolerant of endpoint singularities.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let h = 1.0 / 64.0;
    let pi2 = core::f64::consts::FRAC_PI_2;
    let mut sum = 0.0;
    let kmax = (6.0 / h) as i64;
    for k in -kmax..=kmax {
        let t = k as f64 * h;
        let u = pi2 * libm::sinh(t);
        let ch = libm::cosh(u);
        let x = libm::tanh(u);
        let w = pi2 * libm::cosh(t) / (ch * ch);
        // distance to the nearer endpoint, computed without cancellation
        let e = 1.0 / (libm::exp(2.0 * u.abs()) + 1.0) * 2.0;
        let xx = if x >= 0.0 { b - half * e } else { a + half * e };
        if w < 1e-300 || xx <= a || xx >= b {
            continue;
        }
        let fx = f(xx);
        if fx.is_finite() {
            sum += w * fx;
        }
    }
    sum * half * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;

    #[test]
    fn f_m_values() {
        assert_eq!(f_m(3.0, 2.0).unwrap(), 9.0);
        assert_eq!(f_m(1.0, 1.0).unwrap(), 0.0);
        assert!((f_m(4.0, 0.5).unwrap() + 4.0).abs() < 1e-15);
        assert_eq!(f_m(0.0, 2.0).unwrap(), 0.0);
        assert_eq!(f_m(0.0, 1.0).unwrap(), 0.0);
        assert!(f_m(0.0, 0.5).is_err());
        assert!(f_m(-1.0, 2.0).is_err());
    }

    #[test]
    fn pressure_values() {
        let g = build_grid(Domain::interval(0.0, 1.0), &[8]).unwrap();
        let rho = GridDensity::uniform(g.clone());
        let p2 = pressure(&rho, &SchemeParams::new(2.0, 0.1, 1)).unwrap();
        assert!(p2.iter().all(|p| (p - 2.0).abs() < 1e-15));
        let p1 = pressure(&rho, &SchemeParams::new(1.0, 0.1, 1)).unwrap();
        assert!(p1.iter().all(|p| p.abs() < 1e-15));
        assert!((f_m_prime(4.0, 0.5).unwrap() + 0.5).abs() < 1e-15);
        let mut zero = rho.clone();
        zero.values[0] = 0.0;
        assert!(pressure(&zero, &SchemeParams::new(1.0, 0.1, 1)).is_err());
    }

    #[test]
    fn conjugate_at_one() {
        assert!((f_m_conjugate(1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((conjugate_constant(2.0) - 0.25).abs() < 1e-15);
        assert_eq!(f_m_conjugate(0.5, 0.5), f64::INFINITY);
    }

    /// Brute-force `sup_z (z s - f_m(z))` by golden section on `log z`.
    fn numeric_conjugate(s: f64, m: f64) -> f64 {
        let g = |lz: f64| {
            let z = libm::exp(lz);
            z * s - f_m(z, m).unwrap()
        };
        let (mut a, mut b) = (-40.0, 40.0);
        let r = 0.5 * (libm::sqrt(5.0) - 1.0);
        for _ in 0..300 {
            let c = b - r * (b - a);
            let d = a + r * (b - a);
            if g(c) > g(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let best = g(0.5 * (a + b));
        // boundary z = 0 for m > 1
        if m > 1.0 {
            best.max(0.0)
        } else {
            best
        }
    }

    #[test]
    fn conjugate_matches_direct_maximisation() {
        for &m in &[0.3, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0] {
            for &s in &[-2.0, -1.0, -0.3, 0.4, 1.0, 2.5] {
                if m < 1.0 && s >= 0.0 {
                    continue;
                }
                let a = f_m_conjugate(s, m);
                let b = numeric_conjugate(s, m);
                assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "m={m} s={s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn summed_constant_fails_fenchel_equality() {
        // |m-1|^{1/(m-1)} (m^{1/(1-m)} + m^{m/(1-m)}) gives 3/4 at m = 2,
        // while the conjugate of z^2 is s^2/4.
        let m: f64 = 2.0;
        let summed = libm::pow((m - 1.0).abs(), 1.0 / (m - 1.0))
            * (libm::pow(m, 1.0 / (1.0 - m)) + libm::pow(m, m / (1.0 - m)));
        assert!((summed - 0.75).abs() < 1e-15);
        let z = 1.3;
        let s = f_m_prime(z, m).unwrap();
        let eq = f_m(z, m).unwrap() + summed * s * s - z * s;
        assert!(eq > 0.1);
        let eq_ok = f_m(z, m).unwrap() + f_m_conjugate(s, m) - z * s;
        assert!(eq_ok.abs() < 1e-12);
    }

    #[test]
    fn fenchel_young_scan() {
        for &m in &[0.5, 0.7, 1.0, 1.5, 2.0, 3.0] {
            for i in 1..40 {
                let z = 0.05 * i as f64;
                for j in -40..40 {
                    let s = 0.1 * j as f64;
                    let fs = f_m_conjugate(s, m);
                    if fs.is_infinite() {
                        continue;
                    }
                    assert!(f_m(z, m).unwrap() + fs - z * s >= -1e-12);
                }
                // the pressure drops the additive 1 of d/dz (z log z)
                let s = f_m_prime(z, m).unwrap() + if m == 1.0 { 1.0 } else { 0.0 };
                let gap = f_m(z, m).unwrap() + f_m_conjugate(s, m) - z * s;
                assert!(gap.abs() <= 1e-10 * (1.0 + (z * s).abs()), "m={m} z={z} gap={gap}");
            }
        }
    }

    #[test]
    fn pressure_is_derivative() {
        for &m in &[0.5, 1.0, 2.0, 3.5] {
            for &z in &[0.1, 0.7, 2.0, 9.0] {
                let e = 1e-5 * z;
                let num = (f_m(z + e, m).unwrap() - f_m(z - e, m).unwrap()) / (2.0 * e);
                let p = f_m_prime(z, m).unwrap();
                let shift = if m == 1.0 { 1.0 } else { 0.0 };
                assert!((num - p - shift).abs() <= 1e-6 * p.abs().max(1e-3));
                assert!((f_m_prime_inv(p, m) - z).abs() < 1e-12 * z.max(1.0));
            }
        }
    }

    #[test]
    fn entropy_of_uniforms() {
        let g = build_grid(Domain::interval(0.0, 1.0), &[16]).unwrap();
        let u = GridDensity::uniform(g);
        assert!(entropy(&u, 1.0).unwrap().abs() < 1e-15);
        assert!((entropy(&u, 2.0).unwrap() - 1.0).abs() < 1e-14);
        let g2 = build_grid(Domain::interval(0.0, 2.0), &[16]).unwrap();
        let u2 = GridDensity::uniform(g2);
        assert!((entropy(&u2, 1.0).unwrap() + libm::log(2.0)).abs() < 1e-14);
    }

    #[test]
    fn gaussian_entropy_closed_form() {
        let g = build_grid(Domain::truncated_line(12.0), &[4096]).unwrap();
        let p = ExactProfile::new(ProfileKind::GaussianHeat, 1.0, 1, [0.0, 0.0]).unwrap();
        let rho = exact_profile(&p, &g, 0.5).unwrap();
        let sigma: f64 = 1.0;
        let exact = -libm::log(sigma * libm::sqrt(2.0 * core::f64::consts::PI * core::f64::consts::E));
        assert!((entropy(&rho, 1.0).unwrap() - exact).abs() < 1e-6);
        let (mean, std) = rho.mean_std();
        assert!(mean.abs() < 1e-12 && (std - 1.0).abs() < 1e-5);
    }

    #[test]
    fn scaling_identity_trivial_and_gaussian() {
        let g = build_grid(Domain::truncated_line(10.0), &[512]).unwrap();
        let p = ExactProfile::new(ProfileKind::GaussianHeat, 1.0, 1, [0.0, 0.0]).unwrap();
        let rho = exact_profile(&p, &g, 0.5).unwrap();
        let (l, r) = entropy_scaling_check(&rho, 1.0, 1.0, None).unwrap();
        assert_eq!(l, r);
        let (l, r) = entropy_scaling_check(&rho, 4.0, 1.0, None).unwrap();
        assert!((r - (entropy(&rho, 1.0).unwrap() + 0.5 * libm::log(4.0))).abs() < 1e-15);
        assert!((l - r).abs() < 1e-12);
        let gu = build_grid(Domain::interval(0.0, 1.0), &[64]).unwrap();
        let (l, r) = entropy_scaling_check(&GridDensity::uniform(gu), 4.0, 2.0, None).unwrap();
        assert!((l - r).abs() < 1e-8);
        assert!(entropy_scaling_check(&rho, 0.25, 1.0, Some(12.0)).is_err());
    }

    #[test]
    fn barenblatt_pme_support_and_mass() {
        let p = ExactProfile::new(ProfileKind::BarenblattPme, 2.0, 1, [0.0, 0.0]).unwrap();
        // (4/3) A sqrt(12 A) = 1 in closed form
        let a_exact = libm::pow(3.0 / (4.0 * libm::sqrt(12.0)), 2.0 / 3.0);
        assert!((p.a - a_exact).abs() < 1e-10);
        assert!((p.support_radius(1.0) - libm::sqrt(12.0 * a_exact)).abs() < 1e-9);
        let g = build_grid(Domain::truncated_line(4.0), &[2048]).unwrap();
        let raw: f64 = (0..g.len()).map(|i| p.density(g.center(i), 1.0)).sum::<f64>() * g.cell_volume();
        assert!((raw - 1.0).abs() < 1e-5);
    }

    #[test]
    fn barenblatt_masses_by_quadrature() {
        for (kind, m, d) in [
            (ProfileKind::BarenblattPme, 1.5, 2),
            (ProfileKind::BarenblattPme, 3.0, 1),
            (ProfileKind::BarenblattFde, 0.7, 1),
            (ProfileKind::BarenblattFde, 0.6, 2),
        ] {
            let p = ExactProfile::new(kind, m, d, [0.0, 0.0]).unwrap();
            let r = if kind == ProfileKind::BarenblattPme { 4.0 } else { 400.0 };
            let n = if d == 1 { 200_000 } else { 800 };
            let g = if d == 1 {
                build_grid(Domain::truncated_line(r), &[n]).unwrap()
            } else {
                build_grid(Domain::truncated_plane(r.min(60.0)), &[n, n]).unwrap()
            };
            let raw: f64 = (0..g.len()).map(|i| p.density(g.center(i), 1.0)).sum::<f64>() * g.cell_volume();
            let tol = if kind == ProfileKind::BarenblattFde && d == 2 { 2e-2 } else { 2e-3 };
            assert!((raw - 1.0).abs() < tol, "{kind:?} m={m} d={d}: {raw}");
        }
    }

    #[test]
    fn regime_gate() {
        assert!(SchemeParams::new(0.0, 0.1, 2).validate(DomainKind::Torus2).is_err());
        assert!(SchemeParams::new(0.2, 0.1, 2).validate(DomainKind::Torus2).is_ok());
        assert!(SchemeParams::new(0.4, 0.1, 2).validate(DomainKind::TruncatedPlane).is_err());
        assert!(SchemeParams::new(0.4, 0.1, 1).validate(DomainKind::TruncatedLine).is_ok());
        assert!(SchemeParams::new(1.0, 0.0, 1).validate(DomainKind::Interval).is_err());
        assert!(ExactProfile::new(ProfileKind::GaussianHeat, 2.0, 1, [0.0; 2]).is_err());
        assert!(ExactProfile::new(ProfileKind::BarenblattFde, 0.2, 2, [0.0; 2]).is_ok());
    }

    #[test]
    fn ab_constants() {
        assert!((ab_constant(1, 2.0) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(ab_constant(2, 1.0), 1.0);
        assert_eq!(ab_constant(1, 1.0), 0.5);
    }
}
