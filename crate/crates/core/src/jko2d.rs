//! Minimizing-movement steps in 2D with the debiased entropic divergence in
//! place of `W_2^2`.
//!
//! One step minimizes `E_m[η] + S_ε(η, μ)/τ` (cost `d^2/2`, so `S_ε/τ`
//! approximates `W_2^2/2τ`) over densities of unit mass. The gradient is
//! `f_m'(η) + (α - p)/τ` with `α` the cross potential and `p` the symmetric
//! potential of `η`. Steps follow the gradient through a spectral
//! preconditioner that inverts the model Hessian
//! `f_m''(η̄) + (τ μ̄ (-Δ))^{-1}` mode by mode; the constant mode is dropped,
//! so every trial point keeps its mass.

use alloc::vec::Vec;

use crate::ab::{PotentialSample, Samples};
use crate::entropy::{entropy, f_m, f_m_prime, GridDensity, SchemeParams};
use crate::error::{Error, Result};
use crate::fourier::GridBasis;
use crate::grid::{DomainKind, Grid};
use crate::monge_ampere::{interior_window, periodic_extension, Lattice};
use crate::sinkhorn::{barycentric_map, sinkhorn_symmetric, sinkhorn_with, BarycentricMap, SeparableKernel, SinkhornOptions};

/// Default cap on the number of cells.
pub const MAX_CELLS: usize = 96 * 96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options2D {
    pub eps: f64,
    /// Stopping level for `τ` times the mass-weighted spread of the gradient.
    pub tol: f64,
    /// L¹ marginal tolerance of the inner solves.
    pub sinkhorn_tol: f64,
    pub max_iter: usize,
    pub max_cells: usize,
}

impl Options2D {
    pub fn new(eps: f64, tol: f64) -> Self {
        Self { eps, tol, sinkhorn_tol: 1e-10, max_iter: 200, max_cells: MAX_CELLS }
    }
}

#[derive(Debug, Clone)]
pub struct JkoStep2D {
    pub rho_next: GridDensity,
    pub map: BarycentricMap,
    /// `α - p`, shifted so that `τ f_m'(ρ) + ψ` has zero mass-weighted mean.
    pub psi: Vec<f64>,
    /// `τ f_m'(ρ) + |x|^2/2` at cell centres.
    pub u: Vec<f64>,
    pub objective: f64,
    /// Debiased divergence between the minimizer and the previous density.
    pub divergence: f64,
    pub iterations: usize,
    pub stationarity: f64,
    /// Mass-weighted spread of `τ f_m'(ρ) + ψ`.
    pub residual: f64,
    pub eps: f64,
    pub sinkhorn_iterations: usize,
}

fn entropy_derivatives(eta: &[f64], m: f64) -> (Vec<f64>, Vec<f64>) {
    let d1 = eta
        .iter()
        .map(|z| if m == 1.0 { libm::log(*z) + 1.0 } else { m * libm::pow(*z, m - 1.0) / (m - 1.0) })
        .collect();
    let d2 = eta.iter().map(|z| if m == 1.0 { 1.0 / z } else { m * libm::pow(*z, m - 2.0) }).collect();
    (d1, d2)
}

fn weighted_mean_sd(v: &[f64], w: &[f64]) -> (f64, f64) {
    let tw: f64 = w.iter().sum();
    let mean = v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / tw;
    let var = v.iter().zip(w).map(|(a, b)| b * (a - mean) * (a - mean)).sum::<f64>() / tw;
    (mean, libm::sqrt(var.max(0.0)))
}

struct State {
    eta: Vec<f64>,
    j: f64,
    grad: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    p: Vec<f64>,
    div: f64,
    sk_iter: usize,
}

struct Problem<'a> {
    grid: &'a Grid,
    mu: &'a GridDensity,
    kern: SeparableKernel,
    v_mu: f64,
    m: f64,
    tau: f64,
    sk_tol: f64,
}

impl Problem<'_> {
    fn eval(&self, eta: Vec<f64>, warm: Option<&State>) -> Result<State> {
        let h = self.grid.cell_volume();
        let dens = GridDensity { grid: self.grid.clone(), values: eta };
        let opts = SinkhornOptions { tol: self.sk_tol, max_iter: crate::sinkhorn::DEFAULT_MAX_ITER, warm: warm.map(|s| (s.alpha.clone(), s.beta.clone())) };
        let plan = sinkhorn_with(&self.kern, &dens, self.mu, &opts)?;
        let (p, v_eta) = sinkhorn_symmetric(&self.kern, &dens, self.sk_tol, warm.map(|s| s.p.as_slice()))?;
        let div = plan.value - 0.5 * v_eta - 0.5 * self.v_mu;
        let eta = dens.values;
        let mut e = 0.0;
        for z in &eta {
            e += h * f_m(*z, self.m)?;
        }
        let (d1, _) = entropy_derivatives(&eta, self.m);
        let grad = d1.iter().zip(plan.alpha.iter().zip(&p)).map(|(g, (a, q))| g + (a - q) / self.tau).collect();
        Ok(State { eta, j: e + div / self.tau, grad, alpha: plan.alpha, beta: plan.beta, p, div, sk_iter: plan.iterations })
    }
}

/// One step from `mu`.
pub fn jko_step_2d(mu: &GridDensity, params: &SchemeParams, eps: f64, tol: f64) -> Result<JkoStep2D> {
    jko_step_2d_with(mu, params, &Options2D::new(eps, tol))
}

pub fn jko_step_2d_with(mu: &GridDensity, params: &SchemeParams, opts: &Options2D) -> Result<JkoStep2D> {
    let grid = &mu.grid;
    if grid.dim() != 2 || params.d != 2 {
        return Err(Error::Invalid("2D steps need a 2D grid and d = 2"));
    }
    params.validate(grid.domain.kind)?;
    if grid.len() > opts.max_cells {
        return Err(Error::TooLarge { what: "cells", limit: opts.max_cells });
    }
    if mu.values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Invalid("2D steps need a strictly positive density"));
    }
    let (m, tau) = (params.m, params.tau);
    let h = grid.cell_volume();
    let kern = SeparableKernel::new(grid, opts.eps)?;
    let (p_mu, v_mu) = sinkhorn_symmetric(&kern, mu, opts.sinkhorn_tol, None)?;
    let prob = Problem { grid, mu, kern, v_mu, m, tau, sk_tol: opts.sinkhorn_tol };
    let basis = GridBasis::new(grid);
    let mu_bar = mu.values.iter().sum::<f64>() / mu.values.len() as f64;

    // start at μ with the symmetric potential of μ as the warm start
    let seed = State {
        eta: Vec::new(),
        j: 0.0,
        grad: Vec::new(),
        alpha: p_mu.clone(),
        beta: p_mu.clone(),
        p: p_mu,
        div: 0.0,
        sk_iter: 0,
    };
    let mut st = prob.eval(mu.values.clone(), Some(&seed))?;
    let mut sk_total = st.sk_iter;
    let mut iterations = 0;
    let mut stat;
    loop {
        let w: Vec<f64> = st.eta.iter().map(|z| z * h).collect();
        let (gbar, sd) = weighted_mean_sd(&st.grad, &w);
        stat = tau * sd;
        if stat <= opts.tol || iterations >= opts.max_iter {
            break;
        }
        iterations += 1;
        let (_, d2) = entropy_derivatives(&st.eta, m);
        let (c, _) = weighted_mean_sd(&d2, &w);
        let centred: Vec<f64> = st.grad.iter().map(|g| g - gbar).collect();
        let dir: Vec<f64> = basis
            .apply_symbol(&centred, |lap, _| if lap <= 0.0 { 0.0 } else { -tau * mu_bar * lap / (1.0 + c * tau * mu_bar * lap) });
        let slope: f64 = dir.iter().zip(&st.grad).map(|(d, g)| d * g).sum::<f64>() * h;
        if !(slope < 0.0) {
            break;
        }
        let mut t = 1.0f64;
        for (z, d) in st.eta.iter().zip(&dir) {
            if *d < 0.0 {
                t = t.min(0.9 * z / -d);
            }
        }
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = st.eta.iter().zip(&dir).map(|(z, d)| z + t * d).collect();
            let cand = prob.eval(trial, Some(&st))?;
            sk_total += cand.sk_iter;
            let allowance = 1e-13 * st.j.abs().max(1.0);
            if cand.j <= st.j + 1e-4 * t * slope + allowance {
                st = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if stat > opts.tol && iterations >= opts.max_iter {
        return Err(Error::NoConvergence { what: "2D step", iterations, residual: stat });
    }
    // renormalise the tiny drift of the mass from rounding
    let rho_next = GridDensity::normalized(grid.clone(), st.eta.clone())?;
    let dens = GridDensity { grid: grid.clone(), values: st.eta.clone() };
    let plan = sinkhorn_with(&prob.kern, &dens, mu, &SinkhornOptions { tol: opts.sinkhorn_tol, max_iter: crate::sinkhorn::DEFAULT_MAX_ITER, warm: Some((st.alpha.clone(), st.beta.clone())) })?;
    let map = barycentric_map(&prob.kern, &plan, &dens, mu);
    let w: Vec<f64> = st.eta.iter().map(|z| z * h).collect();
    let tp: Vec<f64> = st.eta.iter().map(|z| f_m_prime(*z, m).map(|v| tau * v)).collect::<Result<_>>()?;
    let raw_psi: Vec<f64> = st.alpha.iter().zip(&st.p).map(|(a, q)| a - q).collect();
    let r: Vec<f64> = tp.iter().zip(&raw_psi).map(|(a, b)| a + b).collect();
    let (shift, residual) = weighted_mean_sd(&r, &w);
    let psi: Vec<f64> = raw_psi.iter().map(|v| v - shift).collect();
    let u: Vec<f64> = (0..grid.len())
        .map(|i| {
            let x = grid.center(i);
            tp[i] + 0.5 * (x[0] * x[0] + x[1] * x[1])
        })
        .collect();
    Ok(JkoStep2D {
        rho_next,
        map,
        psi,
        u,
        objective: st.j,
        divergence: st.div,
        iterations,
        stationarity: stat,
        residual,
        eps: opts.eps,
        sinkhorn_iterations: sk_total,
    })
}

/// Per-step record of a 2D run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics2D {
    pub entropy: f64,
    /// `sqrt(2 S_ε)`, the entropic stand-in for the `W_2` step length.
    pub w2_step: f64,
    pub residual: f64,
    pub min_density: f64,
    pub max_density: f64,
    pub iterations: usize,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryStep2D {
    pub k: usize,
    pub t: f64,
    pub density: GridDensity,
    pub diagnostics: StepDiagnostics2D,
    pub step: Option<JkoStep2D>,
}

#[derive(Debug, Clone)]
pub struct Trajectory2D {
    pub params: SchemeParams,
    pub eps: f64,
    pub steps: Vec<TrajectoryStep2D>,
}

impl Trajectory2D {
    pub fn final_density(&self) -> &GridDensity {
        &self.steps[self.steps.len() - 1].density
    }
}

pub fn run_scheme_2d(rho0: &GridDensity, params: &SchemeParams, k_steps: usize, opts: &Options2D, t0: f64) -> Result<Trajectory2D> {
    if k_steps == 0 {
        return Err(Error::Invalid("at least one step is required"));
    }
    params.validate(rho0.grid.domain.kind)?;
    let e0 = entropy(rho0, params.m)?;
    let mut steps = Vec::with_capacity(k_steps + 1);
    steps.push(TrajectoryStep2D {
        k: 0,
        t: t0,
        density: rho0.clone(),
        diagnostics: StepDiagnostics2D {
            entropy: e0,
            w2_step: 0.0,
            residual: 0.0,
            min_density: rho0.min(),
            max_density: rho0.max(),
            iterations: 0,
            objective: e0,
        },
        step: None,
    });
    let mut cur = rho0.clone();
    for k in 1..=k_steps {
        let res = jko_step_2d_with(&cur, params, opts)?;
        let drift = (res.rho_next.mass() - 1.0).abs();
        if drift > 1e-6 {
            return Err(Error::MassDrift(drift));
        }
        let next = res.rho_next.clone();
        let diagnostics = StepDiagnostics2D {
            entropy: entropy(&next, params.m)?,
            w2_step: libm::sqrt(2.0 * res.divergence.max(0.0)),
            residual: res.residual,
            min_density: next.min(),
            max_density: next.max(),
            iterations: res.iterations,
            objective: res.objective,
        };
        steps.push(TrajectoryStep2D { k, t: t0 + k as f64 * params.tau, density: next.clone(), diagnostics, step: Some(res) });
        cur = next;
    }
    Ok(Trajectory2D { params: *params, eps: opts.eps, steps })
}

/// Pressure samples for the trajectory checks: on the torus the pressure is
/// extended periodically to a one-cell halo, on boxes the boundary ring is
/// left out of the window.
pub fn samples_2d(traj: &Trajectory2D) -> Result<Vec<PotentialSample>> {
    let m = traj.params.m;
    let mut out = Vec::with_capacity(traj.steps.len());
    for st in traj.steps.iter().skip(1) {
        let g = &st.density.grid;
        let p: Vec<f64> = st.density.values.iter().map(|z| f_m_prime(*z, m)).collect::<Result<_>>()?;
        let (lattice, pressure) = if g.domain.periodic[0] && g.domain.periodic[1] {
            let (l, v, _) = periodic_extension(g, &p)?;
            (l, v)
        } else {
            (Lattice::of_grid(g), p)
        };
        let window = interior_window(&lattice, 1);
        out.push(PotentialSample { k: st.k, t: st.t, samples: Samples::Plane { lattice, pressure, window }, linf: st.density.max() });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCheck {
    /// `max |T(x_c) - c|` over the four corners `c`, with `x_c` the corner cell.
    pub corner_err: f64,
    /// `max |(T(x) - x)·n|` over boundary cells and their outward normals.
    pub face_err: f64,
}

pub fn boundary_behavior_check(map: &BarycentricMap, grid: &Grid) -> Result<BoundaryCheck> {
    if grid.domain.kind != DomainKind::Square {
        return Err(Error::Invalid("boundary check needs the unit square"));
    }
    let (n0, n1) = (grid.n[0], grid.n[1]);
    let (lo, hi) = (grid.domain.lo, grid.domain.hi);
    let corners = [(0, 0, [lo[0], lo[1]]), (n0 - 1, 0, [hi[0], lo[1]]), (0, n1 - 1, [lo[0], hi[1]]), (n0 - 1, n1 - 1, [hi[0], hi[1]])];
    let mut corner_err: f64 = 0.0;
    for (i, j, c) in corners {
        let t = map.image[grid.index(i, j)];
        corner_err = corner_err.max(libm::sqrt((t[0] - c[0]) * (t[0] - c[0]) + (t[1] - c[1]) * (t[1] - c[1])));
    }
    let mut face_err: f64 = 0.0;
    for j in 0..n1 {
        for i in 0..n0 {
            let idx = grid.index(i, j);
            let d = map.displacement(idx);
            if i == 0 || i == n0 - 1 {
                face_err = face_err.max(d[0].abs());
            }
            if j == 0 || j == n1 - 1 {
                face_err = face_err.max(d[1].abs());
            }
        }
    }
    Ok(BoundaryCheck { corner_err, face_err })
}

/// Whether the 2D solver handles the domain.
pub fn supports(kind: DomainKind) -> bool {
    matches!(kind, DomainKind::Torus2 | DomainKind::Square | DomainKind::Box2 | DomainKind::TruncatedPlane | DomainKind::TruncatedQuarterPlane)
}
