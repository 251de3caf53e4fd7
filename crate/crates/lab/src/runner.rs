//! Executes a [`RunConfig`]: trajectory, checks and artifacts.

use std::path::Path;

use jkolab_core::ab::{ab_check_samples, linfty_bound_check_densities, samples_1d, ABReport, AbOptions, Ball, PotentialSample};
use jkolab_core::entropy::{GridDensity, SchemeParams};
use jkolab_core::jko1d::{run_scheme, Method, SolverOptions};
use jkolab_core::jko2d::{run_scheme_2d, samples_2d, Options2D, MAX_CELLS};

use crate::config::{ConfigError, RunConfig};
use crate::datum::initial_density;
use crate::output::{write_ab_report, write_field, write_rows, CheckResult, Summary, TrajectoryRow};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write outputs: {0}")]
    Io(#[from] std::io::Error),
}

/// What a finished trajectory leaves behind for the checks.
struct Computed {
    rows: Vec<TrajectoryRow>,
    densities: Vec<(usize, f64, GridDensity)>,
    samples: Vec<PotentialSample>,
    params: SchemeParams,
}

fn compute(cfg: &RunConfig, rho0: &GridDensity) -> jkolab_core::Result<Computed> {
    let params = cfg.params();
    let s = &cfg.scheme;
    if cfg.dim() == 1 {
        let opts = SolverOptions { tol: cfg.tol(), max_iter: s.max_iter, refine: s.refine, method: Method::Newton };
        let traj = run_scheme(rho0, &params, s.steps, &opts, s.t0)?;
        let samples = if cfg.checks.ab { samples_1d(&traj)? } else { Vec::new() };
        let rows = traj
            .steps
            .iter()
            .map(|st| {
                let d = &st.diagnostics;
                TrajectoryRow {
                    k: st.k,
                    t: st.t,
                    entropy: d.entropy,
                    w2_step: d.w2_step,
                    residual: d.residual,
                    min_rho: d.min_density,
                    max_rho: d.max_density,
                    iterations: d.iterations,
                    objective: d.objective,
                }
            })
            .collect();
        let densities = traj.steps.into_iter().map(|st| (st.k, st.t, st.density)).collect();
        Ok(Computed { rows, densities, samples, params })
    } else {
        let eps = s.eps.expect("validated: 2D runs carry eps");
        let opts = Options2D { eps, tol: cfg.tol(), sinkhorn_tol: s.sinkhorn_tol, max_iter: s.max_iter, max_cells: MAX_CELLS };
        let traj = run_scheme_2d(rho0, &params, s.steps, &opts, s.t0)?;
        let samples = if cfg.checks.ab { samples_2d(&traj)? } else { Vec::new() };
        let rows = traj
            .steps
            .iter()
            .map(|st| {
                let d = &st.diagnostics;
                TrajectoryRow {
                    k: st.k,
                    t: st.t,
                    entropy: d.entropy,
                    w2_step: d.w2_step,
                    residual: d.residual,
                    min_rho: d.min_density,
                    max_rho: d.max_density,
                    iterations: d.iterations,
                    objective: d.objective,
                }
            })
            .collect();
        let densities = traj.steps.into_iter().map(|st| (st.k, st.t, st.density)).collect();
        Ok(Computed { rows, densities, samples, params })
    }
}

/// Summary entries for an AB report.
pub fn ab_checks(report: &ABReport) -> Vec<CheckResult> {
    let max_slack = report.rows.iter().map(|r| r.slack).fold(0.0, f64::max);
    let ma_ok = report.rows.iter().all(|r| r.ma_ok);
    let ratio = report.worst_ma_ratio();
    let ma = CheckResult::new("ab.monge_ampere_lower_bound", ma_ok, ratio - 1.0, format!("min over k of (det)^(1/d)/(1-X_k) = {ratio:.6}"))
        .with_slack(max_slack);
    let weak_ok = report.rows.iter().all(|r| r.lap_u_ok && r.lap_p_ok);
    let weak = report.rows.iter().map(|r| r.lap_u_margin).fold(f64::INFINITY, f64::min);
    let weak = CheckResult::new("ab.weak_laplacian", weak_ok, weak, "min over k of the weak margin of Δu - d(1-X_k)");
    let item3_ok = report.rows.iter().all(|r| r.item3_ok);
    let w3 = report.worst_item3_margin();
    let item3 = CheckResult::new(
        "ab.pressure_bound",
        item3_ok,
        w3,
        format!("min over checked times of Δp + (1+{})α/t", report.eps),
    );
    vec![ma, weak, item3]
}

/// Runs `cfg`, writes every artifact into `out` and returns the summary.
/// Solver failures end up in the summary's `error` field.
pub fn execute(cfg: &RunConfig, out: &Path) -> Result<Summary, RunError> {
    let rho0 = initial_density(cfg)?;
    std::fs::create_dir_all(out)?;
    let computed = match compute(cfg, &rho0) {
        Ok(c) => c,
        Err(e) => {
            let summary = Summary::new("run", Vec::new(), Some(cfg.clone()), Some(e.to_string()));
            summary.write(out)?;
            return Ok(summary);
        }
    };
    write_rows(&out.join("trajectory.csv"), &computed.rows)?;
    if cfg.checks.fields {
        let dir = out.join("fields");
        for (k, t, rho) in &computed.densities {
            write_field(&dir, &format!("rho_{k:05}"), *k, *t, rho)?;
        }
    }
    let mut checks = Vec::new();
    let mut error = None;
    let drift = computed.densities.iter().map(|(_, _, r)| (r.mass() - 1.0).abs()).fold(0.0, f64::max);
    checks.push(CheckResult::at_most("mass_conservation", drift, 1e-9));
    let res = computed.rows.iter().skip(1).map(|r| r.residual).fold(0.0, f64::max);
    checks.push(CheckResult::at_most("optimality_residual", res, cfg.checks.residual_tol));
    if cfg.checks.ab {
        let opts = AbOptions { eps: cfg.checks.ab_eps, t0: cfg.checks.ab_t0, guard: cfg.checks.guard, inner: cfg.checks.ab_inner };
        match ab_check_samples(&computed.samples, &computed.params, &opts) {
            Ok(report) => {
                write_ab_report(&out.join("ab_report.csv"), &report)?;
                checks.extend(ab_checks(&report));
            }
            Err(e) => error = Some(format!("ab check: {e}")),
        }
    }
    if let Some(l) = &cfg.checks.linfty {
        let recs: Vec<(usize, f64, &GridDensity)> = computed.densities.iter().map(|(k, t, r)| (*k, *t, r)).collect();
        match linfty_bound_check_densities(&recs, &computed.params, Ball { center: l.center, radius: l.radius }, l.t0) {
            Ok(c) => checks.push(CheckResult::new(
                "linfty_bound",
                c.ok,
                c.bound_m - c.sup_norm,
                format!("sup on the ball {:.6e} <= bound {:.6e} (K from k0 = {})", c.sup_norm, c.bound_m, c.k0),
            )),
            Err(e) => error = Some(format!("linfty check: {e}")),
        }
    }
    let summary = Summary::new("run", checks, Some(cfg.clone()), error);
    summary.write(out)?;
    Ok(summary)
}
