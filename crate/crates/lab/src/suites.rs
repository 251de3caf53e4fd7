//! Fixed-seed property and oracle suites behind `verify`.

use std::f64::consts::PI;

use jkolab_core::ab::{ab_check_samples, ab_check_trajectory, ab_sequence, laplacian_1d, linfty_bound_check, samples_1d, AbOptions, Ball, Samples};
use jkolab_core::entropy::{ab_constant, entropy_scaling_check, exact_profile, f_m_prime, ExactProfile, GridDensity, ProfileKind, SchemeParams};
use jkolab_core::fourier::spectral_heat;
use jkolab_core::grid::build_grid;
use jkolab_core::jko1d::{potential_signs, run_scheme, SolverOptions};
use jkolab_core::jko2d::{boundary_behavior_check, run_scheme_2d, samples_2d, Options2D};
use jkolab_core::monge_ampere::{convexify_1d, convexify_2d, vertex_mass, Lattice};
use jkolab_core::ot1d::{w2_quantile, QuantileFunction};
use jkolab_core::sinkhorn::{debiased_barycentric_map, entropic_ot_dense, SeparableKernel};
use jkolab_core::transport::{ot_bruteforce, w2_bruteforce};
use jkolab_core::Domain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::output::CheckResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    AbSequence,
    GaussianStep,
    Optimality,
    DiscreteAb,
    Barenblatt,
    ScalingLaw,
    Ot1dOracle,
    TorusHeat,
    Boundary2d,
    MaOracle,
    Full,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::AbSequence,
        Suite::GaussianStep,
        Suite::Optimality,
        Suite::DiscreteAb,
        Suite::Barenblatt,
        Suite::ScalingLaw,
        Suite::Ot1dOracle,
        Suite::TorusHeat,
        Suite::Boundary2d,
        Suite::MaOracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::AbSequence => "ab-sequence",
            Suite::GaussianStep => "gaussian-step",
            Suite::Optimality => "optimality",
            Suite::DiscreteAb => "discrete-ab",
            Suite::Barenblatt => "barenblatt",
            Suite::ScalingLaw => "scaling-law",
            Suite::Ot1dOracle => "ot1d-oracle",
            Suite::TorusHeat => "torus-heat",
            Suite::Boundary2d => "boundary-2d",
            Suite::MaOracle => "ma-oracle",
            Suite::Full => "full",
        }
    }

    /// The single suites this one expands to.
    pub fn members(self) -> Vec<Suite> {
        if self == Suite::Full {
            Suite::ALL.to_vec()
        } else {
            vec![self]
        }
    }
}

/// Runs one non-`full` suite. Solver errors become failed checks.
pub fn run_suite(suite: Suite, seed: u64) -> Vec<CheckResult> {
    let res = match suite {
        Suite::AbSequence => ab_sequence_suite(),
        Suite::GaussianStep => gaussian_step_suite(),
        Suite::Optimality => optimality_suite(),
        Suite::DiscreteAb => discrete_ab_suite(),
        Suite::Barenblatt => barenblatt_suite(),
        Suite::ScalingLaw => scaling_law_suite(),
        Suite::Ot1dOracle => ot_oracle_suite(seed),
        Suite::TorusHeat => torus_heat_suite(),
        Suite::Boundary2d => boundary_suite(),
        Suite::MaOracle => ma_oracle_suite(seed),
        Suite::Full => return Suite::ALL.iter().flat_map(|s| run_suite(*s, seed)).collect(),
    };
    let name = suite.name();
    match res {
        Ok(mut checks) => {
            for c in &mut checks {
                c.name = format!("{name}/{}", c.name);
            }
            checks
        }
        Err(e) => vec![CheckResult::new(&format!("{name}/error"), false, f64::NAN, e.to_string())],
    }
}

type SuiteResult = jkolab_core::Result<Vec<CheckResult>>;

/// The five regimes of the sequence checks.
pub const AB_CASES: [(usize, f64); 5] = [(1, 1.0), (1, 2.0), (2, 1.0), (2, 1.5), (1, 0.7)];

fn ab_sequence_suite() -> SuiteResult {
    let mut out = Vec::new();
    for (d, m) in AB_CASES {
        let seq = ab_sequence(d, m, 10_000)?;
        let dec = seq.values[0] == 1.0 && seq.values.windows(2).all(|w| w[1] < w[0]);
        let diag = seq.diagnostic[9_999];
        out.push(CheckResult::new(&format!("monotone_d{d}_m{m}"), dec, 0.0, "X_1 = 1 and X_k strictly decreasing"));
        out.push(CheckResult::at_most(&format!("asymptotic_d{d}_m{m}"), (diag - 1.0).abs(), 0.02));
    }
    let x2 = ab_sequence(2, 1.0, 2)?.x(2);
    out.push(CheckResult::at_most("golden_root", (x2 - (3.0 - 5f64.sqrt()) / 2.0).abs(), 1e-9));
    Ok(out)
}

/// Std of the piecewise-uniform density behind a quantile function.
fn quantile_std(q: &QuantileFunction) -> f64 {
    let mean = q.mean();
    (q.second_moment() - mean * mean).sqrt()
}

fn gaussian_step_suite() -> SuiteResult {
    let g = build_grid(Domain::truncated_line(16.0), &[2048])?;
    let rho0 = GridDensity::from_fn(g, |x| (-0.5 * x[0] * x[0]).exp())?;
    let tau = 0.1;
    let params = SchemeParams::new(1.0, tau, 1);
    let opts = SolverOptions { refine: 2, ..SolverOptions::default() };
    let traj = run_scheme(&rho0, &params, 20, &opts, 0.0)?;
    let (mut s, mut worst, mut res) = (1.0f64, 0.0f64, 0.0f64);
    for st in traj.steps.iter().skip(1) {
        s = 0.5 * (s + (s * s + 4.0 * tau).sqrt());
        let step = st.step.as_ref().expect("steps after the first carry results");
        worst = worst.max((quantile_std(&step.quantile) - s).abs() / s);
        res = res.max(step.optimality_residual);
    }
    Ok(vec![CheckResult::at_most("std_recursion", worst, 1e-3), CheckResult::at_most("optimality_residual", res, 1e-6)])
}

/// Positive datum on the unit interval, plus a compactly supported one for `m > 1`.
fn interval_datum(m: f64, n: usize) -> jkolab_core::Result<GridDensity> {
    let g = build_grid(Domain::interval(0.0, 1.0), &[n])?;
    if m > 1.0 {
        GridDensity::from_fn(g, |x| (1.0 - ((x[0] - 0.45) / 0.25).powi(2)).max(0.0))
    } else {
        GridDensity::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos() + 0.3 * x[0])
    }
}

fn optimality_suite() -> SuiteResult {
    let mut out = Vec::new();
    for m in [0.7, 1.0, 2.0] {
        let rho0 = interval_datum(m, 256)?;
        let traj = run_scheme(&rho0, &SchemeParams::new(m, 1e-3, 1), 20, &SolverOptions::default(), 0.0)?;
        let (mut res, mut max_psi, mut min_off) = (0.0f64, f64::NEG_INFINITY, f64::INFINITY);
        for st in traj.steps.iter().skip(1) {
            let step = st.step.as_ref().expect("steps after the first carry results");
            res = res.max(step.optimality_residual);
            let s = potential_signs(step);
            max_psi = max_psi.max(s.max_on_support);
            min_off = min_off.min(s.min_off_support);
        }
        out.push(CheckResult::at_most(&format!("residual_m{m}"), res, 1e-5));
        if m < 1.0 {
            out.push(CheckResult::new(&format!("psi_negative_m{m}"), max_psi < 0.0, -max_psi, format!("max ψ = {max_psi:.3e}")));
        }
        if m > 1.0 {
            out.push(CheckResult::at_least(&format!("psi_off_support_m{m}"), min_off, -1e-6));
        }
    }
    Ok(out)
}

fn discrete_ab_suite() -> SuiteResult {
    let mut out = Vec::new();
    for domain in [Domain::torus1(), Domain::interval(0.0, 1.0)] {
        let g = build_grid(domain, &[512])?;
        let rho0 = GridDensity::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos() + 0.3 * (6.0 * PI * x[0]).sin().powi(2))?;
        for m in [0.7, 1.0, 2.0] {
            let params = SchemeParams::new(m, 1e-3, 1);
            let opts = SolverOptions { refine: 1, ..SolverOptions::default() };
            let traj = run_scheme(&rho0, &params, 50, &opts, 0.0)?;
            let samples = samples_1d(&traj)?;
            let mut conv = 0.0f64;
            for s in &samples {
                if let Samples::Line { x, pressure } = &s.samples {
                    let raw: Vec<f64> = x.iter().zip(pressure).map(|(x, p)| params.tau * p + 0.5 * x * x).collect();
                    conv = conv.max(convexify_1d(x, &raw)?.delta_conv);
                }
            }
            let rep = ab_check_samples(&samples, &params, &AbOptions::default())?;
            let tag = format!("{:?}_m{m}", domain.kind).to_lowercase();
            let slack = rep.rows.iter().map(|r| r.slack).fold(0.0, f64::max);
            out.push(CheckResult::at_most(&format!("delta_conv_{tag}"), conv, 1e-8));
            let ok = rep.rows.iter().all(|r| r.ma_ok) && rep.rows.len() == 50;
            out.push(CheckResult::new(&format!("ma_lower_bound_{tag}"), ok, rep.worst_ma_ratio() - 1.0, "min (det)/(1-X_k) over k").with_slack(slack));
            out.push(CheckResult::at_most(&format!("slack_budget_{tag}"), slack, 5e-3));
        }
    }
    Ok(out)
}

fn barenblatt_suite() -> SuiteResult {
    let mut out = Vec::new();
    let prof = ExactProfile::new(ProfileKind::BarenblattPme, 2.0, 1, [0.0; 2])?;
    let alpha = ab_constant(1, 2.0);
    // sampled profile: Δp on the inner 80% of the support
    let g = build_grid(Domain::truncated_line(4.0), &[800])?;
    let rho = exact_profile(&prof, &g, 1.0)?;
    let xs = g.centers_axis(0);
    let p: Vec<f64> = rho.values.iter().map(|z| f_m_prime(*z, 2.0)).collect::<jkolab_core::Result<_>>()?;
    let lap = laplacian_1d(&xs, &p);
    let rs = prof.support_radius(1.0);
    let worst = (1..xs.len() - 1).filter(|&i| xs[i].abs() <= 0.8 * rs).map(|i| (lap[i - 1] / -alpha - 1.0).abs()).fold(0.0, f64::max);
    out.push(CheckResult::at_most("sampled_pressure_laplacian", worst, 0.01));
    // trajectory from the profile at t = 1 up to t = 3
    let tau = 0.01;
    let opts = SolverOptions { refine: 1, ..SolverOptions::default() };
    let traj = run_scheme(&rho, &SchemeParams::new(2.0, tau, 1), 200, &opts, 1.0)?;
    let early = jkolab_core::jko1d::SchemeTrajectory { params: traj.params, steps: traj.steps[..=50].to_vec() };
    let rep = ab_check_trajectory(&early, &AbOptions { eps: 0.1, t0: 1.0, inner: 0.8, ..AbOptions::default() })?;
    let ok = rep.rows.iter().all(|r| r.item3_ok);
    out.push(CheckResult::new("pressure_bound_t1_to_1.5", ok, rep.worst_item3_margin(), "min Δp + 1.1 α/t over t in [1, 1.5], inner 80% of the support"));
    // sup-norm decay on a fixed ball
    let ball = Ball { center: [0.0; 2], radius: 0.25 };
    let (mut lt, mut ls) = (Vec::new(), Vec::new());
    let mut dominated = true;
    let mut margin = f64::INFINITY;
    for st in traj.steps.iter().skip(1) {
        let sup = (0..g.len()).filter(|&i| g.center(i)[0].abs() <= ball.radius).map(|i| st.density.values[i]).fold(0.0, f64::max);
        lt.push(st.t.ln());
        ls.push(sup.ln());
        let c = linfty_bound_check(&traj, ball, st.t)?;
        dominated &= c.ok;
        margin = margin.min(c.bound_m - c.sup_norm);
    }
    let slope = fit_slope(&lt, &ls);
    let beta = prof.beta();
    out.push(CheckResult::at_most("sup_decay_exponent", (slope + beta).abs() / beta, 0.1));
    out.push(CheckResult::new("linfty_bound_dominates", dominated, margin, "bound - sup at every checked time"));
    Ok(out)
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn scaling_law_suite() -> SuiteResult {
    let mut out = Vec::new();
    for d in [1usize, 2] {
        let (domain, n) = if d == 1 { (Domain::truncated_line(6.0), vec![512]) } else { (Domain::truncated_plane(6.0), vec![96, 96]) };
        let g = build_grid(domain, &n)?;
        let rho = GridDensity::from_fn(g, |x| (-0.5 * (x[0] * x[0] + x[1] * x[1])).exp() * (1.0 + 0.3 * x[0].sin()))?;
        for m in [0.9, 1.0, 2.0] {
            for big_m in [0.25, 4.0] {
                let (lhs, rhs) = entropy_scaling_check(&rho, big_m, m, None)?;
                out.push(CheckResult::at_most(&format!("d{d}_m{m}_M{big_m}"), (lhs - rhs).abs() / rhs.abs().max(1e-300), 1e-6));
            }
        }
    }
    Ok(out)
}

fn random_atoms(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let k = rng.gen_range(1..=8);
    let x: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    (x, w.into_iter().map(|v| v / s).collect())
}

fn ot_oracle_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let (x, a) = random_atoms(&mut rng);
        let (y, b) = random_atoms(&mut rng);
        let q = w2_quantile(&QuantileFunction::from_atoms(&x, &a)?, &QuantileFunction::from_atoms(&y, &b)?);
        worst = worst.max((q - w2_bruteforce(&x, &a, &y, &b)?).abs());
    }
    let mut monotone = true;
    let mut last_gap = 0.0f64;
    for _ in 0..20 {
        let pts = |rng: &mut ChaCha8Rng| -> Vec<[f64; 2]> { (0..2).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect() };
        let (xs, ys) = (pts(&mut rng), pts(&mut rng));
        let w = |rng: &mut ChaCha8Rng| {
            let t = rng.gen_range(0.2..0.8);
            vec![t, 1.0 - t]
        };
        let (a, b) = (w(&mut rng), w(&mut rng));
        let cost: Vec<f64> = xs.iter().flat_map(|p| ys.iter().map(move |q| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2))).collect();
        let (exact, _) = ot_bruteforce(&a, &b, &cost)?;
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let (c, _, _) = entropic_ot_dense(&a, &b, &cost, eps, 1e-13)?;
            let gap = (c - exact).abs();
            monotone &= gap <= prev + 1e-12;
            prev = gap;
        }
        last_gap = last_gap.max(prev);
    }
    Ok(vec![
        CheckResult::at_most("quantile_vs_bruteforce", worst, 1e-9),
        CheckResult::new("entropic_monotone", monotone, -last_gap, format!("largest gap at ε = 1e-3: {last_gap:.3e}")),
    ])
}

fn torus_heat_suite() -> SuiteResult {
    let g = build_grid(Domain::torus2(), &[64, 64])?;
    let rho0 = GridDensity::from_fn(g, |x| 1.0 + 0.5 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin() + 0.3 * (4.0 * PI * x[1]).cos())?;
    let params = SchemeParams::new(1.0, 1e-3, 2);
    let traj = run_scheme_2d(&rho0, &params, 20, &Options2D::new(5e-4, 1e-8), 0.0)?;
    let reference = spectral_heat(&rho0, 20.0 * 1e-3)?;
    let fin = traj.final_density();
    let l1 = fin.grid.integrate(&fin.values.iter().zip(&reference.values).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>());
    let rep = ab_check_samples(&samples_2d(&traj)?, &params, &AbOptions::default())?;
    let slack = rep.rows.iter().map(|r| r.slack).fold(0.0, f64::max);
    Ok(vec![
        CheckResult::at_most("l1_vs_spectral", l1, 5e-2),
        CheckResult::at_least("ma_ratio", rep.worst_ma_ratio(), 0.95).with_slack(slack),
    ])
}

/// Smooth positive product pair used by the square boundary suite.
pub fn product_density(g: &jkolab_core::Grid) -> jkolab_core::Result<GridDensity> {
    GridDensity::from_fn(g.clone(), |x| (1.0 + 0.5 * (PI * x[0]).cos()) * (1.0 + 0.3 * (2.0 * PI * x[1]).sin()))
}

fn boundary_suite() -> SuiteResult {
    let mut res = Vec::new();
    for (n, eps) in [(48usize, 1e-3), (96, 5e-4)] {
        let g = build_grid(Domain::square(), &[n, n])?;
        let rho = product_density(&g)?;
        let mu = GridDensity::uniform(g.clone());
        let k = SeparableKernel::new(&g, eps)?;
        let map = debiased_barycentric_map(&k, &rho, &mu, 1e-9)?;
        res.push((boundary_behavior_check(&map, &g)?, eps + 1.0 / n as f64));
    }
    let (c0, b0) = res[0];
    let c1 = res[1].0;
    Ok(vec![
        CheckResult::at_most("corner_err", c0.corner_err, 0.05),
        CheckResult::at_most("face_err", c0.face_err, 3.0 * b0),
        CheckResult::at_least("corner_refinement", c0.corner_err / c1.corner_err, 1.5),
        CheckResult::at_least("face_refinement", c0.face_err / c1.face_err, 1.5),
    ])
}

/// Random smooth convex function on the plane.
pub fn random_convex(rng: &mut ChaCha8Rng) -> impl Fn([f64; 2]) -> f64 {
    let family = rng.gen_range(0..3);
    let l1 = rng.gen_range(0.5..3.0);
    let l2 = rng.gen_range(0.5..3.0);
    let th = rng.gen_range(0.0..PI);
    let (c, s) = (th.cos(), th.sin());
    let b = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let w: Vec<([f64; 2], f64)> = (0..3).map(|_| ([rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)], rng.gen_range(-1.0..1.0))).collect();
    move |x: [f64; 2]| {
        let (r0, r1) = (c * x[0] + s * x[1], -s * x[0] + c * x[1]);
        let quad = 0.5 * (l1 * r0 * r0 + l2 * r1 * r1) + b[0] * x[0] + b[1] * x[1];
        match family {
            0 => quad,
            1 => quad + w.iter().map(|(a, o)| (a[0] * x[0] + a[1] * x[1] + o).exp()).sum::<f64>().ln(),
            _ => 0.5 * l1 * x[0] * x[0] + (l2 * x[1]).cosh() + (w[0].0[0] * x[0]).exp(),
        }
    }
}

/// Area of `{s : u(w) >= u(v) + s·(w - v) for every lattice point w}`,
/// counted on an `res × res` slope lattice inside the axis-neighbour box.
pub fn supporting_plane_area(l: &Lattice, u: &[f64], v: usize, res: usize) -> f64 {
    let (i, j) = (v % l.n[0], v / l.n[0]);
    let lo = [(u[v] - u[v - 1]) / l.h[0], (u[v] - u[v - l.n[0]]) / l.h[1]];
    let hi = [(u[v + 1] - u[v]) / l.h[0], (u[v + l.n[0]] - u[v]) / l.h[1]];
    let pv = l.point(v);
    // nearest points first so most rejections are cheap
    let mut others: Vec<(usize, f64)> = (0..l.len())
        .filter(|&w| w != v)
        .map(|w| {
            let (a, b) = ((w % l.n[0]) as f64 - i as f64, (w / l.n[0]) as f64 - j as f64);
            (w, a * a + b * b)
        })
        .collect();
    others.sort_by(|a, b| a.1.total_cmp(&b.1));
    let rows: Vec<([f64; 2], f64)> = others
        .iter()
        .map(|&(w, _)| {
            let pw = l.point(w);
            ([pw[0] - pv[0], pw[1] - pv[1]], u[w] - u[v])
        })
        .collect();
    let (dx, dy) = ((hi[0] - lo[0]) / res as f64, (hi[1] - lo[1]) / res as f64);
    let mut count = 0usize;
    for a in 0..res {
        let sx = lo[0] + (a as f64 + 0.5) * dx;
        for b in 0..res {
            let sy = lo[1] + (b as f64 + 0.5) * dy;
            if rows.iter().all(|(d, du)| *du >= sx * d[0] + sy * d[1]) {
                count += 1;
            }
        }
    }
    count as f64 * dx * dy
}

fn ma_oracle_suite(seed: u64) -> SuiteResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    let mut hull_path = 0;
    for _ in 0..50 {
        let f = random_convex(&mut rng);
        let n = [rng.gen_range(6..=12), rng.gen_range(6..=12)];
        let l = Lattice { n, origin: [-0.6, -0.5], h: [1.2 / (n[0] - 1) as f64, 1.0 / (n[1] - 1) as f64] };
        let u: Vec<f64> = (0..l.len()).map(|k| f(l.point(k))).collect();
        let p = convexify_2d(&l, &u)?;
        hull_path += p.uj_convex as usize;
        for _ in 0..4 {
            let v = l.index(rng.gen_range(1..n[0] - 1), rng.gen_range(1..n[1] - 1));
            let oracle = supporting_plane_area(&l, &u, v, 300);
            worst = worst.max((vertex_mass(&p, v) - oracle).abs() / oracle);
        }
    }
    let mut c = CheckResult::at_most("vertex_mass_vs_oracle", worst, 0.02);
    c.detail = format!("{}; {hull_path} of 50 took the hull-area path", c.detail);
    Ok(vec![c])
}
