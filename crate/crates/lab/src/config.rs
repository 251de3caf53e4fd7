//! Run configuration: a TOML file with `[domain]`, `[grid]`, `[scheme]`,
//! `[initial]` and `[checks]` tables. `examples/heat_torus2.toml` lists
//! every key with its default.

use std::path::{Path, PathBuf};

use jkolab_core::entropy::{m_c1, m_c2, SchemeParams};
use jkolab_core::{jko1d, jko2d, Domain};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("initial datum file {0} does not exist")]
    MissingDatum(PathBuf),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    Interval { lo: f64, hi: f64 },
    Torus1,
    Line { radius: f64 },
    HalfLine { radius: f64 },
    Torus2,
    Square,
    Box { lo: [f64; 2], hi: [f64; 2] },
    Plane { radius: f64 },
    QuarterPlane { radius: f64 },
}

impl DomainSpec {
    pub fn to_domain(&self) -> Domain {
        match *self {
            DomainSpec::Interval { lo, hi } => Domain::interval(lo, hi),
            DomainSpec::Torus1 => Domain::torus1(),
            DomainSpec::Line { radius } => Domain::truncated_line(radius),
            DomainSpec::HalfLine { radius } => Domain::truncated_half_line(radius),
            DomainSpec::Torus2 => Domain::torus2(),
            DomainSpec::Square => Domain::square(),
            DomainSpec::Box { lo, hi } => Domain::box2(lo, hi),
            DomainSpec::Plane { radius } => Domain::truncated_plane(radius),
            DomainSpec::QuarterPlane { radius } => Domain::truncated_quarter_plane(radius),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Cells per axis, one entry per dimension.
    pub n: Vec<usize>,
}

fn default_sinkhorn_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    400
}
fn default_refine() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub m: f64,
    pub tau: f64,
    pub steps: usize,
    /// Physical time of the initial datum.
    #[serde(default)]
    pub t0: f64,
    /// Solver stationarity target; 1e-10 in 1D and 1e-8 in 2D when unset.
    pub tol: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Pieces per cell of the 1D Lagrangian solver.
    #[serde(default = "default_refine")]
    pub refine: usize,
    /// Entropic regularisation (2D only).
    pub eps: Option<f64>,
    #[serde(default = "default_sinkhorn_tol")]
    pub sinkhorn_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileName {
    Gaussian,
    Barenblatt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cosine {
    pub amp: f64,
    /// Integer frequencies per axis on the unit period.
    pub freq: [f64; 2],
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amp: f64,
    pub center: [f64; 2],
    pub width: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Self-similar solution at time `time` (Gaussian for m = 1, Barenblatt otherwise).
    Profile {
        profile: ProfileName,
        time: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Cell values separated by commas, whitespace or newlines, row-major; normalised on load.
    File { path: PathBuf },
    /// `base + Σ amp cos(2π freq·x + phase) + Σ amp exp(-|x-c|²/2w²)`, normalised.
    Expression {
        #[serde(default = "one")]
        base: f64,
        #[serde(default)]
        cosines: Vec<Cosine>,
        #[serde(default)]
        bumps: Vec<Bump>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinftySpec {
    pub center: [f64; 2],
    pub radius: f64,
    #[serde(default)]
    pub t0: f64,
}

fn yes() -> bool {
    true
}
fn default_ab_eps() -> f64 {
    0.1
}
fn default_guard() -> f64 {
    jkolab_core::monge_ampere::GUARD
}
fn default_residual_tol() -> f64 {
    1e-6
}
fn default_ab_inner() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksSpec {
    #[serde(default = "yes")]
    pub ab: bool,
    /// Relative allowance in the time-continuous pressure bound.
    #[serde(default = "default_ab_eps")]
    pub ab_eps: f64,
    /// First time at which the time-continuous bound is enforced.
    #[serde(default)]
    pub ab_t0: f64,
    /// Fraction of the 1D support half-width where the pointwise pressure
    /// bound is read.
    #[serde(default = "default_ab_inner")]
    pub ab_inner: f64,
    #[serde(default = "default_guard")]
    pub guard: f64,
    /// Cap on the per-step optimality residual.
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    pub linfty: Option<LinftySpec>,
    /// Dump every iterate under `fields/`.
    #[serde(default)]
    pub fields: bool,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        Self {
            ab: true,
            ab_eps: default_ab_eps(),
            ab_t0: 0.0,
            ab_inner: default_ab_inner(),
            guard: default_guard(),
            residual_tol: default_residual_tol(),
            linfty: None,
            fields: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub grid: GridSpec,
    pub scheme: SchemeSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub checks: ChecksSpec,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl RunConfig {
    /// Parses and validates; relative datum paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text)?;
        if let InitialSpec::File { path } = &mut cfg.initial {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn dim(&self) -> usize {
        self.to_domain().dim()
    }

    pub fn to_domain(&self) -> Domain {
        self.domain.to_domain()
    }

    pub fn params(&self) -> SchemeParams {
        SchemeParams::new(self.scheme.m, self.scheme.tau, self.dim())
    }

    pub fn tol(&self) -> f64 {
        self.scheme.tol.unwrap_or(if self.dim() == 1 { 1e-10 } else { 1e-8 })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let domain = self.to_domain();
        domain.validate().map_err(|e| invalid(e.to_string()))?;
        let d = domain.dim();
        if let DomainSpec::Line { radius } | DomainSpec::HalfLine { radius } | DomainSpec::Plane { radius } | DomainSpec::QuarterPlane { radius } =
            self.domain
        {
            if !(radius > 0.0 && radius.is_finite()) {
                return Err(invalid("truncation radius must be positive"));
            }
        }
        if self.grid.n.len() != d {
            return Err(invalid(format!("grid.n needs {d} entries for this domain")));
        }
        if self.grid.n.iter().any(|&n| n < 4) {
            return Err(invalid("grid.n must be at least 4 on every axis"));
        }
        let s = &self.scheme;
        let p = self.params();
        if p.validate(domain.kind).is_err() {
            let bound = if domain.kind.is_truncated() { m_c2(d) } else { m_c1(d) };
            return Err(invalid(format!("m = {} is outside the admissible range m > max(0, {bound}) for d = {d}", s.m)));
        }
        for (name, v) in [("scheme.tol", self.tol()), ("scheme.sinkhorn_tol", s.sinkhorn_tol), ("checks.guard", self.checks.guard), ("checks.residual_tol", self.checks.residual_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if !(self.checks.ab_eps >= 0.0 && self.checks.ab_eps.is_finite()) {
            return Err(invalid("checks.ab_eps must be nonnegative"));
        }
        if !(self.checks.ab_inner > 0.0 && self.checks.ab_inner <= 1.0) {
            return Err(invalid("checks.ab_inner must lie in (0, 1]"));
        }
        if s.steps < 1 || s.max_iter < 1 || s.refine < 1 {
            return Err(invalid("scheme.steps, scheme.max_iter and scheme.refine must be at least 1"));
        }
        if !s.t0.is_finite() || s.t0 < 0.0 {
            return Err(invalid("scheme.t0 must be nonnegative"));
        }
        if d == 1 {
            if !jko1d::supports(domain.kind) {
                return Err(invalid("the 1D solver does not handle this domain"));
            }
            if s.eps.is_some() {
                return Err(invalid("scheme.eps only applies to 2D runs"));
            }
        } else {
            if !jko2d::supports(domain.kind) {
                return Err(invalid("the 2D solver does not handle this domain"));
            }
            match s.eps {
                Some(e) if e > 0.0 && e.is_finite() => {}
                _ => return Err(invalid("2D runs need scheme.eps > 0")),
            }
            let cells: usize = self.grid.n.iter().product();
            if cells > jko2d::MAX_CELLS {
                return Err(invalid(format!("{cells} cells exceed the 2D cap of {}", jko2d::MAX_CELLS)));
            }
        }
        match &self.initial {
            InitialSpec::Profile { profile, time, .. } => {
                if !(*time > 0.0 && time.is_finite()) {
                    return Err(invalid("initial.time must be positive"));
                }
                let ok = match profile {
                    ProfileName::Gaussian => s.m == 1.0,
                    ProfileName::Barenblatt => s.m != 1.0,
                };
                if !ok {
                    return Err(invalid("the Gaussian profile needs m = 1 and the Barenblatt profile m != 1"));
                }
            }
            InitialSpec::File { path } => {
                if !path.is_file() {
                    return Err(ConfigError::MissingDatum(path.clone()));
                }
            }
            InitialSpec::Expression { base, cosines, bumps } => {
                if !base.is_finite() || cosines.iter().any(|c| !c.amp.is_finite()) || bumps.iter().any(|b| !(b.width > 0.0)) {
                    return Err(invalid("expression terms must be finite with positive bump widths"));
                }
            }
        }
        if let Some(l) = &self.checks.linfty {
            if !(l.radius > 0.0 && l.radius.is_finite()) {
                return Err(invalid("checks.linfty.radius must be positive"));
            }
        }
        Ok(())
    }
}
