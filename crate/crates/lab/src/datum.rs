//! Initial densities from a [`RunConfig`].

use std::f64::consts::PI;

use jkolab_core::entropy::{exact_profile, ExactProfile, GridDensity, ProfileKind};
use jkolab_core::grid::build_grid;
use jkolab_core::Grid;

use crate::config::{ConfigError, InitialSpec, ProfileName, RunConfig};

pub fn build_grid_from(cfg: &RunConfig) -> Result<Grid, ConfigError> {
    build_grid(cfg.to_domain(), &cfg.grid.n).map_err(|e| ConfigError::Invalid(e.to_string()))
}

/// Reads whitespace- or comma-separated numbers.
pub fn parse_values(text: &str) -> Result<Vec<f64>, ConfigError> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| ConfigError::Invalid(format!("bad number {s:?} in datum file"))))
        .collect()
}

pub fn initial_density(cfg: &RunConfig) -> Result<GridDensity, ConfigError> {
    let grid = build_grid_from(cfg)?;
    let d = grid.dim();
    let wrap = |e: jkolab_core::Error| ConfigError::Invalid(format!("initial datum: {e}"));
    match &cfg.initial {
        InitialSpec::Profile { profile, time, center } => {
            let m = cfg.scheme.m;
            let kind = match profile {
                ProfileName::Gaussian => ProfileKind::GaussianHeat,
                ProfileName::Barenblatt if m > 1.0 => ProfileKind::BarenblattPme,
                ProfileName::Barenblatt => ProfileKind::BarenblattFde,
            };
            let p = ExactProfile::new(kind, m, d, *center).map_err(wrap)?;
            exact_profile(&p, &grid, *time).map_err(wrap)
        }
        InitialSpec::File { path } => {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.clone(), source })?;
            let values = parse_values(&text)?;
            if values.len() != grid.len() {
                return Err(ConfigError::Invalid(format!("datum file has {} values, grid has {} cells", values.len(), grid.len())));
            }
            GridDensity::normalized(grid, values).map_err(wrap)
        }
        InitialSpec::Expression { base, cosines, bumps } => {
            let f = |x: [f64; 2]| {
                let mut v = *base;
                for c in cosines {
                    let arg: f64 = (0..d).map(|a| c.freq[a] * x[a]).sum();
                    v += c.amp * (2.0 * PI * arg + c.phase).cos();
                }
                for b in bumps {
                    let r2: f64 = (0..d).map(|a| (x[a] - b.center[a]).powi(2)).sum();
                    v += b.amp * (-0.5 * r2 / (b.width * b.width)).exp();
                }
                v
            };
            let values: Vec<f64> = (0..grid.len()).map(|i| f(grid.center(i))).collect();
            if values.iter().any(|v| *v < 0.0) {
                return Err(ConfigError::Invalid("initial expression is negative somewhere".into()));
            }
            GridDensity::normalized(grid, values).map_err(wrap)
        }
    }
}
