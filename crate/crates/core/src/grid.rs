//! Domains, uniform cell-centred grids and boundary classification.

use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Interval,
    Torus1,
    Torus2,
    Square,
    Box2,
    TruncatedLine,
    TruncatedHalfLine,
    TruncatedPlane,
    TruncatedQuarterPlane,
}

impl DomainKind {
    pub fn dim(self) -> usize {
        match self {
            DomainKind::Interval | DomainKind::Torus1 | DomainKind::TruncatedLine | DomainKind::TruncatedHalfLine => 1,
            _ => 2,
        }
    }

    /// Truncations of unbounded domains need the stricter exponent bound.
    pub fn is_truncated(self) -> bool {
        matches!(
            self,
            DomainKind::TruncatedLine
                | DomainKind::TruncatedHalfLine
                | DomainKind::TruncatedPlane
                | DomainKind::TruncatedQuarterPlane
        )
    }
}

/// Axis-aligned domain. Only the first `dim` entries of the per-axis arrays
/// are meaningful.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub kind: DomainKind,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub periodic: [bool; 2],
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Self {
        Self { kind: DomainKind::Interval, lo: [a, 0.0], hi: [b, 0.0], periodic: [false; 2] }
    }

    pub fn torus1() -> Self {
        Self { kind: DomainKind::Torus1, lo: [0.0, 0.0], hi: [1.0, 0.0], periodic: [true, false] }
    }

    pub fn torus2() -> Self {
        Self { kind: DomainKind::Torus2, lo: [0.0; 2], hi: [1.0; 2], periodic: [true; 2] }
    }

    pub fn square() -> Self {
        Self { kind: DomainKind::Square, lo: [0.0; 2], hi: [1.0; 2], periodic: [false; 2] }
    }

    pub fn box2(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Self { kind: DomainKind::Box2, lo, hi, periodic: [false; 2] }
    }

    /// `[-r, r]`
    pub fn truncated_line(r: f64) -> Self {
        Self { kind: DomainKind::TruncatedLine, lo: [-r, 0.0], hi: [r, 0.0], periodic: [false; 2] }
    }

    /// `[0, r]`
    pub fn truncated_half_line(r: f64) -> Self {
        Self { kind: DomainKind::TruncatedHalfLine, lo: [0.0, 0.0], hi: [r, 0.0], periodic: [false; 2] }
    }

    /// `[-r, r]^2`
    pub fn truncated_plane(r: f64) -> Self {
        Self { kind: DomainKind::TruncatedPlane, lo: [-r; 2], hi: [r; 2], periodic: [false; 2] }
    }

    /// `[0, r]^2`
    pub fn truncated_quarter_plane(r: f64) -> Self {
        Self { kind: DomainKind::TruncatedQuarterPlane, lo: [0.0; 2], hi: [r; 2], periodic: [false; 2] }
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.length(a)).product()
    }

    /// Largest distance between two points of the domain (torus distance on
    /// periodic axes).
    pub fn diameter(&self) -> f64 {
        let mut s = 0.0;
        for a in 0..self.dim() {
            let l = if self.periodic[a] { 0.5 * self.length(a) } else { self.length(a) };
            s += l * l;
        }
        libm::sqrt(s)
    }

    pub fn validate(&self) -> Result<()> {
        for a in 0..self.dim() {
            if !self.lo[a].is_finite() || !self.hi[a].is_finite() {
                return Err(Error::Grid("non-finite bounds"));
            }
            if self.lo[a] >= self.hi[a] {
                return Err(Error::Grid("bounds must satisfy lo < hi"));
            }
        }
        Ok(())
    }

    /// Scales every bound by `s` (used by the entropy scaling identity).
    pub fn scaled(&self, s: f64) -> Self {
        let mut d = *self;
        for a in 0..2 {
            d.lo[a] *= s;
            d.hi[a] *= s;
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Interior,
    /// Cell touching exactly one non-periodic wall; `normal` is outward.
    Face { normal: [i8; 2] },
    /// Cell touching a wall on every axis (both end cells in 1D).
    Corner,
}

/// Uniform cell-centred grid. Cells are stored with axis 0 fastest:
/// `index = i + n[0] * j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub domain: Domain,
    pub n: [usize; 2],
    pub h: [f64; 2],
}

/// Builds a grid with `n[a]` cells along axis `a`. Needs at least 4 cells per axis.
pub fn build_grid(domain: Domain, n: &[usize]) -> Result<Grid> {
    domain.validate()?;
    let d = domain.dim();
    if n.len() != d {
        return Err(Error::Grid("one cell count per axis is required"));
    }
    let mut nn = [1usize; 2];
    let mut h = [1.0; 2];
    for a in 0..d {
        if n[a] < 4 {
            return Err(Error::Grid("at least 4 cells per axis"));
        }
        nn[a] = n[a];
        h[a] = domain.length(a) / n[a] as f64;
    }
    Ok(Grid { domain, n: nn, h })
}

impl Grid {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.h[a]).product()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n[0] * j
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.n[0], idx / self.n[0])
    }

    pub fn center_axis(&self, axis: usize, i: usize) -> f64 {
        self.domain.lo[axis] + (i as f64 + 0.5) * self.h[axis]
    }

    pub fn center(&self, idx: usize) -> [f64; 2] {
        let (i, j) = self.coords(idx);
        if self.dim() == 1 {
            [self.center_axis(0, i), 0.0]
        } else {
            [self.center_axis(0, i), self.center_axis(1, j)]
        }
    }

    /// Cell centres along one axis.
    pub fn centers_axis(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|i| self.center_axis(axis, i)).collect()
    }

    /// Left edge of cell `i` along `axis`.
    pub fn edge_axis(&self, axis: usize, i: usize) -> f64 {
        self.domain.lo[axis] + i as f64 * self.h[axis]
    }

    /// Wraps a signed index on a periodic axis; `None` when it leaves a
    /// non-periodic axis.
    pub fn wrap(&self, axis: usize, i: isize) -> Option<usize> {
        let n = self.n[axis] as isize;
        if self.domain.periodic[axis] {
            Some(i.rem_euclid(n) as usize)
        } else if (0..n).contains(&i) {
            Some(i as usize)
        } else {
            None
        }
    }

    /// Sum of quadrature weights.
    pub fn total_measure(&self) -> f64 {
        self.len() as f64 * self.cell_volume()
    }

    /// Quadrature of per-cell values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Signed shortest displacement `y - x` along an axis, wrapped on
    /// periodic axes.
    pub fn displacement(&self, axis: usize, x: f64, y: f64) -> f64 {
        let d = y - x;
        if self.domain.periodic[axis] {
            let l = self.domain.length(axis);
            d - l * libm::round(d / l)
        } else {
            d
        }
    }
}

/// Tags every cell as interior, face or corner.
pub fn classify_boundary(grid: &Grid) -> Vec<BoundaryTag> {
    let d = grid.dim();
    (0..grid.len())
        .map(|idx| {
            let (i, j) = grid.coords(idx);
            let ij = [i, j];
            let mut normal = [0i8; 2];
            let mut hits = 0;
            for a in 0..d {
                if grid.domain.periodic[a] {
                    continue;
                }
                if ij[a] == 0 {
                    normal[a] = -1;
                    hits += 1;
                } else if ij[a] == grid.n[a] - 1 {
                    normal[a] = 1;
                    hits += 1;
                }
            }
            match hits {
                0 => BoundaryTag::Interior,
                h if h == d => BoundaryTag::Corner,
                _ => BoundaryTag::Face { normal },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_centers() {
        let g = build_grid(Domain::interval(0.0, 1.0), &[4]).unwrap();
        assert_eq!(g.h[0], 0.25);
        let c = g.centers_axis(0);
        assert_eq!(c, [0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(build_grid(Domain::interval(0.0, 1.0), &[3]).is_err());
        assert!(build_grid(Domain::interval(1.0, 0.0), &[8]).is_err());
        assert!(build_grid(Domain::interval(0.0, f64::INFINITY), &[8]).is_err());
        assert!(build_grid(Domain::square(), &[8]).is_err());
    }

    #[test]
    fn torus_cells_are_interior() {
        let g = build_grid(Domain::torus2(), &[8, 8]).unwrap();
        assert_eq!(g.len(), 64);
        assert!(classify_boundary(&g).iter().all(|t| *t == BoundaryTag::Interior));
        let g1 = build_grid(Domain::torus1(), &[16]).unwrap();
        assert!(classify_boundary(&g1).iter().all(|t| *t == BoundaryTag::Interior));
    }

    #[test]
    fn square_classification_counts() {
        let g = build_grid(Domain::square(), &[4, 4]).unwrap();
        let tags = classify_boundary(&g);
        let corners = tags.iter().filter(|t| **t == BoundaryTag::Corner).count();
        let faces = tags.iter().filter(|t| matches!(t, BoundaryTag::Face { .. })).count();
        let interior = tags.iter().filter(|t| **t == BoundaryTag::Interior).count();
        assert_eq!((corners, faces, interior), (4, 8, 4));
    }

    #[test]
    fn interval_end_cells_are_corners() {
        let g = build_grid(Domain::interval(0.0, 1.0), &[10]).unwrap();
        let tags = classify_boundary(&g);
        assert_eq!(tags[0], BoundaryTag::Corner);
        assert_eq!(tags[9], BoundaryTag::Corner);
        assert!(tags[1..9].iter().all(|t| *t == BoundaryTag::Interior));
    }

    #[test]
    fn face_normals_are_axis_unit_vectors() {
        let g = build_grid(Domain::square(), &[8, 8]).unwrap();
        for (idx, t) in classify_boundary(&g).into_iter().enumerate() {
            if let BoundaryTag::Face { normal } = t {
                let (i, j) = g.coords(idx);
                let nn = normal[0].abs() + normal[1].abs();
                assert_eq!(nn, 1);
                if normal[0] == -1 {
                    assert_eq!(i, 0);
                }
                if normal[1] == 1 {
                    assert_eq!(j, 7);
                }
            }
        }
    }

    #[test]
    fn dihedral_invariance_of_tags() {
        let g = build_grid(Domain::square(), &[7, 7]).unwrap();
        let tags = classify_boundary(&g);
        let kind = |t: BoundaryTag| match t {
            BoundaryTag::Interior => 0,
            BoundaryTag::Face { .. } => 1,
            BoundaryTag::Corner => 2,
        };
        for idx in 0..g.len() {
            let (i, j) = g.coords(idx);
            let images = [(j, i), (6 - i, j), (i, 6 - j), (6 - j, 6 - i)];
            for (a, b) in images {
                assert_eq!(kind(tags[idx]), kind(tags[g.index(a, b)]));
            }
        }
    }

    #[test]
    fn measure_matches_volume() {
        for (d, n) in [
            (Domain::interval(-0.3, 2.9), &[17][..]),
            (Domain::box2([0.1, -2.0], [1.7, 3.3]), &[13, 29][..]),
            (Domain::truncated_plane(7.5), &[96, 96][..]),
        ] {
            let g = build_grid(d, n).unwrap();
            let v = d.volume();
            assert!((g.total_measure() - v).abs() <= 1e-12 * v);
        }
    }

    #[test]
    fn periodic_wrap() {
        let g = build_grid(Domain::torus2(), &[8, 8]).unwrap();
        for i in -20isize..20 {
            assert_eq!(g.wrap(0, i), g.wrap(0, i + 8));
        }
        let s = build_grid(Domain::square(), &[8, 8]).unwrap();
        assert_eq!(s.wrap(0, -1), None);
        assert_eq!(s.wrap(1, 8), None);
        assert!((g.displacement(0, 0.95, 0.05) - 0.1).abs() < 1e-15);
    }
}
