//! Monotonic vs. oscillatory relaxation of 3-state systems.
//!
//! The nonzero eigenvalues of a 3-state generator solve `λ² + ξλ + q = 0`
//! with `ξ = a+b+c+d+e+f` and `q` the sum of principal 2×2 minors of the
//! generator. They form a complex pair exactly when `D = ξ² − 4q < 0`. In
//! the coordinates of [`uvw`], `D = 3u² + v² + 4ωu + ω²`, an ellipse in
//! `(u, v)` that shrinks to a point when `ω = 0`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Generator, Param, RateMatrix, RelaxationClass, RelaxationKind, UvwCoordinates};
use crate::pme::principal_minor_sum;

/// Relative width of the Boundary band: `|D| ≤ BOUNDARY_TOL·max(1, ξ²)`.
pub const BOUNDARY_TOL: f64 = 1e-9;

fn require3(w: &RateMatrix) -> Result<[f64; 6]> {
    w.abcdef().ok_or(Error::DimensionMismatch { expected: 3, got: w.n() })
}

pub fn boundary_tolerance(xi: f64) -> f64 {
    BOUNDARY_TOL * (xi * xi).max(1.0)
}

/// Classify with the default Boundary band.
pub fn discriminant(w: &RateMatrix) -> Result<RelaxationClass> {
    discriminant_with_tol(w, None)
}

/// Classify; `tol_b` overrides the absolute Boundary half-width.
pub fn discriminant_with_tol(w: &RateMatrix, tol_b: Option<f64>) -> Result<RelaxationClass> {
    let [_, _, c, d, _, f] = require3(w)?;
    let g = Generator::from_rates(w);
    let xi = -g.matrix().trace();
    let q = principal_minor_sum(g.matrix());
    let eta = c + d + f;
    let disc = xi * xi - 4.0 * q;
    let tol = tol_b.unwrap_or_else(|| boundary_tolerance(xi));
    Ok(RelaxationClass { kind: kind_of(disc, tol), discriminant: disc, xi, eta, q })
}

pub fn kind_of(disc: f64, tol: f64) -> RelaxationKind {
    if disc.abs() <= tol {
        RelaxationKind::Boundary
    } else if disc < 0.0 {
        RelaxationKind::Oscillatory
    } else {
        RelaxationKind::Monotonic
    }
}

pub fn uvw(w: &RateMatrix) -> Result<UvwCoordinates> {
    let [a, b, c, d, e, f] = require3(w)?;
    let k_c = e - c;
    let l = f - a;
    let m_c = b - d;
    let omega = (a + d + e) - (b + c + f);
    Ok(UvwCoordinates { k_c, l, m_c, omega, u: l + m_c, v: l - m_c })
}

/// `3u² + v² + 4ωu + ω²`, identical to the discriminant.
pub fn ellipse_value(coords: &UvwCoordinates) -> f64 {
    let UvwCoordinates { u, v, omega, .. } = *coords;
    3.0 * u * u + v * v + 4.0 * omega * u + omega * omega
}

/// Classification of a rectangular grid over two named rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMap {
    pub axis1: Param,
    pub axis2: Param,
    pub grid1: Vec<f64>,
    pub grid2: Vec<f64>,
    /// `classes[i][j]` at `(grid1[i], grid2[j])`.
    pub classes: Vec<Vec<RelaxationClass>>,
    pub fraction_oscillatory: f64,
}

/// One swept axis: `points` values from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub param: Param,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn grid(&self) -> Vec<f64> {
        if self.points <= 1 || self.lo == self.hi {
            return vec![self.lo];
        }
        let last = self.points - 1;
        (0..self.points)
            .map(|i| {
                if i == last {
                    self.hi
                } else {
                    self.lo + (self.hi - self.lo) * i as f64 / last as f64
                }
            })
            .collect()
    }
}

/// Classify every grid cell. Cells are evaluated in parallel on the current
/// rayon pool; output order is row-major over `(axis1, axis2)` regardless.
pub fn sweep(template: &RateMatrix, axis1: Axis, axis2: Axis, tol_b: Option<f64>) -> Result<RegionMap> {
    require3(template)?;
    if axis1.param == axis2.param {
        return Err(Error::BadAxis(format!("both axes vary {}", axis1.param)));
    }
    for ax in [axis1, axis2] {
        if !(ax.lo >= 0.0 && ax.hi >= ax.lo && ax.hi.is_finite()) {
            return Err(Error::BadAxis(format!(
                "range for {} must satisfy 0 ≤ lo ≤ hi, got [{}, {}]",
                ax.param, ax.lo, ax.hi
            )));
        }
        if ax.points == 0 {
            return Err(Error::BadAxis(format!("axis {} needs at least one point", ax.param)));
        }
    }
    let grid1 = axis1.grid();
    let grid2 = axis2.grid();
    let classes = grid1
        .par_iter()
        .map(|&x| {
            grid2
                .iter()
                .map(|&y| {
                    let w = template.with_param(axis1.param, x)?.with_param(axis2.param, y)?;
                    discriminant_with_tol(&w, tol_b)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let total = grid1.len() * grid2.len();
    let oscillatory = classes
        .iter()
        .flatten()
        .filter(|c| c.kind == RelaxationKind::Oscillatory)
        .count();
    Ok(RegionMap {
        axis1: axis1.param,
        axis2: axis2.param,
        grid1,
        grid2,
        classes,
        fraction_oscillatory: oscillatory as f64 / total as f64,
    })
}
