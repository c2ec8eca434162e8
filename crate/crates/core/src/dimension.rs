//! Box-counting dimension on products of spheres, and local scaling
//! profiles of empirical measures.
//!
//! Cells are ambient cubes of side `eps` intersected with each factor
//! sphere, which partition it and are bi-Lipschitz to intrinsic balls; the
//! estimate is the slope of `log(occupied cells)` against `log(1/eps)` over
//! a geometric scale ladder, with a saturation guard dropping scales the
//! finite sample cannot populate. Local profiles measure
//! `-log nu(prod_i B(xi_i, e^{-u_i t}))` against `t`, whose slope estimates
//! the directional exponent `psi_u(u)`.

use crate::boundary::{CapProduct, ProductBoundaryPoint};
use crate::fit::{line_fit, std_dev};
use crate::hyperbolic::{BoundaryDir, Cap};
use crate::psmeasure::{EmpiricalMeasure, MIN_CELL_ATOMS};
use serde::Serialize;
use std::collections::HashSet;
use thiserror::Error;

/// Minimum number of sample points for a box-dimension estimate.
pub const MIN_POINTS: usize = 1000;
/// Default scale ladder: 8 scales, ratio 1/2, largest 0.2 rad.
pub const DEFAULT_SCALE_COUNT: usize = 8;
pub const DEFAULT_SCALE_RATIO: f64 = 0.5;
pub const DEFAULT_SCALE_MAX: f64 = 0.2;
/// Scales with occupancy above this fraction of the sample are saturated.
const SATURATION_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DimError {
    #[error("need at least {min} points, got {got}")]
    TooFewPoints { got: usize, min: usize },
    #[error("need >= 5 scales spanning >= 1.5 decades, got {count} spanning {decades:.2}")]
    BadScaleLadder { count: usize, decades: f64 },
    #[error("no usable scales remain after the saturation guard")]
    WindowEmpty,
    #[error("profile has {0} usable ball radii, need >= 3")]
    ProfileTooShort(usize),
    #[error("point and measure dimensions disagree")]
    DimensionMismatch,
}

/// A box-dimension estimate with its scale diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Scale window actually used `(largest, smallest)`.
    pub window: (f64, f64),
    /// Per-scale `(eps, occupied cells)` including dropped scales.
    pub counts: Vec<(f64, usize)>,
    /// Set when the saturation guard shrank the window.
    pub saturated: bool,
    pub points: usize,
}

/// Geometric scale ladder `largest * ratio^j`, `j = 0..count`.
pub fn geometric_scales(largest: f64, ratio: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| largest * ratio.powi(j as i32)).collect()
}

pub fn default_scales() -> Vec<f64> {
    geometric_scales(DEFAULT_SCALE_MAX, DEFAULT_SCALE_RATIO, DEFAULT_SCALE_COUNT)
}

/// A box grid on the product of spheres: one angular cell size per factor.
/// Cells are ambient cubes intersected with each sphere, which partition it
/// up to measure zero and are bi-Lipschitz to intrinsic balls.
#[derive(Debug, Clone)]
pub struct BoxGrid {
    eps: Vec<f64>,
}

impl BoxGrid {
    pub fn new(per_factor_eps: Vec<f64>) -> Self {
        assert!(per_factor_eps.iter().all(|&e| e > 0.0), "cell sizes must be positive");
        BoxGrid { eps: per_factor_eps }
    }

    pub fn isotropic(k: usize, eps: f64) -> Self {
        Self::new(vec![eps; k])
    }

    /// Integer cell index of a product boundary point.
    pub fn cell_of(&self, p: &ProductBoundaryPoint) -> Vec<i32> {
        let mut key = Vec::new();
        for (f, dir) in p.dirs.iter().enumerate() {
            for &x in dir {
                key.push((x / self.eps[f]).floor() as i32);
            }
        }
        key
    }

    /// Number of distinct occupied cells.
    pub fn occupied(&self, points: &[ProductBoundaryPoint]) -> usize {
        let mut cells: HashSet<Vec<i32>> = HashSet::with_capacity(points.len());
        for p in points {
            cells.insert(self.cell_of(p));
        }
        cells.len()
    }
}

/// Box-counting dimension of a product-boundary sample.
///
/// `isotropic` uses the same cell size on every factor (the estimate w.r.t.
/// the product Riemannian metric); otherwise cell sizes are weighted by the
/// per-factor chordal diameters of the sample, normalized to geometric mean
/// one, which adapts the grid to strongly anisotropic samples.
pub fn box_dimension(
    points: &[ProductBoundaryPoint],
    scales: &[f64],
    isotropic: bool,
) -> Result<DimensionEstimate, DimError> {
    if points.len() < MIN_POINTS {
        return Err(DimError::TooFewPoints { got: points.len(), min: MIN_POINTS });
    }
    let mut sorted: Vec<f64> = scales.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let decades = if sorted.is_empty() {
        0.0
    } else {
        (sorted[0] / sorted[sorted.len() - 1]).log10()
    };
    if sorted.len() < 5 || decades < 1.5 {
        return Err(DimError::BadScaleLadder { count: sorted.len(), decades });
    }
    let k = points[0].dirs.len();
    let weights: Vec<f64> = if isotropic {
        vec![1.0; k]
    } else {
        let mut diam = vec![0.0f64; k];
        // chordal diameter per factor over a probe subset
        let step = (points.len() / 512).max(1);
        let probe: Vec<&ProductBoundaryPoint> = points.iter().step_by(step).collect();
        for (i, p) in probe.iter().enumerate() {
            for q in probe.iter().skip(i + 1) {
                for f in 0..k {
                    let c: f64 = p.dirs[f]
                        .iter()
                        .zip(&q.dirs[f])
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt();
                    diam[f] = diam[f].max(c);
                }
            }
        }
        let gm = diam.iter().map(|d| d.max(1e-6).ln()).sum::<f64>() / k as f64;
        diam.iter().map(|d| d.max(1e-6) / gm.exp()).collect()
    };

    let mut counts = Vec::with_capacity(sorted.len());
    for &eps in &sorted {
        let grid = BoxGrid::new(weights.iter().map(|w| w * eps).collect());
        counts.push((eps, grid.occupied(points)));
    }
    let max_occupied = (SATURATION_FRACTION * points.len() as f64) as usize;
    let usable: Vec<(f64, usize)> = counts
        .iter()
        .copied()
        .filter(|&(_, n)| n > 0 && n <= max_occupied)
        .collect();
    let saturated = usable.len() < counts.len();
    if usable.len() < 3 {
        return Err(DimError::WindowEmpty);
    }
    let xs: Vec<f64> = usable.iter().map(|&(e, _)| (1.0 / e).ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|&(_, n)| (n as f64).ln()).collect();
    let line = line_fit(&xs, &ys).ok_or(DimError::WindowEmpty)?;
    // dispersion of successive two-point slopes
    let pair_slopes: Vec<f64> = xs
        .windows(2)
        .zip(ys.windows(2))
        .filter(|(x, _)| (x[1] - x[0]).abs() > 1e-12)
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect();
    let stderr = if pair_slopes.len() > 1 {
        std_dev(&pair_slopes) / (pair_slopes.len() as f64).sqrt()
    } else {
        0.0
    };
    Ok(DimensionEstimate {
        value: line.slope,
        stderr,
        window: (usable[0].0, usable[usable.len() - 1].0),
        counts,
        saturated,
        points: points.len(),
    })
}

/// Local scaling profile of a measure at `xi`: the slope of
/// `-log nu(prod_i B(xi_i, e^{-u_i t}))` over the `t` grid.
#[derive(Debug, Clone, Serialize)]
pub struct LocalProfile {
    pub slope: f64,
    pub stderr: f64,
    /// `(t, mass, atoms)` rows actually used.
    pub table: Vec<(f64, f64, usize)>,
    /// Set when the grid was truncated at radii the measure cannot resolve.
    pub truncated: bool,
}

pub fn local_dimension_profile(
    measure: &EmpiricalMeasure,
    xi: &ProductBoundaryPoint,
    u: &[f64],
    t_range: (f64, f64),
    steps: usize,
) -> Result<LocalProfile, DimError> {
    let k = measure.k();
    if xi.dirs.len() != k || u.len() != k {
        return Err(DimError::DimensionMismatch);
    }
    let (t_lo, t_hi) = t_range;
    let mut table = Vec::new();
    let mut truncated = false;
    for j in 0..steps {
        let t = t_lo + (t_hi - t_lo) * j as f64 / (steps.max(2) - 1) as f64;
        let caps: Vec<Cap> = (0..k)
            .map(|f| {
                let radius = (-u[f] * t).exp().min(std::f64::consts::PI - 1e-9);
                Cap::new(
                    BoundaryDir::from_slice(&xi.dirs[f]).expect("unit direction"),
                    radius,
                )
                .expect("radius in range")
            })
            .collect();
        let (mass, atoms) = measure.mass_and_atoms(&CapProduct { caps });
        if atoms < MIN_CELL_ATOMS {
            truncated = true;
            break;
        }
        table.push((t, mass, atoms));
    }
    if table.len() < 3 {
        return Err(DimError::ProfileTooShort(table.len()));
    }
    let xs: Vec<f64> = table.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = table.iter().map(|r| -r.1.ln()).collect();
    let line = line_fit(&xs, &ys).ok_or(DimError::ProfileTooShort(table.len()))?;
    let pair_slopes: Vec<f64> = xs
        .windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| (y[1] - y[0]) / (x[1] - x[0]))
        .collect();
    let stderr = if pair_slopes.len() > 1 {
        std_dev(&pair_slopes) / (pair_slopes.len() as f64).sqrt()
    } else {
        0.0
    };
    Ok(LocalProfile { slope: line.slope, stderr, table, truncated })
}
