//! Limit-cone and growth-indicator estimation.
//!
//! The Cartan vectors of deep orbit records, normalized, accumulate on the
//! unit section of the limit cone; their convex hull is the empirical cone.
//! The growth indicator at a unit direction `u` is estimated by the counting
//! slope of `|mu|` over records whose `mu`-direction lies within a thin cone
//! around `u`. The infimum over open cones is unreachable at finite depth, so
//! estimates are reported at the data-driven aperture floor together with the
//! half-aperture value as a trend diagnostic.

use crate::exponents::{counting_exponent_min, EstimateError, ExponentEstimate, Window};
use crate::fit::line_fit;
use crate::joining::Orbit;
use serde::Serialize;
use thiserror::Error;

/// Fewest records a cone must hold for a growth estimate.
pub const MIN_CONE_RECORDS: usize = 500;
/// Default stencil half-step (radians) for tangent-form fitting.
pub const DEFAULT_STENCIL_STEP: f64 = 0.06;

#[derive(Debug, Error)]
pub enum ConeError {
    #[error("no records with |mu| >= {0}")]
    EmptyCone(f64),
    #[error("only {got} records in the cone around {direction:?} (need {need})")]
    InsufficientData { direction: Vec<f64>, got: usize, need: usize },
    #[error("direction {0:?} lies outside the empirical cone hull")]
    OutsideHull(Vec<f64>),
    #[error("hull computation supports k <= 3, got k = {0}")]
    UnsupportedRank(usize),
    #[error("tangent fit infeasible: {0}")]
    TangentInfeasible(String),
    #[error("estimate error: {0}")]
    Estimate(#[from] EstimateError),
    #[error("direction has wrong length {got}, expected {expected}")]
    BadDirection { got: usize, expected: usize },
}

/// A linear functional on Cartan space `R^k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearForm {
    pub coeffs: Vec<f64>,
}

impl LinearForm {
    pub fn new(coeffs: Vec<f64>) -> Self {
        LinearForm { coeffs }
    }

    pub fn apply(&self, mu: &[f64]) -> f64 {
        crate::joining::linear_mu(&self.coeffs, mu)
    }

    pub fn scaled(&self, c: f64) -> LinearForm {
        LinearForm { coeffs: self.coeffs.iter().map(|x| c * x).collect() }
    }
}

/// A thin open cone around a unit direction.
#[derive(Debug, Clone, Serialize)]
pub struct ConeSpec {
    pub direction: Vec<f64>,
    pub aperture: f64,
}

impl ConeSpec {
    /// Normalizes the direction; the aperture must lie in (0, pi/2).
    pub fn new(direction: &[f64], aperture: f64) -> Self {
        assert!(
            aperture > 0.0 && aperture < std::f64::consts::FRAC_PI_2,
            "aperture {aperture} outside (0, pi/2)"
        );
        ConeSpec { direction: normalize(direction), aperture }
    }
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Unit directions `mu/|mu|` of records with `|mu| >= norm_floor`.
pub fn cone_directions(orbit: &Orbit, norm_floor: f64) -> Result<Vec<Vec<f64>>, ConeError> {
    let dirs: Vec<Vec<f64>> = orbit
        .records()
        .skip(1)
        .filter(|r| r.mu_norm() >= norm_floor)
        .map(|r| {
            let n = r.mu_norm();
            r.mu().iter().map(|m| m / n).collect()
        })
        .collect();
    if dirs.is_empty() {
        return Err(ConeError::EmptyCone(norm_floor));
    }
    Ok(dirs)
}

/// The empirical limit cone: convex hull of observed `mu`-directions on the
/// unit sphere. For `k = 2` an angular interval; for `k = 3` a convex polygon
/// in the gnomonic chart at the direction centroid.
#[derive(Debug, Clone)]
pub enum DirectionHull {
    /// k = 1: everything sits at the single direction `(1)`.
    Point,
    /// k = 2: directions between these two polar angles (atan2 of u2/u1).
    Arc { lo: f64, hi: f64 },
    /// k = 3: polygon in the gnomonic chart `(center, basis)`.
    Chart { center: Vec<f64>, basis: [Vec<f64>; 2], polygon: Vec<[f64; 2]> },
}

impl DirectionHull {
    pub fn build(dirs: &[Vec<f64>]) -> Result<Self, ConeError> {
        let k = dirs.first().map(|d| d.len()).unwrap_or(0);
        match k {
            0 => Err(ConeError::EmptyCone(0.0)),
            1 => Ok(DirectionHull::Point),
            2 => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for d in dirs {
                    let th = d[1].atan2(d[0]);
                    lo = lo.min(th);
                    hi = hi.max(th);
                }
                Ok(DirectionHull::Arc { lo, hi })
            }
            3 => {
                let mut center = vec![0.0; 3];
                for d in dirs {
                    for (c, x) in center.iter_mut().zip(d) {
                        *c += x;
                    }
                }
                let center = normalize(&center);
                let basis = chart_basis(&center);
                let mut pts: Vec<[f64; 2]> = dirs
                    .iter()
                    .map(|d| project_to_chart(&center, &basis, d))
                    .collect::<Result<_, _>>()?;
                let polygon = convex_hull_2d(&mut pts);
                Ok(DirectionHull::Chart { center, basis, polygon })
            }
            k => Err(ConeError::UnsupportedRank(k)),
        }
    }

    /// Signed distance (radians, approximately) from `u` to the hull
    /// boundary; positive inside.
    pub fn interior_margin(&self, u: &[f64]) -> f64 {
        match self {
            DirectionHull::Point => f64::INFINITY,
            DirectionHull::Arc { lo, hi } => {
                let th = u[1].atan2(u[0]);
                (th - lo).min(hi - th)
            }
            DirectionHull::Chart { center, basis, polygon } => {
                match project_to_chart(center, basis, u) {
                    Ok(p) => polygon_signed_distance(polygon, p),
                    Err(_) => f64::NEG_INFINITY,
                }
            }
        }
    }

    pub fn contains(&self, u: &[f64], margin: f64) -> bool {
        self.interior_margin(u) >= margin
    }

    /// Largest angular separation between hull directions.
    pub fn angular_diameter(&self) -> f64 {
        match self {
            DirectionHull::Point => 0.0,
            DirectionHull::Arc { lo, hi } => hi - lo,
            DirectionHull::Chart { center, basis, polygon } => {
                let mut best: f64 = 0.0;
                for (i, p) in polygon.iter().enumerate() {
                    for q in polygon.iter().skip(i + 1) {
                        let a = chart_to_dir(center, basis, *p);
                        let b = chart_to_dir(center, basis, *q);
                        best = best.max(angle_between(&a, &b));
                    }
                }
                best
            }
        }
    }

    /// Deterministic interior sample directions, roughly `count` of them.
    pub fn sample_directions(&self, count: usize, margin: f64) -> Vec<Vec<f64>> {
        match self {
            DirectionHull::Point => vec![vec![1.0]],
            DirectionHull::Arc { lo, hi } => {
                let a = lo + margin;
                let b = hi - margin;
                if !(b > a) {
                    return Vec::new();
                }
                (0..count)
                    .map(|i| {
                        let th = a + (b - a) * i as f64 / (count.max(2) - 1) as f64;
                        vec![th.cos(), th.sin()]
                    })
                    .collect()
            }
            DirectionHull::Chart { center, basis, polygon } => {
                // grid over the polygon bounding box, kept where interior
                let (mut xlo, mut xhi) = (f64::INFINITY, f64::NEG_INFINITY);
                let (mut ylo, mut yhi) = (f64::INFINITY, f64::NEG_INFINITY);
                for p in polygon {
                    xlo = xlo.min(p[0]);
                    xhi = xhi.max(p[0]);
                    ylo = ylo.min(p[1]);
                    yhi = yhi.max(p[1]);
                }
                let side = (count as f64).sqrt().ceil() as usize * 2;
                let mut out = Vec::new();
                for i in 0..side {
                    for j in 0..side {
                        let p = [
                            xlo + (xhi - xlo) * (i as f64 + 0.5) / side as f64,
                            ylo + (yhi - ylo) * (j as f64 + 0.5) / side as f64,
                        ];
                        if polygon_signed_distance(polygon, p) >= margin {
                            out.push(chart_to_dir(center, basis, p));
                        }
                        if out.len() >= count {
                            return out;
                        }
                    }
                }
                out
            }
        }
    }
}

fn chart_basis(center: &[f64]) -> [Vec<f64>; 2] {
    // any two orthonormal vectors orthogonal to center
    let seed = if center[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let mut b1: Vec<f64> = (0..3).map(|i| seed[i] - dot(&seed, center) * center[i]).collect();
    b1 = normalize(&b1);
    let b2 = vec![
        center[1] * b1[2] - center[2] * b1[1],
        center[2] * b1[0] - center[0] * b1[2],
        center[0] * b1[1] - center[1] * b1[0],
    ];
    [b1, b2]
}

fn project_to_chart(
    center: &[f64],
    basis: &[Vec<f64>; 2],
    dir: &[f64],
) -> Result<[f64; 2], ConeError> {
    let c = dot(center, dir);
    if c <= 1e-6 {
        return Err(ConeError::OutsideHull(dir.to_vec()));
    }
    Ok([dot(&basis[0], dir) / c, dot(&basis[1], dir) / c])
}

fn chart_to_dir(center: &[f64], basis: &[Vec<f64>; 2], p: [f64; 2]) -> Vec<f64> {
    let v: Vec<f64> = (0..3)
        .map(|i| center[i] + p[0] * basis[0][i] + p[1] * basis[1][i])
        .collect();
    normalize(&v)
}

fn cross2(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone-chain convex hull, counter-clockwise without the closing point.
fn convex_hull_2d(points: &mut Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    points.dedup_by(|a, b| a[0] == b[0] && a[1] == b[1]);
    let n = points.len();
    if n <= 2 {
        return points.clone();
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * n);
    for &p in points.iter() {
        while hull.len() >= 2
            && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    let lower_len = hull.len() + 1;
    for &p in points.iter().rev() {
        while hull.len() >= lower_len
            && cross2(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Signed distance to a convex CCW polygon: positive inside.
fn polygon_signed_distance(polygon: &[[f64; 2]], p: [f64; 2]) -> f64 {
    if polygon.len() < 3 {
        return f64::NEG_INFINITY;
    }
    let mut min_edge = f64::INFINITY;
    let mut inside = true;
    let n = polygon.len();
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if cross2(a, b, p) < 0.0 {
            inside = false;
        }
        min_edge = min_edge.min(segment_distance(a, b, p));
    }
    if inside {
        min_edge
    } else {
        -min_edge
    }
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ap = [p[0] - a[0], p[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { ((ap[0] * ab[0] + ap[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0] - p[0], a[1] + t * ab[1] - p[1]];
    (q[0] * q[0] + q[1] * q[1]).sqrt()
}

/// One growth-indicator evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthPoint {
    pub direction: Vec<f64>,
    pub aperture: f64,
    pub value: f64,
    pub stderr: f64,
    pub records: usize,
    /// Value at half the aperture, when enough records survive: a trend
    /// diagnostic for the infimum over cones.
    pub half_aperture_value: Option<f64>,
}

/// Smallest usable aperture around `u`: wide enough to keep at least
/// `min_records` records, and never below the direction-resolution floor
/// `5 / max |mu|`. At scale `T` the `mu`-direction of a trajectory wobbles by
/// order `1/T`; an aperture of `5/max` keeps the whole fit window (which
/// starts near `0.4 * max`) above the wobble transition, below which thin
/// cones select arithmetic clusters of words and the slope inflates.
pub fn min_aperture(orbit: &Orbit, u: &[f64], min_records: usize) -> Result<f64, ConeError> {
    let mut angles: Vec<f64> = orbit
        .records()
        .skip(1)
        .filter(|r| r.mu_norm() > 0.0)
        .map(|r| {
            let n = r.mu_norm();
            let c = r.mu().iter().zip(u).map(|(m, ui)| m / n * ui).sum::<f64>();
            c.clamp(-1.0, 1.0).acos()
        })
        .collect();
    if angles.len() < min_records {
        return Err(ConeError::InsufficientData {
            direction: u.to_vec(),
            got: angles.len(),
            need: min_records,
        });
    }
    angles.sort_by(f64::total_cmp);
    let data_aperture = angles[min_records - 1] * 1.0001 + 1e-9;
    let max_norm = orbit.records().skip(1).map(|r| r.mu_norm()).fold(0.0, f64::max);
    let resolution_floor = if max_norm > 0.0 { 5.0 / max_norm } else { 0.0 };
    Ok(data_aperture.max(resolution_floor))
}

fn cone_values(orbit: &Orbit, u: &[f64], aperture: f64) -> (Vec<f64>, Vec<usize>) {
    // inclusive with a rounding guard so a degenerate zero-aperture cone
    // (k = 1, or exactly diagonal data) still sees its own direction
    let cos_ap = aperture.cos() - 1e-14;
    let mut values = Vec::new();
    let mut lens = Vec::new();
    for r in orbit.records().skip(1) {
        let n = r.mu_norm();
        if n <= 0.0 {
            continue;
        }
        let c = r.mu().iter().zip(u).map(|(m, ui)| m / n * ui).sum::<f64>();
        if c >= cos_ap {
            values.push(n);
            lens.push(r.word().len());
        }
    }
    (values, lens)
}

fn cone_window(orbit: &Orbit, values: &[f64], lens: &[usize]) -> Window {
    let max = values.iter().copied().fold(0.0, f64::max);
    let deepest = orbit.max_len();
    let mut min_deep = f64::INFINITY;
    for (&v, &l) in values.iter().zip(lens) {
        if l == deepest {
            min_deep = min_deep.min(v);
        }
    }
    // one letter step below the deepest in-cone value, as in the exponent
    // estimators; the per-letter step is bounded by max |mu| at length 1
    let mut max_step: f64 = 0.0;
    for r in orbit.records().skip(1) {
        if r.word().len() == 1 {
            max_step = max_step.max(r.mu_norm());
        } else {
            break;
        }
    }
    let hi = (0.8 * max).min(min_deep - max_step);
    if !(hi > 0.0) || hi.is_infinite() {
        return Window::Default;
    }
    let lo = (0.4 * max).min(0.5 * hi);
    Window::Explicit(lo, hi)
}

/// Growth indicator estimate over a cone: the counting slope of `|mu|` over
/// records with `mu`-direction inside it.
pub fn growth_indicator(orbit: &Orbit, cone: &ConeSpec) -> Result<GrowthPoint, ConeError> {
    if cone.direction.len() != orbit.k() {
        return Err(ConeError::BadDirection { got: cone.direction.len(), expected: orbit.k() });
    }
    let u = cone.direction.clone();
    let aperture = cone.aperture;
    let (values, lens) = cone_values(orbit, &u, aperture);
    if values.len() < MIN_CONE_RECORDS {
        return Err(ConeError::InsufficientData {
            direction: u.clone(),
            got: values.len(),
            need: MIN_CONE_RECORDS,
        });
    }
    let est = counting_exponent_min(&values, cone_window(orbit, &values, &lens), MIN_CONE_RECORDS)?;
    let half = {
        let (hv, hl) = cone_values(orbit, &u, aperture / 2.0);
        if hv.len() >= MIN_CONE_RECORDS {
            counting_exponent_min(&hv, cone_window(orbit, &hv, &hl), MIN_CONE_RECORDS)
                .ok()
                .map(|e| e.value)
        } else {
            None
        }
    };
    Ok(GrowthPoint {
        direction: u,
        aperture,
        value: est.value,
        stderr: est.stderr,
        records: values.len(),
        half_aperture_value: half,
    })
}

/// Growth indicator at `u` with the data-driven aperture floor.
pub fn growth_indicator_auto(orbit: &Orbit, u: &[f64]) -> Result<GrowthPoint, ConeError> {
    let u = normalize(u);
    let ap = min_aperture(orbit, &u, MIN_CONE_RECORDS)?;
    growth_indicator(orbit, &ConeSpec::new(&u, ap))
}

/// The growth-indicator surface sampled over hull-interior directions.
#[derive(Debug, Clone, Serialize)]
pub struct GrowthIndicatorEstimate {
    pub points: Vec<GrowthPoint>,
}

pub fn growth_surface(
    orbit: &Orbit,
    directions: &[Vec<f64>],
) -> Result<GrowthIndicatorEstimate, ConeError> {
    let points = directions
        .iter()
        .map(|u| growth_indicator_auto(orbit, u))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GrowthIndicatorEstimate { points })
}

/// Result of the maximal-growth-direction search.
#[derive(Debug, Clone, Serialize)]
pub struct MaxGrowth {
    pub direction: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
    /// Angular margin from the hull boundary.
    pub interior_margin: f64,
    /// Set when the argmax sits at the hull boundary within grid resolution,
    /// indicating a resolution or truncation problem.
    pub boundary_warning: bool,
}

/// Grid search over hull-interior directions followed by golden-section
/// refinement along great circles.
pub fn maximal_growth_direction(
    orbit: &Orbit,
    grid_resolution: usize,
) -> Result<MaxGrowth, ConeError> {
    let k = orbit.k();
    if k == 1 {
        let gp = growth_indicator_auto(orbit, &[1.0])?;
        return Ok(MaxGrowth {
            direction: vec![1.0],
            value: gp.value,
            stderr: gp.stderr,
            interior_margin: f64::INFINITY,
            boundary_warning: false,
        });
    }
    let dirs = cone_directions(orbit, 0.5 * orbit.records().map(|r| r.mu_norm()).fold(0.0, f64::max))?;
    let hull = DirectionHull::build(&dirs)?;
    let width = hull.angular_diameter();
    let margin = 0.02 * width;
    let mut candidates = hull.sample_directions(grid_resolution.max(8), margin);
    if candidates.is_empty() {
        // degenerate hull (conjugate factors): all mass on one direction
        candidates.push(normalize(&dirs[0]));
    }
    let mut best: Option<GrowthPoint> = None;
    for u in &candidates {
        if let Ok(gp) = growth_indicator_auto(orbit, u) {
            if best.as_ref().is_none_or(|b| gp.value > b.value) {
                best = Some(gp);
            }
        }
    }
    let Some(mut best) = best else {
        return Err(ConeError::InsufficientData {
            direction: vec![0.0; k],
            got: 0,
            need: MIN_CONE_RECORDS,
        });
    };
    // golden-section refinement along great circles through the best point
    let step = width / candidates.len().max(2) as f64 * 2.0;
    let tangents: Vec<Vec<f64>> = match k {
        2 => vec![vec![-best.direction[1], best.direction[0]]],
        _ => {
            let b = chart_basis(&best.direction);
            vec![b[0].clone(), b[1].clone()]
        }
    };
    for tangent in &tangents {
        let eval = |t: f64| -> Option<GrowthPoint> {
            let u: Vec<f64> = best
                .direction
                .iter()
                .zip(tangent)
                .map(|(c, d)| t.cos() * c + t.sin() * d)
                .collect();
            if !hull.contains(&normalize(&u), margin) {
                return None;
            }
            growth_indicator_auto(orbit, &u).ok()
        };
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut lo = -step;
        let mut hi = step;
        let mut c = hi - phi * (hi - lo);
        let mut d = lo + phi * (hi - lo);
        let mut fc = eval(c);
        let mut fd = eval(d);
        for _ in 0..16 {
            if hi - lo < 1e-3 {
                break;
            }
            let vc = fc.as_ref().map(|g| g.value).unwrap_or(f64::NEG_INFINITY);
            let vd = fd.as_ref().map(|g| g.value).unwrap_or(f64::NEG_INFINITY);
            if vc > vd {
                hi = d;
                d = c;
                fd = fc;
                c = hi - phi * (hi - lo);
                fc = eval(c);
            } else {
                lo = c;
                c = d;
                fc = fd;
                d = lo + phi * (hi - lo);
                fd = eval(d);
            }
        }
        for f in [fc, fd].into_iter().flatten() {
            if f.value > best.value {
                best = f;
            }
        }
    }
    let interior_margin = hull.interior_margin(&best.direction);
    let grid_step = width / candidates.len().max(2) as f64;
    Ok(MaxGrowth {
        direction: best.direction.clone(),
        value: best.value,
        stderr: best.stderr,
        interior_margin,
        boundary_warning: interior_margin < 2.0 * grid_step.max(margin),
    })
}

/// One stencil point of a tangent-form fit.
#[derive(Debug, Clone, Serialize)]
pub struct StencilPoint {
    pub direction: Vec<f64>,
    pub value: f64,
    pub stderr: f64,
}

/// The tangent linear form at `u` with its fitting diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct TangentForm {
    pub form: LinearForm,
    pub value_at_u: f64,
    pub stencil: Vec<StencilPoint>,
    /// Abscissa of `sum exp(-s psi_u(mu))`; near 1 when the fit is sound.
    pub abscissa: ExponentEstimate,
}

/// Supporting-hyperplane fit of the tangent form at `u`: least squares on a
/// local direction stencil subject to `psi(u) = psi_hat(u)` and
/// `psi >= psi_hat - stderr` on the stencil.
pub fn tangent_form(orbit: &Orbit, u: &[f64]) -> Result<TangentForm, ConeError> {
    tangent_form_with_step(orbit, u, DEFAULT_STENCIL_STEP)
}

pub fn tangent_form_with_step(
    orbit: &Orbit,
    u: &[f64],
    step: f64,
) -> Result<TangentForm, ConeError> {
    let k = orbit.k();
    let u = normalize(u);
    let at_u = growth_indicator_auto(orbit, &u)?;
    if k == 1 {
        let form = LinearForm::new(vec![at_u.value]);
        let absc = crate::exponents::abscissa(orbit, &form.coeffs)?;
        return Ok(TangentForm {
            form,
            value_at_u: at_u.value,
            stencil: vec![StencilPoint {
                direction: u,
                value: at_u.value,
                stderr: at_u.stderr,
            }],
            abscissa: absc,
        });
    }

    // stencil directions around u
    let offsets: Vec<Vec<f64>> = match k {
        2 => {
            let t = vec![-u[1], u[0]];
            [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]
                .iter()
                .map(|&s| {
                    let a = s * step;
                    u.iter().zip(&t).map(|(c, d)| a.cos() * c + a.sin() * d).collect()
                })
                .collect()
        }
        3 => {
            let b = chart_basis(&u);
            let mut out = Vec::new();
            for &radius in &[0.5 * step, step] {
                for j in 0..8 {
                    let th = std::f64::consts::TAU * j as f64 / 8.0;
                    let dir: Vec<f64> = (0..3)
                        .map(|i| {
                            u[i] * radius.cos()
                                + radius.sin() * (th.cos() * b[0][i] + th.sin() * b[1][i])
                        })
                        .collect();
                    out.push(normalize(&dir));
                }
            }
            out
        }
        k => return Err(ConeError::UnsupportedRank(k)),
    };

    let mut stencil = Vec::new();
    for dir in &offsets {
        if let Ok(gp) = growth_indicator_auto(orbit, dir) {
            stencil.push(StencilPoint {
                direction: gp.direction.clone(),
                value: gp.value,
                stderr: gp.stderr,
            });
        }
    }
    if stencil.len() < k {
        return Err(ConeError::TangentInfeasible(format!(
            "only {} usable stencil directions",
            stencil.len()
        )));
    }

    // eliminate the equality constraint: c = value * u + B y, y in R^{k-1}
    let basis: Vec<Vec<f64>> = match k {
        2 => vec![vec![-u[1], u[0]]],
        _ => {
            let b = chart_basis(&u);
            vec![b[0].clone(), b[1].clone()]
        }
    };
    let m = k - 1;
    let rows: Vec<Vec<f64>> = stencil
        .iter()
        .map(|s| basis.iter().map(|b| dot(b, &s.direction)).collect())
        .collect();
    let targets: Vec<f64> = stencil
        .iter()
        .map(|s| s.value - at_u.value * dot(&u, &s.direction))
        .collect();
    let bounds: Vec<f64> = stencil
        .iter()
        .zip(&targets)
        .map(|(s, t)| t - s.stderr)
        .collect();

    let objective = |y: &[f64]| -> f64 {
        rows.iter()
            .zip(&targets)
            .map(|(row, t)| {
                let r = dot(row, y) - t;
                r * r
            })
            .sum()
    };
    let feasible = |y: &[f64]| -> bool {
        rows.iter().zip(&bounds).all(|(row, b)| dot(row, y) >= b - 1e-9)
    };

    // exact tiny QP by enumerating active subsets of size <= k-1
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    if let Some(y) = lstsq(&rows, &targets, m) {
        candidates.push(y);
    }
    let n_c = rows.len();
    for i in 0..n_c {
        if let Some(y) = constrained_lstsq(&rows, &targets, m, &[(i, bounds[i])]) {
            candidates.push(y);
        }
        if m >= 2 {
            for j in i + 1..n_c {
                if let Some(y) =
                    constrained_lstsq(&rows, &targets, m, &[(i, bounds[i]), (j, bounds[j])])
                {
                    candidates.push(y);
                }
            }
        }
    }
    let best = candidates
        .into_iter()
        .filter(|y| feasible(y))
        .min_by(|a, b| objective(a).total_cmp(&objective(b)));
    let Some(y) = best else {
        return Err(ConeError::TangentInfeasible(
            "no supporting hyperplane satisfies the stencil constraints".into(),
        ));
    };

    let coeffs: Vec<f64> = (0..k)
        .map(|i| at_u.value * u[i] + (0..m).map(|j| y[j] * basis[j][i]).sum::<f64>())
        .collect();
    let form = LinearForm::new(coeffs);
    let absc = crate::exponents::abscissa(orbit, &form.coeffs)?;
    Ok(TangentForm { form, value_at_u: at_u.value, stencil, abscissa: absc })
}

/// Unconstrained least squares via normal equations (m <= 2).
fn lstsq(rows: &[Vec<f64>], targets: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut ata = vec![vec![0.0; m]; m];
    let mut atb = vec![0.0; m];
    for (row, &t) in rows.iter().zip(targets) {
        for i in 0..m {
            for j in 0..m {
                ata[i][j] += row[i] * row[j];
            }
            atb[i] += row[i] * t;
        }
    }
    solve_small(&ata, &atb)
}

/// Least squares subject to equality constraints `row_i . y = b_i` via KKT.
fn constrained_lstsq(
    rows: &[Vec<f64>],
    targets: &[f64],
    m: usize,
    active: &[(usize, f64)],
) -> Option<Vec<f64>> {
    let na = active.len();
    if na > m {
        return None;
    }
    let dim = m + na;
    let mut kkt = vec![vec![0.0; dim]; dim];
    let mut rhs = vec![0.0; dim];
    for (row, &t) in rows.iter().zip(targets) {
        for i in 0..m {
            for j in 0..m {
                kkt[i][j] += row[i] * row[j];
            }
            rhs[i] += row[i] * t;
        }
    }
    for (a, &(idx, b)) in active.iter().enumerate() {
        for i in 0..m {
            kkt[i][m + a] = 0.5 * rows[idx][i];
            kkt[m + a][i] = rows[idx][i];
        }
        rhs[m + a] = b;
    }
    solve_small(&kkt, &rhs).map(|mut y| {
        y.truncate(m);
        y
    })
}

/// Gaussian elimination for systems up to 4x4.
fn solve_small(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().map(|r| r.clone()).collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                for j in col..n {
                    m[row][j] -= f * m[col][j];
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Lower envelope of `min_i mu_i / |mu|` binned by `|mu|`; the interior-cone
/// diagnostic behind the deep-word property.
pub fn interior_cone_envelope(orbit: &Orbit, bins: usize) -> Vec<(f64, f64, usize)> {
    let max = orbit.records().skip(1).map(|r| r.mu_norm()).fold(0.0, f64::max);
    let mut out: Vec<(f64, f64, usize)> =
        (0..bins).map(|i| (max * (i + 1) as f64 / bins as f64, f64::INFINITY, 0)).collect();
    for r in orbit.records().skip(1) {
        let n = r.mu_norm();
        if n <= 0.0 {
            continue;
        }
        let idx = (((n / max) * bins as f64).ceil() as usize).clamp(1, bins) - 1;
        let ratio = r.min_mu() / n;
        out[idx].1 = out[idx].1.min(ratio);
        out[idx].2 += 1;
    }
    out.retain(|&(_, _, c)| c > 0);
    out
}

/// Homogeneous-concavity violations on a k = 2 surface grid: for grid
/// triples `(u, m, v)` with `m` the midpoint direction, concavity demands
/// `|u+v|/2 * psi(m) >= (psi(u) + psi(v))/2` up to noise.
pub fn concavity_violations(points: &[GrowthPoint], tolerance_sigmas: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    let n = points.len();
    for spread in 1..=(n.saturating_sub(1)) / 2 {
        for i in spread..n - spread {
            let (a, m, b) = (&points[i - spread], &points[i], &points[i + spread]);
            let half_norm = {
                let s: Vec<f64> =
                    a.direction.iter().zip(&b.direction).map(|(x, y)| x + y).collect();
                0.5 * s.iter().map(|x| x * x).sum::<f64>().sqrt()
            };
            let sigma = a.stderr.max(b.stderr).max(m.stderr);
            let defect = 0.5 * (a.value + b.value) - half_norm * m.value;
            if defect > tolerance_sigmas * sigma {
                out.push((i, defect));
            }
        }
    }
    out
}

/// Quasi-linear regression slope of one coordinate of `mu` against another;
/// used by covering-regression style diagnostics.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    line_fit(xs, ys).map(|l| l.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{AxisSpec, CapPolicy, SchottkyRep};
    use crate::hyperbolic::BoundaryDir;
    use crate::joining::{enumerate_orbit, OrbitOptions, SelfJoining};
    use std::sync::OnceLock;

    fn rep(lengths: &[f64]) -> SchottkyRep {
        let axes: Vec<AxisSpec> = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| AxisSpec {
                minus: BoundaryDir::unit(2, i).neg(),
                plus: BoundaryDir::unit(2, i),
                length: l,
            })
            .collect();
        SchottkyRep::from_axes(2, &axes, CapPolicy::Auto { margin_min: 0.02 }).unwrap()
    }

    fn asym_orbit() -> &'static Orbit {
        static ORBIT: OnceLock<Orbit> = OnceLock::new();
        ORBIT.get_or_init(|| {
            let j = SelfJoining::new(vec![rep(&[2.1, 3.3]), rep(&[4.5, 2.2])], vec![]).unwrap();
            enumerate_orbit(&j, 10, &OrbitOptions::default()).unwrap()
        })
    }

    fn conj_orbit() -> &'static Orbit {
        static ORBIT: OnceLock<Orbit> = OnceLock::new();
        ORBIT.get_or_init(|| {
            let r = rep(&[2.2, 3.0]);
            let j = SelfJoining::new(vec![r.clone(), r], vec![]).unwrap();
            enumerate_orbit(&j, 10, &OrbitOptions::default()).unwrap()
        })
    }

    #[test]
    fn cone_directions_basics() {
        // k = 1: every direction is (1)
        let j1 = SelfJoining::new(vec![rep(&[2.2, 3.0])], vec![]).unwrap();
        let o1 = enumerate_orbit(&j1, 6, &OrbitOptions::default()).unwrap();
        for d in cone_directions(&o1, 1.0).unwrap() {
            assert!((d[0] - 1.0).abs() < 1e-12);
        }
        // conjugate joining: everything on the diagonal
        let diag = std::f64::consts::FRAC_1_SQRT_2;
        for d in cone_directions(conj_orbit(), 5.0).unwrap() {
            assert!((d[0] - diag).abs() < 1e-6 && (d[1] - diag).abs() < 1e-6);
        }
        assert!(matches!(cone_directions(conj_orbit(), 1e9), Err(ConeError::EmptyCone(_))));
    }

    #[test]
    fn hull_has_interior_for_nonconjugate_pair() {
        let orbit = asym_orbit();
        let floor = 0.5 * orbit.records().map(|r| r.mu_norm()).fold(0.0, f64::max);
        let dirs = cone_directions(orbit, floor).unwrap();
        let hull = DirectionHull::build(&dirs).unwrap();
        assert!(
            hull.angular_diameter() >= 0.05,
            "hull too thin: {}",
            hull.angular_diameter()
        );
        // the diagonal is interior for this fixture (axis-length ratios
        // straddle 1)
        let diag = vec![std::f64::consts::FRAC_1_SQRT_2; 2];
        assert!(hull.contains(&diag, 0.01), "margin {}", hull.interior_margin(&diag));
    }

    #[test]
    fn growth_indicator_monotone_in_aperture() {
        let orbit = asym_orbit();
        let u = normalize(&[1.0, 1.0]);
        let small = growth_indicator(orbit, &ConeSpec::new(&u, 0.08)).unwrap();
        let large = growth_indicator(orbit, &ConeSpec::new(&u, 0.16)).unwrap();
        assert!(
            small.value <= large.value + small.stderr + large.stderr + 0.02,
            "aperture monotonicity: {} vs {}",
            small.value,
            large.value
        );
        assert!(small.records < large.records);
    }

    #[test]
    fn growth_indicator_insufficient_data() {
        let orbit = asym_orbit();
        // direction far outside the cone
        let u = normalize(&[0.02, 1.0]);
        assert!(matches!(
            growth_indicator(orbit, &ConeSpec::new(&u, 0.02)),
            Err(ConeError::InsufficientData { .. })
        ));
    }

    #[test]
    fn conjugate_diagonal_growth_equals_joint_delta() {
        let orbit = conj_orbit();
        let u = normalize(&[1.0, 1.0]);
        let gp = growth_indicator(orbit, &ConeSpec::new(&u, 0.3)).unwrap();
        let jd = crate::exponents::joint_delta(orbit).unwrap();
        assert!(
            (gp.value - jd.value).abs() < 0.05,
            "psi(diag) {} vs joint delta {}",
            gp.value,
            jd.value
        );
    }

    #[test]
    fn maximal_growth_k1_and_conjugate() {
        let j1 = SelfJoining::new(vec![rep(&[2.2, 3.0])], vec![]).unwrap();
        let o1 = enumerate_orbit(&j1, 10, &OrbitOptions::default()).unwrap();
        let mg = maximal_growth_direction(&o1, 16).unwrap();
        assert_eq!(mg.direction, vec![1.0]);

        let mg2 = maximal_growth_direction(conj_orbit(), 24).unwrap();
        let diag = std::f64::consts::FRAC_1_SQRT_2;
        let ang = angle_between(&mg2.direction, &[diag, diag]);
        assert!(ang < 0.06, "conjugate joining argmax off-diagonal by {ang}");
    }

    #[test]
    fn maximal_growth_matches_joint_delta() {
        let orbit = asym_orbit();
        let mg = maximal_growth_direction(orbit, 32).unwrap();
        let jd = crate::exponents::joint_delta(orbit).unwrap();
        assert!(!mg.boundary_warning, "argmax on hull boundary");
        assert!(
            (mg.value - jd.value).abs() <= 0.07,
            "psi(u_max) {} vs delta {}",
            mg.value,
            jd.value
        );
    }

    #[test]
    fn tangent_form_conjugate_symmetry() {
        let orbit = conj_orbit();
        let u = normalize(&[1.0, 1.0]);
        let tf = tangent_form(orbit, &u).unwrap();
        // symmetry forces equal coefficients; the value is pinned by
        // psi(u) = psi_hat(u), so each coefficient is psi_hat(u)/sqrt(2)
        let expect = tf.value_at_u / 2f64.sqrt();
        assert!(
            (tf.form.coeffs[0] - tf.form.coeffs[1]).abs() < 0.05,
            "coeffs {:?}",
            tf.form.coeffs
        );
        assert!(
            (tf.form.coeffs[0] - expect).abs() < 0.05,
            "coeff {} vs pinned {}",
            tf.form.coeffs[0],
            expect
        );
        // tangency at u is exact by construction
        assert!((tf.form.apply(&u) - tf.value_at_u).abs() < 1e-9);
        // Poincare-type series abscissa near 1
        assert!(
            tf.abscissa.value > 0.9 && tf.abscissa.value < 1.1,
            "abscissa {}",
            tf.abscissa.value
        );
    }

    #[test]
    fn tangent_form_supports_surface() {
        let orbit = asym_orbit();
        let mg = maximal_growth_direction(orbit, 24).unwrap();
        let tf = tangent_form(orbit, &mg.direction).unwrap();
        for s in &tf.stencil {
            assert!(
                tf.form.apply(&s.direction) >= s.value - 2.0 * s.stderr,
                "tangent dips below the surface at {:?}",
                s.direction
            );
        }
        assert!(tf.abscissa.value > 0.85 && tf.abscissa.value < 1.15);
    }

    #[test]
    fn interior_cone_envelope_positive_and_stable() {
        let orbit = asym_orbit();
        let env = interior_cone_envelope(orbit, 10);
        let max = env.last().unwrap().0;
        for &(hi, ratio, _) in &env {
            if hi >= 0.8 * max {
                assert!(ratio >= 0.1, "deep envelope {ratio} at {hi}");
            }
        }
        // nondecreasing beyond the small-word regime
        let deep: Vec<f64> =
            env.iter().filter(|&&(hi, _, _)| hi >= 0.5 * max).map(|&(_, r, _)| r).collect();
        for w in deep.windows(2) {
            assert!(w[1] >= w[0] - 0.02, "envelope dips: {w:?}");
        }
    }

    #[test]
    fn concavity_on_surface_grid() {
        let orbit = asym_orbit();
        let floor = 0.5 * orbit.records().map(|r| r.mu_norm()).fold(0.0, f64::max);
        let hull = DirectionHull::build(&cone_directions(orbit, floor).unwrap()).unwrap();
        let dirs = hull.sample_directions(15, 0.02 * hull.angular_diameter());
        let surface = growth_surface(orbit, &dirs).unwrap();
        let violations = concavity_violations(&surface.points, 2.0);
        assert!(
            violations.is_empty(),
            "concavity violations beyond 2 sigma: {violations:?}"
        );
        // nonnegative on the hull interior
        for p in &surface.points {
            assert!(p.value >= -p.stderr, "psi negative at {:?}", p.direction);
        }
    }

    #[test]
    fn hull_chart_roundtrip_k3() {
        let dirs: Vec<Vec<f64>> = vec![
            normalize(&[1.0, 1.0, 1.0]),
            normalize(&[2.0, 1.0, 1.0]),
            normalize(&[1.0, 2.0, 1.0]),
            normalize(&[1.0, 1.0, 2.0]),
            normalize(&[1.3, 1.2, 1.1]),
        ];
        let hull = DirectionHull::build(&dirs).unwrap();
        let centroid = normalize(&[1.3, 1.25, 1.25]);
        assert!(hull.contains(&centroid, 0.0));
        let outside = normalize(&[5.0, 1.0, 1.0]);
        assert!(!hull.contains(&outside, 0.0));
        let samples = hull.sample_directions(50, 1e-4);
        assert!(!samples.is_empty());
        for s in &samples {
            assert!(hull.contains(s, 0.0));
        }
    }
}
