//! Boundary sampling: limit-set samples on the product of spheres, product
//! shadows, directional families, and directional-limit-set samples.
//!
//! Two sampling modes approximate the limit set: radial projections of the
//! deepest orbit points (accurate to `e^{-min mu}`), and tuples of attracting
//! fixed points (exact limit-set members). Directional samples select fixed
//! points of records whose per-factor translation-length vector points near
//! the target direction; the product shadow of a record is the tuple of
//! per-factor shadow caps, which brackets the joint-metric shadow between
//! radii `R/sqrt(k)` and `R`.

use crate::fit::line_fit;
use crate::hyperbolic::{Cap, GeomError};
use crate::joining::{mu_norm, Orbit, OrbitRecordRef};
use serde::Serialize;
use thiserror::Error;

/// Minimum orbit depth for limit-set sampling.
pub const MIN_SAMPLE_DEPTH: usize = 8;
/// Fewest directional samples accepted by the dimension pipeline.
pub const MIN_DIRECTIONAL_SAMPLES: usize = 100;
/// Default angular tolerance for directional sampling, radians.
pub const DEFAULT_TOL_ANGLE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("orbit depth {0} below the sampling minimum {MIN_SAMPLE_DEPTH}")]
    OrbitTooShallow(usize),
    #[error("orbit carries no Jordan data (re-enumerate with jordan = true)")]
    MissingJordan,
    #[error("record {0} has min mu {1:.3} <= shadow radius {2}")]
    DegenerateShadow(usize, f64, f64),
    #[error("empty directional family for u = {0:?}, N = {1}")]
    EmptyFamily(Vec<f64>, f64),
    #[error("geometry error: {0}")]
    Geometry(#[from] GeomError),
}

/// A point of the product boundary: one unit vector per factor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductBoundaryPoint {
    pub dirs: Vec<Vec<f64>>,
}

impl ProductBoundaryPoint {
    /// Product angular distance `sqrt(sum_i angle_i^2)`. Angles come from
    /// the chord, `2 asin(|a-b|/2)`, which stays precise at small
    /// separations where `arccos` of the dot product floors at `sqrt(eps)`.
    pub fn dist(&self, other: &ProductBoundaryPoint) -> f64 {
        self.dirs
            .iter()
            .zip(&other.dirs)
            .map(|(a, b)| {
                let chord: f64 = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum::<f64>()
                    .sqrt();
                let th = 2.0 * (0.5 * chord).clamp(-1.0, 1.0).asin();
                th * th
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// A product of per-factor caps.
#[derive(Debug, Clone)]
pub struct CapProduct {
    pub caps: Vec<Cap>,
}

impl CapProduct {
    pub fn contains(&self, p: &ProductBoundaryPoint) -> bool {
        self.caps.iter().zip(&p.dirs).all(|(cap, d)| {
            let c: f64 = cap.center.coords().iter().zip(d).map(|(x, y)| x * y).sum();
            c.clamp(-1.0, 1.0).acos() <= cap.angular_radius
        })
    }
}

/// How limit-set samples are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    /// Radial projections of the deepest orbit points.
    Orbit,
    /// Attracting-fixed-point tuples (requires Jordan data).
    Fixed,
}

#[derive(Debug, Clone)]
pub struct LimitSetSample {
    pub points: Vec<ProductBoundaryPoint>,
    /// Orbit record index each point came from.
    pub sources: Vec<usize>,
    /// Set when fewer records were available than requested.
    pub truncated: bool,
    /// Smallest `min mu` among the sampled records: the angular accuracy
    /// scale `e^{-min mu}` of orbit-mode samples.
    pub min_depth_scale: f64,
}

/// Indices of the `count` records deepest in `min mu`, deterministic order.
fn deepest_records(orbit: &Orbit, count: usize) -> (Vec<usize>, bool) {
    let mut idx: Vec<usize> = (1..orbit.len()).collect();
    idx.sort_by(|&a, &b| {
        let da = orbit.record(a).min_mu();
        let db = orbit.record(b).min_mu();
        db.total_cmp(&da).then(a.cmp(&b))
    });
    let truncated = count > idx.len();
    idx.truncate(count);
    (idx, truncated)
}

fn point_from_dirs(rec: &OrbitRecordRef<'_>, k: usize) -> ProductBoundaryPoint {
    ProductBoundaryPoint {
        dirs: (0..k).map(|i| rec.dir(i).expect("nonempty record").to_vec()).collect(),
    }
}

fn point_from_jordan(rec: &OrbitRecordRef<'_>, k: usize) -> ProductBoundaryPoint {
    ProductBoundaryPoint {
        dirs: (0..k).map(|i| rec.jordan_dir(i).expect("jordan data present").to_vec()).collect(),
    }
}

/// Limit-set sample of the requested mode, taken from the deepest records.
pub fn sample_limit_set(
    orbit: &Orbit,
    mode: SampleMode,
    count: usize,
) -> Result<LimitSetSample, BoundaryError> {
    if orbit.max_len() < MIN_SAMPLE_DEPTH {
        return Err(BoundaryError::OrbitTooShallow(orbit.max_len()));
    }
    if mode == SampleMode::Fixed && !orbit.has_jordan() {
        return Err(BoundaryError::MissingJordan);
    }
    let k = orbit.k();
    let (indices, truncated) = deepest_records(orbit, count);
    let mut min_depth_scale = f64::INFINITY;
    let mut points = Vec::with_capacity(indices.len());
    for &i in &indices {
        let rec = orbit.record(i);
        min_depth_scale = min_depth_scale.min(rec.min_mu());
        points.push(match mode {
            SampleMode::Orbit => point_from_dirs(&rec, k),
            SampleMode::Fixed => point_from_jordan(&rec, k),
        });
    }
    Ok(LimitSetSample { points, sources: indices, truncated, min_depth_scale })
}

/// Per-factor shadow caps of one record at joint radius `R`: factor `i` gets
/// the cap of directions whose ray passes within `R` of `gamma_i o_i`, with
/// radius `arcsin(sinh R / sinh mu_i)`.
pub fn shadow_product(rec: &OrbitRecordRef<'_>, r: f64) -> Result<CapProduct, BoundaryError> {
    let mu = rec.mu();
    let m = crate::joining::min_mu(mu);
    if m <= r {
        return Err(BoundaryError::DegenerateShadow(rec.index, m, r));
    }
    let mut caps = Vec::with_capacity(mu.len());
    for (i, &mi) in mu.iter().enumerate() {
        let center = crate::hyperbolic::BoundaryDir::from_slice(
            rec.dir(i).expect("nonempty record"),
        )?;
        let radius = (r.sinh() / mi.sinh()).clamp(-1.0, 1.0).asin();
        caps.push(Cap::new(center, radius)?);
    }
    Ok(CapProduct { caps })
}

/// One member of a directional family.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FamilyMember {
    pub record: usize,
    /// The minimizing projection parameter `t = <mu, u>`.
    pub t: f64,
}

/// Records within additive distance `N` of the ray `R_+ u`.
#[derive(Debug, Clone)]
pub struct DirectionalFamily {
    pub u: Vec<f64>,
    pub n_bound: f64,
    pub members: Vec<FamilyMember>,
}

/// The family `{gamma : |mu(gamma) - t u| <= N for some t > 0}` with
/// `t = <mu, u>`, the minimizing choice. An empty result is valid for `u`
/// outside the limit cone.
pub fn directional_family(orbit: &Orbit, u: &[f64], n_bound: f64) -> DirectionalFamily {
    let mut un = u.to_vec();
    let norm = mu_norm(&un);
    for x in &mut un {
        *x /= norm;
    }
    let mut members = Vec::new();
    for rec in orbit.records().skip(1) {
        let mu = rec.mu();
        let t: f64 = mu.iter().zip(&un).map(|(m, ui)| m * ui).sum();
        if t <= 0.0 {
            continue;
        }
        let dev: f64 = mu
            .iter()
            .zip(&un)
            .map(|(m, ui)| {
                let d = m - t * ui;
                d * d
            })
            .sum::<f64>()
            .sqrt();
        if dev <= n_bound {
            members.push(FamilyMember { record: rec.index, t });
        }
    }
    DirectionalFamily { u: un, n_bound, members }
}

#[derive(Debug, Clone)]
pub struct DirectionalSample {
    pub points: Vec<ProductBoundaryPoint>,
    pub sources: Vec<usize>,
    /// Set when fewer than [`MIN_DIRECTIONAL_SAMPLES`] points were found;
    /// dimension estimates downstream refuse such samples.
    pub insufficient: bool,
}

/// Approximate members of the directional limit set: attracting-fixed-point
/// tuples of records whose normalized translation-length vector lies within
/// `tol_angle` of `u`. Membership is exact only at `tol_angle = 0`.
pub fn sample_directional(
    orbit: &Orbit,
    u: &[f64],
    tol_angle: f64,
) -> Result<DirectionalSample, BoundaryError> {
    if !orbit.has_jordan() {
        return Err(BoundaryError::MissingJordan);
    }
    let k = orbit.k();
    let mut un = u.to_vec();
    let norm = mu_norm(&un);
    for x in &mut un {
        *x /= norm;
    }
    let cos_tol = tol_angle.cos() - 1e-14;
    let mut points = Vec::new();
    let mut sources = Vec::new();
    for rec in orbit.records().skip(1) {
        let lens = rec.jordan_lens().expect("jordan data present");
        let ln = mu_norm(lens);
        if ln <= 0.0 {
            continue;
        }
        let c: f64 = lens.iter().zip(&un).map(|(l, ui)| l / ln * ui).sum();
        if c >= cos_tol {
            points.push(point_from_jordan(&rec, k));
            sources.push(rec.index);
        }
    }
    let insufficient = points.len() < MIN_DIRECTIONAL_SAMPLES;
    Ok(DirectionalSample { points, sources, insufficient })
}

/// Per-factor regression of log cap radius against the family parameter.
#[derive(Debug, Clone, Serialize)]
pub struct RadiusRegression {
    pub factor: usize,
    pub slope: f64,
    pub samples: usize,
}

#[derive(Debug, Clone)]
pub struct CoveringReport {
    pub caps: Vec<CapProduct>,
    pub member_t: Vec<f64>,
    /// Fraction of the directional sample covered by at least one cap
    /// product.
    pub coverage_fraction: f64,
    pub uncovered: Vec<usize>,
    pub radius_regressions: Vec<RadiusRegression>,
}

/// Shadow cover of a directional sample: shadow products over the family
/// `Gamma_N(u)` restricted to `min mu > R`, with the empirical coverage
/// fraction of the sample and the per-factor radius scaling `~ e^{-u_i t}`.
pub fn covering_family(
    orbit: &Orbit,
    u: &[f64],
    n_bound: f64,
    r: f64,
    sample: &DirectionalSample,
) -> Result<CoveringReport, BoundaryError> {
    let family = directional_family(orbit, u, n_bound);
    if family.members.is_empty() {
        return Err(BoundaryError::EmptyFamily(family.u, n_bound));
    }
    let mut caps = Vec::new();
    let mut member_t = Vec::new();
    for m in &family.members {
        let rec = orbit.record(m.record);
        if rec.min_mu() > r {
            caps.push(shadow_product(&rec, r)?);
            member_t.push(m.t);
        }
    }
    if caps.is_empty() {
        return Err(BoundaryError::EmptyFamily(family.u, n_bound));
    }
    // big caps first: shallow members cover most points quickly
    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by(|&a, &b| member_t[a].total_cmp(&member_t[b]));

    let mut uncovered = Vec::new();
    let mut covered = 0usize;
    for (pi, p) in sample.points.iter().enumerate() {
        if order.iter().any(|&ci| caps[ci].contains(p)) {
            covered += 1;
        } else {
            uncovered.push(pi);
        }
    }
    let coverage_fraction = if sample.points.is_empty() {
        1.0
    } else {
        covered as f64 / sample.points.len() as f64
    };

    // regress on a middle window of the family parameter: near min_mu ~ R
    // the cap radius leaves the e^{-mu} asymptotic, at small t the additive
    // band admits direction-deviant members, and near the truncation ceiling
    // only the fastest-growing letter mixes reach, skewing the deviations
    let t_max = member_t.iter().copied().fold(0.0, f64::max);
    let deep: Vec<usize> = (0..caps.len())
        .filter(|&i| member_t[i] >= 0.45 * t_max && member_t[i] <= 0.7 * t_max)
        .collect();
    let k = orbit.k();
    let radius_regressions = (0..k)
        .map(|factor| {
            let xs: Vec<f64> = deep.iter().map(|&i| member_t[i]).collect();
            let ys: Vec<f64> =
                deep.iter().map(|&i| caps[i].caps[factor].angular_radius.ln()).collect();
            let slope = line_fit(&xs, &ys).map(|l| l.slope).unwrap_or(f64::NAN);
            RadiusRegression { factor, slope, samples: ys.len() }
        })
        .collect();

    Ok(CoveringReport { caps, member_t, coverage_fraction, uncovered, radius_regressions })
}

/// One-sided Hausdorff distance from `from` to `to` in the product angular
/// metric.
pub fn hausdorff_one_sided(from: &[ProductBoundaryPoint], to: &[ProductBoundaryPoint]) -> f64 {
    from.iter()
        .map(|p| {
            to.iter()
                .map(|q| p.dist(q))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance.
pub fn hausdorff(a: &[ProductBoundaryPoint], b: &[ProductBoundaryPoint]) -> f64 {
    hausdorff_one_sided(a, b).max(hausdorff_one_sided(b, a))
}
