//! Truncated Patterson-Sullivan measures.
//!
//! The measure `nu_{u,s}` places an atom at the boundary projection of every
//! orbit point, weighted by `exp(-s psi_u(mu(gamma)))` and normalized. As
//! `s -> 1+` together with growing depth, these converge weakly to the
//! Patterson-Sullivan measure for the direction `u`; the default truncation
//! schedule couples `s = 1 + 2/L` to the orbit depth. Conformality and the
//! shadow lemma are checked empirically against the cocycle predictions.

use crate::boundary::{shadow_product, CapProduct, ProductBoundaryPoint};
use crate::cone::LinearForm;
use crate::exponents::EstimateError;
use crate::hyperbolic::HPoint;
use crate::joining::{min_mu, Orbit, SelfJoining};
use serde::Serialize;
use thiserror::Error;

/// Fewest atoms a cell must hold for a conformality or shadow ratio.
pub const MIN_CELL_ATOMS: usize = 20;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("tangent form failed abscissa validation: {0:.3} outside [0.9, 1.1]")]
    FormNotValidated(f64),
    #[error("truncation parameter s = {0} outside (1, 1.5]")]
    BadTruncation(f64),
    #[error("estimate error: {0}")]
    Estimate(#[from] EstimateError),
    #[error("cell holds {got} atoms, need {need}")]
    SkippedCell { got: usize, need: usize },
    #[error("shadow radius {0} too small: no record kept >= {MIN_CELL_ATOMS} atoms in shadow")]
    RTooSmall(f64),
    #[error("group error: {0}")]
    Group(#[from] crate::group::GroupError),
    #[error("boundary error: {0}")]
    Boundary(#[from] crate::boundary::BoundaryError),
}

#[derive(Debug, Clone, Serialize)]
pub struct MeasureMeta {
    pub u: Vec<f64>,
    pub s: f64,
    pub depth: usize,
    pub form: LinearForm,
}

/// A weighted atomic measure on the product of spheres.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    dims: Vec<usize>,
    offsets: Vec<usize>,
    total_dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
    /// Orbit record index behind each atom.
    pub sources: Vec<usize>,
    pub meta: MeasureMeta,
}

impl EmpiricalMeasure {
    /// Assemble a measure from explicit atoms; weights are normalized.
    /// Used for synthetic reference measures (uniform, single-atom).
    pub fn from_atoms(
        dims: Vec<usize>,
        points: &[ProductBoundaryPoint],
        weights: Vec<f64>,
        meta: MeasureMeta,
    ) -> Self {
        assert_eq!(points.len(), weights.len());
        let total_dim: usize = dims.iter().sum();
        let mut offsets = Vec::with_capacity(dims.len());
        let mut acc = 0;
        for &d in &dims {
            offsets.push(acc);
            acc += d;
        }
        let mut atoms = Vec::with_capacity(points.len() * total_dim);
        for p in points {
            for d in &p.dirs {
                atoms.extend_from_slice(d);
            }
        }
        let total: f64 = weights.iter().sum();
        let weights = weights.into_iter().map(|w| w / total).collect();
        EmpiricalMeasure {
            dims,
            offsets,
            total_dim,
            atoms,
            weights,
            sources: (0..points.len()).collect(),
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn weight(&self, atom: usize) -> f64 {
        self.weights[atom]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn atom_dir(&self, atom: usize, factor: usize) -> &[f64] {
        let off = atom * self.total_dim + self.offsets[factor];
        &self.atoms[off..off + self.dims[factor]]
    }

    pub fn point(&self, atom: usize) -> ProductBoundaryPoint {
        ProductBoundaryPoint {
            dirs: (0..self.k()).map(|f| self.atom_dir(atom, f).to_vec()).collect(),
        }
    }

    /// Mass inside a cap product.
    pub fn mass(&self, caps: &CapProduct) -> f64 {
        self.mass_and_atoms(caps).0
    }

    /// Mass and atom count inside a cap product.
    pub fn mass_and_atoms(&self, caps: &CapProduct) -> (f64, usize) {
        let cos_r: Vec<f64> = caps.caps.iter().map(|c| c.angular_radius.cos()).collect();
        let centers: Vec<&[f64]> =
            caps.caps.iter().map(|c| c.center.coords().as_slice()).collect();
        let mut mass = 0.0;
        let mut count = 0usize;
        'atoms: for a in 0..self.len() {
            for f in 0..self.k() {
                let d = self.atom_dir(a, f);
                let dot: f64 = d.iter().zip(centers[f]).map(|(x, y)| x * y).sum();
                if dot < cos_r[f] {
                    continue 'atoms;
                }
            }
            mass += self.weights[a];
            count += 1;
        }
        (mass, count)
    }

    /// Atom indices inside a cap product.
    pub fn atoms_in(&self, caps: &CapProduct) -> Vec<usize> {
        let cos_r: Vec<f64> = caps.caps.iter().map(|c| c.angular_radius.cos()).collect();
        let mut out = Vec::new();
        'atoms: for a in 0..self.len() {
            for f in 0..self.k() {
                let d = self.atom_dir(a, f);
                let c = &caps.caps[f].center;
                let dot: f64 = d.iter().zip(c.coords().as_slice()).map(|(x, y)| x * y).sum();
                if dot < cos_r[f] {
                    continue 'atoms;
                }
            }
            out.push(a);
        }
        out
    }
}

/// Default truncation schedule `s = 1 + 2 / depth`, tracking the weak limit
/// as the orbit deepens.
pub fn default_s(orbit: &Orbit) -> f64 {
    1.0 + 2.0 / orbit.max_len().max(2) as f64
}

/// Build the truncated Patterson-Sullivan measure for a validated tangent
/// form. Atoms sit at the radial projections of the orbit points, weighted
/// by `exp(-s psi_u(mu))` and normalized; the identity record carries no
/// boundary direction and is omitted (for the identity-only orbit a single
/// conventional atom at `+e_1` per factor is used).
pub fn build_ps(
    orbit: &Orbit,
    u: &[f64],
    form: &LinearForm,
    s: f64,
) -> Result<EmpiricalMeasure, MeasureError> {
    if !(s > 1.0 && s <= 1.5) {
        return Err(MeasureError::BadTruncation(s));
    }
    if orbit.len() > 1 {
        let absc = crate::exponents::abscissa(orbit, &form.coeffs)?;
        if !(0.9..=1.1).contains(&absc.value) {
            return Err(MeasureError::FormNotValidated(absc.value));
        }
    }
    let dims = orbit.factor_dims().to_vec();
    let total_dim: usize = dims.iter().sum();
    let mut offsets = Vec::with_capacity(dims.len());
    let mut acc = 0;
    for &d in &dims {
        offsets.push(acc);
        acc += d;
    }
    let meta = MeasureMeta {
        u: u.to_vec(),
        s,
        depth: orbit.max_len(),
        form: form.clone(),
    };
    if orbit.len() == 1 {
        // identity-only orbit: one atom, conventionally at +e_1 per factor
        let mut atoms = vec![0.0; total_dim];
        for &off in &offsets {
            atoms[off] = 1.0;
        }
        return Ok(EmpiricalMeasure {
            dims,
            offsets,
            total_dim,
            atoms,
            weights: vec![1.0],
            sources: vec![0],
            meta,
        });
    }
    // stabilize the exponentials around the smallest exponent
    let psi_min = orbit
        .records()
        .skip(1)
        .map(|r| form.apply(r.mu()))
        .fold(f64::INFINITY, f64::min);
    let count = orbit.len() - 1;
    let mut atoms = Vec::with_capacity(count * total_dim);
    let mut weights = Vec::with_capacity(count);
    let mut sources = Vec::with_capacity(count);
    for rec in orbit.records().skip(1) {
        weights.push((-s * (form.apply(rec.mu()) - psi_min)).exp());
        for f in 0..dims.len() {
            atoms.extend_from_slice(rec.dir(f).expect("nonempty record"));
        }
        sources.push(rec.index);
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(EmpiricalMeasure { dims, offsets, total_dim, atoms, weights, sources, meta })
}

/// Conformality check report for one cell and one group element.
#[derive(Debug, Clone, Serialize)]
pub struct ConformalityReport {
    pub measured_ratio: f64,
    pub predicted_ratio: f64,
    /// `max(measured/predicted, predicted/measured)`.
    pub mult_error: f64,
    pub atoms_in_cell: usize,
    pub atoms_in_pullback: usize,
}

/// Compare `nu(gamma^{-1} cell) / nu(cell)` with the cocycle prediction
/// `avg_{xi in cell} exp(-psi_u(beta_xi(gamma o, o)))`, the Radon-Nikodym
/// factor of the Patterson-Sullivan definition.
pub fn conformality_check(
    measure: &EmpiricalMeasure,
    joining: &SelfJoining,
    word: &crate::group::Word,
    cell: &CapProduct,
) -> Result<ConformalityReport, MeasureError> {
    let k = joining.k();
    let gammas: Vec<crate::hyperbolic::Isometry> = (0..k)
        .map(|i| crate::group::evaluate(joining.factor(i), word))
        .collect::<Result<_, _>>()?;

    let in_cell = measure.atoms_in(cell);
    if in_cell.len() < MIN_CELL_ATOMS {
        return Err(MeasureError::SkippedCell { got: in_cell.len(), need: MIN_CELL_ATOMS });
    }
    let cell_mass: f64 = in_cell.iter().map(|&a| measure.weight(a)).sum();

    // measured: atoms xi with gamma * xi inside the cell
    let cos_r: Vec<f64> = cell.caps.iter().map(|c| c.angular_radius.cos()).collect();
    let mut pullback_mass = 0.0;
    let mut pullback_atoms = 0usize;
    'atoms: for a in 0..measure.len() {
        for f in 0..k {
            let d = crate::hyperbolic::BoundaryDir::from_slice(measure.atom_dir(a, f))
                .expect("unit atom");
            let moved = gammas[f].apply_boundary(&d);
            let dot: f64 = moved
                .coords()
                .iter()
                .zip(cell.caps[f].center.coords().iter())
                .map(|(x, y)| x * y)
                .sum();
            if dot < cos_r[f] {
                continue 'atoms;
            }
        }
        pullback_mass += measure.weight(a);
        pullback_atoms += 1;
    }
    if pullback_atoms < MIN_CELL_ATOMS {
        return Err(MeasureError::SkippedCell { got: pullback_atoms, need: MIN_CELL_ATOMS });
    }
    let measured_ratio = pullback_mass / cell_mass;

    // predicted: weighted average over atoms in the cell of the cocycle
    // factor, with beta_xi(gamma o, o) = log(-<gamma o, (xi,1)>)
    let basepoints: Vec<HPoint> =
        (0..k).map(|i| HPoint::basepoint(joining.factor(i).factor_dim())).collect();
    let gamma_o: Vec<HPoint> =
        (0..k).map(|i| gammas[i].apply(&basepoints[i])).collect();
    let mut predicted = 0.0;
    for &a in &in_cell {
        let mut beta = Vec::with_capacity(k);
        for f in 0..k {
            let xi = crate::hyperbolic::BoundaryDir::from_slice(measure.atom_dir(a, f))
                .expect("unit atom");
            beta.push(crate::hyperbolic::busemann(&xi, &gamma_o[f], &basepoints[f]));
        }
        predicted += measure.weight(a) * (-measure.meta.form.apply(&beta)).exp();
    }
    let predicted_ratio = predicted / cell_mass;
    let mult_error = (measured_ratio / predicted_ratio).max(predicted_ratio / measured_ratio);
    Ok(ConformalityReport {
        measured_ratio,
        predicted_ratio,
        mult_error,
        atoms_in_cell: in_cell.len(),
        atoms_in_pullback: pullback_atoms,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShadowRatio {
    pub record: usize,
    pub ratio: f64,
    pub atoms_in_shadow: usize,
}

/// Shadow-lemma report: per-record ratios
/// `nu(shadow(gamma, R)) * exp(+psi_u(mu(gamma)))` and the fitted constant.
#[derive(Debug, Clone, Serialize)]
pub struct ShadowLemmaReport {
    pub r: f64,
    pub ratios: Vec<ShadowRatio>,
    /// `max(max ratio, 1/min ratio)` over the qualifying records.
    pub c_hat: f64,
}

pub fn shadow_lemma_check(
    measure: &EmpiricalMeasure,
    orbit: &Orbit,
    records: &[usize],
    r: f64,
) -> Result<ShadowLemmaReport, MeasureError> {
    let mut ratios = Vec::new();
    for &idx in records {
        let rec = orbit.record(idx);
        if min_mu(rec.mu()) <= r {
            continue;
        }
        let caps = shadow_product(&rec, r)?;
        // count only atoms from records deeper than gamma itself: in the
        // weak limit the shadow's mass is carried by the tail, while at
        // finite depth a shallow atom can sit exactly on a deep fixed point
        // (axes through the basepoint project every power onto it) and
        // swamp the shadow with mass the limit measure does not have there
        let depth = rec.word().len();
        let mut mass = 0.0;
        let mut atoms = 0usize;
        for a in measure.atoms_in(&caps) {
            if orbit.record(measure.sources[a]).word().len() > depth {
                mass += measure.weight(a);
                atoms += 1;
            }
        }
        if atoms < MIN_CELL_ATOMS || mass <= 0.0 {
            continue;
        }
        let ratio = mass * measure.meta.form.apply(rec.mu()).exp();
        ratios.push(ShadowRatio { record: idx, ratio, atoms_in_shadow: atoms });
    }
    if ratios.is_empty() {
        return Err(MeasureError::RTooSmall(r));
    }
    let max = ratios.iter().map(|e| e.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    Ok(ShadowLemmaReport { r, ratios, c_hat: max.max(1.0 / min) })
}
