//! Critical-exponent estimation from orbit data.
//!
//! The primary estimator is the least-squares slope of `log N(T)` against
//! `T`, where `N(T)` counts orbit values (per-factor displacements, their
//! minimum, the product-metric norm, or any linear functional of the Cartan
//! vector) up to `T`. The default fit window `[0.4, 0.8] * max` drops the
//! small-word transient and the truncation-starved tail; the quoted standard
//! error is the dispersion of slopes over five equal sub-windows. The
//! truncated-series bisection lives in [`crate::reference`] as an independent
//! oracle.

use crate::fit::{line_fit, std_dev, subwindow_slopes};
use crate::joining::{linear_mu, min_mu, mu_norm, Orbit};
use serde::Serialize;
use thiserror::Error;

/// Minimum number of orbit values the estimator accepts.
pub const MIN_VALUES: usize = 1000;
/// Default fit window as fractions of the maximum observed value.
pub const DEFAULT_WINDOW: (f64, f64) = (0.4, 0.8);
/// Number of grid points at which the counting staircase is sampled.
const GRID_POINTS: usize = 60;
/// Number of sub-windows used for the stderr estimate.
const SUBWINDOWS: usize = 5;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("need at least {min} values, got {got}")]
    TooFewValues { got: usize, min: usize },
    #[error("fit window [{lo}, {hi}] holds fewer than two populated grid points")]
    DegenerateWindow { lo: f64, hi: f64 },
    #[error("window [{lo}, {hi}] does not sit inside the data range (max {max})")]
    WindowOutOfRange { lo: f64, hi: f64, max: f64 },
    #[error("linear form is non-positive on {share:.1}% of deep records")]
    InvalidForm { share: f64 },
    #[error("factor index {0} out of range for k = {1}")]
    BadFactor(usize, usize),
}

/// Fit window specification for [`counting_exponent`].
#[derive(Debug, Clone, Copy, Default)]
pub enum Window {
    /// `[0.4, 0.8] * max value`.
    #[default]
    Default,
    /// Explicit absolute bounds.
    Explicit(f64, f64),
}

/// A counting-slope estimate with its uncertainty and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentEstimate {
    pub value: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    /// Slopes over the equal sub-windows backing the stderr.
    pub window_slopes: Vec<f64>,
    pub samples: usize,
}

/// Slope of `log N(T)` vs `T` over the window, `N(T) = #{values <= T}`.
pub fn counting_exponent(values: &[f64], window: Window) -> Result<ExponentEstimate, EstimateError> {
    counting_exponent_min(values, window, MIN_VALUES)
}

/// As [`counting_exponent`] with a caller-chosen sample floor; the cone
/// estimators run on thinner slices than the global exponents.
pub fn counting_exponent_min(
    values: &[f64],
    window: Window,
    min_values: usize,
) -> Result<ExponentEstimate, EstimateError> {
    if values.len() < min_values {
        return Err(EstimateError::TooFewValues { got: values.len(), min: min_values });
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let max = *sorted.last().expect("nonempty");
    let (lo, hi) = match window {
        Window::Default => (DEFAULT_WINDOW.0 * max, DEFAULT_WINDOW.1 * max),
        Window::Explicit(lo, hi) => (lo, hi),
    };
    if !(lo < hi) || hi > max + 1e-12 {
        return Err(EstimateError::WindowOutOfRange { lo, hi, max });
    }
    let mut xs = Vec::with_capacity(GRID_POINTS);
    let mut ys = Vec::with_capacity(GRID_POINTS);
    for i in 0..GRID_POINTS {
        let t = lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64;
        let n = sorted.partition_point(|v| *v <= t);
        if n > 0 {
            xs.push(t);
            ys.push((n as f64).ln());
        }
    }
    let Some(line) = line_fit(&xs, &ys) else {
        return Err(EstimateError::DegenerateWindow { lo, hi });
    };
    let slopes = subwindow_slopes(&xs, &ys, SUBWINDOWS);
    if slopes.len() < 3 {
        return Err(EstimateError::DegenerateWindow { lo, hi });
    }
    let stderr = std_dev(&slopes) / (slopes.len() as f64).sqrt();
    Ok(ExponentEstimate {
        value: line.slope,
        stderr,
        window: (lo, hi),
        window_slopes: slopes,
        samples: values.len(),
    })
}

/// The counting staircase `(T, N(T))` on an even grid, for CSV export.
pub fn staircase(values: &[f64], points: usize) -> Vec<(f64, u64)> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let Some(&max) = sorted.last() else {
        return Vec::new();
    };
    (0..points)
        .map(|i| {
            let t = max * (i + 1) as f64 / points as f64;
            (t, sorted.partition_point(|v| *v <= t) as u64)
        })
        .collect()
}

/// Per-factor displacements `mu_i` over the nonempty words of an orbit.
pub fn factor_values(orbit: &Orbit, factor: usize) -> Result<Vec<f64>, EstimateError> {
    if factor >= orbit.k() {
        return Err(EstimateError::BadFactor(factor, orbit.k()));
    }
    Ok(orbit.records().skip(1).map(|r| r.mu()[factor]).collect())
}

/// Window for orbit-derived values: `[0.4, 0.8] * max`, additionally capped
/// at the truncation-safe horizon. `N(T)` is complete only up to the
/// smallest value attained at the deepest generation minus one letter step;
/// past that, words longer than `max_len` would have contributed.
fn orbit_window(orbit: &Orbit, values: &[f64]) -> Window {
    let max = values.iter().copied().fold(0.0, f64::max);
    let deepest = orbit.max_len();
    let mut min_deep = f64::INFINITY;
    let mut max_step: f64 = 0.0;
    for (r, &v) in orbit.records().skip(1).zip(values) {
        let len = r.word().len();
        if len == deepest {
            min_deep = min_deep.min(v);
        } else if len == 1 {
            max_step = max_step.max(v);
        }
    }
    let hi = (0.8 * max).min(min_deep - max_step);
    if !(hi > 0.0) || hi.is_infinite() {
        return Window::Default;
    }
    let lo = (0.4 * max).min(0.5 * hi);
    Window::Explicit(lo, hi)
}

fn orbit_exponent(
    orbit: &Orbit,
    value_of: impl Fn(&[f64]) -> f64,
) -> Result<ExponentEstimate, EstimateError> {
    let values: Vec<f64> = orbit.records().skip(1).map(|r| value_of(r.mu())).collect();
    counting_exponent(&values, orbit_window(orbit, &values))
}

/// Critical exponent of one factor representation, `delta_rho_i`.
pub fn factor_exponent(orbit: &Orbit, factor: usize) -> Result<ExponentEstimate, EstimateError> {
    if factor >= orbit.k() {
        return Err(EstimateError::BadFactor(factor, orbit.k()));
    }
    orbit_exponent(orbit, |mu| mu[factor])
}

/// Exponent of `min_i mu_i`; by the limit-set theorem this equals
/// `max_i delta_rho_i` and the Hausdorff dimension of the limit set.
pub fn delta_min(orbit: &Orbit) -> Result<ExponentEstimate, EstimateError> {
    orbit_exponent(orbit, min_mu)
}

/// Critical exponent of the joining in the product metric, on `|mu|`.
pub fn joint_delta(orbit: &Orbit) -> Result<ExponentEstimate, EstimateError> {
    orbit_exponent(orbit, mu_norm)
}

/// Abscissa of convergence of `sum exp(-s phi(mu))` for a linear functional
/// `phi`, via the counting slope of `phi(mu)`. Rejects forms that are
/// non-positive on at least 1% of the deep records (`|mu|` in the top half).
pub fn abscissa(orbit: &Orbit, coeffs: &[f64]) -> Result<ExponentEstimate, EstimateError> {
    let max_norm = orbit.records().skip(1).map(|r| r.mu_norm()).fold(0.0, f64::max);
    let mut deep = 0usize;
    let mut bad = 0usize;
    let mut values = Vec::with_capacity(orbit.len());
    for r in orbit.records().skip(1) {
        let v = linear_mu(coeffs, r.mu());
        if r.mu_norm() >= 0.5 * max_norm {
            deep += 1;
            if v <= 0.0 {
                bad += 1;
            }
        }
        if v > 0.0 {
            values.push(v);
        }
    }
    if deep > 0 {
        let share = bad as f64 / deep as f64;
        if share >= 0.01 {
            return Err(EstimateError::InvalidForm { share: share * 100.0 });
        }
    }
    let window = if values.len() + 1 == orbit.len() {
        // no records dropped: depth bookkeeping lines up with the values
        orbit_window(orbit, &values)
    } else {
        Window::Default
    };
    counting_exponent(&values, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{AxisSpec, CapPolicy, SchottkyRep};
    use crate::hyperbolic::BoundaryDir;
    use crate::joining::{enumerate_orbit, OrbitOptions, SelfJoining};

    /// Values whose counting function is N(T) = floor(e^{rate * T}).
    fn synthetic_counting(rate: f64, t_max: f64) -> Vec<f64> {
        let n_total = (rate * t_max).exp().floor() as usize;
        (1..=n_total).map(|j| (j as f64).ln() / rate).collect()
    }

    #[test]
    fn recovers_synthetic_rate() {
        let values = synthetic_counting(0.75, 12.0);
        let est = counting_exponent(&values, Window::Default).unwrap();
        assert!((est.value - 0.75).abs() < 0.02, "estimate {} +- {}", est.value, est.stderr);
    }

    #[test]
    fn degenerate_inputs_error() {
        let constant = vec![2.0; 5000];
        assert!(matches!(
            counting_exponent(&constant, Window::Default),
            Err(EstimateError::DegenerateWindow { .. })
        ));
        assert!(matches!(
            counting_exponent(&[1.0, 2.0], Window::Default),
            Err(EstimateError::TooFewValues { .. })
        ));
        let values = synthetic_counting(0.75, 12.0);
        assert!(matches!(
            counting_exponent(&values, Window::Explicit(2.0, 50.0)),
            Err(EstimateError::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn scaling_covariance() {
        let values = synthetic_counting(0.6, 12.0);
        let doubled: Vec<f64> = values.iter().map(|v| 2.0 * v).collect();
        let a = counting_exponent(&values, Window::Default).unwrap();
        let b = counting_exponent(&doubled, Window::Default).unwrap();
        assert!((b.value - a.value / 2.0).abs() < a.stderr + b.stderr + 1e-6);
    }

    #[test]
    fn monotone_in_pointwise_larger_values() {
        let values = synthetic_counting(0.7, 12.0);
        let thinner: Vec<f64> = values.iter().map(|v| v * 1.25).collect();
        let a = counting_exponent(&values, Window::Default).unwrap();
        let b = counting_exponent(&thinner, Window::Default).unwrap();
        assert!(b.value <= a.value + a.stderr + b.stderr);
    }

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

    #[test]
    fn cyclic_group_has_zero_exponent() {
        // single generator: orbit growth is linear in T, slope -> 0
        // short axis keeps cosh of the displacement inside f64 range
        let j = SelfJoining::new(vec![rep(&[0.5])], vec![]).unwrap();
        let orbit = enumerate_orbit(&j, 600, &OrbitOptions::default()).unwrap();
        let est = factor_exponent(&orbit, 0).unwrap();
        assert!(est.value.abs() < 0.02, "cyclic exponent {}", est.value);
    }

    #[test]
    fn factor_exponent_decreases_with_axis_length() {
        let mut previous = f64::INFINITY;
        for l in [2.2, 3.0, 4.0] {
            let j = SelfJoining::new(vec![rep(&[l, l])], vec![]).unwrap();
            let orbit = enumerate_orbit(&j, 9, &OrbitOptions::default()).unwrap();
            let est = factor_exponent(&orbit, 0).unwrap();
            assert!(est.value > 0.0 && est.value < previous, "l={l} est {}", est.value);
            previous = est.value;
        }
    }

    #[test]
    fn factor_exponent_matches_series_oracle() {
        let j = SelfJoining::new(vec![rep(&[2.2, 3.0])], vec![]).unwrap();
        let max_len = 11;
        let orbit = enumerate_orbit(&j, max_len, &OrbitOptions::default()).unwrap();
        let est = factor_exponent(&orbit, 0).unwrap();
        let values: Vec<f64> = orbit.records().skip(1).map(|r| r.mu()[0]).collect();
        let lens: Vec<usize> = orbit.records().skip(1).map(|r| r.word().len()).collect();
        let oracle = crate::reference::series_abscissa(&values, &lens, max_len);
        assert!(
            (est.value - oracle).abs() < 0.05,
            "slope {} vs series oracle {oracle}",
            est.value
        );
    }

    #[test]
    fn delta_min_and_joint_delta_identities() {
        // k = 1: all three estimators consume the same data
        let j1 = SelfJoining::new(vec![rep(&[2.2, 3.0])], vec![]).unwrap();
        let orbit1 = enumerate_orbit(&j1, 9, &OrbitOptions::default()).unwrap();
        let f = factor_exponent(&orbit1, 0).unwrap();
        let dm = delta_min(&orbit1).unwrap();
        let jd = joint_delta(&orbit1).unwrap();
        assert_eq!(f.value, dm.value);
        assert_eq!(f.value, jd.value);

        // conjugate joining: min of equal coordinates is the factor value,
        // and the norm is sqrt(2) times it
        let r = rep(&[2.2, 3.0]);
        let j2 = SelfJoining::new(vec![r.clone(), r], vec![]).unwrap();
        let orbit2 = enumerate_orbit(&j2, 9, &OrbitOptions::default()).unwrap();
        let f2 = factor_exponent(&orbit2, 0).unwrap();
        let dm2 = delta_min(&orbit2).unwrap();
        let jd2 = joint_delta(&orbit2).unwrap();
        assert!((dm2.value - f2.value).abs() < 1e-12);
        assert!(
            (2f64.sqrt() * jd2.value - dm2.value).abs() < 0.05,
            "sqrt2*delta = {} vs delta_min = {}",
            2f64.sqrt() * jd2.value,
            dm2.value
        );
    }

    #[test]
    fn abscissa_contract() {
        let j = SelfJoining::new(vec![rep(&[2.2, 3.0]), rep(&[3.2, 2.4])], vec![]).unwrap();
        let orbit = enumerate_orbit(&j, 9, &OrbitOptions::default()).unwrap();
        // coordinate form reproduces the factor exponent exactly (same data)
        let e1 = abscissa(&orbit, &[1.0, 0.0]).unwrap();
        let f1 = factor_exponent(&orbit, 0).unwrap();
        assert_eq!(e1.value, f1.value);
        // homogeneity: abscissa(c * phi) * c = abscissa(phi)
        let phi = [0.6, 0.8];
        let scaled: Vec<f64> = phi.iter().map(|c| 2.5 * c).collect();
        let a = abscissa(&orbit, &phi).unwrap();
        let b = abscissa(&orbit, &scaled).unwrap();
        assert!(
            (2.5 * b.value - a.value).abs() < 2.5 * b.stderr + a.stderr + 1e-9,
            "a {} vs 2.5b {}",
            a.value,
            2.5 * b.value
        );
        // a form negative on the limit cone is rejected
        assert!(matches!(
            abscissa(&orbit, &[1.0, -1.5]),
            Err(EstimateError::InvalidForm { .. })
        ));
    }

    #[test]
    fn truncation_robustness() {
        let j = SelfJoining::new(vec![rep(&[2.2, 3.0]), rep(&[3.2, 2.4])], vec![]).unwrap();
        let full = enumerate_orbit(&j, 11, &OrbitOptions::default()).unwrap();
        let shallow = enumerate_orbit(&j, 9, &OrbitOptions::default()).unwrap();
        let a = delta_min(&full).unwrap();
        let b = delta_min(&shallow).unwrap();
        assert!(
            (a.value - b.value).abs() <= a.stderr + b.stderr + 0.02,
            "L vs L-2: {} vs {}",
            a.value,
            b.value
        );
    }
}
