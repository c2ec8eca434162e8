//! Slow, independent reference implementations used to cross-check the
//! closed-form geometry kernel. These deliberately follow the limit/ray
//! definitions rather than the formulas they validate, and are shared between
//! the unit tests and the randomized geometry-check experiment.

use crate::hyperbolic::{dist, geodesic_point, BoundaryDir, HPoint, Isometry};

/// Busemann value by its limit definition, evaluated at a long but finite ray
/// parameter: `d(xi(t_ray), x) - d(xi(t_ray), y)`.
pub fn busemann_limit(xi: &BoundaryDir, x: &HPoint, y: &HPoint, t_ray: f64) -> f64 {
    let far = geodesic_point(xi, t_ray).expect("t_ray >= 0");
    dist(&far, x) - dist(&far, y)
}

/// Minimum distance from `x` to the ray `t -> xi(t)`, `t in [0, t_max]`,
/// by coarse marching followed by golden-section refinement.
pub fn ray_min_distance(eta: &BoundaryDir, x: &HPoint, t_max: f64) -> f64 {
    let coarse = 256;
    let mut best_t = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..=coarse {
        let t = t_max * i as f64 / coarse as f64;
        let d = dist(&geodesic_point(eta, t).unwrap(), x);
        if d < best {
            best = d;
            best_t = t;
        }
    }
    // the distance along a geodesic ray to a fixed point is unimodal
    let mut lo = (best_t - t_max / coarse as f64).max(0.0);
    let mut hi = (best_t + t_max / coarse as f64).min(t_max);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - phi * (hi - lo);
    let mut d_pt = lo + phi * (hi - lo);
    let eval = |t: f64| dist(&geodesic_point(eta, t).unwrap(), x);
    let mut fc = eval(c);
    let mut fd = eval(d_pt);
    for _ in 0..80 {
        if fc < fd {
            hi = d_pt;
            d_pt = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = eval(c);
        } else {
            lo = c;
            c = d_pt;
            fc = fd;
            d_pt = lo + phi * (hi - lo);
            fd = eval(d_pt);
        }
    }
    best.min(fc).min(fd)
}

/// Attracting direction by power iteration on the basepoint orbit: the
/// radial direction of `g^n o`. The iterate is rescaled by its sup norm
/// instead of being renormalized onto the sheet, since at displacement `d`
/// the hyperboloid constraint can only be evaluated to `eps * e^{2d}`.
pub fn power_fixed_point(g: &Isometry, n: usize) -> BoundaryDir {
    let dim = g.spatial_dim();
    let o = HPoint::basepoint(dim);
    let mut v = o.coords().clone();
    for _ in 0..n {
        v = g.matrix() * v;
        let s = v.amax().max(f64::MIN_POSITIVE);
        v /= s;
    }
    BoundaryDir::new(v.rows(0, dim).into_owned())
        .expect("g^n o leaves the basepoint for loxodromic g")
}

/// Truncated-series estimate of an abscissa of convergence: the `s` at which
/// the partial Poincare sums over words of length `<= L` and `<= L-2` have
/// ratio `(L+1)/(L-1)`, located by bisection. Near the abscissa every
/// generation contributes comparable mass, so the two truncations differ by
/// roughly the generation count.
pub fn series_abscissa(values: &[f64], word_lengths: &[usize], max_len: usize) -> f64 {
    assert_eq!(values.len(), word_lengths.len());
    assert!(max_len >= 4);
    let partial = |s: f64, cutoff: usize| -> f64 {
        values
            .iter()
            .zip(word_lengths)
            .filter(|(_, &l)| l <= cutoff && l > 0)
            .map(|(&v, _)| (-s * v).exp())
            .sum()
    };
    let target = (max_len as f64 + 1.0) / (max_len as f64 - 1.0);
    let ratio = |s: f64| partial(s, max_len) / partial(s, max_len - 2) - target;
    let mut lo = 1e-3;
    let mut hi = 5.0;
    // ratio decreases in s toward 1 < target; find a sign change
    if ratio(lo) < 0.0 || ratio(hi) > 0.0 {
        // fall back to the endpoint closest to a root
        return if ratio(lo).abs() < ratio(hi).abs() { lo } else { hi };
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ratio(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
