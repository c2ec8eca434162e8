//! Small shared least-squares helpers for the slope estimators.

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

/// Fit a line through `(x, y)` pairs. Returns `None` for fewer than two
/// distinct abscissas.
pub fn line_fit(xs: &[f64], ys: &[f64]) -> Option<Line> {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx < 1e-300 {
        return None;
    }
    let slope = sxy / sxx;
    Some(Line { slope, intercept: my - slope * mx })
}

/// Sample standard deviation; 0 for fewer than two values.
pub fn std_dev(vals: &[f64]) -> f64 {
    let n = vals.len();
    if n < 2 {
        return 0.0;
    }
    let m = vals.iter().sum::<f64>() / n as f64;
    (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt()
}

/// Slope dispersion over `k` equal contiguous sub-windows of `(x, y)`:
/// the standard error of the mean of the sub-window slopes. Sub-windows with
/// fewer than two distinct abscissas are skipped; returns the sub-slopes.
pub fn subwindow_slopes(xs: &[f64], ys: &[f64], k: usize) -> Vec<f64> {
    let n = xs.len();
    if n < 2 * k || k == 0 {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let lo = j * n / k;
        let hi = ((j + 1) * n / k).min(n);
        if let Some(line) = line_fit(&xs[lo..hi], &ys[lo..hi]) {
            out.push(line.slope);
        }
    }
    out
}

/// Median of a slice (averages the middle pair for even lengths).
pub fn median(vals: &[f64]) -> f64 {
    assert!(!vals.is_empty());
    let mut v = vals.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.5 * x).collect();
        let line = line_fit(&xs, &ys).unwrap();
        assert!((line.slope + 0.5).abs() < 1e-12);
        assert!((line.intercept - 3.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(line_fit(&[1.0], &[2.0]).is_none());
        assert!(line_fit(&[1.0, 1.0], &[2.0, 3.0]).is_none());
        assert!(subwindow_slopes(&[1.0, 2.0], &[1.0, 2.0], 5).is_empty());
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
