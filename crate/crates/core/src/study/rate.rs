//! Log-log least-squares rate fits.

use crate::error::{FnmError, Result};

/// Errors at or below zero are replaced by this before taking logs.
pub const ERROR_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// Standard error of the slope (0 for two points).
    pub slope_stderr: f64,
    /// Indices of pairs whose error was floored.
    pub floored: Vec<usize>,
}

/// Least-squares line through `(ln N, ln err)`.
pub fn rate_fit(pairs: &[(f64, f64)]) -> Result<RateFit> {
    if pairs.len() < 2 {
        return Err(FnmError::invalid("rate fit needs at least two points"));
    }
    let mut floored = Vec::new();
    let mut pts = Vec::with_capacity(pairs.len());
    for (i, &(n, e)) in pairs.iter().enumerate() {
        if !(n > 0.0) || !n.is_finite() {
            return Err(FnmError::invalid(format!("sample size {n} is not positive")));
        }
        if e.is_nan() {
            return Err(FnmError::invalid(format!("error at N = {n} is NaN")));
        }
        let e = if e > ERROR_FLOOR {
            e
        } else {
            floored.push(i);
            ERROR_FLOOR
        };
        pts.push((n.ln(), e.ln()));
    }
    let len = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FnmError::invalid("rate fit needs at least two distinct N"));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let slope_stderr = if pts.len() > 2 { (sse / (len - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(RateFit {
        slope,
        intercept,
        residual: (sse / len).sqrt(),
        slope_stderr,
        floored,
    })
}

/// Median of a non-empty sample; NaNs are ignored.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let h = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[h] } else { 0.5 * (v[h - 1] + v[h]) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pairs: Vec<(f64, f64)> = [4.0, 8.0, 16.0, 32.0].iter().map(|&n| (n, 1.0 / n)).collect();
        let f = rate_fit(&pairs).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-14);
        assert!(f.residual < 1e-14);
        assert!(f.intercept.abs() < 1e-13);
    }

    #[test]
    fn constant_error_has_zero_slope() {
        let f = rate_fit(&[(2.0, 0.3), (5.0, 0.3), (9.0, 0.3)]).unwrap();
        assert!(f.slope.abs() < 1e-15);
    }

    #[test]
    fn two_decades() {
        let f = rate_fit(&[(10.0, 1.0), (100.0, 0.1)]).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-14);
        assert_eq!(f.slope_stderr, 0.0);
    }

    #[test]
    fn nonpositive_errors_are_floored_and_flagged() {
        let f = rate_fit(&[(10.0, 1e-3), (20.0, 0.0), (40.0, -1.0)]).unwrap();
        assert_eq!(f.floored, vec![1, 2]);
        assert!(f.slope < 0.0);
    }

    #[test]
    fn degenerate_input_is_rejected() {
        assert!(rate_fit(&[(10.0, 1.0)]).is_err());
        assert!(rate_fit(&[(10.0, 1.0), (10.0, 2.0)]).is_err());
        assert!(rate_fit(&[(0.0, 1.0), (10.0, 2.0)]).is_err());
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
