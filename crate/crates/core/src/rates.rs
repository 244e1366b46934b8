//! Log-log slope fitting and bounded-scaling checks that turn the O(·)
//! claims into measurable quantities.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::util::linear_fit;

/// Values at or below this are treated as double rounding floor and
/// excluded from fits.
pub const ROUNDING_FLOOR: f64 = 1e-14;

const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct RateEstimate {
    pub quantity: String,
    pub window: (f64, f64),
    /// Least-squares slope on (log t, log value).
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Theoretical decay exponent (negative), when the theory names one.
    pub slope_target: Option<f64>,
    /// Max over the window of value·t^{−slope_target}.
    pub sup_scaled: Option<f64>,
    pub points: usize,
    pub excluded: usize,
}

/// Least-squares line on (log t, log value) over the window, excluding
/// rounding-floor values (the exclusion count is reported).
pub fn fit_rate(
    quantity: &str,
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    slope_target: Option<f64>,
) -> Result<RateEstimate> {
    assert_eq!(times.len(), values.len());
    let (lo, hi) = window;
    if !(hi > lo) || !(lo > 0.0) {
        return Err(Error::invalid("window", "needs 0 < t_lo < t_hi"));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut excluded = 0usize;
    let mut sup_scaled: Option<f64> = None;
    for (&t, &v) in times.iter().zip(values) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > ROUNDING_FLOOR) {
            excluded += 1;
            continue;
        }
        xs.push(t.ln());
        ys.push(v.ln());
        if let Some(target) = slope_target {
            let scaled = v * t.powf(-target);
            sup_scaled = Some(sup_scaled.map_or(scaled, |s: f64| s.max(scaled)));
        }
    }
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientData {
            usable: xs.len(),
            needed: MIN_FIT_POINTS,
        });
    }
    let (slope, intercept, r_squared) = linear_fit(&xs, &ys);
    Ok(RateEstimate {
        quantity: quantity.to_string(),
        window,
        slope,
        intercept,
        r_squared,
        slope_target,
        sup_scaled,
        points: xs.len(),
        excluded,
    })
}

/// Bounded-scaling check over one time decade: with target exponent e,
/// sup over the decade of value·tᵉ must not exceed 10× its value at the
/// start of the decade. Rounding-floor values are excluded just as in a
/// fit; a series entirely at the floor is trivially bounded.
#[derive(Debug, Clone, Serialize)]
pub struct BoundednessCheck {
    pub quantity: String,
    pub target_exponent: f64,
    pub window: (f64, f64),
    pub reference: Option<f64>,
    pub sup_scaled: Option<f64>,
    pub floored_points: usize,
    pub passed: bool,
}

pub fn check_bounded_scaling(
    quantity: &str,
    times: &[f64],
    values: &[f64],
    window: (f64, f64),
    target_exponent: f64,
) -> BoundednessCheck {
    let (lo, hi) = window;
    let mut reference: Option<f64> = None;
    let mut sup: Option<f64> = None;
    let mut floored = 0usize;
    for (&t, &v) in times.iter().zip(values) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > ROUNDING_FLOOR) {
            floored += 1;
            continue;
        }
        let scaled = v * t.powf(target_exponent);
        if reference.is_none() {
            reference = Some(scaled);
        }
        sup = Some(sup.map_or(scaled, |s: f64| s.max(scaled)));
    }
    let passed = match (reference, sup) {
        (Some(r), Some(s)) => s <= 10.0 * r,
        // Nothing above the rounding floor in the window: the quantity is
        // bounded trivially.
        _ => true,
    };
    BoundednessCheck {
        quantity: quantity.to_string(),
        target_exponent,
        window,
        reference,
        sup_scaled: sup,
        floored_points: floored,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::log_grid;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_law() {
        let ts = log_grid(1.0, 1.0e3, 200);
        let vs: Vec<f64> = ts.iter().map(|t| t.powf(-1.5)).collect();
        let est = fit_rate("q", &ts, &vs, (1.0, 1.0e3), Some(-1.5)).unwrap();
        assert_relative_eq!(est.slope, -1.5, epsilon = 1e-12);
        assert_relative_eq!(est.r_squared, 1.0, epsilon = 1e-12);
        assert_relative_eq!(est.sup_scaled.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_series_has_zero_slope() {
        let ts = log_grid(1.0, 100.0, 50);
        let vs = vec![0.37; ts.len()];
        let est = fit_rate("q", &ts, &vs, (1.0, 100.0), None).unwrap();
        assert!(est.slope.abs() < 1e-12);
        assert!((0.0..=1.0).contains(&est.r_squared));
        assert!(est.sup_scaled.is_none());
    }

    #[test]
    fn oscillating_decay_fits_envelope_rate() {
        let ts = log_grid(10.0, 1.0e3, 400);
        let vs: Vec<f64> = ts.iter().map(|t| (2.0 + t.sin()) / t).collect();
        let est = fit_rate("q", &ts, &vs, (10.0, 1.0e3), None).unwrap();
        assert!(
            (est.slope + 1.0).abs() <= 0.05,
            "slope {} should be -1 +/- 0.05",
            est.slope
        );
    }

    #[test]
    fn floor_values_are_excluded() {
        let ts = log_grid(1.0, 100.0, 60);
        let vs: Vec<f64> = ts
            .iter()
            .map(|t| if *t < 50.0 { 1.0 / t } else { 1e-15 })
            .collect();
        let est = fit_rate("q", &ts, &vs, (1.0, 100.0), None).unwrap();
        assert!(est.excluded > 0);
        assert!((est.slope + 1.0).abs() < 1e-6);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let ts = vec![1.0, 2.0, 3.0];
        let vs = vec![1.0, 0.5, 0.25];
        assert!(matches!(
            fit_rate("q", &ts, &vs, (1.0, 3.0), None),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn boundedness_detects_growth() {
        let ts = log_grid(10.0, 1.0e3, 100);
        // value ~ t^{-1/2} scaled by t^{2/3} grows like t^{1/6}: ratio over
        // two decades is 10^{1/3} < 10, so this still passes ...
        let vs: Vec<f64> = ts.iter().map(|t| t.powf(-0.5)).collect();
        let ok = check_bounded_scaling("q", &ts, &vs, (10.0, 1.0e3), 2.0 / 3.0);
        assert!(ok.passed);
        // ... while a flat series scaled by t^{2} grows 100x and fails.
        let flat = vec![1.0; ts.len()];
        let bad = check_bounded_scaling("q", &ts, &flat, (10.0, 1.0e3), 2.0);
        assert!(!bad.passed);
    }

    #[test]
    fn boundedness_trivial_at_floor() {
        let ts = log_grid(10.0, 100.0, 30);
        let vs = vec![0.0; ts.len()];
        let chk = check_bounded_scaling("q", &ts, &vs, (10.0, 100.0), 1.0);
        assert!(chk.passed);
        assert_eq!(chk.floored_points, ts.len());
    }
}
