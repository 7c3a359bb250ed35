//! Log-log least squares for `value ≈ C h^p`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Values below this are treated as converged to zero and dropped.
pub const ZERO_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PowerFit {
    pub slope: f64,
    /// Least-squares standard error of the slope.
    pub stderr: f64,
    /// `log C`.
    pub intercept: f64,
    /// Abscissae of points dropped as converged to zero.
    pub dropped: Vec<f64>,
}

/// Fits `log value = intercept + slope log x`; needs at least 4 points with
/// values above [`ZERO_FLOOR`].
pub fn fit_exponent(pairs: &[(f64, f64)]) -> Result<PowerFit> {
    let mut dropped = Vec::new();
    let pts: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|&&(x, v)| {
            let keep = v >= ZERO_FLOOR && v.is_finite() && x > 0.0;
            if !keep {
                dropped.push(x);
            }
            keep
        })
        .map(|&(x, v)| (x.ln(), v.ln()))
        .collect();
    let n = pts.len();
    if n < 4 {
        return Err(Error::InsufficientPoints(n));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(PowerFit { slope, stderr, intercept, dropped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_power_law() {
        let pairs: Vec<_> = [0.5, 0.35, 0.25, 0.18, 0.125].iter().map(|&h: &f64| (h, h * h)).collect();
        let f = fit_exponent(&pairs).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(f.stderr < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        // Deterministic ±1% perturbations.
        let noise = [0.01, -0.01, 0.007, -0.004, 0.01, -0.008];
        let pairs: Vec<_> = [0.5, 0.35, 0.25, 0.18, 0.125, 0.09]
            .iter()
            .zip(noise)
            .map(|(&h, e): (&f64, f64)| (h, 3.0 * h * h * (1.0 + e)))
            .collect();
        let f = fit_exponent(&pairs).unwrap();
        assert!((1.9..=2.1).contains(&f.slope));
    }

    #[test]
    fn zeros_are_dropped_and_rejected() {
        let zeros = [(0.5, 0.0), (0.4, 0.0), (0.3, 0.0), (0.2, 0.0)];
        assert!(matches!(fit_exponent(&zeros), Err(Error::InsufficientPoints(0))));
        let mixed = [(0.5, 1.0), (0.4, 0.8), (0.3, 0.6), (0.2, 0.4), (0.1, 1e-20)];
        let f = fit_exponent(&mixed).unwrap();
        assert_eq!(f.dropped, vec![0.1]);
        assert!(fit_exponent(&mixed[..3]).is_err());
    }

    proptest! {
        #[test]
        fn recovers_any_exponent(p in -3.0..3.0f64, c in 0.01..100.0f64) {
            let pairs: Vec<_> = (0..6).map(|i| {
                let h = 0.5 * 0.7f64.powi(i);
                (h, c * h.powf(p))
            }).collect();
            let f = fit_exponent(&pairs).unwrap();
            prop_assert!((f.slope - p).abs() < 1e-9);
        }
    }
}
