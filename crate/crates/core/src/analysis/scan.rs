//! Threshold scans: `k_fit` as a function of `ε_th`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{analytic_threshold_slope, analytic_wavenumber, fit_oscillation, FitOptions, OscillationFit};
use crate::engine::{evaluate, DensityRequest, Method};
use crate::error::{validation, Result};

/// Everything a scan point needs besides `ε_th`.
#[derive(Debug, Clone)]
pub struct ScanPipeline {
    /// Scenario, detector, grid and quadrature settings; the threshold is
    /// replaced per point.
    pub template: DensityRequest,
    pub method: Method,
    pub fit: FitOptions,
    /// Term whose frequency is tracked.
    pub pair: (usize, usize),
}

impl ScanPipeline {
    pub fn new(template: DensityRequest) -> Self {
        let fit = FitOptions::new(template.flavor);
        ScanPipeline {
            template,
            method: Method::AmplitudeSum,
            fit,
            pair: (0, 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub threshold: f64,
    /// Fitted wavenumber carrying the sign of the analytic one.
    pub wavenumber: f64,
    pub uncertainty: f64,
    pub analytic: f64,
    pub residual_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub threshold: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdScanResult {
    pub points: Vec<ScanPoint>,
    pub failures: Vec<ScanFailure>,
    /// Least-squares `dk/dε` over the successful points; `None` below two.
    pub slope: Option<f64>,
    pub analytic_slope: f64,
}

impl ThresholdScanResult {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    /// `slope / analytic_slope - 1`.
    pub fn slope_deviation(&self) -> Option<f64> {
        self.slope.map(|s| s / self.analytic_slope - 1.0)
    }
}

/// Runs density evaluation and fit at every threshold. Failed points are
/// collected rather than aborting the scan.
pub fn threshold_scan(thresholds: &[f64], pipeline: &ScanPipeline) -> Result<ThresholdScanResult> {
    if thresholds.is_empty() {
        return Err(validation("thresholds", "at least one threshold is required"));
    }
    if thresholds.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(validation("thresholds", "values must be strictly increasing"));
    }
    let (i, j) = pipeline.pair;
    let scenario = &pipeline.template.scenario;
    if i >= scenario.len() || j >= scenario.len() || i == j {
        return Err(validation(
            "pair",
            format!("({i}, {j}) is not a pair of distinct states"),
        ));
    }
    let outcomes: Vec<std::result::Result<ScanPoint, ScanFailure>> = thresholds
        .par_iter()
        .map(|&threshold| {
            run_point(threshold, pipeline).map_err(|e| ScanFailure {
                threshold,
                message: e.to_string(),
            })
        })
        .collect();
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for outcome in outcomes {
        match outcome {
            Ok(p) => points.push(p),
            Err(f) => {
                log::warn!("scan point ε = {} failed: {}", f.threshold, f.message);
                failures.push(f);
            }
        }
    }
    let slope = if points.len() >= 2 {
        let n = points.len() as f64;
        let mean_x = points.iter().map(|p| p.threshold).sum::<f64>() / n;
        let mean_y = points.iter().map(|p| p.wavenumber).sum::<f64>() / n;
        let sxy: f64 = points
            .iter()
            .map(|p| (p.threshold - mean_x) * (p.wavenumber - mean_y))
            .sum();
        let sxx: f64 = points.iter().map(|p| (p.threshold - mean_x).powi(2)).sum();
        Some(sxy / sxx)
    } else {
        None
    };
    Ok(ThresholdScanResult {
        points,
        failures,
        slope,
        analytic_slope: analytic_threshold_slope(scenario, i, j),
    })
}

fn run_point(threshold: f64, pipeline: &ScanPipeline) -> Result<ScanPoint> {
    let mut request = pipeline.template.clone();
    request.detection = request.detection.with_threshold(threshold)?;
    let curve = evaluate(&request, pipeline.method)?;
    let fit: OscillationFit = fit_oscillation(&curve, &request.scenario, &request.detection, &pipeline.fit)?;
    let (i, j) = pipeline.pair;
    let analytic = analytic_wavenumber(&request.scenario, &request.detection, i, j);
    let term = fit
        .terms
        .iter()
        .find(|t| (t.i, t.j) == (i.min(j), i.max(j)))
        .ok_or_else(|| crate::Error::FitFailed(format!("no interference term for pair ({i}, {j})")))?;
    Ok(ScanPoint {
        threshold,
        wavenumber: analytic.signum() * term.wavenumber,
        uncertainty: term.uncertainty,
        analytic,
        residual_rms: fit.residual_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::length_grid;
    use crate::oscillation::fixtures;

    fn pipeline(method: Method) -> ScanPipeline {
        let (s, d) = fixtures::ur2f();
        let lengths = length_grid(300.0, 300.0 + 3.0 * 2.0 * std::f64::consts::PI / 0.0015, 181);
        let mut p = ScanPipeline::new(DensityRequest::new(s, d, 1, lengths).unwrap());
        p.method = method;
        p
    }

    #[test]
    fn single_threshold_has_no_slope() {
        let r = threshold_scan(&[0.0], &pipeline(Method::EqualTime)).unwrap();
        assert_eq!(r.points.len(), 1);
        assert!(r.slope.is_none() && !r.is_partial());
    }

    #[test]
    fn thresholds_must_increase() {
        assert!(threshold_scan(&[1.0, 1.0], &pipeline(Method::EqualTime)).is_err());
        assert!(threshold_scan(&[], &pipeline(Method::EqualTime)).is_err());
    }

    #[test]
    fn baseline_scan_is_threshold_blind() {
        // Equal-time curves do not see ε, so the fitted slope vanishes
        // while the analytic one does not.
        let r = threshold_scan(&[0.0, 2.0, 4.0], &pipeline(Method::EqualTime)).unwrap();
        assert_eq!(r.points.len(), 3);
        assert!(r.slope.unwrap().abs() < 1e-9);
        assert!((r.analytic_slope - 1.5e-4).abs() < 1e-6);
    }
}
