//! Oscillation wavenumbers: closed forms, curve fits, threshold scans.

mod fit;
mod scan;

pub use fit::{fit_oscillation, FitOptions, FrequencyStart, InterferenceTerm, OscillationFit};
pub use scan::{threshold_scan, ScanFailure, ScanPipeline, ScanPoint, ThresholdScanResult};

use crate::oscillation::{DetectionModel, OscillationScenario};

/// `k_ij = (E_i - ε)/v_i - (E_j - ε)/v_j - (p_i - p_j)`.
///
/// Evaluated as `m_i²/p_i - m_j²/p_j - ε (E_i/p_i - E_j/p_j)`, which is the
/// same expression without the cancellation in `E²/p - p`.
pub fn analytic_wavenumber(scenario: &OscillationScenario, detection: &DetectionModel, i: usize, j: usize) -> f64 {
    let (a, b) = (scenario.state(i), scenario.state(j));
    let rest = a.mass * a.mass / a.momentum - b.mass * b.mass / b.momentum;
    let inverse_velocity = a.energy() / a.momentum - b.energy() / b.momentum;
    rest - detection.threshold * inverse_velocity
}

/// `∂k_ij/∂ε = -(1/v_i - 1/v_j)`; exact since `k_ij` is linear in `ε`.
pub fn analytic_threshold_slope(scenario: &OscillationScenario, i: usize, j: usize) -> f64 {
    let (a, b) = (scenario.state(i), scenario.state(j));
    -(a.energy() / a.momentum - b.energy() / b.momentum)
}

/// `(m_i² - m_j²) / (2 p̄)` with `p̄ = (p_i + p_j)/2`.
pub fn standard_wavenumber(scenario: &OscillationScenario, i: usize, j: usize) -> f64 {
    let (a, b) = (scenario.state(i), scenario.state(j));
    let p_mean = 0.5 * (a.momentum + b.momentum);
    (a.mass * a.mass - b.mass * b.mass) / (2.0 * p_mean)
}

/// Ultra-relativistic form `(1 - ε/2Ē)(m_i² - m_j²)/Ē` with `Ē` the mean
/// energy; approximates [`analytic_wavenumber`] to `O(m²/p²)`.
pub fn threshold_corrected_wavenumber(
    scenario: &OscillationScenario,
    detection: &DetectionModel,
    i: usize,
    j: usize,
) -> f64 {
    let (a, b) = (scenario.state(i), scenario.state(j));
    let e_mean = 0.5 * (a.energy() + b.energy());
    (1.0 - detection.threshold / (2.0 * e_mean)) * (a.mass * a.mass - b.mass * b.mass) / e_mean
}
