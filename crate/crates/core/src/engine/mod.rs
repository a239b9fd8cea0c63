//! Detection density `p_α(L)` for oscillation scenarios.
//!
//! [`detection_density`] evaluates the double time integral in the
//! frequency domain: with `F(s) = ∫ dω/2π F̂(ω) e^{-iωs}`,
//!
//! ```text
//! p_α(L) = ∫_0^∞ dω/2π F̂(ω) |Σ_i c_i Φ_i(ω + ε_th; L)|²,
//! Φ_i(ν; L) = ∫_window φ_i(t, L) e^{iνt} dt,
//! ```
//!
//! where each `Φ_i` is a closed-form Gaussian/Faddeeva expression and the
//! ω-integrand is nonnegative. The lag-domain form `∫ ds G_ij(s) e^{-iεs} F(s)`
//! ([`detection_density_lag`]) and the direct 2D quadrature
//! ([`detection_density_2d_oracle`]) are independent evaluators of the same
//! quantity.

mod baselines;
mod lag;
mod oracle;
mod spectral;

pub use baselines::{baseline_component_arrival, baseline_equal_time, baseline_time_averaged};
pub use lag::{detection_density_lag, pair_overlap_g};
pub use oracle::{detection_density_2d_oracle, ORACLE_NODE_BUDGET};
pub use spectral::{component_transform, detection_density};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::oscillation::{DetectionModel, OscillationScenario};

/// How the curve was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AmplitudeSum,
    EqualTime,
    ComponentArrival,
    TimeAveraged,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::AmplitudeSum,
        Method::EqualTime,
        Method::ComponentArrival,
        Method::TimeAveraged,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AmplitudeSum => "amplitude_sum",
            Method::EqualTime => "equal_time",
            Method::ComponentArrival => "component_arrival",
            Method::TimeAveraged => "time_averaged",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == name)
    }
}

/// Upper end of the detection-time window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowPolicy {
    /// Start at `(max L + 8σ)/min v` and double until stable to 0.1%.
    Auto,
    Explicit(f64),
    /// `T → ∞`.
    Unbounded,
}

/// Lower end of the detection-time window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerLimit {
    /// `t = 0` when `L < 6σ`, otherwise extended to `-∞`.
    Auto,
    /// Always `t = 0`.
    Finite,
    /// Always `-∞`.
    Extended,
}

impl LowerLimit {
    pub(crate) fn resolve(&self, length: f64, sigma: f64) -> Option<f64> {
        match self {
            LowerLimit::Finite => Some(0.0),
            LowerLimit::Extended => None,
            LowerLimit::Auto if length < 6.0 * sigma => Some(0.0),
            LowerLimit::Auto => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityQuadrature {
    /// Relative change between successive refinements at which a density
    /// is accepted.
    pub tolerance: f64,
    /// Node doublings allowed for the lag-domain route.
    pub max_refinements: usize,
    /// Integrand evaluations allowed per length in the frequency route.
    pub max_evaluations: usize,
    /// Multiplies the initial panel width of the frequency mesh.
    pub panel_scale: f64,
    /// Relative change under window doubling at which `Auto` stops.
    pub window_tolerance: f64,
    pub max_window_doublings: usize,
}

impl Default for DensityQuadrature {
    fn default() -> Self {
        DensityQuadrature {
            tolerance: 1e-8,
            max_refinements: 8,
            max_evaluations: 4_000_000,
            panel_scale: 1.0,
            window_tolerance: 1e-3,
            max_window_doublings: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRequest {
    pub scenario: OscillationScenario,
    pub detection: DetectionModel,
    pub flavor: usize,
    pub lengths: Vec<f64>,
    pub window: WindowPolicy,
    pub lower_limit: LowerLimit,
    pub quadrature: DensityQuadrature,
}

impl DensityRequest {
    pub fn new(
        scenario: OscillationScenario,
        detection: DetectionModel,
        flavor: usize,
        lengths: Vec<f64>,
    ) -> Result<Self> {
        let request = DensityRequest {
            scenario,
            detection,
            flavor,
            lengths,
            window: WindowPolicy::Auto,
            lower_limit: LowerLimit::Auto,
            quadrature: DensityQuadrature::default(),
        };
        request.validate()?;
        Ok(request)
    }

    pub fn with_window(mut self, window: WindowPolicy) -> Result<Self> {
        self.window = window;
        self.validate()?;
        Ok(self)
    }

    pub fn with_lower_limit(mut self, lower_limit: LowerLimit) -> Self {
        self.lower_limit = lower_limit;
        self
    }

    pub fn with_quadrature(mut self, quadrature: DensityQuadrature) -> Self {
        self.quadrature = quadrature;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.check_flavor(self.flavor)?;
        validate_lengths(&self.lengths)?;
        if let WindowPolicy::Explicit(t) = self.window {
            let needed = self.max_length() / self.scenario.min_velocity();
            if !(t.is_finite() && t > needed) {
                return Err(validation(
                    "window",
                    format!("explicit T = {t} must exceed max(L)/min(v) = {needed}"),
                ));
            }
        }
        if !(self.quadrature.tolerance > 0.0 && self.quadrature.panel_scale > 0.0) {
            return Err(validation("quadrature", "tolerance and panel scale must be > 0"));
        }
        Ok(())
    }

    pub fn max_length(&self) -> f64 {
        self.lengths.last().copied().unwrap_or(0.0)
    }

    /// First window tried by the `Auto` policy.
    pub fn initial_auto_window(&self) -> f64 {
        (self.max_length() + 8.0 * self.scenario.sigma()) / self.scenario.min_velocity()
    }
}

pub(crate) fn validate_lengths(lengths: &[f64]) -> Result<()> {
    if lengths.is_empty() {
        return Err(validation("lengths", "grid must contain at least one length"));
    }
    if lengths.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(validation("lengths", "all lengths must be finite and >= 0"));
    }
    if lengths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(validation("lengths", "grid must be strictly increasing"));
    }
    Ok(())
}

/// Evenly spaced grid with `count` points from `start` to `stop`.
pub fn length_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![start],
        _ => (0..count)
            .map(|k| start + (stop - start) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMetadata {
    /// `ln` of the factor that undoes the normalization; `-∞` for a zero curve.
    pub log_scale: f64,
    /// Upper window limit actually used; `None` for `T → ∞` or where no
    /// window applies.
    pub t_final: Option<f64>,
    pub window_doublings: usize,
    /// Largest relative change at the last refinement over all lengths.
    pub relative_change: f64,
    /// Largest quadrature node count used for one length.
    pub nodes: usize,
    /// Largest `|Im p| / |p|` before truncation.
    pub imag_residual: f64,
    /// Number of slightly negative densities clamped to zero.
    pub clamped: usize,
}

impl Default for CurveMetadata {
    fn default() -> Self {
        CurveMetadata {
            log_scale: 0.0,
            t_final: None,
            window_doublings: 0,
            relative_change: 0.0,
            nodes: 0,
            imag_residual: 0.0,
            clamped: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionCurve {
    pub lengths: Vec<f64>,
    /// Nonnegative, with maximum 1 unless the curve vanishes identically.
    pub densities: Vec<f64>,
    pub method: Method,
    pub metadata: CurveMetadata,
}

impl DetectionCurve {
    /// Normalizes log-densities to a maximum of 1.
    pub(crate) fn from_log(lengths: Vec<f64>, ln_values: &[f64], method: Method, mut metadata: CurveMetadata) -> Self {
        let top = ln_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let densities = if top == f64::NEG_INFINITY {
            vec![0.0; ln_values.len()]
        } else {
            ln_values.iter().map(|v| (v - top).exp()).collect()
        };
        metadata.log_scale = top;
        DetectionCurve {
            lengths,
            densities,
            method,
            metadata,
        }
    }

    /// Normalizes real densities, clamping values in `[-1e-9·max, 0)`.
    pub(crate) fn from_values(lengths: Vec<f64>, values: &[f64], method: Method, mut metadata: CurveMetadata) -> Self {
        let top = values.iter().copied().fold(0.0, f64::max);
        for &v in values {
            if v < 0.0 {
                metadata.clamped += 1;
                if v < -1e-9 * top {
                    log::warn!("{}: density {v:e} below -1e-9 relative, clamped", method.as_str());
                }
            }
        }
        let ln: Vec<f64> = values
            .iter()
            .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
            .collect();
        DetectionCurve::from_log(lengths, &ln, method, metadata)
    }

    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.densities.iter().all(|&d| d == 0.0)
    }

    /// Densities in the evaluator's absolute units.
    pub fn raw(&self) -> Vec<f64> {
        self.densities
            .iter()
            .map(|d| d * self.metadata.log_scale.exp())
            .collect()
    }

    /// `ln` of the absolute densities.
    pub fn ln_raw(&self) -> Vec<f64> {
        self.densities
            .iter()
            .map(|d| {
                if *d > 0.0 {
                    d.ln() + self.metadata.log_scale
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect()
    }
}

/// Evaluates `request` with the given method. Baselines ignore the detector;
/// the time-averaged one uses the explicit window when one is set.
pub fn evaluate(request: &DensityRequest, method: Method) -> Result<DetectionCurve> {
    let (scenario, flavor, lengths) = (&request.scenario, request.flavor, &request.lengths);
    match method {
        Method::AmplitudeSum => detection_density(request),
        Method::EqualTime => baseline_equal_time(scenario, flavor, lengths),
        Method::ComponentArrival => baseline_component_arrival(scenario, flavor, lengths),
        Method::TimeAveraged => {
            let t_final = match request.window {
                WindowPolicy::Explicit(t) => Some(t),
                _ => None,
            };
            baseline_time_averaged(scenario, flavor, lengths, t_final)
        }
    }
}

pub(crate) fn warn_localization(request: &DensityRequest) {
    if request.detection.localization > request.scenario.sigma() / 10.0 {
        log::warn!(
            "localization {} exceeds sigma/10 = {}; the point-detector reduction is loose",
            request.detection.localization,
            request.scenario.sigma() / 10.0
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillation::fixtures;

    #[test]
    fn request_validation() {
        let (s, d) = fixtures::ur2f();
        assert!(DensityRequest::new(s.clone(), d.clone(), 0, vec![1.0, 1.0]).is_err());
        assert!(DensityRequest::new(s.clone(), d.clone(), 0, vec![-1.0]).is_err());
        assert!(DensityRequest::new(s.clone(), d.clone(), 2, vec![1.0]).is_err());
        let r = DensityRequest::new(s, d, 0, vec![100.0, 200.0]).unwrap();
        assert!(r.clone().with_window(WindowPolicy::Explicit(150.0)).is_err());
        assert!(r.with_window(WindowPolicy::Explicit(250.0)).is_ok());
    }

    #[test]
    fn lower_limit_rule() {
        assert_eq!(LowerLimit::Auto.resolve(299.0, 50.0), Some(0.0));
        assert_eq!(LowerLimit::Auto.resolve(300.0, 50.0), None);
        assert_eq!(LowerLimit::Finite.resolve(1e6, 50.0), Some(0.0));
    }

    #[test]
    fn normalization() {
        let c = DetectionCurve::from_log(
            vec![1.0, 2.0],
            &[-1000.0, -1001.0],
            Method::AmplitudeSum,
            CurveMetadata::default(),
        );
        assert_eq!(c.densities[0], 1.0);
        assert!((c.densities[1] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(c.metadata.log_scale, -1000.0);
        let z = DetectionCurve::from_values(vec![1.0], &[0.0], Method::EqualTime, CurveMetadata::default());
        assert!(z.is_zero());
        let neg = DetectionCurve::from_values(
            vec![1.0, 2.0],
            &[1.0, -1e-12],
            Method::EqualTime,
            CurveMetadata::default(),
        );
        assert_eq!(neg.densities[1], 0.0);
        assert_eq!(neg.metadata.clamped, 1);
    }

    #[test]
    fn grid() {
        assert_eq!(length_grid(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        assert_eq!(Method::parse("time_averaged"), Some(Method::TimeAveraged));
    }
}
