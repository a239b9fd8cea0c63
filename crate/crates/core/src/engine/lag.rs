//! Lag-domain evaluation: `p = Σ_ij c_i c_j* ∫ ds G_ij(s) e^{-iεs} F(s)`.
//!
//! The s-integrand oscillates at the packet energy and its integral can be
//! exponentially smaller than the integrand, so this route is only
//! well-conditioned when `M δ² (E - ε)/2` is modest. It serves as an
//! independent check of the frequency-domain route.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{warn_localization, CurveMetadata, DensityRequest, DetectionCurve, Method, WindowPolicy};
use crate::error::{Error, Result};
use crate::oscillation::{kernel_f_saddle, OscillationScenario};
use crate::quadrature::{composite, uniform_breaks, Rule, PANEL_ORDER};
use crate::special::{gaussian_segment, Scaled};

/// `∫ dt φ_i(t, L) φ_j*(t + s, L)` with both times inside `[lower, upper]`.
pub fn pair_overlap_g(
    scenario: &OscillationScenario,
    i: usize,
    j: usize,
    length: f64,
    s: f64,
    lower: Option<f64>,
    upper: Option<f64>,
) -> Complex64 {
    pair_overlap_scaled(scenario, i, j, length, s, lower, upper).to_complex()
}

pub(crate) fn pair_overlap_scaled(
    scenario: &OscillationScenario,
    i: usize,
    j: usize,
    length: f64,
    s: f64,
    lower: Option<f64>,
    upper: Option<f64>,
) -> Scaled {
    let (a, b) = (scenario.state(i), scenario.state(j));
    let sigma = scenario.sigma();
    let (vi, vj) = (a.velocity(), b.velocity());
    let shifted = length - vj * s;
    let b2 = (vi * vi + vj * vj) / (2.0 * sigma * sigma);
    let t_c = (vi * length + vj * shifted) / (vi * vi + vj * vj);
    let kappa = Complex64::new(a.decay_rate + b.decay_rate, a.energy() - b.energy());
    let chi = Complex64::new(
        -(length * length + shifted * shifted) / (2.0 * sigma * sigma) + b2 * t_c * t_c
            - 0.5 * (PI * sigma * sigma).ln()
            - b.decay_rate * s,
        (a.momentum - b.momentum) * length + b.energy() * s,
    );
    let t0 = lower.map(|lo| lo.max(lo - s));
    let t1 = upper.map(|hi| hi.min(hi - s));
    if let (Some(x), Some(y)) = (t0, t1) {
        if y <= x {
            return Scaled::ZERO;
        }
    }
    gaussian_segment(b2.sqrt(), t_c, kappa, chi, t0, t1)
}

/// Detection density by the lag-domain route; the window must be explicit
/// or unbounded.
pub fn detection_density_lag(request: &DensityRequest) -> Result<DetectionCurve> {
    request.validate()?;
    warn_localization(request);
    let upper = match request.window {
        WindowPolicy::Explicit(t) => Some(t),
        WindowPolicy::Unbounded => None,
        WindowPolicy::Auto => {
            return Err(Error::Configuration(
                "the lag-domain route needs an explicit or unbounded window".into(),
            ))
        }
    };
    let scenario = &request.scenario;
    let detection = &request.detection;
    let n = scenario.len();
    let coefficients = scenario.coefficients(request.flavor);
    let eps = detection.threshold;
    let sigma = scenario.sigma();
    let v_min = scenario.min_velocity();
    let e_max = scenario.states().iter().map(|s| s.energy()).fold(0.0, f64::max);
    let a_min = detection.saddle_rates().into_iter().fold(f64::INFINITY, f64::min);
    let h = (PI / (e_max + eps)).min(0.25 * a_min).min(0.25 * sigma) * request.quadrature.panel_scale;
    let rule = Rule::new(PANEL_ORDER);

    let results: Vec<Result<(Complex64, usize, f64)>> = request
        .lengths
        .par_iter()
        .map(|&length| {
            let lower = request.lower_limit.resolve(length, sigma);
            let arrivals: Vec<f64> = scenario.states().iter().map(|s| length / s.velocity()).collect();
            let spread =
                arrivals.iter().copied().fold(0.0, f64::max) - arrivals.iter().copied().fold(f64::INFINITY, f64::min);
            let reach = 24.0 * std::f64::consts::SQRT_2 * sigma / (v_min * v_min) + spread;
            let (mut s_lo, mut s_hi) = (-reach, reach);
            if let (Some(lo), Some(hi)) = (lower, upper) {
                s_lo = s_lo.max(lo - hi);
                s_hi = s_hi.min(hi - lo);
            }
            let integrand = |s: f64| -> (Complex64, f64) {
                let kernel = kernel_f_saddle(detection, s) * Complex64::from_polar(1.0, -eps * s);
                let mut total = Complex64::new(0.0, 0.0);
                let mut magnitude = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let c = coefficients[i] * coefficients[j].conj();
                        if c == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let term = c * pair_overlap_g(scenario, i, j, length, s, lower, upper) * kernel;
                        magnitude += term.norm();
                        total += term;
                    }
                }
                (total, magnitude)
            };
            let evaluate = |panels: usize| -> (Complex64, f64) {
                let breaks = uniform_breaks(s_lo, s_hi, panels);
                let value: Complex64 = composite(&rule, &breaks, |s| integrand(s).0);
                let scale: f64 = composite(&rule, &breaks, |s| integrand(s).1);
                (value, scale)
            };
            let mut panels = (((s_hi - s_lo) / h).ceil() as usize).max(4);
            let (mut previous, _) = evaluate(panels);
            for _ in 0..request.quadrature.max_refinements {
                panels *= 2;
                let (current, scale) = evaluate(panels);
                let rel = (current - previous).norm() / current.norm().max(1e-14 * scale).max(1e-300);
                if rel <= request.quadrature.tolerance.max(1e-12) {
                    return Ok((current, panels * PANEL_ORDER, rel));
                }
                previous = current;
            }
            Err(Error::Accuracy {
                context: format!("lag integral at L = {length}"),
                previous: previous.re,
                current: previous.re,
            })
        })
        .collect();

    let mut values = Vec::with_capacity(results.len());
    let mut metadata = CurveMetadata {
        t_final: upper,
        ..Default::default()
    };
    for r in results {
        let (value, nodes, rel) = r?;
        if value.norm() > 0.0 {
            metadata.imag_residual = metadata.imag_residual.max(value.im.abs() / value.norm());
        }
        metadata.nodes = metadata.nodes.max(nodes);
        metadata.relative_change = metadata.relative_change.max(rel);
        values.push(value.re);
    }
    Ok(DetectionCurve::from_values(
        request.lengths.clone(),
        &values,
        Method::AmplitudeSum,
        metadata,
    ))
}
