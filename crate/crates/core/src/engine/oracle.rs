//! Brute-force 2D Gauss–Legendre evaluation of the double time integral.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use super::{CurveMetadata, DensityRequest, DetectionCurve, Method, WindowPolicy};
use crate::error::{Error, Result};
use crate::oscillation::{gaussian_amplitude, kernel_f_saddle};
use crate::quadrature::{uniform_breaks, Rule, PANEL_ORDER};

/// Largest allowed `(nodes per axis)²`.
pub const ORACLE_NODE_BUDGET: usize = 100_000_000;

const ORACLE_TOLERANCE: f64 = 1e-6;

/// `∫_0^T ∫_0^T A(t) A*(t') e^{-iε(t'-t)} F(t'-t) dt dt'`, normalized like
/// every curve. Corresponds to [`super::LowerLimit::Finite`].
pub fn detection_density_2d_oracle(request: &DensityRequest) -> Result<DetectionCurve> {
    request.validate()?;
    let WindowPolicy::Explicit(t_final) = request.window else {
        return Err(Error::Configuration("the 2D oracle needs an explicit window".into()));
    };
    let scenario = &request.scenario;
    let detection = &request.detection;
    let eps = detection.threshold;
    let e_max = scenario.states().iter().map(|s| s.energy()).fold(0.0, f64::max);
    let v_max = scenario.states().iter().map(|s| s.velocity()).fold(0.0, f64::max);
    let a_min = detection.saddle_rates().into_iter().fold(f64::INFINITY, f64::min);
    let h = (2.0 * PI / e_max).min(0.25 * scenario.sigma() / v_max).min(0.5 * a_min);
    let base_panels = (t_final / h).ceil() as usize;
    let nodes_for = |panels: usize| panels * PANEL_ORDER;
    let budget_ok = |panels: usize| nodes_for(panels) * nodes_for(panels) <= ORACLE_NODE_BUDGET;
    if !budget_ok(2 * base_panels) {
        let suggested = t_final * (ORACLE_NODE_BUDGET as f64).sqrt() / nodes_for(2 * base_panels) as f64;
        return Err(Error::Budget(format!(
            "2D oracle at T = {t_final} needs {} nodes per axis; try T <= {suggested:.1}",
            nodes_for(2 * base_panels)
        )));
    }
    let rule = Rule::new(PANEL_ORDER);

    let evaluate = |length: f64, panels: usize| -> Complex64 {
        let nodes: Vec<(f64, f64)> = uniform_breaks(0.0, t_final, panels)
            .windows(2)
            .flat_map(|ab| rule.mapped(ab[0], ab[1]).collect::<Vec<_>>())
            .collect();
        let weighted: Vec<Complex64> = nodes
            .iter()
            .map(|&(t, w)| {
                w * gaussian_amplitude(scenario, request.flavor, t, length) * Complex64::from_polar(1.0, eps * t)
            })
            .collect();
        let mut total = Complex64::new(0.0, 0.0);
        for (k, &(t, _)) in nodes.iter().enumerate() {
            if weighted[k] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut row = Complex64::new(0.0, 0.0);
            for (l, &(t2, _)) in nodes.iter().enumerate() {
                row += weighted[l].conj() * kernel_f_saddle(detection, t2 - t);
            }
            total += weighted[k] * row;
        }
        total
    };

    let results: Vec<Result<(Complex64, usize, f64)>> = request
        .lengths
        .par_iter()
        .map(|&length| {
            let mut panels = base_panels;
            let mut previous = evaluate(length, panels);
            while budget_ok(2 * panels) {
                panels *= 2;
                let current = evaluate(length, panels);
                let rel = (current - previous).norm() / current.norm().max(1e-300);
                if rel <= ORACLE_TOLERANCE || current == previous {
                    return Ok((current, nodes_for(panels), rel));
                }
                previous = current;
            }
            Err(Error::Budget(format!(
                "2D oracle at L = {length} did not settle within {ORACLE_NODE_BUDGET} node pairs"
            )))
        })
        .collect();

    let mut values = Vec::with_capacity(results.len());
    let mut metadata = CurveMetadata {
        t_final: Some(t_final),
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
