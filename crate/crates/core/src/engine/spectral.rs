//! Frequency-domain evaluation of the detection density.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;

use super::{warn_localization, CurveMetadata, DensityRequest, DetectionCurve, Method, WindowPolicy};
use crate::error::{Error, Result};
use crate::oscillation::{KernelSpectrum, OscillationScenario};
use crate::quadrature::{Rule, PANEL_ORDER};
use crate::special::{gaussian_segment, Scaled};

/// `Φ_i(ν; L) = ∫ φ_i(t, L) e^{iνt} dt` over `[lower, upper]` (`None` = ∓∞),
/// without the mixing coefficient.
pub fn component_transform(
    scenario: &OscillationScenario,
    i: usize,
    length: f64,
    nu: f64,
    lower: Option<f64>,
    upper: Option<f64>,
) -> Scaled {
    let s = scenario.state(i);
    let sigma = scenario.sigma();
    let v = s.velocity();
    let b = v / (SQRT_2 * sigma);
    let kappa = Complex64::new(s.decay_rate, s.energy() - nu);
    let chi = Complex64::new(-0.25 * (PI * sigma * sigma).ln(), s.momentum * length);
    gaussian_segment(b, length / v, kappa, chi, lower, upper)
}

/// Initial ω-mesh: panels of a few widths where the integrand has
/// structure, coarser elsewhere. Refinement is adaptive from here.
fn base_breaks(request: &DensityRequest, spectrum: &KernelSpectrum) -> Vec<f64> {
    let scenario = &request.scenario;
    let sigma = scenario.sigma();
    let eps = request.detection.threshold;
    let a = spectrum.tail_rate();

    let widths: Vec<f64> = scenario.states().iter().map(|s| s.velocity() / sigma).collect();
    let w_min = widths.iter().copied().fold(f64::INFINITY, f64::min);
    // The kernel scale 1/a only needs resolving near ω = 0; elsewhere
    // e^{-aω} is smooth on the packet scale and adaptivity takes over.
    let scale = request.quadrature.panel_scale;
    let fine_zero = (2.0 * w_min).min(4.0 / a) * scale;
    let fine = 2.0 * w_min * scale;
    let coarse = (8.0 * fine_zero).max(0.5 * w_min * scale);

    let zero_end = (spectrum.shape() + 80.0) / a;
    let mut intervals = vec![(0.0, zero_end)];
    for (s, &w) in scenario.states().iter().zip(&widths) {
        let v = s.velocity();
        let on_shell = s.energy() - eps;
        let peak = (on_shell - a * v * v / (2.0 * sigma * sigma)).max(0.0);
        for centre in [on_shell, peak] {
            let lo = (centre - 14.0 * w).max(0.0);
            let hi = centre + 14.0 * w;
            if hi > 0.0 {
                intervals.push((lo, hi));
            }
        }
    }
    intervals.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }

    let mut breaks = vec![0.0];
    let push_span = |breaks: &mut Vec<f64>, lo: f64, hi: f64, step: f64| {
        if hi <= lo {
            return;
        }
        let panels = ((hi - lo) / step).ceil().max(1.0) as usize;
        for k in 1..=panels {
            breaks.push(lo + (hi - lo) * k as f64 / panels as f64);
        }
    };
    let mut cursor = 0.0;
    for (lo, hi) in merged {
        push_span(&mut breaks, cursor, lo, coarse);
        let start = lo.max(cursor);
        if start < zero_end {
            push_span(&mut breaks, start, zero_end.min(hi), fine_zero);
        }
        push_span(&mut breaks, zero_end.max(start), hi, fine);
        cursor = cursor.max(hi);
    }
    breaks
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + values.map(|v| (v - top).exp()).sum::<f64>().ln()
}

/// `ln |e^x - e^y|`.
fn ln_abs_diff(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if hi == f64::NEG_INFINITY || hi == lo {
        return f64::NEG_INFINITY;
    }
    hi + (-(lo - hi).exp_m1()).ln()
}

fn relative_change(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        0.0
    } else {
        (a - b).abs().exp_m1().abs()
    }
}

/// A panel in its own coordinate: `ω` directly, or `u` with `ω = u²`.
#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    squared: bool,
    left: f64,
    right: f64,
    value: f64,
    ln_error: f64,
}

struct PanelOrder(Panel);

impl PartialEq for PanelOrder {
    fn eq(&self, other: &Self) -> bool {
        self.0.ln_error.total_cmp(&other.0.ln_error).is_eq()
    }
}
impl Eq for PanelOrder {}
impl PartialOrd for PanelOrder {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PanelOrder {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.ln_error.total_cmp(&other.0.ln_error)
    }
}

struct LengthResult {
    ln_density: f64,
    relative_change: f64,
    nodes: usize,
}

/// Globally adaptive Gauss–Legendre in log form for one length: the panel
/// with the largest estimated error (one rule vs. the rule on both halves)
/// is split until the summed error falls below `tolerance` of the total.
fn integrate_length(
    base: &[f64],
    tolerance: f64,
    max_evaluations: usize,
    ln_integrand: &dyn Fn(f64) -> f64,
    spectrum: &KernelSpectrum,
) -> std::result::Result<LengthResult, (f64, f64)> {
    let rule = Rule::new(PANEL_ORDER);
    let ln_two_pi = (2.0 * PI).ln();
    let evaluations = std::cell::Cell::new(0usize);
    let rule_value = |a: f64, b: f64, squared: bool| -> f64 {
        evaluations.set(evaluations.get() + PANEL_ORDER);
        let terms: Vec<f64> = rule
            .mapped(a, b)
            .map(|(x, w)| {
                let (omega, jac) = if squared { (x * x, 2.0 * x) } else { (x, 1.0) };
                let ln_f = spectrum.ln_density(omega);
                if ln_f == f64::NEG_INFINITY || jac <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    (w * jac).ln() + ln_f - ln_two_pi + ln_integrand(omega)
                }
            })
            .collect();
        log_sum_exp(terms.iter().copied())
    };
    let make = |a: f64, b: f64, squared: bool, whole: f64| {
        let m = 0.5 * (a + b);
        let left = rule_value(a, m, squared);
        let right = rule_value(m, b, squared);
        let value = log_sum_exp([left, right].into_iter());
        Panel {
            a,
            b,
            squared,
            left,
            right,
            value,
            ln_error: ln_abs_diff(value, whole),
        }
    };

    let mut heap = std::collections::BinaryHeap::new();
    for (k, ab) in base.windows(2).enumerate() {
        // ω = u² on the first panel absorbs the ω^{1/2} onset of F̂.
        let (a, b, squared) = if k == 0 {
            (ab[0].sqrt(), ab[1].sqrt(), true)
        } else {
            (ab[0], ab[1], false)
        };
        let whole = rule_value(a, b, squared);
        heap.push(PanelOrder(make(a, b, squared, whole)));
    }
    let ln_tol = tolerance.ln();
    let mut splits = 0usize;
    loop {
        if splits.is_multiple_of(16) {
            let total = log_sum_exp(heap.iter().map(|p| p.0.value));
            let error = log_sum_exp(heap.iter().map(|p| p.0.ln_error));
            if total == f64::NEG_INFINITY || error <= ln_tol + total {
                return Ok(LengthResult {
                    ln_density: total,
                    relative_change: if total == f64::NEG_INFINITY {
                        0.0
                    } else {
                        (error - total).exp()
                    },
                    nodes: evaluations.get(),
                });
            }
            if evaluations.get() > max_evaluations {
                return Err((total, (error - total).exp()));
            }
        }
        let Some(PanelOrder(worst)) = heap.pop() else {
            unreachable!()
        };
        let m = 0.5 * (worst.a + worst.b);
        heap.push(PanelOrder(make(worst.a, m, worst.squared, worst.left)));
        heap.push(PanelOrder(make(m, worst.b, worst.squared, worst.right)));
        splits += 1;
    }
}

/// `ln p(L)` for every length at a fixed upper limit.
fn evaluate_window(request: &DensityRequest, upper: Option<f64>, tolerance: f64) -> Result<Vec<LengthResult>> {
    let scenario = &request.scenario;
    let coefficients = scenario.coefficients(request.flavor);
    let active: Vec<usize> = (0..scenario.len())
        .filter(|&i| coefficients[i] != Complex64::new(0.0, 0.0))
        .collect();
    if active.is_empty() {
        return Ok(request
            .lengths
            .iter()
            .map(|_| LengthResult {
                ln_density: f64::NEG_INFINITY,
                relative_change: 0.0,
                nodes: 0,
            })
            .collect());
    }
    let spectrum = KernelSpectrum::new(&request.detection);
    let eps = request.detection.threshold;
    let base = base_breaks(request, &spectrum);

    request
        .lengths
        .par_iter()
        .map(|&length| {
            let lower = request.lower_limit.resolve(length, scenario.sigma());
            let ln_integrand = |omega: f64| -> f64 {
                let amp = active.iter().fold(Scaled::ZERO, |acc, &i| {
                    acc + component_transform(scenario, i, length, omega + eps, lower, upper).scale(coefficients[i])
                });
                2.0 * amp.ln_abs()
            };
            integrate_length(
                &base,
                tolerance,
                request.quadrature.max_evaluations,
                &ln_integrand,
                &spectrum,
            )
            .map_err(|(estimate, rel)| Error::Accuracy {
                context: format!("frequency integral at L = {length}: relative error {rel:e}"),
                previous: estimate,
                current: estimate,
            })
        })
        .collect()
}

fn to_curve(
    request: &DensityRequest,
    results: &[LengthResult],
    t_final: Option<f64>,
    doublings: usize,
) -> DetectionCurve {
    let ln: Vec<f64> = results.iter().map(|r| r.ln_density).collect();
    let metadata = CurveMetadata {
        t_final,
        window_doublings: doublings,
        relative_change: results.iter().map(|r| r.relative_change).fold(0.0, f64::max),
        nodes: results.iter().map(|r| r.nodes).max().unwrap_or(0),
        ..Default::default()
    };
    DetectionCurve::from_log(request.lengths.clone(), &ln, Method::AmplitudeSum, metadata)
}

/// Detection density by the frequency-domain route; see the module docs.
pub fn detection_density(request: &DensityRequest) -> Result<DetectionCurve> {
    request.validate()?;
    warn_localization(request);
    let tol = request.quadrature.tolerance;
    match request.window {
        WindowPolicy::Explicit(t) => Ok(to_curve(request, &evaluate_window(request, Some(t), tol)?, Some(t), 0)),
        WindowPolicy::Unbounded => Ok(to_curve(request, &evaluate_window(request, None, tol)?, None, 0)),
        WindowPolicy::Auto => {
            // Window candidates only need to be resolved well enough to
            // compare; the accepted one is recomputed at full tolerance.
            let scout = tol.max(0.01 * request.quadrature.window_tolerance);
            let mut t = request.initial_auto_window();
            let mut previous = evaluate_window(request, Some(t), scout)?;
            for doubling in 1..=request.quadrature.max_window_doublings {
                t *= 2.0;
                let current = evaluate_window(request, Some(t), scout)?;
                let change = current
                    .iter()
                    .zip(&previous)
                    .map(|(a, b)| relative_change(a.ln_density, b.ln_density))
                    .fold(0.0, f64::max);
                log::debug!("window T = {t}: max relative change {change:e}");
                if change < request.quadrature.window_tolerance {
                    let settled = if scout > tol {
                        evaluate_window(request, Some(t), tol)?
                    } else {
                        current
                    };
                    return Ok(to_curve(request, &settled, Some(t), doubling));
                }
                previous = current;
            }
            Err(Error::Accuracy {
                context: format!("window doubling did not settle by T = {t}"),
                previous: previous.iter().map(|r| r.ln_density).fold(f64::NEG_INFINITY, f64::max),
                current: previous.iter().map(|r| r.ln_density).fold(f64::NEG_INFINITY, f64::max),
            })
        }
    }
}
