//! The three conventional recipes for a flavor probability at distance `L`.

use num_complex::Complex64;

use super::{validate_lengths, CurveMetadata, DetectionCurve, Method};
use crate::error::Result;
use crate::oscillation::{gaussian_amplitude, gaussian_component, OscillationScenario};
use crate::quadrature::{composite, Rule, PANEL_ORDER};

/// `|A_α(t = L, L)|²`.
pub fn baseline_equal_time(scenario: &OscillationScenario, flavor: usize, lengths: &[f64]) -> Result<DetectionCurve> {
    scenario.check_flavor(flavor)?;
    validate_lengths(lengths)?;
    let values: Vec<f64> = lengths
        .iter()
        .map(|&l| gaussian_amplitude(scenario, flavor, l, l).norm_sqr())
        .collect();
    Ok(DetectionCurve::from_values(
        lengths.to_vec(),
        &values,
        Method::EqualTime,
        CurveMetadata::default(),
    ))
}

/// `|Σ_i c_i φ_i(t = L/v_i, L)|²`.
pub fn baseline_component_arrival(
    scenario: &OscillationScenario,
    flavor: usize,
    lengths: &[f64],
) -> Result<DetectionCurve> {
    scenario.check_flavor(flavor)?;
    validate_lengths(lengths)?;
    let coefficients = scenario.coefficients(flavor);
    let values: Vec<f64> = lengths
        .iter()
        .map(|&l| {
            (0..scenario.len())
                .map(|i| coefficients[i] * gaussian_component(scenario, i, l / scenario.state(i).velocity(), l))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    Ok(DetectionCurve::from_values(
        lengths.to_vec(),
        &values,
        Method::ComponentArrival,
        CurveMetadata::default(),
    ))
}

/// `∫_0^T |A_α(t, L)|² dt`; `t_final = None` uses `(max L + 8σ)/min v`.
pub fn baseline_time_averaged(
    scenario: &OscillationScenario,
    flavor: usize,
    lengths: &[f64],
    t_final: Option<f64>,
) -> Result<DetectionCurve> {
    scenario.check_flavor(flavor)?;
    validate_lengths(lengths)?;
    let sigma = scenario.sigma();
    let t_final = t_final.unwrap_or_else(|| (lengths[lengths.len() - 1] + 8.0 * sigma) / scenario.min_velocity());
    let rule = Rule::new(PANEL_ORDER);
    let v_max = scenario.states().iter().map(|s| s.velocity()).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut max_nodes = 0;
    let values: Vec<f64> = lengths
        .iter()
        .map(|&l| {
            // Panels over the union of the packets' passage windows; the
            // integrand is below e^{-200} of its peak elsewhere.
            let lo = scenario
                .states()
                .iter()
                .map(|s| (l - 20.0 * sigma) / s.velocity())
                .fold(f64::INFINITY, f64::min)
                .max(0.0);
            let hi = scenario
                .states()
                .iter()
                .map(|s| (l + 20.0 * sigma) / s.velocity())
                .fold(0.0, f64::max)
                .min(t_final);
            if hi <= lo {
                return 0.0;
            }
            let integrate = |panels: usize| -> f64 {
                let breaks: Vec<f64> = (0..=panels)
                    .map(|k| lo + (hi - lo) * k as f64 / panels as f64)
                    .collect();
                composite(&rule, &breaks, |t| {
                    gaussian_amplitude(scenario, flavor, t, l).norm_sqr()
                })
            };
            let mut panels = (((hi - lo) * v_max / (0.5 * sigma)).ceil() as usize).max(4);
            let mut previous = integrate(panels);
            let mut rel = f64::INFINITY;
            for _ in 0..6 {
                panels *= 2;
                let current = integrate(panels);
                rel = (current - previous).abs() / current.abs().max(1e-300);
                previous = current;
                if rel < 1e-12 {
                    break;
                }
            }
            worst = worst.max(if previous == 0.0 { 0.0 } else { rel });
            max_nodes = max_nodes.max(panels * PANEL_ORDER);
            previous
        })
        .collect();
    let metadata = CurveMetadata {
        t_final: Some(t_final),
        relative_change: worst,
        nodes: max_nodes,
        ..Default::default()
    };
    Ok(DetectionCurve::from_values(
        lengths.to_vec(),
        &values,
        Method::TimeAveraged,
        metadata,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::length_grid;
    use crate::engine::pair_overlap_g;
    use crate::oscillation::{fixtures, MassEigenstate, MixingMatrix};

    fn single() -> OscillationScenario {
        OscillationScenario::new(
            vec![MassEigenstate::stable(0.1, 10.0).unwrap()],
            MixingMatrix::identity(1),
            50.0,
            0,
        )
        .unwrap()
    }

    #[test]
    fn zero_mixing_gives_zero_baselines() {
        let (s, _) = fixtures::ur2f();
        let s = OscillationScenario::new(s.states().to_vec(), MixingMatrix::identity(2), 50.0, 0).unwrap();
        let grid = length_grid(300.0, 900.0, 7);
        assert!(baseline_equal_time(&s, 1, &grid).unwrap().is_zero());
        assert!(baseline_component_arrival(&s, 1, &grid).unwrap().is_zero());
        assert!(baseline_time_averaged(&s, 1, &grid, None).unwrap().is_zero());
    }

    #[test]
    fn single_component_arrival_is_flat() {
        let grid = length_grid(300.0, 3000.0, 10);
        let c = baseline_component_arrival(&single(), 0, &grid).unwrap();
        assert!(c.densities.iter().all(|d| (d - 1.0).abs() < 1e-14));
        let raw = c.raw()[0];
        assert!((raw - 1.0 / (std::f64::consts::PI * 2500.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_component_equal_time_decays_slowly() {
        let grid = length_grid(300.0, 3000.0, 10);
        let c = baseline_equal_time(&single(), 0, &grid).unwrap();
        assert!(c.densities.windows(2).all(|w| w[1] <= w[0]));
        // (L - vL)²/σ² with 1 - v ≈ 5e-5 stays tiny over this grid.
        assert!(c.densities[9] > 0.999);
    }

    #[test]
    fn time_average_matches_closed_form() {
        let (s, _) = fixtures::ur2f();
        let grid = length_grid(300.0, 1500.0, 5);
        let curve = baseline_time_averaged(&s, 1, &grid, Some(1e4)).unwrap();
        let c = s.coefficients(1);
        for (k, &l) in grid.iter().enumerate() {
            let mut closed = Complex64::new(0.0, 0.0);
            for i in 0..2 {
                for j in 0..2 {
                    closed += c[i] * c[j].conj() * pair_overlap_g(&s, i, j, l, 0.0, Some(0.0), Some(1e4));
                }
            }
            assert!(closed.im.abs() < 1e-12 * closed.norm());
            assert!((curve.raw()[k] - closed.re).abs() <= 1e-10 * closed.re, "L = {l}");
        }
        let one = baseline_time_averaged(&single(), 0, &grid, None).unwrap();
        let v = single().state(0).velocity();
        assert!((one.raw()[2] - 1.0 / v).abs() < 1e-10);
    }
}
