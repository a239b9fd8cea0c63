//! Flavor amplitudes `A_α(t, x)` in three approximations.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::OscillationScenario;
use crate::error::{validation, Result};
use crate::quadrature::{composite, converge, uniform_breaks, ConvergencePolicy, Rule, PANEL_ORDER};

/// Plane waves: `Σ_i U*_{βi} U_{αi} e^{i p_i x - i E_i t}`.
pub fn plane_wave_amplitude(scenario: &OscillationScenario, flavor: usize, t: f64, x: f64) -> Complex64 {
    scenario
        .states()
        .iter()
        .enumerate()
        .map(|(i, s)| scenario.coefficient(flavor, i) * Complex64::from_polar(1.0, s.momentum * x - s.energy() * t))
        .sum()
}

/// One linearized Gaussian component without its mixing coefficient:
/// `(πσ²)^{-1/4} exp(-(x - v t)²/2σ² + i p x - i E t - Γ t)`.
pub fn gaussian_component(scenario: &OscillationScenario, i: usize, t: f64, x: f64) -> Complex64 {
    let s = scenario.state(i);
    let sigma = scenario.sigma();
    let d = x - s.velocity() * t;
    let norm = (PI * sigma * sigma).powf(-0.25);
    norm * Complex64::new(
        -d * d / (2.0 * sigma * sigma) - s.decay_rate * t,
        s.momentum * x - s.energy() * t,
    )
    .exp()
}

/// Linearized Gaussian packets; meant for `t >= 0`.
pub fn gaussian_amplitude(scenario: &OscillationScenario, flavor: usize, t: f64, x: f64) -> Complex64 {
    (0..scenario.len())
        .map(|i| scenario.coefficient(flavor, i) * gaussian_component(scenario, i, t, x))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentumQuadrature {
    /// Integration half-width in units of the momentum spread `1/σ`.
    pub half_width: f64,
    pub policy: ConvergencePolicy,
}

impl Default for MomentumQuadrature {
    fn default() -> Self {
        MomentumQuadrature {
            half_width: 12.0,
            policy: ConvergencePolicy {
                initial_nodes: 64,
                max_nodes: 1 << 18,
                target: 1e-11,
                accept: 1e-8,
                floor: 0.0,
            },
        }
    }
}

/// Exact momentum integral with the full dispersion `E_i(p) = √(m_i² + p²)`
/// and `Γ_i` frozen at its central value.
pub fn momentum_integral_amplitude(
    scenario: &OscillationScenario,
    flavor: usize,
    t: f64,
    x: f64,
    quadrature: &MomentumQuadrature,
) -> Result<Complex64> {
    if quadrature.half_width < 8.0 {
        return Err(validation(
            "half_width",
            format!("must cover at least 8 momentum widths, got {}", quadrature.half_width),
        ));
    }
    let sigma = scenario.sigma();
    let prefactor = (4.0 * PI * sigma * sigma).powf(0.25) / (2.0 * PI);
    let coefficients = scenario.coefficients(flavor);
    // Results far outside the packet are pure cancellation noise; measure
    // the relative change against the amplitude scale instead.
    let scale: f64 = coefficients.iter().map(|c| c.norm()).sum::<f64>() * (PI * sigma * sigma).powf(-0.25);
    let policy = ConvergencePolicy {
        floor: quadrature.policy.floor.max(1e-13 * scale),
        ..quadrature.policy
    };
    let rule = Rule::new(PANEL_ORDER);
    let out = converge(&policy, "momentum integral amplitude", |nodes| {
        let panels = (nodes / PANEL_ORDER).max(1);
        let mut total = Complex64::new(0.0, 0.0);
        for (i, state) in scenario.states().iter().enumerate() {
            let c = coefficients[i];
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let p0 = state.momentum;
            let w = quadrature.half_width / sigma;
            let m = state.mass;
            let damping = (-state.decay_rate * t).exp();
            let integral: Complex64 = composite(&rule, &uniform_breaks(p0 - w, p0 + w, panels), |p| {
                let e = m.hypot(p);
                Complex64::new(-0.5 * sigma * sigma * (p - p0) * (p - p0), p * x - e * t).exp()
            });
            total += c * integral * damping;
        }
        Ok(total * prefactor)
    })?;
    Ok(out.value)
}

#[cfg(test)]
mod tests {
    use super::super::{fixtures, MassEigenstate, MixingMatrix};
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn single(mass: f64, p: f64, sigma: f64) -> OscillationScenario {
        OscillationScenario::new(
            vec![MassEigenstate::stable(mass, p).unwrap()],
            MixingMatrix::identity(1),
            sigma,
            0,
        )
        .unwrap()
    }

    #[test]
    fn plane_wave_limits() {
        let s = single(0.3, 2.0, 100.0);
        for &(t, x) in &[(0.0, 0.0), (3.0, -1.0), (100.0, 37.0)] {
            assert!((plane_wave_amplitude(&s, 0, t, x).norm() - 1.0).abs() < 1e-14);
        }
        let two = OscillationScenario::new(
            vec![
                MassEigenstate::stable(1.0, 100.0).unwrap(),
                MassEigenstate::stable(2.0, 100.0).unwrap(),
            ],
            MixingMatrix::identity(2),
            5.0,
            0,
        )
        .unwrap();
        assert_eq!(plane_wave_amplitude(&two, 1, 4.0, 2.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn plane_wave_oscillation_wavenumber() {
        let s = OscillationScenario::new(
            vec![
                MassEigenstate::stable(1.0, 100.0).unwrap(),
                MassEigenstate::stable(2.0, 100.0).unwrap(),
            ],
            MixingMatrix::rotation(FRAC_PI_4),
            5.0,
            0,
        )
        .unwrap();
        // |A|² = sin²(2θ) sin²(Δφ/2) with Δφ = (E₂ - E₁) L at t = x = L.
        let de = s.state(1).energy() - s.state(0).energy();
        assert!((de - 0.015).abs() < 0.015 * 1e-3);
        for &l in &[10.0, 123.0, 444.0] {
            let p = plane_wave_amplitude(&s, 1, l, l).norm_sqr();
            assert!((p - (0.5 * de * l).sin().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_normalization_value() {
        let s = single(0.1, 10.0, 50.0);
        let a = gaussian_amplitude(&s, 0, 0.0, 0.0);
        assert!((a.norm() - (PI * 2500.0).powf(-0.25)).abs() < 1e-15);
        assert!((a.norm() - 0.1062).abs() < 1e-4);
    }

    #[test]
    fn flavor_sum_has_no_cross_terms() {
        let (s, _) = fixtures::ur2f();
        for &(t, x) in &[(0.0, 0.0), (300.0, 301.0), (1000.0, 990.0)] {
            let total: f64 = (0..2).map(|a| gaussian_amplitude(&s, a, t, x).norm_sqr()).sum();
            let expected: f64 = (0..2)
                .map(|i| s.mixing().get(0, i).norm_sqr() * gaussian_component(&s, i, t, x).norm_sqr())
                .sum();
            assert!((total - expected).abs() <= 1e-12 * expected.max(1e-300));
        }
    }

    #[test]
    fn massless_momentum_integral_is_linear() {
        let s = single(0.0, 10.0, 50.0);
        let q = MomentumQuadrature::default();
        for &(t, x) in &[(0.0, 10.0), (200.0, 230.0), (500.0, 480.0)] {
            let exact = momentum_integral_amplitude(&s, 0, t, x, &q).unwrap();
            let linear = gaussian_amplitude(&s, 0, t, x);
            assert!((exact - linear).norm() <= 1e-10 * linear.norm());
        }
    }

    #[test]
    fn ur2f_momentum_integral_matches_gaussian() {
        let (s, _) = fixtures::ur2f();
        let q = MomentumQuadrature::default();
        let t = 500.0 / s.state(0).velocity();
        let exact = momentum_integral_amplitude(&s, 1, t, 500.0, &q).unwrap();
        let linear = gaussian_amplitude(&s, 1, t, 500.0);
        assert!((exact - linear).norm() <= 1e-3 * linear.norm());
        let exact0 = momentum_integral_amplitude(&s, 0, 0.0, 20.0, &q).unwrap();
        let linear0 = gaussian_amplitude(&s, 0, 0.0, 20.0);
        assert!((exact0 - linear0).norm() <= 1e-12 * linear0.norm());
    }

    #[test]
    fn narrow_quadrature_rejected() {
        let s = single(0.0, 10.0, 50.0);
        let q = MomentumQuadrature {
            half_width: 4.0,
            ..Default::default()
        };
        assert!(momentum_integral_amplitude(&s, 0, 0.0, 0.0, &q).is_err());
    }
}
