//! Product-particle correlation kernel `F(s)`.
//!
//! Numeric convention: the radial integral uses the weight `e^{-δ²p²/4}`,
//! whose non-relativistic limit is exactly `(2π)³` times the saddle form.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::DetectionModel;
use crate::error::Result;
use crate::quadrature::{composite, converge, uniform_breaks, ConvergencePolicy, Rule, PANEL_ORDER};
use crate::special::GammaSumDensity;

/// `K Π_n (M_n / (2πi (s - i M_n δ²/2)))^{3/2}`, principal branch.
///
/// `i(s - ia) = a + is` lies in the right half-plane, so the principal
/// 3/2 power is continuous in `s`. Meaningful only when `M_n δ >= 10`.
pub fn kernel_f_saddle(model: &DetectionModel, s: f64) -> Complex64 {
    model
        .product_masses
        .iter()
        .zip(model.saddle_rates())
        .map(|(&m, a)| (Complex64::new(m / (2.0 * PI), 0.0) / Complex64::new(a, s)).powf(1.5))
        .product::<Complex64>()
        * model.constant
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelQuadrature {
    /// Truncate the radial integral where `δ²p²/4` reaches this value.
    pub cutoff_exponent: f64,
    pub policy: ConvergencePolicy,
}

impl Default for KernelQuadrature {
    fn default() -> Self {
        KernelQuadrature {
            cutoff_exponent: 60.0,
            policy: ConvergencePolicy {
                initial_nodes: 64,
                max_nodes: 1 << 20,
                target: 1e-11,
                accept: 1e-8,
                floor: 1e-300,
            },
        }
    }
}

/// `K Π_n 4π ∫_0^∞ p² e^{-i(√(M_n² + p²) - M_n) s - δ²p²/4} dp`.
pub fn kernel_f_numeric(model: &DetectionModel, s: f64, quadrature: &KernelQuadrature) -> Result<Complex64> {
    let delta = model.localization;
    let p_max = 2.0 * quadrature.cutoff_exponent.sqrt() / delta;
    let rule = Rule::new(PANEL_ORDER);
    let mut product = Complex64::new(model.constant, 0.0);
    for &m in &model.product_masses {
        let out = converge(&quadrature.policy, "numeric kernel", |nodes| {
            let breaks = uniform_breaks(0.0, p_max, (nodes / PANEL_ORDER).max(1));
            Ok(composite(&rule, &breaks, |p: f64| {
                let kinetic = p * p / (m.hypot(p) + m);
                p * p * Complex64::new(-0.25 * delta * delta * p * p, -kinetic * s).exp()
            }))
        })?;
        product *= 4.0 * PI * out.value;
    }
    Ok(product)
}

/// Spectral density `F̂(ω)` of the saddle kernel,
/// `F(s) = ∫ dω/2π F̂(ω) e^{-iωs}`, supported on `ω > 0`.
///
/// Each factor `(1 + is/a_n)^{-3/2}` is the characteristic function of a
/// Gamma(3/2, rate a_n) variable, so `F̂ = 2π F(0)` times the density of
/// their sum.
#[derive(Debug, Clone)]
pub struct KernelSpectrum {
    ln_prefactor: f64,
    density: GammaSumDensity,
}

impl KernelSpectrum {
    pub fn new(model: &DetectionModel) -> Self {
        let delta = model.localization;
        let ln_f0 = model.product_masses.len() as f64 * (-1.5 * (PI * delta * delta).ln());
        KernelSpectrum {
            ln_prefactor: (2.0 * PI).ln() + model.constant.ln() + ln_f0,
            density: GammaSumDensity::new(1.5, &model.saddle_rates()),
        }
    }

    /// `ln F̂(ω)`; `-∞` for `ω <= 0`.
    pub fn ln_density(&self, omega: f64) -> f64 {
        self.ln_prefactor + self.density.ln_density(omega)
    }

    /// Largest `M_n δ²/2`, the exponential decay rate of `F̂`.
    pub fn tail_rate(&self) -> f64 {
        self.density.tail_rate()
    }

    /// Total Gamma shape: `F̂ ~ ω^{shape - 1}` near zero.
    pub fn shape(&self) -> f64 {
        self.density.shape_total()
    }
}
