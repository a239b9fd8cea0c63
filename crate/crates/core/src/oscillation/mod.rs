//! Oscillation scenarios: mass eigenstates, mixing, and the detector's
//! product-particle model.

mod amplitude;
mod kernel;

pub use amplitude::{
    gaussian_amplitude, gaussian_component, momentum_integral_amplitude, plane_wave_amplitude, MomentumQuadrature,
};
pub use kernel::{kernel_f_numeric, kernel_f_saddle, KernelQuadrature, KernelSpectrum};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::linalg::{c, identity, max_abs_diff, CMatrix};

/// Unitarity tolerance for mixing matrices.
pub const UNITARITY_TOL: f64 = 1e-12;

/// Minimum `σ · min p_i` (narrow momentum spread).
pub const MIN_SIGMA_MOMENTUM: f64 = 100.0;

/// Minimum `M · δ` for the saddle-point kernel.
pub const MIN_MASS_LOCALIZATION: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassEigenstate {
    pub mass: f64,
    pub momentum: f64,
    pub decay_rate: f64,
}

impl MassEigenstate {
    pub fn new(mass: f64, momentum: f64, decay_rate: f64) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(validation("mass", format!("must be finite and >= 0, got {mass}")));
        }
        if !(momentum > 0.0 && momentum.is_finite()) {
            return Err(validation(
                "momentum",
                format!("must be finite and > 0, got {momentum}"),
            ));
        }
        if !(decay_rate >= 0.0 && decay_rate.is_finite()) {
            return Err(validation(
                "decay_rate",
                format!("must be finite and >= 0, got {decay_rate}"),
            ));
        }
        Ok(MassEigenstate {
            mass,
            momentum,
            decay_rate,
        })
    }

    pub fn stable(mass: f64, momentum: f64) -> Result<Self> {
        Self::new(mass, momentum, 0.0)
    }

    pub fn energy(&self) -> f64 {
        self.mass.hypot(self.momentum)
    }

    pub fn velocity(&self) -> f64 {
        self.momentum / self.energy()
    }
}

/// Unitary matrix `U[(α, i)]`, flavor rows and mass columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    entries: CMatrix,
}

impl MixingMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(validation("mixing", "must be a nonempty square matrix"));
        }
        let n = entries.nrows();
        let left = max_abs_diff(&(entries.adjoint() * &entries), &identity(n));
        let right = max_abs_diff(&(&entries * entries.adjoint()), &identity(n));
        if left.max(right) > UNITARITY_TOL {
            return Err(validation(
                "mixing",
                format!("not unitary: max |U†U - 1|, |UU† - 1| = {:e}", left.max(right)),
            ));
        }
        Ok(MixingMatrix { entries })
    }

    /// Two-flavor rotation `[[cos θ, sin θ], [-sin θ, cos θ]]`.
    pub fn rotation(theta: f64) -> Self {
        let (s, co) = theta.sin_cos();
        MixingMatrix {
            entries: CMatrix::from_row_slice(2, 2, &[c(co, 0.0), c(s, 0.0), c(-s, 0.0), c(co, 0.0)]),
        }
    }

    pub fn identity(n: usize) -> Self {
        MixingMatrix { entries: identity(n) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn get(&self, flavor: usize, mass: usize) -> Complex64 {
        self.entries[(flavor, mass)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationScenario {
    states: Vec<MassEigenstate>,
    mixing: MixingMatrix,
    sigma: f64,
    initial_flavor: usize,
}

impl OscillationScenario {
    pub fn new(states: Vec<MassEigenstate>, mixing: MixingMatrix, sigma: f64, initial_flavor: usize) -> Result<Self> {
        if states.is_empty() {
            return Err(validation("states", "at least one mass eigenstate is required"));
        }
        if mixing.dim() != states.len() {
            return Err(validation(
                "mixing",
                format!("dimension {} does not match {} mass states", mixing.dim(), states.len()),
            ));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(validation("sigma", format!("must be finite and > 0, got {sigma}")));
        }
        let min_p = states.iter().map(|s| s.momentum).fold(f64::INFINITY, f64::min);
        if sigma * min_p < MIN_SIGMA_MOMENTUM {
            return Err(validation(
                "sigma",
                format!(
                    "sigma * min(p) = {} violates the sigma * p >= {MIN_SIGMA_MOMENTUM} rule",
                    sigma * min_p
                ),
            ));
        }
        if initial_flavor >= states.len() {
            return Err(validation(
                "initial_flavor",
                format!("index {initial_flavor} out of range for {} flavors", states.len()),
            ));
        }
        Ok(OscillationScenario {
            states,
            mixing,
            sigma,
            initial_flavor,
        })
    }

    pub fn states(&self) -> &[MassEigenstate] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &MassEigenstate {
        &self.states[i]
    }

    pub fn mixing(&self) -> &MixingMatrix {
        &self.mixing
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn initial_flavor(&self) -> usize {
        self.initial_flavor
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `U*_{βi} U_{αi}` for detected flavor `α`.
    pub fn coefficient(&self, flavor: usize, i: usize) -> Complex64 {
        self.mixing.get(self.initial_flavor, i).conj() * self.mixing.get(flavor, i)
    }

    pub fn coefficients(&self, flavor: usize) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.coefficient(flavor, i)).collect()
    }

    pub fn min_velocity(&self) -> f64 {
        self.states.iter().map(|s| s.velocity()).fold(f64::INFINITY, f64::min)
    }

    pub fn check_flavor(&self, flavor: usize) -> Result<()> {
        if flavor >= self.len() {
            return Err(validation(
                "flavor",
                format!("index {flavor} out of range for {} flavors", self.len()),
            ));
        }
        Ok(())
    }
}

/// Detector model: threshold, product particles `D_n` and their
/// localization scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionModel {
    pub threshold: f64,
    pub product_masses: Vec<f64>,
    pub localization: f64,
    pub constant: f64,
}

impl DetectionModel {
    /// Fully validated model, including `M δ >= 10` for every product.
    pub fn new(threshold: f64, product_masses: Vec<f64>, localization: f64, constant: f64) -> Result<Self> {
        let model = Self::without_saddle_check(threshold, product_masses, localization, constant)?;
        if let Some(m) = model
            .product_masses
            .iter()
            .find(|&&m| m * model.localization < MIN_MASS_LOCALIZATION)
        {
            return Err(validation(
                "product_masses",
                format!(
                    "M * delta = {} violates the M * delta >= {MIN_MASS_LOCALIZATION} saddle-point rule",
                    m * model.localization
                ),
            ));
        }
        Ok(model)
    }

    /// Model that skips the saddle-point validity rule; only the numeric
    /// kernel is meaningful for it.
    pub fn without_saddle_check(
        threshold: f64,
        product_masses: Vec<f64>,
        localization: f64,
        constant: f64,
    ) -> Result<Self> {
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return Err(validation(
                "threshold",
                format!("must be finite and >= 0, got {threshold}"),
            ));
        }
        if product_masses.is_empty() {
            return Err(validation(
                "product_masses",
                "at least one product particle is required",
            ));
        }
        if let Some(m) = product_masses.iter().find(|&&m| !(m > 0.0 && m.is_finite())) {
            return Err(validation(
                "product_masses",
                format!("masses must be finite and > 0, got {m}"),
            ));
        }
        if !(localization > 0.0 && localization.is_finite()) {
            return Err(validation(
                "localization",
                format!("must be finite and > 0, got {localization}"),
            ));
        }
        if !(constant > 0.0 && constant.is_finite()) {
            return Err(validation(
                "constant",
                format!("must be finite and > 0, got {constant}"),
            ));
        }
        Ok(DetectionModel {
            threshold,
            product_masses,
            localization,
            constant,
        })
    }

    pub fn with_threshold(&self, threshold: f64) -> Result<Self> {
        if !(threshold >= 0.0 && threshold.is_finite()) {
            return Err(validation(
                "threshold",
                format!("must be finite and >= 0, got {threshold}"),
            ));
        }
        Ok(DetectionModel {
            threshold,
            ..self.clone()
        })
    }

    /// `M_n δ² / 2` for each product particle.
    pub fn saddle_rates(&self) -> Vec<f64> {
        self.product_masses
            .iter()
            .map(|m| 0.5 * m * self.localization * self.localization)
            .collect()
    }

    pub fn saddle_valid(&self) -> bool {
        self.product_masses
            .iter()
            .all(|m| m * self.localization >= MIN_MASS_LOCALIZATION)
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    /// Two-flavor ultra-relativistic benchmark: m = 0.1/0.2, p = 10,
    /// σ = 50, maximal mixing, M = 100, δ = 1.
    pub fn ur2f() -> (OscillationScenario, DetectionModel) {
        let states = vec![
            MassEigenstate::stable(0.1, 10.0).unwrap(),
            MassEigenstate::stable(0.2, 10.0).unwrap(),
        ];
        let scenario = OscillationScenario::new(states, MixingMatrix::rotation(FRAC_PI_4), 50.0, 0).unwrap();
        let detection = DetectionModel::new(0.0, vec![100.0], 1.0, 1.0).unwrap();
        (scenario, detection)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn kinematics() {
        let s = MassEigenstate::stable(0.2, 10.0).unwrap();
        let e = s.energy();
        assert!(((e * e - s.momentum * s.momentum - s.mass * s.mass) / (e * e)).abs() < 1e-12);
        assert!(s.velocity() < 1.0 && s.velocity() > 0.0);
        assert_eq!(MassEigenstate::stable(0.0, 3.0).unwrap().velocity(), 1.0);
        assert!(MassEigenstate::new(-1.0, 1.0, 0.0).is_err());
        assert!(MassEigenstate::new(1.0, 0.0, 0.0).is_err());
        assert!(MassEigenstate::new(1.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn rotation_is_unitary() {
        let u = MixingMatrix::rotation(0.3);
        assert!(MixingMatrix::new(u.entries().clone()).is_ok());
        let bad = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(MixingMatrix::new(bad), Err(Error::Validation { .. })));
    }

    #[test]
    fn scenario_rules() {
        let states = vec![MassEigenstate::stable(0.1, 1.0).unwrap()];
        let err = OscillationScenario::new(states.clone(), MixingMatrix::identity(1), 5.0, 0).unwrap_err();
        assert!(err.to_string().contains("sigma * p >= 100"));
        assert!(OscillationScenario::new(states.clone(), MixingMatrix::identity(2), 500.0, 0).is_err());
        assert!(OscillationScenario::new(states.clone(), MixingMatrix::identity(1), 500.0, 1).is_err());
        assert!(OscillationScenario::new(vec![], MixingMatrix::identity(1), 500.0, 0).is_err());
        assert!(OscillationScenario::new(states, MixingMatrix::identity(1), 500.0, 0).is_ok());
    }

    #[test]
    fn detection_rules() {
        assert!(DetectionModel::new(0.0, vec![5.0], 1.0, 1.0).is_err());
        assert!(DetectionModel::without_saddle_check(0.0, vec![5.0], 1.0, 1.0).is_ok());
        assert!(DetectionModel::new(-1.0, vec![100.0], 1.0, 1.0).is_err());
        assert!(DetectionModel::new(0.0, vec![100.0], 0.0, 1.0).is_err());
        assert!(DetectionModel::new(0.0, vec![100.0], 1.0, 0.0).is_err());
        assert!(DetectionModel::new(0.0, vec![], 1.0, 1.0).is_err());
        let m = DetectionModel::new(2.0, vec![100.0, 40.0], 0.5, 1.0).unwrap();
        assert_eq!(m.saddle_rates(), vec![12.5, 5.0]);
    }

    #[test]
    fn coefficients_under_maximal_mixing() {
        let (scenario, _) = fixtures::ur2f();
        let c1 = scenario.coefficient(1, 0);
        let c2 = scenario.coefficient(1, 1);
        assert!((c1 + 0.5).norm() < 1e-15 && (c2 - 0.5).norm() < 1e-15);
        let survival: Complex64 = scenario.coefficients(0).iter().sum();
        assert!((survival - 1.0).norm() < 1e-15);
    }
}
