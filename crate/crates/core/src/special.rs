//! Log-scaled complex arithmetic and the closed-form Gaussian integrals
//! built on the Faddeeva function.
//!
//! Oscillation amplitudes evaluated far off-shell are smaller than
//! `f64::MIN_POSITIVE` by hundreds of orders of magnitude, so intermediate
//! values are carried as `mantissa · e^{ln_scale}`.

use std::f64::consts::PI;
use std::ops::{Add, Mul};

use errorfunctions::ComplexErrorFunctions;
use num_complex::Complex64;

/// `mantissa · exp(ln_scale)`; zero is `ln_scale = -∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub ln_scale: f64,
    pub mantissa: Complex64,
}

impl Scaled {
    pub const ZERO: Scaled = Scaled {
        ln_scale: f64::NEG_INFINITY,
        mantissa: Complex64 { re: 0.0, im: 0.0 },
    };

    /// `exp(z)` for complex `z`.
    pub fn exp(z: Complex64) -> Self {
        Scaled {
            ln_scale: z.re,
            mantissa: Complex64::from_polar(1.0, z.im),
        }
    }

    pub fn from_complex(z: Complex64) -> Self {
        if z == Complex64::new(0.0, 0.0) {
            Scaled::ZERO
        } else {
            Scaled {
                ln_scale: 0.0,
                mantissa: z,
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.ln_scale == f64::NEG_INFINITY || self.mantissa == Complex64::new(0.0, 0.0)
    }

    pub fn scale(self, factor: Complex64) -> Self {
        Scaled {
            ln_scale: self.ln_scale,
            mantissa: self.mantissa * factor,
        }
    }

    /// `ln |value|`.
    pub fn ln_abs(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.ln_scale + self.mantissa.norm().ln()
        }
    }

    /// Mantissa rescaled to `exp(reference)`; underflows quietly to zero.
    pub fn relative_to(&self, reference: f64) -> Complex64 {
        if self.is_zero() {
            Complex64::new(0.0, 0.0)
        } else {
            self.mantissa * (self.ln_scale - reference).exp()
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        self.relative_to(0.0)
    }

    fn normalized(self) -> Self {
        let m = self.mantissa.norm();
        if m == 0.0 || !m.is_finite() {
            return if m == 0.0 { Scaled::ZERO } else { self };
        }
        Scaled {
            ln_scale: self.ln_scale + m.ln(),
            mantissa: self.mantissa / m,
        }
    }
}

impl Add for Scaled {
    type Output = Scaled;
    fn add(self, rhs: Scaled) -> Scaled {
        if self.is_zero() {
            return rhs;
        }
        if rhs.is_zero() {
            return self;
        }
        let reference = self.ln_scale.max(rhs.ln_scale);
        Scaled {
            ln_scale: reference,
            mantissa: self.relative_to(reference) + rhs.relative_to(reference),
        }
        .normalized()
    }
}

impl Mul for Scaled {
    type Output = Scaled;
    fn mul(self, rhs: Scaled) -> Scaled {
        if self.is_zero() || rhs.is_zero() {
            return Scaled::ZERO;
        }
        Scaled {
            ln_scale: self.ln_scale + rhs.ln_scale,
            mantissa: self.mantissa * rhs.mantissa,
        }
        .normalized()
    }
}

impl Default for Scaled {
    fn default() -> Self {
        Scaled::ZERO
    }
}

/// Faddeeva function `w(z) = e^{-z²} erfc(-iz)`.
pub fn faddeeva(z: Complex64) -> Complex64 {
    z.w()
}

/// `∫_{t0}^{t1} exp(-b²(t - t_c)² - κ t + χ) dt` for `b > 0`.
///
/// `None` limits stand for `∓∞`. Each endpoint contributes a term
/// `e^{exponent at the endpoint} · w(·)`, and the full-line Gaussian transform
/// appears once for every endpoint whose error-function argument has a
/// negative real part, so no term ever needs an unscaled `erfc`.
pub fn gaussian_segment(
    b: f64,
    t_c: f64,
    kappa: Complex64,
    chi: Complex64,
    t0: Option<f64>,
    t1: Option<f64>,
) -> Scaled {
    debug_assert!(b > 0.0);
    let shift = kappa / (2.0 * b);
    // exp(X) with X = κ²/4b² - κ t_c + χ is the full-line integral kernel.
    let full = Scaled::exp(kappa * kappa / (4.0 * b * b) - kappa * t_c + chi);
    let prefactor = PI.sqrt() / (2.0 * b);

    // e^{X} erfc(z(t)) in scaled form.
    let scaled_erfc = |t: Option<f64>, at_lower: bool| -> Scaled {
        let Some(t) = t else {
            // z → -∞ at the lower end (erfc = 2), z → +∞ at the upper end (erfc = 0).
            return if at_lower {
                full.scale(Complex64::new(2.0, 0.0))
            } else {
                Scaled::ZERO
            };
        };
        let z = b * (t - t_c) + shift;
        let endpoint = Scaled::exp(-b * b * (t - t_c) * (t - t_c) - kappa * t + chi);
        if z.re >= 0.0 {
            endpoint.scale(faddeeva(Complex64::i() * z))
        } else {
            full.scale(Complex64::new(2.0, 0.0)) + endpoint.scale(-faddeeva(-Complex64::i() * z))
        }
    };

    let lower = scaled_erfc(t0, true);
    let upper = scaled_erfc(t1, false);
    (lower + upper.scale(Complex64::new(-1.0, 0.0))).scale(Complex64::new(prefactor, 0.0))
}

/// `ln Γ(x)` for `x` a positive multiple of 1/2.
pub fn ln_gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    debug_assert!((twice - 2.0 * x).abs() < 1e-12 && twice >= 1.0);
    let (mut value, mut arg) = if twice as i64 % 2 == 1 {
        (0.5 * PI.ln(), 0.5)
    } else {
        (0.0, 1.0)
    };
    while arg + 0.5 < x {
        value += arg.ln();
        arg += 1.0;
    }
    value
}

/// Density of a sum of independent Gamma variables, all with shape `shape`
/// and the given rates, evaluated in log form (Moschopoulos series).
#[derive(Debug, Clone)]
pub struct GammaSumDensity {
    shape_total: f64,
    max_rate: f64,
    ln_c: f64,
    /// `ln δ_k` for the series coefficients.
    ln_delta: Vec<f64>,
}

impl GammaSumDensity {
    const MAX_TERMS: usize = 4096;

    pub fn new(shape: f64, rates: &[f64]) -> Self {
        assert!(!rates.is_empty() && rates.iter().all(|&r| r > 0.0));
        let max_rate = rates.iter().copied().fold(0.0, f64::max);
        let shape_total = shape * rates.len() as f64;
        // With scales β = 1/rate and β₁ = min β: C = Π (β₁/β_n)^shape.
        let ln_c: f64 = rates.iter().map(|&r| shape * (r / max_rate).ln()).sum();
        let ratios: Vec<f64> = rates.iter().map(|&r| 1.0 - r / max_rate).collect();
        let degenerate = ratios.iter().all(|&q| q.abs() < 1e-15);
        let mut delta = vec![1.0];
        if !degenerate {
            let gamma: Vec<f64> = (1..=Self::MAX_TERMS)
                .map(|k| ratios.iter().map(|&q| shape * q.powi(k as i32)).sum::<f64>() / k as f64)
                .collect();
            for k in 0..Self::MAX_TERMS - 1 {
                let next: f64 = (1..=k + 1)
                    .map(|i| i as f64 * gamma[i - 1] * delta[k + 1 - i])
                    .sum::<f64>()
                    / (k + 1) as f64;
                if next == 0.0 {
                    break;
                }
                delta.push(next);
            }
        }
        GammaSumDensity {
            shape_total,
            max_rate,
            ln_c,
            ln_delta: delta.iter().map(|d| d.ln()).collect(),
        }
    }

    /// Decay rate of the density's exponential tail.
    pub fn tail_rate(&self) -> f64 {
        self.max_rate
    }

    pub fn shape_total(&self) -> f64 {
        self.shape_total
    }

    /// `ln f(y)` for `y > 0`; `-∞` for `y ≤ 0`.
    pub fn ln_density(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let ln_scale = -self.max_rate.ln();
        let ln_y = y.ln();
        let mut ln_gamma = ln_gamma_half_integer(self.shape_total);
        let mut best = f64::NEG_INFINITY;
        let mut terms = Vec::with_capacity(self.ln_delta.len());
        for (k, &ln_d) in self.ln_delta.iter().enumerate() {
            let rho = self.shape_total + k as f64;
            let term = ln_d + (rho - 1.0) * ln_y - ln_gamma - rho * ln_scale;
            terms.push(term);
            best = best.max(term);
            ln_gamma += rho.ln();
            if k > 8 && term < best - 40.0 && (k as f64) > y * self.max_rate {
                break;
            }
        }
        let sum: f64 = terms.iter().map(|t| (t - best).exp()).sum();
        self.ln_c + best + sum.ln() - y * self.max_rate
    }
}
