//! Damped-cosine fits of detection curves:
//!
//! ```text
//! y(L) = Σ_i S_i e^{-2γ_i L} + 2 Σ_{i<j} Re(T_ij e^{i k_ij L}) e^{-(γ_i + γ_j) L},
//! ```
//!
//! with `γ_i = Γ_i / v_i` taken from the scenario. Amplitudes enter
//! linearly and are projected out while the wavenumbers are located;
//! a joint Levenberg–Marquardt pass then gives the covariance.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::storage::Owned;
use nalgebra::{DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::analytic_wavenumber;
use crate::engine::DetectionCurve;
use crate::error::{Error, Result};
use crate::oscillation::{DetectionModel, OscillationScenario};

/// Where the wavenumber search starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyStart {
    /// Best point of a projected-residual scan over `scan_range × |k_analytic|`.
    Scan,
    /// The analytic wavenumber itself.
    Analytic,
    /// `factor × |k_analytic|`.
    Scaled(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub flavor: usize,
    pub start: FrequencyStart,
    pub scan_range: (f64, f64),
    /// Largest acceptable RMS residual of the normalized curve.
    pub max_residual: f64,
}

impl FitOptions {
    pub fn new(flavor: usize) -> Self {
        FitOptions {
            flavor,
            start: FrequencyStart::Scan,
            scan_range: (0.2, 4.0),
            max_residual: 1e-3,
        }
    }

    pub fn with_start(self, start: FrequencyStart) -> Self {
        FitOptions { start, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferenceTerm {
    pub i: usize,
    pub j: usize,
    /// `T_ij`, relative to `e^{i |k| L}`.
    pub coefficient: Complex64,
    /// Fitted `|k_ij|`.
    pub wavenumber: f64,
    pub uncertainty: f64,
    pub decay_slope: f64,
    /// Signed analytic `k_ij` used to seed the search.
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationFit {
    /// `S_i` per mass state; states sharing a decay slope split their
    /// common amplitude in proportion to `|U*_{βi} U_{αi}|²`.
    pub amplitudes: Vec<f64>,
    pub terms: Vec<InterferenceTerm>,
    /// `|k|` of the dominant interference term.
    pub wavenumber: f64,
    pub wavenumber_uncertainty: f64,
    /// `Γ_i / v_i` per mass state.
    pub decay_slopes: Vec<f64>,
    pub residual_rms: f64,
    pub evaluations: usize,
    /// Parameter covariance, ordered as amplitude groups, then `(Re T, Im T)`
    /// per term, then the wavenumbers.
    pub covariance: Vec<Vec<f64>>,
    /// `|T_ij| <= √(S_i S_j)(1 + 1e-6)` for every term.
    pub cauchy_schwarz: bool,
}

/// Model structure shared by the projected and the joint problems.
#[derive(Debug, Clone)]
struct Model {
    lengths: Vec<f64>,
    data: Vec<f64>,
    /// Decay slope per amplitude group.
    group_slopes: Vec<f64>,
    /// Decay slope per oscillating term.
    term_slopes: Vec<f64>,
}

impl Model {
    fn linear_count(&self) -> usize {
        self.group_slopes.len() + 2 * self.term_slopes.len()
    }

    fn design(&self, ks: &[f64]) -> DMatrix<f64> {
        let m = self.lengths.len();
        let mut a = DMatrix::zeros(m, self.linear_count());
        for (r, &l) in self.lengths.iter().enumerate() {
            for (g, &gamma) in self.group_slopes.iter().enumerate() {
                a[(r, g)] = (-2.0 * gamma * l).exp();
            }
            let base = self.group_slopes.len();
            for (p, (&gamma, &k)) in self.term_slopes.iter().zip(ks).enumerate() {
                let env = 2.0 * (-gamma * l).exp();
                a[(r, base + 2 * p)] = env * (k * l).cos();
                a[(r, base + 2 * p + 1)] = -env * (k * l).sin();
            }
        }
        a
    }

    fn solve_linear(&self, ks: &[f64]) -> (DVector<f64>, DVector<f64>) {
        let a = self.design(ks);
        let y = DVector::from_column_slice(&self.data);
        let svd = a.clone().svd(true, true);
        let beta = svd
            .solve(&y, 1e-13 * svd.singular_values.max())
            .unwrap_or_else(|_| DVector::zeros(a.ncols()));
        let residual = &a * &beta - y;
        (beta, residual)
    }

    fn model_values(&self, beta: &[f64], ks: &[f64]) -> DVector<f64> {
        self.design(ks) * DVector::from_column_slice(beta)
    }
}

/// Wavenumbers only; the amplitudes are re-solved at every step.
struct ProjectedProblem<'a> {
    model: &'a Model,
    scales: Vec<f64>,
    x: DVector<f64>,
}

impl ProjectedProblem<'_> {
    fn ks(&self, x: &DVector<f64>) -> Vec<f64> {
        x.iter().zip(&self.scales).map(|(v, s)| v * s).collect()
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for ProjectedProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        Some(self.model.solve_linear(&self.ks(&self.x)).1)
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let m = self.model.lengths.len();
        let n = self.x.len();
        let mut jac = DMatrix::zeros(m, n);
        for c in 0..n {
            let h = 1e-6 * self.x[c].abs().max(1e-3);
            let mut plus = self.x.clone();
            let mut minus = self.x.clone();
            plus[c] += h;
            minus[c] -= h;
            let rp = self.model.solve_linear(&self.ks(&plus)).1;
            let rm = self.model.solve_linear(&self.ks(&minus)).1;
            jac.set_column(c, &((rp - rm) / (2.0 * h)));
        }
        Some(jac)
    }
}

/// All parameters jointly: linear block, then scaled wavenumbers.
struct JointProblem<'a> {
    model: &'a Model,
    scales: Vec<f64>,
    x: DVector<f64>,
}

impl JointProblem<'_> {
    fn split(&self) -> (Vec<f64>, Vec<f64>) {
        let n_lin = self.model.linear_count();
        let beta = self.x.rows(0, n_lin).iter().copied().collect();
        let ks = self
            .x
            .rows(n_lin, self.scales.len())
            .iter()
            .zip(&self.scales)
            .map(|(v, s)| v * s)
            .collect();
        (beta, ks)
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for JointProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.x.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.x.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let (beta, ks) = self.split();
        Some(self.model.model_values(&beta, &ks) - DVector::from_column_slice(&self.model.data))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let (beta, ks) = self.split();
        let model = self.model;
        let n_lin = model.linear_count();
        let base = model.group_slopes.len();
        let mut jac = DMatrix::zeros(model.lengths.len(), self.x.len());
        jac.columns_mut(0, n_lin).copy_from(&model.design(&ks));
        for (r, &l) in model.lengths.iter().enumerate() {
            for (p, (&gamma, &k)) in model.term_slopes.iter().zip(&ks).enumerate() {
                let env = 2.0 * (-gamma * l).exp();
                let (a, b) = (beta[base + 2 * p], beta[base + 2 * p + 1]);
                jac[(r, n_lin + p)] = self.scales[p] * env * l * (-a * (k * l).sin() - b * (k * l).cos());
            }
        }
        Some(jac)
    }
}

struct TermSpec {
    i: usize,
    j: usize,
    analytic: f64,
    weight: f64,
    slope: f64,
}

/// Fits the damped-cosine form to a normalized detection curve.
pub fn fit_oscillation(
    curve: &DetectionCurve,
    scenario: &OscillationScenario,
    detection: &DetectionModel,
    options: &FitOptions,
) -> Result<OscillationFit> {
    scenario.check_flavor(options.flavor)?;
    let lengths = curve.lengths.clone();
    let m = lengths.len();
    if m < 8 {
        return Err(Error::FitFailed(format!("{m} samples are too few for a fit")));
    }
    let span = lengths[m - 1] - lengths[0];
    let spacing = span / (m - 1) as f64;
    let coefficients = scenario.coefficients(options.flavor);
    let decay_slopes: Vec<f64> = scenario.states().iter().map(|s| s.decay_rate / s.velocity()).collect();

    let mut specs: Vec<TermSpec> = Vec::new();
    for i in 0..scenario.len() {
        for j in i + 1..scenario.len() {
            let weight = (coefficients[i] * coefficients[j].conj()).norm();
            let analytic = analytic_wavenumber(scenario, detection, i, j);
            if weight > 1e-14 && analytic.abs() > 1e-15 {
                specs.push(TermSpec {
                    i,
                    j,
                    analytic,
                    weight,
                    slope: decay_slopes[i] + decay_slopes[j],
                });
            }
        }
    }
    // Without a scenario frequency, probe the data for any oscillation
    // the grid can resolve; a flat curve then reports an indeterminate
    // frequency.
    let probe = specs.is_empty();
    if probe {
        specs.push(TermSpec {
            i: 0,
            j: 0,
            analytic: 0.0,
            weight: 0.0,
            slope: 0.0,
        });
    } else {
        let primary = specs.iter().max_by(|a, b| a.weight.total_cmp(&b.weight)).unwrap();
        let period = 2.0 * std::f64::consts::PI / primary.analytic.abs();
        if span < 2.0 * period || spacing > period / 20.0 {
            return Err(Error::Domain(format!(
                "grid (span {span}, spacing {spacing}) must cover 2 expected periods of {period} at >= 20 samples each"
            )));
        }
    }

    let mut group_slopes: Vec<f64> = Vec::new();
    let mut group_of = Vec::with_capacity(scenario.len());
    for &g in &decay_slopes {
        match group_slopes
            .iter()
            .position(|&x| (x - g).abs() <= 1e-12 * x.abs().max(1.0))
        {
            Some(k) => group_of.push(k),
            None => {
                group_of.push(group_slopes.len());
                group_slopes.push(g);
            }
        }
    }
    let model = Model {
        lengths: lengths.clone(),
        data: curve.densities.clone(),
        group_slopes,
        term_slopes: specs.iter().map(|s| s.slope).collect(),
    };
    let n_terms = specs.len();

    let nyquist = std::f64::consts::PI / spacing;
    let k_resolution = 2.0 * std::f64::consts::PI / span;
    let scan = |p: usize, ks: &[f64], lo: f64, hi: f64| -> f64 {
        let step = 0.1 * k_resolution;
        let count = (((hi - lo) / step).ceil() as usize).max(1);
        let mut best = (f64::INFINITY, lo);
        let mut trial = ks.to_vec();
        for c in 0..=count {
            trial[p] = lo + (hi - lo) * c as f64 / count as f64;
            let rss = model.solve_linear(&trial).1.norm_squared();
            if rss < best.0 {
                best = (rss, trial[p]);
            }
        }
        best.1
    };

    let mut ks: Vec<f64> = specs.iter().map(|s| s.analytic.abs()).collect();
    if probe {
        ks[0] = scan(0, &ks, 0.5 * k_resolution, 0.5 * nyquist);
    } else {
        match options.start {
            FrequencyStart::Analytic => {}
            FrequencyStart::Scaled(f) => ks.iter_mut().for_each(|k| *k *= f),
            FrequencyStart::Scan => {
                for p in 0..n_terms {
                    let lo = options.scan_range.0 * specs[p].analytic.abs();
                    let hi = (options.scan_range.1 * specs[p].analytic.abs()).min(0.9 * nyquist);
                    ks[p] = scan(p, &ks.clone(), lo, hi.max(lo));
                }
            }
        }
    }

    let scales: Vec<f64> = ks.iter().map(|k| k.abs().max(1e-12)).collect();
    let projected = ProjectedProblem {
        model: &model,
        scales: scales.clone(),
        x: DVector::from_element(n_terms, 1.0),
    };
    let (projected, report) = LevenbergMarquardt::new().minimize(projected);
    let mut evaluations = report.number_of_evaluations;
    let ks_proj = projected.ks(&projected.x);
    let (beta, _) = model.solve_linear(&ks_proj);

    let mut x0 = beta.iter().copied().collect::<Vec<_>>();
    x0.extend(ks_proj.iter().zip(&scales).map(|(k, s)| k / s));
    let joint = JointProblem {
        model: &model,
        scales: scales.clone(),
        x: DVector::from_vec(x0),
    };
    let (joint, report) = LevenbergMarquardt::new().minimize(joint);
    evaluations += report.number_of_evaluations;
    let (mut beta, mut ks) = joint.split();
    let residual = joint.residuals().unwrap();
    let rss = residual.norm_squared();
    let rms = (rss / m as f64).sqrt();

    let base = model.group_slopes.len();
    for p in 0..n_terms {
        if ks[p] < 0.0 {
            ks[p] = -ks[p];
            beta[base + 2 * p + 1] = -beta[base + 2 * p + 1];
        }
    }
    let y_max = curve.densities.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let noise_floor = rms.max(1e-12 * y_max);
    let amplitude = (0..n_terms)
        .map(|p| {
            let t = Complex64::new(beta[base + 2 * p], beta[base + 2 * p + 1]);
            2.0 * t.norm() * (-model.term_slopes[p] * lengths[0]).exp()
        })
        .fold(0.0, f64::max);
    if probe || amplitude < 10.0 * noise_floor {
        return Err(Error::IndeterminateFrequency { amplitude, noise_floor });
    }
    if !report.termination.was_successful() && rms > options.max_residual {
        return Err(Error::FitFailed(format!(
            "{:?} with residual {rms:e}",
            report.termination
        )));
    }
    if rms > options.max_residual {
        return Err(Error::FitFailed(format!(
            "residual {rms:e} exceeds {:e}",
            options.max_residual
        )));
    }

    // Covariance from the local Gauss–Newton model.
    let jac = joint.jacobian().unwrap();
    let dof = (m as f64 - jac.ncols() as f64).max(1.0);
    let s2 = rss / dof;
    let jtj = jac.transpose() * &jac;
    let inv = jtj
        .clone()
        .pseudo_inverse(1e-14 * jtj.norm())
        .unwrap_or_else(|_| DMatrix::zeros(jtj.nrows(), jtj.ncols()));
    let cov = inv * s2;
    let n_lin = model.linear_count();
    let covariance: Vec<Vec<f64>> = (0..cov.nrows())
        .map(|r| {
            (0..cov.ncols())
                .map(|c| {
                    let fr = if r >= n_lin { scales[r - n_lin] } else { 1.0 };
                    let fc = if c >= n_lin { scales[c - n_lin] } else { 1.0 };
                    cov[(r, c)] * fr * fc
                })
                .collect()
        })
        .collect();

    let mut amplitudes = vec![0.0; scenario.len()];
    for (g, _) in model.group_slopes.iter().enumerate() {
        let members: Vec<usize> = (0..scenario.len()).filter(|&i| group_of[i] == g).collect();
        let weights: Vec<f64> = members.iter().map(|&i| coefficients[i].norm_sqr()).collect();
        let total: f64 = weights.iter().sum();
        for (idx, &i) in members.iter().enumerate() {
            let share = if total > 0.0 {
                weights[idx] / total
            } else {
                1.0 / members.len() as f64
            };
            amplitudes[i] = beta[g] * share;
        }
    }

    let terms: Vec<InterferenceTerm> = specs
        .iter()
        .enumerate()
        .map(|(p, s)| InterferenceTerm {
            i: s.i,
            j: s.j,
            coefficient: Complex64::new(beta[base + 2 * p], beta[base + 2 * p + 1]),
            wavenumber: ks[p],
            uncertainty: covariance[n_lin + p][n_lin + p].max(0.0).sqrt(),
            decay_slope: s.slope,
            analytic: s.analytic,
        })
        .collect();
    let cauchy_schwarz = terms
        .iter()
        .all(|t| t.coefficient.norm() <= (amplitudes[t.i] * amplitudes[t.j]).max(0.0).sqrt() * (1.0 + 1e-6));
    let primary = terms
        .iter()
        .max_by(|a, b| a.coefficient.norm().total_cmp(&b.coefficient.norm()))
        .unwrap();
    Ok(OscillationFit {
        wavenumber: primary.wavenumber,
        wavenumber_uncertainty: primary.uncertainty,
        amplitudes,
        terms,
        decay_slopes,
        residual_rms: rms,
        evaluations,
        covariance,
        cauchy_schwarz,
    })
}
