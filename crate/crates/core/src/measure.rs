//! Time-unresolved detection probabilities for small quantum systems.
//!
//! A detection event is an irreversible transition into the range of the
//! projector `P`; until it happens the state evolves with the restricted
//! propagator `S_t` confined to `Q = 1 - P`. The amplitude for a detection
//! with outcome `λ` at an unspecified time in `[0, T]` is
//!
//! ```text
//! |ψ; λ⟩ = -i ∫₀ᵀ dt e^{-iH(T-t)} P_λ H S_t |ψ₀⟩
//! ```
//!
//! and `p(λ) = ⟨ψ; λ|ψ; λ⟩`. The unitary prefactor `e^{-iHT}` drops out of
//! the norm, so the engines integrate `e^{iHt} P_λ H S_t ψ₀` instead.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, commutator, identity, is_hermitian, is_projector, matrix_power, max_abs, max_abs_diff, vector_norm_sqr, CMatrix,
    CVector, HermitianEigen, I,
};
use crate::quadrature::{composite, converge, uniform_breaks, ConvergencePolicy, Rule, PANEL_ORDER};

/// Tolerance for Hermiticity, projector and state checks.
pub const VALIDATION_TOL: f64 = 1e-12;

/// Hamiltonian, detection projector, outcome projectors and initial state.
#[derive(Debug, Clone)]
pub struct FiniteSystem {
    hamiltonian: CMatrix,
    detection_projector: CMatrix,
    outcome_projectors: Vec<CMatrix>,
    initial_state: CVector,
}

impl FiniteSystem {
    pub fn new(
        hamiltonian: CMatrix,
        detection_projector: CMatrix,
        outcome_projectors: Vec<CMatrix>,
        initial_state: CVector,
    ) -> Result<Self> {
        let dim = hamiltonian.nrows();
        if dim == 0 || !hamiltonian.is_square() {
            return Err(Error::validation("hamiltonian", "must be a non-empty square matrix"));
        }
        if !is_hermitian(&hamiltonian, VALIDATION_TOL) {
            return Err(Error::validation("hamiltonian", "not Hermitian within 1e-12"));
        }
        if detection_projector.shape() != (dim, dim) || !is_projector(&detection_projector, VALIDATION_TOL) {
            return Err(Error::validation(
                "detection_projector",
                "not an orthogonal projector within 1e-12",
            ));
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for (k, p) in outcome_projectors.iter().enumerate() {
            if p.shape() != (dim, dim) || !is_projector(p, VALIDATION_TOL) {
                return Err(Error::validation(
                    format!("outcome_projectors[{k}]"),
                    "not an orthogonal projector within 1e-12",
                ));
            }
            for (l, q) in outcome_projectors.iter().enumerate().skip(k + 1) {
                if max_abs(&(p * q)) > VALIDATION_TOL {
                    return Err(Error::validation(
                        format!("outcome_projectors[{k}]"),
                        format!("not orthogonal to outcome_projectors[{l}]"),
                    ));
                }
            }
            sum += p;
        }
        if max_abs_diff(&sum, &detection_projector) > VALIDATION_TOL {
            return Err(Error::validation(
                "outcome_projectors",
                "outcome projectors do not sum to the detection projector",
            ));
        }
        if initial_state.len() != dim {
            return Err(Error::validation("initial_state", "dimension mismatch"));
        }
        if (vector_norm_sqr(&initial_state).sqrt() - 1.0).abs() > VALIDATION_TOL {
            return Err(Error::validation("initial_state", "not normalized within 1e-12"));
        }
        let q = identity(dim) - &detection_projector;
        if (&q * &initial_state - &initial_state).norm() > VALIDATION_TOL {
            if max_abs_diff(&detection_projector, &identity(dim)) <= VALIDATION_TOL {
                return Err(Error::Configuration(
                    "detection projector is the identity: there is no no-detection subspace for the initial state"
                        .into(),
                ));
            }
            return Err(Error::validation(
                "initial_state",
                "must lie in the no-detection subspace (Qψ₀ = ψ₀)",
            ));
        }
        Ok(FiniteSystem {
            hamiltonian,
            detection_projector,
            outcome_projectors,
            initial_state,
        })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn hamiltonian(&self) -> &CMatrix {
        &self.hamiltonian
    }

    pub fn detection_projector(&self) -> &CMatrix {
        &self.detection_projector
    }

    /// `Q = 1 - P`, derived on demand.
    pub fn no_detection_projector(&self) -> CMatrix {
        identity(self.dim()) - &self.detection_projector
    }

    pub fn outcome_projectors(&self) -> &[CMatrix] {
        &self.outcome_projectors
    }

    pub fn outcome_count(&self) -> usize {
        self.outcome_projectors.len()
    }

    pub fn initial_state(&self) -> &CVector {
        &self.initial_state
    }

    /// Same system with a different initial state (validated).
    pub fn with_initial_state(&self, state: CVector) -> Result<Self> {
        FiniteSystem::new(
            self.hamiltonian.clone(),
            self.detection_projector.clone(),
            self.outcome_projectors.clone(),
            state,
        )
    }

    fn outcome(&self, outcome: usize) -> Result<&CMatrix> {
        self.outcome_projectors.get(outcome).ok_or_else(|| {
            Error::Domain(format!(
                "outcome index {outcome} out of range ({})",
                self.outcome_count()
            ))
        })
    }
}

/// A system whose Hamiltonian splits as `H₀ + g·H_I` with `[H₀, Q] = 0`.
#[derive(Debug, Clone)]
pub struct SplitSystem {
    base: FiniteSystem,
    h0: CMatrix,
    h_interaction: CMatrix,
    coupling: f64,
}

impl SplitSystem {
    pub fn new(
        h0: CMatrix,
        h_interaction: CMatrix,
        coupling: f64,
        detection_projector: CMatrix,
        outcome_projectors: Vec<CMatrix>,
        initial_state: CVector,
    ) -> Result<Self> {
        if !is_hermitian(&h0, VALIDATION_TOL) {
            return Err(Error::validation("h0", "not Hermitian within 1e-12"));
        }
        if !is_hermitian(&h_interaction, VALIDATION_TOL) {
            return Err(Error::validation("h_interaction", "not Hermitian within 1e-12"));
        }
        let hamiltonian = &h0 + &h_interaction * c(coupling, 0.0);
        let base = FiniteSystem::new(hamiltonian, detection_projector, outcome_projectors, initial_state)?;
        if max_abs(&commutator(&h0, &base.no_detection_projector())) > VALIDATION_TOL {
            return Err(Error::validation("h0", "[H₀, Q] ≠ 0 within 1e-12"));
        }
        Ok(SplitSystem {
            base,
            h0,
            h_interaction,
            coupling,
        })
    }

    pub fn base(&self) -> &FiniteSystem {
        &self.base
    }

    pub fn h0(&self) -> &CMatrix {
        &self.h0
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// `g·H_I`.
    pub fn interaction(&self) -> CMatrix {
        &self.h_interaction * c(self.coupling, 0.0)
    }
}

/// Observation window `[0, T]` with quadrature and Zeno-product controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub t_final: f64,
    pub node_count: usize,
    pub zeno_slices: u64,
}

impl TimeWindow {
    pub fn new(t_final: f64, node_count: usize, zeno_slices: u64) -> Result<Self> {
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::validation("t_final", "must be finite and ≥ 0"));
        }
        if node_count < 2 {
            return Err(Error::validation("node_count", "must be ≥ 2"));
        }
        if zeno_slices < 1 {
            return Err(Error::validation("zeno_slices", "must be ≥ 1"));
        }
        Ok(TimeWindow {
            t_final,
            node_count,
            zeno_slices,
        })
    }

    /// Window with default quadrature settings.
    pub fn until(t_final: f64) -> Result<Self> {
        TimeWindow::new(t_final, 64, 1 << 12)
    }

    fn policy(&self) -> ConvergencePolicy {
        ConvergencePolicy {
            initial_nodes: self.node_count.max(PANEL_ORDER),
            ..ConvergencePolicy::default()
        }
    }
}

/// How the `N → ∞` limit in `S_t` is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropagatorMode {
    /// `(Q e^{-iHt/N} Q)^N` at finite `N`.
    Product(u64),
    /// `Q exp(-i QHQ t) Q`, the Zeno limit.
    Generator,
}

/// Cached decompositions shared by every time evaluation.
struct Dynamics<'a> {
    system: &'a FiniteSystem,
    q: CMatrix,
    full: HermitianEigen,
    restricted: HermitianEigen,
}

impl<'a> Dynamics<'a> {
    fn new(system: &'a FiniteSystem) -> Self {
        let q = system.no_detection_projector();
        let qhq = &q * system.hamiltonian() * &q;
        Dynamics {
            system,
            full: HermitianEigen::new(system.hamiltonian()),
            restricted: HermitianEigen::new(&qhq),
            q,
        }
    }

    fn restricted_propagator(&self, t: f64) -> CMatrix {
        &self.q * self.restricted.propagator(t) * &self.q
    }

    fn restricted_state(&self, t: f64) -> CVector {
        &self.q * self.restricted.apply(t, self.system.initial_state())
    }

    /// `e^{iHt} P_λ H S_t ψ₀`, the event amplitude density with the
    /// `-i e^{-iHT}` prefactor stripped.
    fn interaction_picture_density(&self, p_lambda: &CMatrix, t: f64) -> CVector {
        let v = p_lambda * (self.system.hamiltonian() * self.restricted_state(t));
        self.full.apply(-t, &v)
    }

    /// Operator version of the above, `e^{iHt} P_λ H S_t`.
    fn interaction_picture_operator(&self, p_lambda: &CMatrix, t: f64) -> CMatrix {
        self.full.propagator(-t) * p_lambda * self.system.hamiltonian() * self.restricted_propagator(t)
    }

    /// `∫₀ᵀ e^{iHt} P_λ H S_t ψ₀ dt` on `nodes` Gauss–Legendre nodes.
    fn integrated_density(&self, p_lambda: &CMatrix, t_final: f64, nodes: usize) -> CVector {
        let rule = Rule::new(PANEL_ORDER);
        let breaks = uniform_breaks(0.0, t_final, nodes.div_ceil(PANEL_ORDER));
        let mut acc = CVector::zeros(self.system.dim());
        for ab in breaks.windows(2) {
            for (t, w) in rule.mapped(ab[0], ab[1]) {
                acc += self.interaction_picture_density(p_lambda, t) * c(w, 0.0);
            }
        }
        acc
    }

    fn integrated_operator(&self, p_lambda: &CMatrix, t_final: f64, nodes: usize) -> CMatrix {
        let rule = Rule::new(PANEL_ORDER);
        let breaks = uniform_breaks(0.0, t_final, nodes.div_ceil(PANEL_ORDER));
        let dim = self.system.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for ab in breaks.windows(2) {
            for (t, w) in rule.mapped(ab[0], ab[1]) {
                acc += self.interaction_picture_operator(p_lambda, t) * c(w, 0.0);
            }
        }
        acc
    }
}

/// The restricted propagator `S_t`.
pub fn restricted_propagator(system: &FiniteSystem, t: f64, mode: PropagatorMode) -> Result<CMatrix> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("restricted propagator needs t ≥ 0, got {t}")));
    }
    let q = system.no_detection_projector();
    match mode {
        PropagatorMode::Generator => Ok(Dynamics::new(system).restricted_propagator(t)),
        PropagatorMode::Product(slices) => {
            if slices == 0 {
                return Err(Error::validation("zeno_slices", "must be ≥ 1"));
            }
            let step = HermitianEigen::new(system.hamiltonian()).propagator(t / slices as f64);
            Ok(matrix_power(&(&q * step * &q), slices))
        }
    }
}

/// `-i e^{-iH(T-t)} P_λ H S_t ψ₀`, the event amplitude per unit detection time.
pub fn event_amplitude_density(system: &FiniteSystem, t: f64, outcome: usize, t_final: f64) -> Result<CVector> {
    if !(t >= 0.0) || t > t_final {
        return Err(Error::Domain(format!("detection time {t} outside [0, {t_final}]")));
    }
    let p_lambda = system.outcome(outcome)?;
    let dynamics = Dynamics::new(system);
    let density = dynamics.interaction_picture_density(p_lambda, t);
    Ok(dynamics.full.apply(t_final, &density) * (-I))
}

/// `p(λ)` of the time-unresolved measure.
///
/// Not clipped: outside the weak-coupling regime the measure can exceed 1,
/// and callers that need to see that should.
pub fn detection_probability(system: &FiniteSystem, outcome: usize, window: &TimeWindow) -> Result<f64> {
    let p_lambda = system.outcome(outcome)?;
    if window.t_final == 0.0 {
        return Ok(0.0);
    }
    let dynamics = Dynamics::new(system);
    let out = converge(&window.policy(), "detection_probability", |nodes| {
        Ok(vector_norm_sqr(&dynamics.integrated_density(
            p_lambda,
            window.t_final,
            nodes,
        )))
    })?;
    Ok(out.value)
}

/// `p(λ) = Tr(C_λ ρ C_λ†)` for a density matrix `ρ`, with `C_λ` the
/// time-integrated amplitude operator.
pub fn detection_probability_mixed(
    system: &FiniteSystem,
    outcome: usize,
    window: &TimeWindow,
    rho: &CMatrix,
) -> Result<f64> {
    let p_lambda = system.outcome(outcome)?;
    if rho.shape() != (system.dim(), system.dim()) || !is_hermitian(rho, VALIDATION_TOL) {
        return Err(Error::validation("rho", "must be a Hermitian dim×dim matrix"));
    }
    if window.t_final == 0.0 {
        return Ok(0.0);
    }
    let dynamics = Dynamics::new(system);
    let out = converge(&window.policy(), "detection_probability_mixed", |nodes| {
        let op = dynamics.integrated_operator(p_lambda, window.t_final, nodes);
        Ok((&op * rho * op.adjoint()).trace().re)
    })?;
    Ok(out.value)
}

/// Leading-order `p(λ)` for `H = H₀ + g·H_I`, built from `U_t = e^{-iH₀t}`.
///
/// The double integral factorizes as `‖∫₀ᵀ e^{iH₀t} P_λ H_I e^{-iH₀t} ψ₀ dt‖²`.
pub fn detection_probability_perturbative(system: &SplitSystem, outcome: usize, window: &TimeWindow) -> Result<f64> {
    let base = system.base();
    let p_lambda = base.outcome(outcome)?;
    if window.t_final == 0.0 || system.coupling == 0.0 {
        return Ok(0.0);
    }
    let free = HermitianEigen::new(system.h0());
    let vertex = p_lambda * system.interaction();
    let psi0 = base.initial_state();
    let rule = Rule::new(PANEL_ORDER);
    let out = converge(&window.policy(), "detection_probability_perturbative", |nodes| {
        let breaks = uniform_breaks(0.0, window.t_final, nodes.div_ceil(PANEL_ORDER));
        let mut acc = CVector::zeros(base.dim());
        for ab in breaks.windows(2) {
            for (t, w) in rule.mapped(ab[0], ab[1]) {
                let x = free.apply(-t, &(&vertex * free.apply(t, psi0)));
                acc += x * c(w, 0.0);
            }
        }
        Ok(vector_norm_sqr(&acc))
    })?;
    Ok(out.value)
}

/// All outcome probabilities for one window.
pub fn detection_probabilities(system: &FiniteSystem, window: &TimeWindow) -> Result<Vec<f64>> {
    (0..system.outcome_count())
        .map(|k| detection_probability(system, k, window))
        .collect()
}

/// Probability that no detection happened in `[0, T]`: `1 - Σ_λ p(λ)`.
pub fn no_detection_probability(system: &FiniteSystem, window: &TimeWindow) -> Result<f64> {
    Ok(1.0 - detection_probabilities(system, window)?.iter().sum::<f64>())
}

/// `‖S_T ψ₀‖²`, the norm retained by the restricted evolution.
pub fn survival_probability(system: &FiniteSystem, t_final: f64) -> Result<f64> {
    if !(t_final >= 0.0) {
        return Err(Error::Domain(format!("survival needs T ≥ 0, got {t_final}")));
    }
    Ok(vector_norm_sqr(&Dynamics::new(system).restricted_state(t_final)))
}

/// Integrates a scalar function of time with the window's convergence policy.
pub fn integrate_time<F>(window: &TimeWindow, context: &str, f: F) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let rule = Rule::new(PANEL_ORDER);
    let out = converge(&window.policy(), context, |nodes| {
        let breaks = uniform_breaks(0.0, window.t_final, nodes.div_ceil(PANEL_ORDER));
        Ok(composite(&rule, &breaks, &f))
    })?;
    Ok(out.value)
}
