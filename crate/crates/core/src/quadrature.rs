//! Composite Gauss–Legendre quadrature with node-doubling convergence.

use std::num::NonZeroUsize;
use std::ops::{Add, Mul};

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Panel order used by the composite rules.
pub const PANEL_ORDER: usize = 16;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct Rule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl Rule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order.max(1)).unwrap();
        let gl = GaussLegendre::new(order);
        let (nodes, weights) = gl.as_node_weight_pairs().iter().copied().unzip();
        Rule { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `(x, w)` pairs mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<V, F>(&self, a: f64, b: f64, mut f: F) -> V
    where
        V: Default + Add<Output = V> + Mul<f64, Output = V>,
        F: FnMut(f64) -> V,
    {
        self.mapped(a, b).fold(V::default(), |acc, (x, w)| acc + f(x) * w)
    }
}

/// Sum of per-panel Gauss–Legendre rules over consecutive breakpoints.
pub fn composite<V, F>(rule: &Rule, breaks: &[f64], mut f: F) -> V
where
    V: Default + Add<Output = V> + Mul<f64, Output = V>,
    F: FnMut(f64) -> V,
{
    breaks
        .windows(2)
        .fold(V::default(), |acc, ab| acc + rule.integrate(ab[0], ab[1], &mut f))
}

/// `n + 1` equispaced breakpoints on `[a, b]`.
pub fn uniform_breaks(a: f64, b: f64, panels: usize) -> Vec<f64> {
    let panels = panels.max(1);
    (0..=panels).map(|k| a + (b - a) * k as f64 / panels as f64).collect()
}

/// Splits every interval of `breaks` into `factor` equal pieces.
pub fn refine_breaks(breaks: &[f64], factor: usize) -> Vec<f64> {
    let factor = factor.max(1);
    let mut out = Vec::with_capacity((breaks.len().saturating_sub(1)) * factor + 1);
    for ab in breaks.windows(2) {
        for k in 0..factor {
            out.push(ab[0] + (ab[1] - ab[0]) * k as f64 / factor as f64);
        }
    }
    if let Some(&last) = breaks.last() {
        out.push(last);
    }
    out
}

/// Node-doubling policy: stop once the relative change drops below
/// `target`; once `max_nodes` is reached, accept anything below
/// `accept`, otherwise fail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePolicy {
    pub initial_nodes: usize,
    pub max_nodes: usize,
    pub target: f64,
    pub accept: f64,
    /// Absolute floor for the relative-change denominator.
    pub floor: f64,
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        ConvergencePolicy {
            initial_nodes: 64,
            max_nodes: 1 << 20,
            target: 1e-8,
            accept: 1e-6,
            floor: 1e-300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Converged<V> {
    pub value: V,
    pub nodes: usize,
    pub relative_change: f64,
}

/// A quadrature estimate that can be compared across refinements.
pub trait Estimate {
    /// `(|self - other|, scale)` used for the relative-change test.
    fn distance(&self, other: &Self) -> (f64, f64);
    /// Scalar summary reported in accuracy errors.
    fn summary(&self) -> f64;
}

impl Estimate for f64 {
    fn distance(&self, other: &Self) -> (f64, f64) {
        ((self - other).abs(), self.abs().max(other.abs()))
    }
    fn summary(&self) -> f64 {
        *self
    }
}

impl Estimate for num_complex::Complex64 {
    fn distance(&self, other: &Self) -> (f64, f64) {
        ((self - other).norm(), self.norm().max(other.norm()))
    }
    fn summary(&self) -> f64 {
        self.norm()
    }
}

impl Estimate for Vec<f64> {
    /// Worst relative change over the entries.
    fn distance(&self, other: &Self) -> (f64, f64) {
        let worst = self
            .iter()
            .zip(other)
            .map(|(a, b)| {
                let scale = a.abs().max(b.abs());
                if scale == 0.0 {
                    0.0
                } else {
                    (a - b).abs() / scale
                }
            })
            .fold(0.0, f64::max);
        (worst, 1.0)
    }
    fn summary(&self) -> f64 {
        self.iter().copied().fold(0.0, f64::max)
    }
}

/// Runs `eval(node_count)` with doubling node counts until the policy is met.
pub fn converge<V, F>(policy: &ConvergencePolicy, context: &str, mut eval: F) -> Result<Converged<V>>
where
    V: Estimate,
    F: FnMut(usize) -> Result<V>,
{
    let mut nodes = policy.initial_nodes.max(2);
    let mut previous = eval(nodes)?;
    loop {
        let next_nodes = nodes * 2;
        if next_nodes > policy.max_nodes {
            return Err(Error::Accuracy {
                context: format!("{context}: node cap {} reached", policy.max_nodes),
                previous: previous.summary(),
                current: previous.summary(),
            });
        }
        let current = eval(next_nodes)?;
        let (diff, scale) = current.distance(&previous);
        let rel = diff / scale.abs().max(policy.floor);
        if rel <= policy.target || diff == 0.0 {
            return Ok(Converged {
                value: current,
                nodes: next_nodes,
                relative_change: rel,
            });
        }
        if next_nodes * 2 > policy.max_nodes {
            if rel <= policy.accept {
                log::warn!(
                    "{context}: accepted at relative change {rel:e} (target {:e})",
                    policy.target
                );
                return Ok(Converged {
                    value: current,
                    nodes: next_nodes,
                    relative_change: rel,
                });
            }
            return Err(Error::Accuracy {
                context: context.to_string(),
                previous: previous.summary(),
                current: current.summary(),
            });
        }
        previous = current;
        nodes = next_nodes;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = Rule::new(5);
        let v: f64 = rule.integrate(0.0, 2.0, |x| x.powi(9));
        assert!((v - 2f64.powi(10) / 10.0).abs() < 1e-11);
    }

    #[test]
    fn composite_complex_oscillatory() {
        let rule = Rule::new(PANEL_ORDER);
        let breaks = uniform_breaks(0.0, 20.0, 40);
        let v: Complex64 = composite(&rule, &breaks, |t| Complex64::from_polar(1.0, 3.0 * t));
        let exact = (Complex64::from_polar(1.0, 60.0) - 1.0) / Complex64::new(0.0, 3.0);
        assert!((v - exact).norm() < 1e-13);
    }

    #[test]
    fn converge_reports_accuracy_error() {
        let policy = ConvergencePolicy {
            initial_nodes: 4,
            max_nodes: 64,
            ..Default::default()
        };
        // A "quadrature" whose estimate never settles.
        let err = converge(&policy, "toy", |n| Ok(n as f64)).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }

    #[test]
    fn converge_stops_on_exact_rule() {
        let policy = ConvergencePolicy::default();
        let out = converge(&policy, "poly", |n| {
            let rule = Rule::new(PANEL_ORDER);
            Ok(composite(
                &rule,
                &uniform_breaks(0.0, 1.0, n / PANEL_ORDER),
                |x: f64| x * x,
            ))
        })
        .unwrap();
        assert!((out.value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(out.nodes, 128);
    }

    #[test]
    fn refine_keeps_endpoints() {
        let b = refine_breaks(&[0.0, 1.0, 3.0], 2);
        assert_eq!(b, vec![0.0, 0.5, 1.0, 2.0, 3.0]);
    }
}
