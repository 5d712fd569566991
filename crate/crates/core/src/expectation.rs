//! Gauss–Hermite quadrature for expectations over a Brownian increment.
//!
//! `E[g(x + ΔW)]` with `ΔW ~ N(0, v)` is `(1/√π) ∫ g(x + √(2v) a) e^{-a²} da`,
//! which the m-point physicists' Gauss–Hermite rule evaluates exactly for
//! polynomials of degree up to `2m - 1`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_POINTS: usize = 64;

/// Nodes and weights of the m-point physicists' Gauss–Hermite rule.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteRule {
    /// Roots of `H_m`, ascending.
    pub nodes: Vec<f64>,
    /// Weights for the `e^{-x²}` measure; they sum to `√π`.
    pub weights: Vec<f64>,
}

impl HermiteRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest node magnitude.
    pub fn max_node(&self) -> f64 {
        self.nodes.last().copied().unwrap_or(0.0)
    }

    /// `∫ g(a) e^{-a²} da`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&a, &w)| w * g(a)).sum()
    }

    /// Offsets and probabilities for increments of the given variance.
    pub(crate) fn scaled(&self, variance: f64) -> ScaledRule {
        let s = (2.0 * variance).sqrt();
        let norm = PI.sqrt().recip();
        ScaledRule {
            offsets: self.nodes.iter().map(|a| s * a).collect(),
            probs: self.weights.iter().map(|w| w * norm).collect(),
        }
    }
}

/// A Hermite rule rescaled to a Gaussian increment: `E[g(x+ΔW)] ≈ Σ p_i g(x + o_i)`.
#[derive(Debug, Clone)]
pub(crate) struct ScaledRule {
    pub offsets: Vec<f64>,
    pub probs: Vec<f64>,
}

/// Orthonormal Hermite polynomial of degree m at z and its derivative.
fn orthonormal_hermite(m: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=m {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * m as f64).sqrt() * p2)
}

/// Build the m-point rule by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(m: usize) -> Result<HermiteRule> {
    if !(1..=MAX_POINTS).contains(&m) {
        return Err(Error::HermitePoints { m });
    }
    let n = m as f64;
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let half = m.div_ceil(2);
    let mut z = 0.0f64;

    for i in 0..half {
        // Initial guesses for the largest roots, moving inward.
        z = match i {
            0 => (2.0 * n + 1.0).sqrt() - 1.85575 * (2.0 * n + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * n.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        for _ in 0..100 {
            let (p, dp) = orthonormal_hermite(m, z);
            let step = p / dp;
            z -= step;
            if step.abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, deriv) = orthonormal_hermite(m, z);
        x[i] = z;
        x[m - 1 - i] = -z;
        w[i] = 2.0 / (deriv * deriv);
        w[m - 1 - i] = w[i];
    }
    if m % 2 == 1 {
        x[half - 1] = 0.0;
    }
    x.reverse();
    w.reverse();
    Ok(HermiteRule { nodes: x, weights: w })
}

/// `E[g(x + ΔW)]` for `ΔW ~ N(0, variance)`.
pub fn conditional_expectation<F: Fn(f64) -> f64>(
    g: F,
    x: f64,
    variance: f64,
    rule: &HermiteRule,
) -> Result<f64> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::Variance(variance));
    }
    let scaled = rule.scaled(variance);
    let mut acc = 0.0;
    for (o, p) in scaled.offsets.iter().zip(&scaled.probs) {
        let at = x + o;
        let value = g(at);
        if !value.is_finite() {
            return Err(Error::NonFiniteExpectation { x: at, value });
        }
        acc += p * value;
    }
    Ok(acc)
}
