//! Derivative stencils and the adapted θ decision for a single subinterval.
//!
//! For a subinterval `[t_n, t_{n+1}]` the weighted endpoint rule
//! `[θ f(t_n) + (1-θ) f(t_{n+1})] h` has a truncation error whose Taylor terms up
//! to order `q` vanish when θ = σ/ρ with
//!
//! ```text
//! σ = Σ_k (-1)^{k+1} f^(k)(t_{n+1}) h^{k+1} / (k+1)!
//! ρ = Σ_k [f^(k)(t_n) + (-1)^{k+1} f^(k)(t_{n+1})] h^{k+1} / (k+1)!
//! ```
//!
//! When derivatives are unknown they are replaced by those of the Lagrange
//! polynomial through the forward samples `f(t_{n+1}), ..., f(t_{n+q+1})`, which
//! collapses θ into a ratio of two fixed linear combinations of the samples.

use std::sync::OnceLock;

use num_rational::Ratio;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest supported stencil order.
pub const MIN_ORDER: usize = 1;
/// Largest supported stencil order.
pub const MAX_ORDER: usize = 8;

/// Exact rational used for stencil construction.
pub type Rational = Ratio<i128>;

/// Where the interpolant's derivatives are evaluated, relative to the stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilPoint {
    /// `t_n`, one step before the first stencil node.
    Base,
    /// `t_{n+1}`, the first stencil node.
    FirstNode,
}

impl StencilPoint {
    fn offset(self) -> i128 {
        match self {
            StencilPoint::Base => 0,
            StencilPoint::FirstNode => 1,
        }
    }
}

fn check_order(q: usize) -> Result<()> {
    if (MIN_ORDER..=MAX_ORDER).contains(&q) {
        Ok(())
    } else {
        Err(Error::StencilOrder { q, min: MIN_ORDER, max: MAX_ORDER })
    }
}

fn factorial(k: usize) -> i128 {
    (1..=k as i128).product()
}

/// Coefficients `t_kj` such that `h^k L^(k)(point) = Σ_j t_kj f(t_{n+j})`.
///
/// Row `k-1` holds the scaled `k`-th derivative, column `j-1` the weight of the
/// sample at offset `j`. The nodes are the offsets `1..=q+1` in units of `h`.
pub fn lagrange_derivative_weights(q: usize, point: StencilPoint) -> Result<Vec<Vec<Rational>>> {
    check_order(q)?;
    let at = point.offset();
    // Node offsets measured from the evaluation point.
    let nodes: Vec<i128> = (1..=q as i128 + 1).map(|m| m - at).collect();
    let mut rows = vec![vec![Rational::zero(); q + 1]; q];

    for (j, &dj) in nodes.iter().enumerate() {
        // Expand Π_{m≠j} (v - d_m) in powers of v, lowest first.
        let mut poly = vec![Rational::one()];
        let mut denom = Rational::one();
        for (m, &dm) in nodes.iter().enumerate() {
            if m == j {
                continue;
            }
            let mut next = vec![Rational::zero(); poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i + 1] += *c;
                next[i] -= *c * Rational::from_integer(dm);
            }
            poly = next;
            denom *= Rational::from_integer(dj - dm);
        }
        for k in 1..=q {
            rows[k - 1][j] = poly[k] * Rational::from_integer(factorial(k)) / denom;
        }
    }
    Ok(rows)
}

fn to_f64(x: &Rational) -> f64 {
    // Numerators and denominators stay far below 2^53, so this rounds once.
    *x.numer() as f64 / *x.denom() as f64
}

/// Stencil coefficients and the reduced θ weights for one order `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilWeights {
    pub q: usize,
    /// Derivative coefficients at the base point `t_n`.
    pub t1: Vec<Vec<f64>>,
    /// Derivative coefficients at the first node `t_{n+1}`.
    pub t2: Vec<Vec<f64>>,
    /// Numerator weights `r_j`.
    pub r: Vec<f64>,
    /// `s_j`; the denominator weights are `r_j + s_j`.
    pub s: Vec<f64>,
    /// `r_j + s_j`, rounded once from the exact sum.
    pub rs: Vec<f64>,
    exact_r: Vec<Rational>,
    exact_s: Vec<Rational>,
}

impl StencilWeights {
    fn build(q: usize) -> Result<Self> {
        let t1 = lagrange_derivative_weights(q, StencilPoint::Base)?;
        let t2 = lagrange_derivative_weights(q, StencilPoint::FirstNode)?;
        let mut r = vec![Rational::zero(); q + 1];
        let mut s = vec![Rational::zero(); q + 1];
        for k in 1..=q {
            let inv_fact = Rational::new(1, factorial(k + 1));
            let sign = if k % 2 == 1 { Rational::one() } else { -Rational::one() };
            for j in 0..=q {
                r[j] += sign * t2[k - 1][j] * inv_fact;
                s[j] += t1[k - 1][j] * inv_fact;
            }
        }
        let matrix = |m: &[Vec<Rational>]| -> Vec<Vec<f64>> {
            m.iter().map(|row| row.iter().map(to_f64).collect()).collect()
        };
        Ok(Self {
            q,
            t1: matrix(&t1),
            t2: matrix(&t2),
            r: r.iter().map(to_f64).collect(),
            s: s.iter().map(to_f64).collect(),
            rs: r.iter().zip(&s).map(|(a, b)| to_f64(&(a + b))).collect(),
            exact_r: r,
            exact_s: s,
        })
    }

    /// Exact numerator weights.
    pub fn exact_r(&self) -> &[Rational] {
        &self.exact_r
    }

    /// Exact `s_j`.
    pub fn exact_s(&self) -> &[Rational] {
        &self.exact_s
    }

    /// Stencil width, `q + 1`.
    pub fn len(&self) -> usize {
        self.q + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Reduced θ weights for order `q`, computed once from exact rationals and cached.
pub fn theta_weights(q: usize) -> Result<&'static StencilWeights> {
    static CACHE: OnceLock<Vec<StencilWeights>> = OnceLock::new();
    check_order(q)?;
    let all = CACHE.get_or_init(|| {
        (MIN_ORDER..=MAX_ORDER).map(|q| StencilWeights::build(q).expect("order in range")).collect()
    });
    Ok(&all[q - MIN_ORDER])
}

/// Bounds `L_θ` on `|θ|` and `L_ρ` on `|ρ|⁻¹` that define a valid subinterval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaLimits {
    pub l_theta: f64,
    pub l_rho: f64,
}

impl ThetaLimits {
    pub fn new(l_theta: f64, l_rho: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(l_theta) || !ok(l_rho) {
            return Err(Error::InvalidLimits(format!(
                "L_theta = {l_theta}, L_rho = {l_rho}; both must be positive and finite"
            )));
        }
        Ok(Self { l_theta, l_rho })
    }

    /// Classify a (σ, ρ) pair, falling back to θ = 1/2 when invalid.
    pub fn decide(&self, sigma: f64, rho: f64) -> ThetaDecision {
        let theta = sigma / rho;
        // |ρ|⁻¹ ≤ L_ρ written without the division so that ρ = 0 fails cleanly.
        let valid = rho != 0.0
            && rho.is_finite()
            && theta.is_finite()
            && rho.abs() * self.l_rho >= 1.0
            && theta.abs() <= self.l_theta;
        ThetaDecision { theta: if valid { theta } else { 0.5 }, valid, rho, sigma }
    }
}

/// The θ chosen for one subinterval (or one space-time site).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaDecision {
    pub theta: f64,
    pub valid: bool,
    pub rho: f64,
    pub sigma: f64,
}

impl ThetaDecision {
    /// A decision for a constant-θ rule.
    pub fn fixed(theta: f64) -> Self {
        Self { theta, valid: true, rho: f64::NAN, sigma: f64::NAN }
    }
}

/// Adapted θ from the forward samples `f(t_{n+1}), ..., f(t_{n+q+1})`.
pub fn adapted_theta_sampled(
    samples: &[f64],
    weights: &StencilWeights,
    limits: &ThetaLimits,
) -> Result<ThetaDecision> {
    if samples.len() != weights.len() {
        return Err(Error::SampleCount { q: weights.q, got: samples.len() });
    }
    Ok(sampled_unchecked(samples, weights, limits))
}

/// Both weight rows sum to zero, so the samples are taken relative to the first
/// one. This leaves σ̃ and ρ̃ unchanged and makes constants give exactly zero.
pub(crate) fn sampled_unchecked(
    samples: &[f64],
    weights: &StencilWeights,
    limits: &ThetaLimits,
) -> ThetaDecision {
    let base = samples[0];
    let mut sigma = 0.0;
    let mut rho = 0.0;
    for ((f, r), rs) in samples.iter().zip(&weights.r).zip(&weights.rs).skip(1) {
        let d = f - base;
        sigma += r * d;
        rho += rs * d;
    }
    limits.decide(sigma, rho)
}

/// Adapted θ from exact derivatives `f^(k)(t_n)` (`d1`) and `f^(k)(t_{n+1})` (`d2`), `k = 1..=q`.
pub fn adapted_theta_exact(d1: &[f64], d2: &[f64], h: f64, limits: &ThetaLimits) -> Result<ThetaDecision> {
    if d1.is_empty() || d1.len() != d2.len() {
        return Err(Error::InvalidConfig(format!(
            "derivative lists must be non-empty and equal length, got {} and {}",
            d1.len(),
            d2.len()
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidPartition(format!("step size must be positive, got {h}")));
    }
    let mut sigma = 0.0;
    let mut rho = 0.0;
    let mut scale = h;
    for (k, (a, b)) in d1.iter().zip(d2).enumerate() {
        let k = k + 1;
        scale *= h / (k + 1) as f64; // h^{k+1} / (k+1)!
        let signed = if k % 2 == 1 { *b } else { -*b };
        sigma += signed * scale;
        rho += (a + signed) * scale;
    }
    Ok(limits.decide(sigma, rho))
}
