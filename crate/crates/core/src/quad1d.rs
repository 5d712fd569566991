//! Weighted endpoint quadrature on equidistant partitions, with constant or adapted θ.

use crate::error::{Error, Result};
use crate::theta::{sampled_unchecked, theta_weights, ThetaDecision, ThetaLimits};

/// An equidistant partition of `[a, b]` into `n` subintervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl PartitionSpec {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidPartition(format!("need finite a < b, got [{a}, {b}]")));
        }
        if n == 0 {
            return Err(Error::InvalidPartition("need at least one subinterval".into()));
        }
        Ok(Self { a, b, n })
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / self.n as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n {
            self.b
        } else {
            self.a + i as f64 * self.h()
        }
    }
}

/// How the last `q` subintervals, which lack a full forward stencil, choose θ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrailingPolicy {
    /// Run the forward stencil on the reversed integrand and use `1 - θ'`.
    #[default]
    Reflected,
    /// Use θ = 1/2 and count the subinterval as invalid.
    CrankNicolson,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralResult {
    pub value: f64,
    /// One decision per subinterval, left to right.
    pub decisions: Vec<ThetaDecision>,
    pub invalid_count: usize,
    /// Number of leading subintervals that used the forward stencil.
    pub forward_len: usize,
}

impl IntegralResult {
    fn assemble(nodes: &[f64], h: f64, decisions: Vec<ThetaDecision>, forward_len: usize) -> Self {
        let value = decisions
            .iter()
            .zip(nodes.windows(2))
            .map(|(d, w)| (d.theta * w[0] + (1.0 - d.theta) * w[1]) * h)
            .sum();
        let invalid_count = decisions.iter().filter(|d| !d.valid).count();
        Self { value, decisions, invalid_count, forward_len }
    }

    /// Invalid subintervals among those using the forward stencil.
    pub fn forward_invalid_count(&self) -> usize {
        self.decisions[..self.forward_len].iter().filter(|d| !d.valid).count()
    }
}

fn sample_nodes<F: Fn(f64) -> f64>(f: F, part: &PartitionSpec) -> Result<Vec<f64>> {
    (0..=part.n)
        .map(|i| {
            let t = part.node(i);
            let value = f(t);
            if value.is_finite() {
                Ok(value)
            } else {
                Err(Error::NonFiniteSample { what: "integrand", index: i, t, value })
            }
        })
        .collect()
}

/// `Σ [θ f(t_n) + (1-θ) f(t_{n+1})] h` with one constant θ.
pub fn integrate_fixed_theta<F: Fn(f64) -> f64>(
    f: F,
    part: &PartitionSpec,
    theta: f64,
) -> Result<IntegralResult> {
    if !theta.is_finite() {
        return Err(Error::InvalidConfig(format!("theta must be finite, got {theta}")));
    }
    let nodes = sample_nodes(f, part)?;
    let decisions = vec![ThetaDecision::fixed(theta); part.n];
    Ok(IntegralResult::assemble(&nodes, part.h(), decisions, part.n))
}

/// The q-th order adapted θ-scheme with reflected trailing stencils.
pub fn integrate_adapted<F: Fn(f64) -> f64>(
    f: F,
    part: &PartitionSpec,
    q: usize,
    limits: &ThetaLimits,
) -> Result<IntegralResult> {
    integrate_adapted_with(f, part, q, limits, TrailingPolicy::default())
}

pub fn integrate_adapted_with<F: Fn(f64) -> f64>(
    f: F,
    part: &PartitionSpec,
    q: usize,
    limits: &ThetaLimits,
    trailing: TrailingPolicy,
) -> Result<IntegralResult> {
    let weights = theta_weights(q)?;
    let n = part.n;
    if n < q + 2 {
        return Err(Error::InvalidPartition(format!(
            "order {q} needs at least {} subintervals, got {n}",
            q + 2
        )));
    }
    let nodes = sample_nodes(f, part)?;
    let forward_len = n - q;
    let mut samples = vec![0.0; q + 1];
    let decisions = (0..n)
        .map(|i| {
            if i < forward_len {
                return sampled_unchecked(&nodes[i + 1..=i + q + 1], weights, limits);
            }
            // Subinterval i of f is subinterval n-1-i of s ↦ f(a+b-s), whose forward
            // samples are f(t_i), f(t_{i-1}), ..., f(t_{i-q}).
            match trailing {
                TrailingPolicy::Reflected if i >= q => {
                    for (j, s) in samples.iter_mut().enumerate() {
                        *s = nodes[i - j];
                    }
                    let d = sampled_unchecked(&samples, weights, limits);
                    ThetaDecision { theta: 1.0 - d.theta, ..d }
                }
                _ => ThetaDecision { theta: 0.5, valid: false, rho: f64::NAN, sigma: f64::NAN },
            }
        })
        .collect();
    Ok(IntegralResult::assemble(&nodes, part.h(), decisions, forward_len))
}

/// `t³ exp(-(t - 1/2)²)`, the benchmark integrand.
pub fn reference_integrand(t: f64) -> f64 {
    t * t * t * (-(t - 0.5) * (t - 0.5)).exp()
}

/// Composite Simpson rule with compensated summation.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let n = 2 * panels;
    let h = (b - a) / n as f64;
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..=n {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let t = if i == n { b } else { a + i as f64 * h };
        // Neumaier summation.
        let term = w * f(t);
        let next = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - next) + term;
        } else {
            comp += (term - next) + sum;
        }
        sum = next;
    }
    (sum + comp) * h / 3.0
}
