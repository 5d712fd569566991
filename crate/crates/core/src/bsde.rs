//! Backward solver for `y_t = φ(W_T) + ∫_t^T f(s, y_s) ds - ∫_t^T z_s dW_s`.
//!
//! Each step takes conditional expectations over the Brownian increment with
//! Gauss–Hermite quadrature and approximates the time integrals of
//! `E[f(s, y_s)]` and `E[f_y(s, y_s) z_s]` with a θ-rule:
//!
//! ```text
//! y^n = E[y^{n+1}] + h (θ_y f(t_n, y^n)       + (1-θ_y) E[f(t_{n+1}, y^{n+1})])
//! z^n = E[z^{n+1}] + h (θ_z f_y(t_n, y^n) z^n + (1-θ_z) E[f_y(t_{n+1}, y^{n+1}) z^{n+1}])
//! ```
//!
//! With a fixed θ this is the classical θ-scheme (θ = 1/2 is Crank–Nicolson).
//! The adapted scheme chooses θ_y and θ_z per space-time site from the expected
//! integrand values on the `q + 1` future levels; the last `q` levels are
//! bootstrapped with a time-refined Crank–Nicolson run.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expectation::{gauss_hermite, HermiteRule, ScaledRule};
use crate::grid::{interpolate, make_grid, GridFunction, SpaceGrid};
use crate::theta::{sampled_unchecked, theta_weights, StencilWeights, ThetaDecision, ThetaLimits};

/// `f(t, y)` or `f_y(t, y)`; also used for `(t, x)` solution functions.
pub type TimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// A function of the Brownian state.
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Analytic `y(t, x)` and `z(t, x)`.
#[derive(Clone)]
pub struct ExactSolution {
    pub y: TimeFn,
    pub z: TimeFn,
}

#[derive(Clone)]
pub struct BsdeProblem {
    pub name: String,
    /// Generator `f(t, y)`.
    pub f: TimeFn,
    /// `∂f/∂y`.
    pub f_y: TimeFn,
    /// Terminal function φ.
    pub phi: SpaceFn,
    /// `φ'`.
    pub phi_x: SpaceFn,
    pub horizon: f64,
    pub exact: Option<ExactSolution>,
}

impl fmt::Debug for BsdeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BsdeProblem")
            .field("name", &self.name)
            .field("horizon", &self.horizon)
            .field("exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl BsdeProblem {
    /// Spot-check `f_y` and `φ'` against central differences.
    pub fn check_consistency(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidConfig(format!("horizon must be positive, got {}", self.horizon)));
        }
        const STEP: f64 = 1e-6;
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-6 * (1.0 + a.abs());
        for t in [0.0, 0.5 * self.horizon, self.horizon] {
            for y in [-1.0, -0.3, 0.0, 0.3, 0.9, 1.7] {
                let analytic = (self.f_y)(t, y);
                let numeric = ((self.f)(t, y + STEP) - (self.f)(t, y - STEP)) / (2.0 * STEP);
                if !close(analytic, numeric) {
                    return Err(Error::InconsistentDerivative {
                        what: "f_y",
                        at: format!("(t, y) = ({t}, {y})"),
                        analytic,
                        numeric,
                    });
                }
            }
        }
        for x in [-2.0, -0.7, 0.0, 0.4, 1.5] {
            let analytic = (self.phi_x)(x);
            let numeric = ((self.phi)(x + STEP) - (self.phi)(x - STEP)) / (2.0 * STEP);
            if !close(analytic, numeric) {
                return Err(Error::InconsistentDerivative {
                    what: "phi_x",
                    at: format!("x = {x}"),
                    analytic,
                    numeric,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchemeKind {
    FixedTheta(f64),
    Adapted(usize),
}

impl SchemeKind {
    /// Order used for the space-step balance; 1 for fixed θ.
    pub fn effective_order(&self) -> usize {
        match self {
            SchemeKind::FixedTheta(_) => 1,
            SchemeKind::Adapted(q) => *q,
        }
    }
}

/// How the last `q` levels of the adapted scheme are produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bootstrap {
    /// Crank–Nicolson on a refined time grid; `None` means `N` substeps per coarse step.
    RefinedCn { substeps: Option<usize> },
    /// Fill from the analytic solution.
    ExactSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub limits: ThetaLimits,
    pub gh_points: usize,
    pub interp_order: usize,
    pub fixpoint_tol: f64,
    pub fixpoint_max_iters: usize,
    pub bootstrap: Bootstrap,
    /// `None` selects `8√T + √(2 s h)·a_max`, with `s` the deepest stencil step.
    pub domain_half_width: Option<f64>,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            limits: ThetaLimits { l_theta: 10.0, l_rho: 1e30 },
            gh_points: 8,
            interp_order: 5,
            fixpoint_tol: 1e-13,
            fixpoint_max_iters: 100,
            bootstrap: Bootstrap::RefinedCn { substeps: None },
            domain_half_width: None,
        }
    }

    pub fn crank_nicolson() -> Self {
        Self::new(SchemeKind::FixedTheta(0.5))
    }

    pub fn adapted(q: usize) -> Self {
        Self::new(SchemeKind::Adapted(q))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match self.kind {
            SchemeKind::FixedTheta(theta) if !theta.is_finite() => {
                return bad(format!("theta must be finite, got {theta}"))
            }
            SchemeKind::Adapted(q) if !(2..=4).contains(&q) => {
                return bad(format!("adapted order must be in 2..=4, got {q}"))
            }
            _ => {}
        }
        ThetaLimits::new(self.limits.l_theta, self.limits.l_rho)?;
        if self.gh_points < 2 {
            return bad(format!("need at least 2 Gauss-Hermite points, got {}", self.gh_points));
        }
        if self.interp_order < 1 {
            return bad("interpolation order must be at least 1".into());
        }
        if !(self.fixpoint_tol > 0.0 && self.fixpoint_tol.is_finite()) {
            return bad(format!("fixed-point tolerance must be positive, got {}", self.fixpoint_tol));
        }
        if self.fixpoint_max_iters == 0 {
            return bad("fixed-point iteration limit must be positive".into());
        }
        if let Bootstrap::RefinedCn { substeps: Some(0) } = self.bootstrap {
            return bad("bootstrap needs at least one substep".into());
        }
        if let Some(w) = self.domain_half_width {
            if !(w > 0.0 && w.is_finite()) {
                return bad(format!("domain half width must be positive, got {w}"));
            }
        }
        Ok(())
    }
}

/// `(y^n, z^n)` on the space grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub level: usize,
    pub y: GridFunction,
    pub z: GridFunction,
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Levels `0..=N`, indexed by level.
    pub fields: Vec<SolutionField>,
    /// `y^0(0)`.
    pub y0: f64,
    /// `z^0(0)`.
    pub z0: f64,
    /// Sites `(n, x)` where the y-side θ fell back to 1/2.
    pub invalid_y: usize,
    pub invalid_z: usize,
    pub h: f64,
    pub grid: SpaceGrid,
}

/// `y^N = φ`, `z^N = φ'` at every node.
pub fn terminal_level(problem: &BsdeProblem, grid: &SpaceGrid, level: usize) -> Result<SolutionField> {
    let sample = |g: &SpaceFn, what: &'static str| -> Result<GridFunction> {
        let values: Vec<f64> = grid.nodes().map(|x| g(x)).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteField { what, level, x: grid.node(i) });
        }
        GridFunction::new(*grid, values)
    };
    Ok(SolutionField { level, y: sample(&problem.phi, "phi")?, z: sample(&problem.phi_x, "phi_x")? })
}

/// Everything computed at one grid node during a step.
#[derive(Debug, Clone, Copy)]
pub struct SiteSolution {
    pub y: f64,
    pub z: f64,
    /// `E[y^{n+1}]`, `E[f(t_{n+1}, y^{n+1})]`, `E[z^{n+1}]`, `E[f_y(t_{n+1}, y^{n+1}) z^{n+1}]`.
    pub moments: [f64; 4],
    pub theta_y: ThetaDecision,
    pub theta_z: ThetaDecision,
    pub iterations: usize,
}

/// A level produced by [`BsdeSolver::backward_step`].
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub field: SolutionField,
    pub sites: Vec<SiteSolution>,
    pub invalid_y: usize,
    pub invalid_z: usize,
}

enum ThetaSource<'a> {
    Fixed(f64),
    Adapted { future: &'a [&'a SolutionField], weights: &'static StencilWeights },
}

/// A solver bound to one problem, partition size and configuration.
pub struct BsdeSolver<'p> {
    problem: &'p BsdeProblem,
    config: SchemeConfig,
    steps: usize,
    h: f64,
    grid: SpaceGrid,
    rule: HermiteRule,
    /// `scaled[j-1]` carries increments of variance `j·h`.
    scaled: Vec<ScaledRule>,
    weights: Option<&'static StencilWeights>,
}

impl<'p> BsdeSolver<'p> {
    /// Solver on the default grid: `Δx = h^{(q+2)/(r+1)}` over the configured half width.
    pub fn new(problem: &'p BsdeProblem, steps: usize, config: SchemeConfig) -> Result<Self> {
        config.validate()?;
        if steps == 0 {
            return Err(Error::InvalidConfig("need at least one time step".into()));
        }
        let q = config.kind.effective_order();
        let h = problem.horizon / steps as f64;
        let depth = match config.kind {
            SchemeKind::Adapted(q) => q + 1,
            SchemeKind::FixedTheta(_) => 1,
        };
        let max_node = gauss_hermite(config.gh_points)?.max_node();
        let dx = h.powf((q as f64 + 2.0) / (config.interp_order as f64 + 1.0));
        let half_width = config
            .domain_half_width
            .unwrap_or_else(|| 8.0 * problem.horizon.sqrt() + (2.0 * depth as f64 * h).sqrt() * max_node);
        let grid = make_grid(half_width, dx)?;
        Self::with_grid(problem, steps, config, grid)
    }

    /// Solver on a caller-supplied space grid.
    pub fn with_grid(
        problem: &'p BsdeProblem,
        steps: usize,
        config: SchemeConfig,
        grid: SpaceGrid,
    ) -> Result<Self> {
        config.validate()?;
        problem.check_consistency()?;
        let weights = match config.kind {
            SchemeKind::Adapted(q) => {
                if steps <= q {
                    return Err(Error::InvalidConfig(format!(
                        "adapted order {q} needs more than {q} time steps, got {steps}"
                    )));
                }
                Some(theta_weights(q)?)
            }
            SchemeKind::FixedTheta(_) if steps == 0 => {
                return Err(Error::InvalidConfig("need at least one time step".into()))
            }
            SchemeKind::FixedTheta(_) => None,
        };
        let h = problem.horizon / steps as f64;
        let rule = gauss_hermite(config.gh_points)?;
        let r = config.interp_order;
        if grid.len() <= r {
            return Err(Error::InvalidConfig(format!(
                "grid of {} nodes cannot carry interpolation order {r}",
                grid.len()
            )));
        }
        let depth = weights.map_or(1, |w| w.len());
        let scaled = (1..=depth).map(|j| rule.scaled(j as f64 * h)).collect();
        Ok(Self { problem, config, steps, h, grid, rule, scaled, weights })
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.grid
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    fn time(&self, level: usize) -> f64 {
        if level == self.steps {
            self.problem.horizon
        } else {
            level as f64 * self.h
        }
    }

    pub fn terminal_level(&self) -> Result<SolutionField> {
        terminal_level(self.problem, &self.grid, self.steps)
    }

    /// Levels `N-q..=N-1`, ascending, for the adapted scheme.
    pub fn bootstrap_levels(&self, terminal: &SolutionField) -> Result<Vec<SolutionField>> {
        let q = match self.config.kind {
            SchemeKind::Adapted(q) => q,
            SchemeKind::FixedTheta(_) => return Ok(Vec::new()),
        };
        let n = self.steps;
        match self.config.bootstrap {
            Bootstrap::ExactSolution => {
                let exact = self
                    .problem
                    .exact
                    .as_ref()
                    .ok_or(Error::MissingExactSolution("the exact-solution bootstrap"))?;
                (n - q..n)
                    .map(|level| {
                        let t = self.time(level);
                        let y = self.grid.sample(|x| (exact.y)(t, x));
                        let z = self.grid.sample(|x| (exact.z)(t, x));
                        Ok(SolutionField {
                            level,
                            y: GridFunction::new(self.grid, y.values)?,
                            z: GridFunction::new(self.grid, z.values)?,
                        })
                    })
                    .collect()
            }
            Bootstrap::RefinedCn { substeps } => {
                let sub = substeps.unwrap_or(n);
                let hs = self.h / sub as f64;
                let fine = self.rule.scaled(hs);
                let mut current = terminal.clone();
                let mut out = Vec::with_capacity(q);
                for level in (n - q..n).rev() {
                    for k in (0..sub).rev() {
                        // Substep from t_level + (k+1)hs down to t_level + k hs.
                        let t = self.time(level) + k as f64 * hs;
                        let t_next = if k + 1 == sub { self.time(level + 1) } else { t + hs };
                        let step =
                            self.level_step(level, t, t_next, hs, &fine, &current, ThetaSource::Fixed(0.5))?;
                        current = step.field;
                    }
                    out.push(current.clone());
                }
                out.reverse();
                Ok(out)
            }
        }
    }

    /// `(θ̂_y, θ̂_z)` at `(t_n, x)`; `future[j-1]` is level `n + j`, `j = 1..=q+1`.
    pub fn adapted_thetas_at(
        &self,
        n: usize,
        x: f64,
        future: &[&SolutionField],
    ) -> Result<(ThetaDecision, ThetaDecision)> {
        let weights = self.weights.ok_or_else(|| {
            Error::InvalidConfig("adapted thetas requested for a fixed-theta scheme".into())
        })?;
        self.check_future(n, future, weights.len())?;
        let mut ey = vec![0.0; weights.len()];
        let mut ez = vec![0.0; weights.len()];
        for (j, field) in future.iter().enumerate() {
            let m = self.moments(x, self.time(n + j + 1), &self.scaled[j], field);
            ey[j] = m[1];
            ez[j] = m[3];
        }
        Ok((
            sampled_unchecked(&ey, weights, &self.config.limits),
            sampled_unchecked(&ez, weights, &self.config.limits),
        ))
    }

    fn check_future(&self, n: usize, future: &[&SolutionField], need: usize) -> Result<()> {
        if future.len() < need {
            return Err(Error::InvalidConfig(format!(
                "step {n} needs {need} future levels, got {}",
                future.len()
            )));
        }
        for (j, field) in future.iter().take(need).enumerate() {
            if field.level != n + j + 1 {
                return Err(Error::InvalidConfig(format!(
                    "future level {} supplied where {} was expected",
                    field.level,
                    n + j + 1
                )));
            }
        }
        Ok(())
    }

    /// `E[y], E[f(t, y)], E[z], E[f_y(t, y) z]` of a field over one increment from x.
    fn moments(&self, x: f64, t: f64, rule: &ScaledRule, field: &SolutionField) -> [f64; 4] {
        let r = self.config.interp_order;
        let mut acc = [0.0; 4];
        for (o, p) in rule.offsets.iter().zip(&rule.probs) {
            let y = interpolate(&field.y, x + o, r);
            let z = interpolate(&field.z, x + o, r);
            acc[0] += p * y;
            acc[1] += p * (self.problem.f)(t, y);
            acc[2] += p * z;
            acc[3] += p * (self.problem.f_y)(t, y) * z;
        }
        acc
    }

    /// Level `n` from its future levels: `future[0]` is level `n+1`, and the
    /// adapted scheme also needs levels up to `n+q+1`.
    pub fn backward_step(&self, n: usize, future: &[&SolutionField]) -> Result<StepOutput> {
        let source = match (self.config.kind, self.weights) {
            (SchemeKind::FixedTheta(theta), _) => {
                self.check_future(n, future, 1)?;
                ThetaSource::Fixed(theta)
            }
            (SchemeKind::Adapted(_), Some(weights)) => {
                if n + weights.len() > self.steps {
                    return Err(Error::InvalidConfig(format!(
                        "adapted step {n} reaches past level {}",
                        self.steps
                    )));
                }
                self.check_future(n, future, weights.len())?;
                ThetaSource::Adapted { future, weights }
            }
            (SchemeKind::Adapted(_), None) => unreachable!("weights are set for adapted schemes"),
        };
        self.level_step(n, self.time(n), self.time(n + 1), self.h, &self.scaled[0], future[0], source)
    }

    #[allow(clippy::too_many_arguments)]
    fn level_step(
        &self,
        level: usize,
        t: f64,
        t_next: f64,
        h: f64,
        rule: &ScaledRule,
        next: &SolutionField,
        source: ThetaSource<'_>,
    ) -> Result<StepOutput> {
        let sites: Vec<SiteSolution> = (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.site(level, t, t_next, h, self.grid.node(i), rule, next, &source))
            .collect::<Result<_>>()?;
        let y = GridFunction { grid: self.grid, values: sites.iter().map(|s| s.y).collect() };
        let z = GridFunction { grid: self.grid, values: sites.iter().map(|s| s.z).collect() };
        let invalid_y = sites.iter().filter(|s| !s.theta_y.valid).count();
        let invalid_z = sites.iter().filter(|s| !s.theta_z.valid).count();
        Ok(StepOutput { field: SolutionField { level, y, z }, sites, invalid_y, invalid_z })
    }

    #[allow(clippy::too_many_arguments)]
    fn site(
        &self,
        level: usize,
        t: f64,
        t_next: f64,
        h: f64,
        x: f64,
        rule: &ScaledRule,
        next: &SolutionField,
        source: &ThetaSource<'_>,
    ) -> Result<SiteSolution> {
        let moments = self.moments(x, t_next, rule, next);
        let [e1, e2, e3, e4] = moments;
        let (theta_y, theta_z) = match source {
            ThetaSource::Fixed(theta) => (ThetaDecision::fixed(*theta), ThetaDecision::fixed(*theta)),
            ThetaSource::Adapted { future, weights } => {
                let mut ey = [0.0; 8];
                let mut ez = [0.0; 8];
                ey[0] = e2;
                ez[0] = e4;
                for j in 1..weights.len() {
                    let m = self.moments(x, self.time(level + j + 1), &self.scaled[j], future[j]);
                    ey[j] = m[1];
                    ez[j] = m[3];
                }
                let len = weights.len();
                (
                    sampled_unchecked(&ey[..len], weights, &self.config.limits),
                    sampled_unchecked(&ez[..len], weights, &self.config.limits),
                )
            }
        };

        let (y, iterations) = self.solve_implicit_y(level, t, h, x, e1, e2, theta_y.theta)?;

        let denom = 1.0 - h * theta_z.theta * (self.problem.f_y)(t, y);
        if denom.abs() < 1e-12 {
            return Err(Error::SingularZEquation { level, x });
        }
        let z = (e3 + h * (1.0 - theta_z.theta) * e4) / denom;
        if !z.is_finite() {
            return Err(Error::NonFiniteField { what: "z", level, x });
        }
        Ok(SiteSolution { y, z, moments, theta_y, theta_z, iterations })
    }

    /// Solve `y = e1 + h (θ f(t, y) + (1-θ) e2)`.
    ///
    /// Fixed-point iteration from `e1 + h e2` first; it contracts only while
    /// `h |θ| |f_y| < 1`, so Newton on the same equation takes over if it stalls.
    #[allow(clippy::too_many_arguments)]
    fn solve_implicit_y(
        &self,
        level: usize,
        t: f64,
        h: f64,
        x: f64,
        e1: f64,
        e2: f64,
        theta: f64,
    ) -> Result<(f64, usize)> {
        let f = &self.problem.f;
        let tol = self.config.fixpoint_tol;
        let max_iters = self.config.fixpoint_max_iters;
        let explicit = e1 + h * (1.0 - theta) * e2;
        let implicit = h * theta;
        let start = e1 + h * e2;

        let mut y = start;
        for iters in 1..=max_iters {
            let next = explicit + implicit * f(t, y);
            if !next.is_finite() {
                break;
            }
            let delta = (next - y).abs();
            y = next;
            if delta <= tol {
                return Ok((y, iters));
            }
        }

        let f_y = &self.problem.f_y;
        let mut y = start;
        for iters in 1..=max_iters {
            let residual = y - explicit - implicit * f(t, y);
            let slope = 1.0 - implicit * f_y(t, y);
            if slope == 0.0 || !slope.is_finite() {
                break;
            }
            let next = y - residual / slope;
            if !next.is_finite() {
                return Err(Error::NonFiniteField { what: "y", level, x });
            }
            let delta = (next - y).abs();
            y = next;
            if delta <= tol {
                return Ok((y, max_iters + iters));
            }
        }
        Err(Error::FixedPointDiverged { level, x, iters: 2 * max_iters })
    }

    pub fn solve(&self) -> Result<SolveOutput> {
        let n = self.steps;
        let mut fields: Vec<Option<SolutionField>> = vec![None; n + 1];
        let terminal = self.terminal_level()?;
        let mut invalid_y = 0;
        let mut invalid_z = 0;
        let depth = match self.config.kind {
            SchemeKind::FixedTheta(_) => 1,
            SchemeKind::Adapted(q) => {
                for field in self.bootstrap_levels(&terminal)? {
                    let level = field.level;
                    fields[level] = Some(field);
                }
                q + 1
            }
        };
        fields[n] = Some(terminal);
        let first = n + 1 - depth;
        for level in (0..first).rev() {
            let future: Vec<&SolutionField> = fields[level + 1..=level + depth]
                .iter()
                .map(|f| f.as_ref().expect("future levels are filled"))
                .collect();
            let step = self.backward_step(level, &future)?;
            invalid_y += step.invalid_y;
            invalid_z += step.invalid_z;
            fields[level] = Some(step.field);
        }
        let fields: Vec<SolutionField> = fields.into_iter().map(|f| f.expect("all levels filled")).collect();
        Ok(SolveOutput {
            y0: fields[0].y.at_center(),
            z0: fields[0].z.at_center(),
            fields,
            invalid_y,
            invalid_z,
            h: self.h,
            grid: self.grid,
        })
    }
}

/// Solve `problem` on `steps` uniform time steps.
pub fn solve_bsde(problem: &BsdeProblem, steps: usize, config: &SchemeConfig) -> Result<SolveOutput> {
    BsdeSolver::new(problem, steps, config.clone())?.solve()
}
