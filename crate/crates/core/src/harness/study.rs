use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problems::builtin_problem;
use super::rate::{fit_convergence_rate, ROUND_OFF_FLOOR};
use crate::bsde::{solve_bsde, Bootstrap, SchemeConfig, SchemeKind};
use crate::error::{Error, Result};
use crate::quad1d::{integrate_adapted, integrate_fixed_theta, reference_integrand, simpson, PartitionSpec};
use crate::theta::ThetaLimits;

/// A scheme in shorthand form: `cn`, `ada<q>` or `theta:<value>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SchemeSpec {
    FixedTheta(f64),
    Adapted(usize),
}

impl SchemeSpec {
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// Adapted order, or 0 for a fixed θ.
    pub fn order(&self) -> usize {
        match self {
            SchemeSpec::FixedTheta(_) => 0,
            SchemeSpec::Adapted(q) => *q,
        }
    }

    pub fn kind(&self) -> SchemeKind {
        match *self {
            SchemeSpec::FixedTheta(theta) => SchemeKind::FixedTheta(theta),
            SchemeSpec::Adapted(q) => SchemeKind::Adapted(q),
        }
    }

    /// Parse a comma-separated list.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(str::parse).collect()
    }
}

impl fmt::Display for SchemeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchemeSpec::FixedTheta(theta) if *theta == 0.5 => f.write_str("cn"),
            SchemeSpec::FixedTheta(theta) => write!(f, "theta:{theta}"),
            SchemeSpec::Adapted(q) => write!(f, "ada{q}"),
        }
    }
}

impl FromStr for SchemeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::UnknownScheme(s.to_string());
        if s == "cn" {
            return Ok(SchemeSpec::FixedTheta(0.5));
        }
        if let Some(q) = s.strip_prefix("ada") {
            let q: usize = q.parse().map_err(|_| bad())?;
            return if q >= 1 { Ok(SchemeSpec::Adapted(q)) } else { Err(bad()) };
        }
        if let Some(theta) = s.strip_prefix("theta:") {
            let theta: f64 = theta.parse().map_err(|_| bad())?;
            return if theta.is_finite() { Ok(SchemeSpec::FixedTheta(theta)) } else { Err(bad()) };
        }
        Err(bad())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyTarget {
    /// `∫_{-3}^{3} t³ e^{-(t-1/2)²} dt` (or over the configured interval).
    Integral,
    /// A registered BSDE problem id.
    Bsde(String),
}

impl fmt::Display for StudyTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StudyTarget::Integral => f.write_str("integral"),
            StudyTarget::Bsde(id) => write!(f, "bsde:{id}"),
        }
    }
}

impl FromStr for StudyTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "integral" | "integral_demo" => Ok(StudyTarget::Integral),
            _ => match s.strip_prefix("bsde:") {
                Some(id) if !id.is_empty() => Ok(StudyTarget::Bsde(id.to_string())),
                _ => Err(Error::InvalidStudy(format!("unknown target `{s}`"))),
            },
        }
    }
}

/// Overrides applied to every cell of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    /// `None` picks `(L_θ, L_ρ) = (1, 1e8)` for integrals and `(10, 1e30)` for BSDEs.
    pub limits: Option<ThetaLimits>,
    pub gh_points: usize,
    pub interp_order: usize,
    pub half_width: Option<f64>,
    pub bootstrap: Bootstrap,
    pub interval: (f64, f64),
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            limits: None,
            gh_points: 8,
            interp_order: 5,
            half_width: None,
            bootstrap: Bootstrap::RefinedCn { substeps: None },
            interval: (-3.0, 3.0),
        }
    }
}

impl StudyOptions {
    pub fn integral_limits(&self) -> ThetaLimits {
        self.limits.unwrap_or(ThetaLimits { l_theta: 1.0, l_rho: 1e8 })
    }

    pub fn bsde_config(&self, kind: SchemeKind) -> SchemeConfig {
        let mut config = SchemeConfig::new(kind);
        if let Some(limits) = self.limits {
            config.limits = limits;
        }
        config.gh_points = self.gh_points;
        config.interp_order = self.interp_order;
        config.domain_half_width = self.half_width;
        config.bootstrap = self.bootstrap;
        config
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySpec {
    pub target: StudyTarget,
    pub schemes: Vec<SchemeSpec>,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub options: StudyOptions,
}

impl StudySpec {
    pub fn new(target: StudyTarget, schemes: Vec<SchemeSpec>, sizes: Vec<usize>) -> Self {
        Self { target, schemes, sizes, options: StudyOptions::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::InvalidStudy("no schemes given".into()));
        }
        if self.sizes.len() < 2 {
            return Err(Error::InvalidStudy("need at least two sizes to fit a rate".into()));
        }
        if self.sizes[0] == 0 || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidStudy(format!(
                "sizes must be positive and strictly increasing, got {:?}",
                self.sizes
            )));
        }
        if let StudyTarget::Bsde(id) = &self.target {
            builtin_problem(id)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Integral,
    Bsde,
}

/// One `(scheme, N)` cell. For integrals only the `y` fields are used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scheme: String,
    pub q: usize,
    pub n: usize,
    pub h: f64,
    /// Computed `y0`, or the integral value.
    pub value_y: Option<f64>,
    pub value_z: Option<f64>,
    pub err_y: Option<f64>,
    pub err_z: Option<f64>,
    pub invalid_y: usize,
    pub invalid_z: usize,
    /// Set when `err_y` sits below the round-off floor and is left out of the fit.
    pub floored_y: bool,
    pub floored_z: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeRates {
    pub scheme: String,
    pub rate_y: Option<f64>,
    pub rate_z: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub kind: ReportKind,
    pub target: String,
    pub rows: Vec<ReportRow>,
    pub rates: Vec<SchemeRates>,
}

impl ConvergenceReport {
    /// Sort rows by `(scheme, N)` and refit every scheme's rates from them.
    pub fn from_rows(kind: ReportKind, target: String, mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(a.n.cmp(&b.n)));
        let mut rates: Vec<SchemeRates> = Vec::new();
        for row in &rows {
            if rates.last().map_or(true, |r| r.scheme != row.scheme) {
                let scheme_rows: Vec<&ReportRow> = rows.iter().filter(|r| r.scheme == row.scheme).collect();
                rates.push(SchemeRates {
                    scheme: row.scheme.clone(),
                    rate_y: fit_rows(&scheme_rows, |r| (r.err_y, r.floored_y)),
                    rate_z: fit_rows(&scheme_rows, |r| (r.err_z, r.floored_z)),
                });
            }
        }
        Self { kind, target, rows, rates }
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.failure.is_some())
    }

    pub fn rates_for(&self, scheme: &str) -> Option<&SchemeRates> {
        self.rates.iter().find(|r| r.scheme == scheme)
    }

    pub fn rows_for<'a>(&'a self, scheme: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.scheme == scheme)
    }
}

fn fit_rows(rows: &[&ReportRow], pick: impl Fn(&ReportRow) -> (Option<f64>, bool)) -> Option<f64> {
    let (hs, errs): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| match pick(r) {
            (Some(e), false) if e > 0.0 && e.is_finite() => Some((r.h, e)),
            _ => None,
        })
        .unzip();
    if hs.len() < 2 {
        return None;
    }
    fit_convergence_rate(&hs, &errs).ok()
}

/// High-resolution Simpson reference for `∫_a^b t³ e^{-(t-1/2)²} dt`.
pub fn integral_reference(a: f64, b: f64) -> f64 {
    static DEFAULT: OnceLock<f64> = OnceLock::new();
    const PANELS: usize = 1_000_000;
    if (a, b) == (-3.0, 3.0) {
        *DEFAULT.get_or_init(|| simpson(reference_integrand, -3.0, 3.0, PANELS))
    } else {
        simpson(reference_integrand, a, b, PANELS)
    }
}

fn floored(err: Option<f64>) -> bool {
    matches!(err, Some(e) if e < ROUND_OFF_FLOOR)
}

fn integral_cell(scheme: SchemeSpec, n: usize, options: &StudyOptions, reference: f64) -> ReportRow {
    let (a, b) = options.interval;
    let mut row = ReportRow {
        scheme: scheme.label(),
        q: scheme.order(),
        n,
        h: (b - a) / n as f64,
        value_y: None,
        value_z: None,
        err_y: None,
        err_z: None,
        invalid_y: 0,
        invalid_z: 0,
        floored_y: false,
        floored_z: false,
        failure: None,
    };
    let result = PartitionSpec::new(a, b, n).and_then(|part| match scheme {
        SchemeSpec::FixedTheta(theta) => integrate_fixed_theta(reference_integrand, &part, theta),
        SchemeSpec::Adapted(q) => {
            integrate_adapted(reference_integrand, &part, q, &options.integral_limits())
        }
    });
    match result {
        Ok(r) => {
            let err = (r.value - reference).abs();
            row.value_y = Some(r.value);
            row.err_y = Some(err);
            row.invalid_y = r.invalid_count;
            row.floored_y = floored(row.err_y);
        }
        Err(e) => row.failure = Some(e.to_string()),
    }
    row
}

fn bsde_cell(id: &str, scheme: SchemeSpec, n: usize, options: &StudyOptions) -> ReportRow {
    let mut row = ReportRow {
        scheme: scheme.label(),
        q: scheme.order(),
        n,
        h: f64::NAN,
        value_y: None,
        value_z: None,
        err_y: None,
        err_z: None,
        invalid_y: 0,
        invalid_z: 0,
        floored_y: false,
        floored_z: false,
        failure: None,
    };
    let outcome = builtin_problem(id).and_then(|problem| {
        row.h = problem.horizon / n as f64;
        let exact = problem.exact.clone().ok_or(Error::MissingExactSolution("error measurement"))?;
        let out = solve_bsde(&problem, n, &options.bsde_config(scheme.kind()))?;
        Ok((out, (exact.y)(0.0, 0.0), (exact.z)(0.0, 0.0)))
    });
    match outcome {
        Ok((out, y_exact, z_exact)) => {
            row.value_y = Some(out.y0);
            row.value_z = Some(out.z0);
            row.err_y = Some((out.y0 - y_exact).abs());
            row.err_z = Some((out.z0 - z_exact).abs());
            row.invalid_y = out.invalid_y;
            row.invalid_z = out.invalid_z;
            row.floored_y = floored(row.err_y);
            row.floored_z = floored(row.err_z);
        }
        Err(e) => row.failure = Some(e.to_string()),
    }
    row
}

/// Run every `(scheme, N)` cell and fit rates. Failed cells are recorded in their rows.
pub fn run_convergence_study(spec: &StudySpec) -> Result<ConvergenceReport> {
    spec.validate()?;
    let cells: Vec<(SchemeSpec, usize)> =
        spec.schemes.iter().flat_map(|s| spec.sizes.iter().map(move |n| (*s, *n))).collect();
    let (kind, rows) = match &spec.target {
        StudyTarget::Integral => {
            let (a, b) = spec.options.interval;
            let reference = integral_reference(a, b);
            let rows =
                cells.par_iter().map(|&(s, n)| integral_cell(s, n, &spec.options, reference)).collect();
            (ReportKind::Integral, rows)
        }
        StudyTarget::Bsde(id) => {
            let rows = cells.par_iter().map(|&(s, n)| bsde_cell(id, s, n, &spec.options)).collect();
            (ReportKind::Bsde, rows)
        }
    };
    Ok(ConvergenceReport::from_rows(kind, spec.target.to_string(), rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scheme_shorthands() {
        assert_eq!("cn".parse::<SchemeSpec>().unwrap(), SchemeSpec::FixedTheta(0.5));
        assert_eq!("ada3".parse::<SchemeSpec>().unwrap(), SchemeSpec::Adapted(3));
        assert_eq!("theta:0.25".parse::<SchemeSpec>().unwrap(), SchemeSpec::FixedTheta(0.25));
        assert_eq!(SchemeSpec::FixedTheta(0.25).label(), "theta:0.25");
        assert_eq!(SchemeSpec::FixedTheta(0.5).label(), "cn");
        for bad in ["", "ada", "ada0", "theta:", "theta:x", "rk4"] {
            assert!(bad.parse::<SchemeSpec>().is_err(), "{bad}");
        }
        assert_eq!(SchemeSpec::parse_list("cn, ada2,ada4").unwrap().len(), 3);
    }

    #[test]
    fn targets() {
        assert_eq!("integral".parse::<StudyTarget>().unwrap(), StudyTarget::Integral);
        assert_eq!("bsde:example51".parse::<StudyTarget>().unwrap(), StudyTarget::Bsde("example51".into()));
        assert!("bsde:".parse::<StudyTarget>().is_err());
    }

    #[test]
    fn empty_scheme_list_rejected() {
        let spec = StudySpec::new(StudyTarget::Integral, vec![], vec![128, 256]);
        assert!(matches!(run_convergence_study(&spec), Err(Error::InvalidStudy(_))));
    }

    #[test]
    fn sizes_validated() {
        let cn = vec![SchemeSpec::FixedTheta(0.5)];
        for sizes in [vec![8], vec![16, 8], vec![8, 8], vec![0, 8]] {
            let spec = StudySpec::new(StudyTarget::Integral, cn.clone(), sizes);
            assert!(spec.validate().is_err());
        }
        let spec = StudySpec::new(StudyTarget::Bsde("nope".into()), cn, vec![8, 16]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn failed_cells_recorded() {
        // ada4 needs at least 6 subintervals.
        let spec = StudySpec::new(StudyTarget::Integral, vec![SchemeSpec::Adapted(4)], vec![4, 64, 128]);
        let report = run_convergence_study(&spec).unwrap();
        assert_eq!(report.failed_cells().count(), 1);
        assert!(report.rates_for("ada4").unwrap().rate_y.is_some());
    }

    #[test]
    fn rates_need_two_rows() {
        let row = |n: usize, err: Option<f64>| ReportRow {
            scheme: "cn".into(),
            q: 0,
            n,
            h: 1.0 / n as f64,
            value_y: None,
            value_z: None,
            err_y: err,
            err_z: None,
            invalid_y: 0,
            invalid_z: 0,
            floored_y: floored(err),
            floored_z: false,
            failure: None,
        };
        let report = ConvergenceReport::from_rows(
            ReportKind::Bsde,
            "x".into(),
            vec![row(16, Some(1e-13)), row(8, Some(1e-3))],
        );
        assert_eq!(report.rows[0].n, 8);
        assert!(report.rows[1].floored_y);
        assert_eq!(report.rates[0].rate_y, None);
        assert_eq!(report.rates[0].rate_z, None);
    }
}
