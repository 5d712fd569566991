//! Command-line front end for the adapted θ-scheme library.

use std::path::PathBuf;

use adapted_theta::harness::{integral_reference, render_csv, render_json, ReportKind, StudyOptions};
use adapted_theta::{
    builtin_problem, emit_report, integrate_adapted, integrate_fixed_theta, reference_integrand,
    run_convergence_study, solve_bsde, Bootstrap, ConvergenceReport, PartitionSpec, ReportFormat, SchemeSpec,
    StudySpec, StudyTarget, ThetaLimits,
};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate t³ exp(-(t - 1/2)²) over [a, b] and compare with a Simpson reference
    Integrate(IntegrateArgs),
    /// Solve a built-in BSDE and report (y, z) at t = 0, x = 0
    Bsde(BsdeArgs),
    /// Run a convergence study and write a CSV or JSON report
    Study(StudyArgs),
}

#[derive(Args)]
struct IntegrateArgs {
    /// Adapted scheme order
    #[arg(long, default_value_t = 2)]
    q: usize,
    /// Number of subintervals
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    b: f64,
    #[arg(long, default_value_t = 1.0)]
    l_theta: f64,
    #[arg(long, default_value_t = 1e8)]
    l_rho: f64,
    /// Use this constant θ instead of the adapted one
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BootstrapArg {
    /// Crank-Nicolson on a refined time grid
    Refined,
    /// Sample the analytic solution
    Exact,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 8)]
    gh_points: usize,
    #[arg(long, default_value_t = 5)]
    interp_order: usize,
    /// Space domain half width; derived from T and h when omitted
    #[arg(long)]
    half_width: Option<f64>,
    #[arg(long, value_enum, default_value_t = BootstrapArg::Refined)]
    bootstrap: BootstrapArg,
    /// Refined bootstrap substeps per coarse step (default N)
    #[arg(long)]
    substeps: Option<usize>,
    /// Override L_θ (needs --l-rho as well)
    #[arg(long, requires = "l_rho")]
    l_theta: Option<f64>,
    #[arg(long, requires = "l_theta")]
    l_rho: Option<f64>,
}

impl SolverArgs {
    fn options(&self) -> Result<StudyOptions> {
        let limits = match (self.l_theta, self.l_rho) {
            (Some(t), Some(r)) => Some(ThetaLimits::new(t, r)?),
            _ => None,
        };
        let bootstrap = match self.bootstrap {
            BootstrapArg::Refined => Bootstrap::RefinedCn { substeps: self.substeps },
            BootstrapArg::Exact => Bootstrap::ExactSolution,
        };
        Ok(StudyOptions {
            limits,
            gh_points: self.gh_points,
            interp_order: self.interp_order,
            half_width: self.half_width,
            bootstrap,
            ..StudyOptions::default()
        })
    }
}

#[derive(Args)]
struct BsdeArgs {
    #[arg(long, default_value = "example51")]
    problem: String,
    /// cn, ada2, ada3, ada4 or theta:<value>
    #[arg(long, default_value = "cn")]
    scheme: SchemeSpec,
    /// Number of time steps
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Args)]
struct StudyArgs {
    /// integral or bsde:<problem>
    #[arg(long, default_value = "bsde:example51")]
    target: StudyTarget,
    /// Comma-separated schemes
    #[arg(long, value_delimiter = ',', default_value = "cn,ada2,ada3,ada4")]
    schemes: Vec<SchemeSpec>,
    /// Comma-separated partition sizes, strictly increasing
    #[arg(long, value_delimiter = ',', default_value = "8,16,32,64,128")]
    sizes: Vec<usize>,
    /// Report path; the report goes to stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Integration interval for the integral target
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    a: f64,
    #[arg(long, default_value_t = 3.0, allow_hyphen_values = true)]
    b: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

fn integrate(args: &IntegrateArgs) -> Result<()> {
    let part = PartitionSpec::new(args.a, args.b, args.n)?;
    let result = match args.theta {
        Some(theta) => integrate_fixed_theta(reference_integrand, &part, theta)?,
        None => {
            let limits = ThetaLimits::new(args.l_theta, args.l_rho)?;
            integrate_adapted(reference_integrand, &part, args.q, &limits)?
        }
    };
    let reference = integral_reference(args.a, args.b);
    println!("value     {:.15}", result.value);
    println!("reference {reference:.15}");
    println!("error     {:.5e}", (result.value - reference).abs());
    println!("invalid   {}", result.invalid_count);
    Ok(())
}

fn bsde(args: &BsdeArgs) -> Result<()> {
    let problem = builtin_problem(&args.problem)?;
    let config = args.solver.options()?.bsde_config(args.scheme.kind());
    let out = solve_bsde(&problem, args.n, &config)
        .with_context(|| format!("solving {} with {} and N = {}", args.problem, args.scheme, args.n))?;
    println!("y0        {:.15}", out.y0);
    println!("z0        {:.15}", out.z0);
    if let Some(exact) = &problem.exact {
        println!("err_y     {:.5e}", (out.y0 - (exact.y)(0.0, 0.0)).abs());
        println!("err_z     {:.5e}", (out.z0 - (exact.z)(0.0, 0.0)).abs());
    }
    println!("invalid_y {}", out.invalid_y);
    println!("invalid_z {}", out.invalid_z);
    Ok(())
}

fn summarize(report: &ConvergenceReport) {
    for rates in &report.rates {
        let show = |r: Option<f64>| r.map_or_else(|| "-".to_string(), |r| format!("{r:.3}"));
        match report.kind {
            ReportKind::Integral => {
                eprintln!("{:<12} CR {}", rates.scheme, show(rates.rate_y))
            }
            ReportKind::Bsde => {
                eprintln!("{:<12} CR y {}  z {}", rates.scheme, show(rates.rate_y), show(rates.rate_z))
            }
        }
    }
}

fn study(args: &StudyArgs) -> Result<()> {
    let mut options = args.solver.options()?;
    options.interval = (args.a, args.b);
    let spec = StudySpec {
        target: args.target.clone(),
        schemes: args.schemes.clone(),
        sizes: args.sizes.clone(),
        options,
    };
    let report = run_convergence_study(&spec)?;
    let format = match args.format {
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Json => ReportFormat::Json,
    };
    match &args.out {
        Some(path) => emit_report(&report, format, path)?,
        None => match format {
            ReportFormat::Csv => print!("{}", render_csv(&report)),
            ReportFormat::Json => println!("{}", render_json(&report)?),
        },
    }
    summarize(&report);
    let failed: Vec<String> = report
        .failed_cells()
        .map(|r| format!("{} N={}: {}", r.scheme, r.n, r.failure.as_deref().unwrap_or("")))
        .collect();
    if !failed.is_empty() {
        bail!("{} cell(s) failed:\n  {}", failed.len(), failed.join("\n  "));
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Integrate(args) => integrate(args),
        Command::Bsde(args) => bsde(args),
        Command::Study(args) => study(args),
    }
}
