//! `rkcontract`: contraction certificates, empirical checks and figure data
//! for Runge-Kutta methods. Every command writes CSV with a one-line header
//! to stdout and exits non-zero when a requested certification or soundness
//! check fails.

use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use rkcontract::explicit::{linear_grid, rho_sweep_with, write_sweep_csv};
use rkcontract::harness::{
    builtin_system, empirical_contraction_factor, figure_grid, method_bound, reproduce_figures_on, write_rho_curves,
    CurveSummary, EmpiricalConfig, EmpiricalContractionReport, MethodBound, MethodStepper, SystemKind, SystemParams,
};
use rkcontract::implicit::{ImplicitStepper, QKind};
use rkcontract::norms::NormError;
use rkcontract::{
    catalog_lookup, explicit_lipschitz_bound, parse_norm_spec, parse_tableau, AuxiliaryConfig, ButcherTableau,
    ExplicitFormula, NormKind, NormSpec, StageTime,
};

/// Tolerance on `|ρ(h_min) − 1|` for the figure curves.
const FIGURE_SMALL_H_TOL: f64 = 0.05;

#[derive(Parser)]
#[command(name = "rkcontract", version, about = "Contraction factors of Runge-Kutta discretizations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the ρ(h) curves of the explicit catalog methods.
    Figures(FiguresArgs),
    /// Certify a contraction factor from (λ, ℓ) and a step size.
    Certify(CertifyArgs),
    /// Measure the one-step contraction ratio on a built-in system.
    Simulate(SimulateArgs),
    /// Solve the stage equations once and print the stages.
    SolveStages(SolveStagesArgs),
    /// Tabulate ρ(h) over a step-size grid.
    RhoSweep(RhoSweepArgs),
}

#[derive(Args)]
struct FiguresArgs {
    #[arg(long)]
    out: PathBuf,
    /// With `--ell`, writes a single `rho.csv` at this (λ, ℓ) instead of the
    /// two standard figures.
    #[arg(long, requires = "ell")]
    lambda: Option<f64>,
    #[arg(long, requires = "lambda")]
    ell: Option<f64>,
    /// Number of grid points on [0.001, 1].
    #[arg(long, default_value_t = 1000)]
    grid: usize,
}

#[derive(Args)]
struct CertifyArgs {
    /// Catalog name or path to a tableau file.
    #[arg(long)]
    method: String,
    /// `l1`, `l2`, `linf`, optionally weighted (`l1:1,2`, `l2:P.txt`).
    #[arg(long)]
    norm: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    ell: f64,
    #[arg(long)]
    h: f64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    system: SystemKind,
    #[arg(long)]
    norm: String,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    #[arg(long, default_value_t = 2)]
    steps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    sys: SystemOpts,
    /// Stage-solver tolerance for implicit methods.
    #[arg(long, default_value_t = 1e-14)]
    residual_tol: f64,
}

#[derive(Args)]
struct SystemOpts {
    /// Contraction rate of the built-in system.
    #[arg(long = "sys-lambda", default_value_t = 1.0)]
    lambda: f64,
    /// Lipschitz constant of the built-in system.
    #[arg(long = "sys-ell", default_value_t = 2.0)]
    ell: f64,
    /// Dimension of `diag_l1`.
    #[arg(long, default_value_t = 3)]
    dim: usize,
}

impl SystemOpts {
    fn params(&self) -> SystemParams<f64> {
        SystemParams { lambda: self.lambda, ell: self.ell, dim: self.dim }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum QArg {
    Identity,
    KronA,
}

#[derive(Args)]
struct SolveStagesArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    system: SystemKind,
    /// State as comma-separated values.
    #[arg(long, allow_hyphen_values = true)]
    x: String,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    t: f64,
    /// Component norm of the auxiliary dynamics (default `l2`).
    #[arg(long)]
    norm: Option<String>,
    #[arg(long, value_enum, default_value = "identity")]
    q: QArg,
    #[arg(long, default_value_t = 1e-10)]
    residual_tol: f64,
    #[command(flatten)]
    sys: SystemOpts,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormulaArg {
    Printed,
    Corrected,
}

impl From<FormulaArg> for ExplicitFormula {
    fn from(f: FormulaArg) -> Self {
        match f {
            FormulaArg::Printed => ExplicitFormula::Printed,
            FormulaArg::Corrected => ExplicitFormula::Corrected,
        }
    }
}

#[derive(Args)]
struct RhoSweepArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    ell: f64,
    #[arg(long)]
    h_min: f64,
    #[arg(long)]
    h_max: f64,
    #[arg(long, default_value_t = 100)]
    grid: usize,
    /// Norm family for implicit methods.
    #[arg(long, default_value = "l2")]
    norm: String,
    /// Output step of the explicit recursion.
    #[arg(long, value_enum, default_value = "corrected")]
    formula: FormulaArg,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let result = match cli.command {
        Command::Figures(a) => figures(&a, &mut out),
        Command::Certify(a) => certify(&a, &mut out),
        Command::Simulate(a) => simulate(&a, &mut out),
        Command::SolveStages(a) => solve_stages(&a, &mut out),
        Command::RhoSweep(a) => sweep(&a, &mut out),
    };
    let flushed = out.flush();
    match (result, flushed) {
        (Ok(true), Ok(())) => ExitCode::SUCCESS,
        (Ok(false), Ok(())) => ExitCode::FAILURE,
        (Err(e), _) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        (_, Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

/// Catalog name, or a tableau file when no catalog entry matches.
fn load_method(name: &str) -> Result<ButcherTableau> {
    match catalog_lookup(name) {
        Ok(t) => Ok(t),
        Err(catalog_err) => {
            let path = Path::new(name);
            if !path.is_file() {
                return Err(catalog_err.into());
            }
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(name).to_string();
            Ok(parse_tableau(&text)?.named(stem))
        }
    }
}

/// Parses a norm whose dimension is implied by the spec itself, falling back
/// to `n = 1` for unweighted families.
fn parse_norm_any(spec: &str) -> Result<NormSpec<f64>> {
    match parse_norm_spec::<f64>(spec, 1) {
        Err(NormError::Dimension { found, .. }) => Ok(parse_norm_spec(spec, found)?),
        other => Ok(other?),
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|r| format!("{r:.12}")).unwrap_or_default()
}

fn write_summaries(out: &mut impl Write, summaries: &[CurveSummary]) -> Result<bool> {
    writeln!(out, "file,method,rho_at_min_h,min_rho,argmin_h,pass")?;
    let mut all = true;
    for s in summaries {
        let pass = s.passes(FIGURE_SMALL_H_TOL);
        all &= pass;
        writeln!(
            out,
            "{},{},{:.12},{:.12},{},{}",
            csv_quote(&s.file.display().to_string()),
            s.method,
            s.rho_at_min_h,
            s.min_rho,
            s.argmin_h,
            pass
        )?;
    }
    Ok(all)
}

fn figures(a: &FiguresArgs, out: &mut impl Write) -> Result<bool> {
    if a.grid < 2 {
        bail!("--grid must be at least 2");
    }
    let grid = figure_grid(a.grid);
    let summaries = match (a.lambda, a.ell) {
        (Some(lam), Some(ell)) => {
            std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            write_rho_curves(&a.out.join("rho.csv"), lam, ell, &grid)?
        }
        _ => reproduce_figures_on(&a.out, &grid)?,
    };
    write_summaries(out, &summaries)
}

fn certify(a: &CertifyArgs, out: &mut impl Write) -> Result<bool> {
    let tableau = load_method(&a.method)?;
    let norm = parse_norm_any(&a.norm)?;
    let bound = method_bound(&tableau, norm.kind(), a.h, a.lambda, a.ell, None)?;
    // the published explicit output step, reported alongside for reference
    let printed = if tableau.is_explicit() {
        let euler = rkcontract::harness::euler_bound_for(norm.kind());
        Some(explicit_lipschitz_bound(&tableau, a.h, a.lambda, a.ell, euler)?.rho)
    } else {
        None
    };
    let (well_defined, margin, detail) = match &bound {
        MethodBound::Explicit(_) => ("explicit_tableau".to_string(), f64::INFINITY, String::new()),
        MethodBound::Implicit(c) => {
            let failed: Vec<String> = c.failed().iter().map(ToString::to_string).collect();
            let mut detail = failed.iter().map(|f| format!("failed {f}")).collect::<Vec<_>>();
            detail.extend(c.notes.iter().cloned());
            (c.well_defined.criterion.to_string(), c.well_defined.margin, detail.join("; "))
        }
    };
    writeln!(out, "method,norm,h,lambda,ell,theorem,rho,certified,well_defined,margin,printed_rho,detail")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        tableau.label(),
        csv_quote(&a.norm),
        a.h,
        a.lambda,
        a.ell,
        bound.theorem(),
        fmt_opt(bound.rho()),
        bound.certified(),
        well_defined,
        margin,
        fmt_opt(printed),
        csv_quote(&detail)
    )?;
    Ok(bound.certified())
}

fn simulate(a: &SimulateArgs, out: &mut impl Write) -> Result<bool> {
    let tableau = load_method(&a.method)?;
    let sys = builtin_system::<f64>(a.system, a.sys.params())?;
    let norm = parse_norm_spec::<f64>(&a.norm, sys.dim())?;
    let cert = sys.certificate(&norm)?;
    let bound = if cert.rate() > 0.0 {
        Some(method_bound(&tableau, norm.kind(), a.h, cert.rate(), cert.lip, Some(&sys.component_lips()))?)
    } else {
        None
    };
    let certified = bound.as_ref().is_some_and(MethodBound::certified);

    let cfg = AuxiliaryConfig::default()
        .with_norm(norm.clone())
        .with_residual_tol(a.residual_tol);
    let stepper = MethodStepper::new(&tableau, AuxiliaryConfig { stage_time: StageTime::Literal, ..cfg })?;
    let mut ecfg = EmpiricalConfig::new(a.h, a.pairs, a.steps, a.seed);
    if certified {
        ecfg = ecfg.with_bound(bound.as_ref().and_then(MethodBound::rho).expect("certified bound has rho"));
    }
    let report = empirical_contraction_factor(&stepper, &sys, &norm, &ecfg)?;
    writeln!(out, "{},theorem", EmpiricalContractionReport::<f64>::CSV_HEADER)?;
    let theorem = bound.map(|b| b.theorem().to_string()).unwrap_or_default();
    writeln!(out, "{},{theorem}", report.csv_row())?;
    if !certified {
        eprintln!("no certified bound at h = {}; ratios are exploratory", a.h);
    }
    Ok(certified && report.sound)
}

fn parse_state(text: &str) -> Result<DVector<f64>> {
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad state entry `{v}`")))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(values))
}

fn solve_stages(a: &SolveStagesArgs, out: &mut impl Write) -> Result<bool> {
    let tableau = load_method(&a.method)?;
    let sys = builtin_system::<f64>(a.system, a.sys.params())?;
    let x = parse_state(&a.x)?;
    if x.len() != sys.dim() {
        bail!("state has {} entries, system `{}` has dimension {}", x.len(), a.system, sys.dim());
    }
    let norm = match &a.norm {
        Some(spec) => parse_norm_spec::<f64>(spec, sys.dim())?,
        None => NormSpec::unweighted(NormKind::L2, sys.dim()),
    };
    let f = sys.field_for(&norm)?;
    let q = match a.q {
        QArg::Identity => QKind::Identity,
        QArg::KronA => QKind::KronA,
    };
    let cfg = AuxiliaryConfig::default()
        .with_norm(norm)
        .with_q(q)
        .with_residual_tol(a.residual_tol);
    let stepper = ImplicitStepper::new(&tableau, cfg)?;
    let res = stepper.solve_stages(&f, a.t, &x, a.h)?;
    let next = stepper.update(&f, a.t, &x, a.h, &res.y_star)?;

    let n = sys.dim();
    let comps: Vec<String> = (1..=n).map(|k| format!("y{k}")).collect();
    writeln!(out, "row,{},residual,iterations,converged,criterion,margin", comps.join(","))?;
    let tail = format!(
        "{:e},{},{},{},{}",
        res.residual, res.iterations, res.converged, res.report.criterion, res.report.margin
    );
    for i in 0..tableau.stages() {
        let block: Vec<String> = (0..n).map(|k| format!("{:.15e}", res.y_star[i * n + k])).collect();
        writeln!(out, "stage{},{},{tail}", i + 1, block.join(","))?;
    }
    let next: Vec<String> = next.iter().map(|v| format!("{v:.15e}")).collect();
    writeln!(out, "next,{},{tail}", next.join(","))?;
    Ok(res.converged && res.report.certified())
}

fn sweep(a: &RhoSweepArgs, out: &mut impl Write) -> Result<bool> {
    if a.grid == 0 {
        bail!("--grid must be positive");
    }
    if !(a.h_min > 0.0 && a.h_max >= a.h_min) {
        bail!("need 0 < h-min <= h-max");
    }
    let tableau = load_method(&a.method)?;
    let grid = linear_grid(a.h_min, a.h_max, a.grid);
    if tableau.is_explicit() {
        let euler = rkcontract::harness::euler_bound_for(parse_norm_any(&a.norm)?.kind());
        let rows = rho_sweep_with(&tableau, a.lambda, a.ell, euler, a.formula.into(), &grid)?;
        write_sweep_csv(&rows, &mut *out)?;
        return Ok(true);
    }
    let kind = parse_norm_any(&a.norm)?.kind();
    writeln!(out, "method,h,rho,certified")?;
    for &h in &grid {
        let bound = method_bound(&tableau, kind, h, a.lambda, a.ell, None)?;
        writeln!(out, "{},{},{},{}", tableau.label(), h, fmt_opt(bound.rho()), bound.certified())?;
    }
    Ok(true)
}
