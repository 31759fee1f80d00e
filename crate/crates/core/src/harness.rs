//! Built-in contracting test systems, empirical one-step contraction
//! measurement, the soundness matrix and figure data.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::contraction::{rho_l1, rho_l2, rho_linf, ContractionCertificate, ContractionError, Theorem};
use crate::explicit::{
    default_figure_grid, explicit_lipschitz_bound_with, linear_grid, rho_sweep, EulerBound, ExplicitError, ExplicitFormula, ExplicitStepper,
};
use crate::fields::{Certificate, FieldError, VectorField};
use crate::implicit::{AuxiliaryConfig, ImplicitError, ImplicitStepper};
use crate::norms::{NormError, NormKind, NormSpec};
use crate::scalar::Real;
use crate::stages::StageTime;
use crate::tableau::{ButcherTableau, CatalogMethod, TableauError, EXPLICIT_FIGURE_METHODS};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown system `{0}` (expected linear_rot, scalar_sat or diag_l1)")]
    UnknownSystem(String),
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),
    #[error("norm has dimension {found}, system has dimension {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("pairs and steps must be positive")]
    EmptyExperiment,
    #[error(transparent)]
    Explicit(#[from] ExplicitError),
    #[error(transparent)]
    Implicit(#[from] ImplicitError),
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Contraction(#[from] ContractionError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    /// `B = [[−λ, ω], [−ω, −λ]]`, `ω = √(ℓ² − λ²)`.
    LinearRot,
    /// `f(x) = −λx − (ℓ − λ) tanh x` on `ℝ`.
    ScalarSat,
    /// `f(x) = −λx` on `ℝⁿ`.
    DiagL1,
}

impl SystemKind {
    pub const ALL: [SystemKind; 3] = [SystemKind::LinearRot, SystemKind::ScalarSat, SystemKind::DiagL1];

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::LinearRot => "linear_rot",
            SystemKind::ScalarSat => "scalar_sat",
            SystemKind::DiagL1 => "diag_l1",
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SystemKind {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SystemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HarnessError::UnknownSystem(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<T> {
    pub lambda: T,
    pub ell: T,
    /// Dimension of `diag_l1`; the other systems have fixed dimension.
    pub dim: usize,
}

impl<T: Real> Default for SystemParams<T> {
    fn default() -> Self {
        Self { lambda: T::one(), ell: T::lit(2.0), dim: 3 }
    }
}

/// A built-in system with certificates that are exact (linear systems) or
/// follow from the derivative range `f′ ∈ [−ℓ, −λ)` (`scalar_sat`).
#[derive(Debug, Clone)]
pub struct TestSystemSpec<T: Real> {
    pub kind: SystemKind,
    pub params: SystemParams<T>,
    pub field: VectorField<T>,
    /// System matrix for linear systems.
    pub matrix: Option<DMatrix<T>>,
}

pub fn builtin_system<T: Real>(kind: SystemKind, params: SystemParams<T>) -> Result<TestSystemSpec<T>, HarnessError> {
    let SystemParams { lambda, ell, dim } = params;
    if !(lambda.is_finite() && ell.is_finite() && lambda > T::zero()) {
        return Err(HarnessError::InvalidParams("lambda must be finite and positive".into()));
    }
    if ell < lambda {
        return Err(HarnessError::InvalidParams(format!(
            "ell = {} < lambda = {}",
            ell.to_f64_lossy(),
            lambda.to_f64_lossy()
        )));
    }
    let (matrix, field) = match kind {
        SystemKind::LinearRot => {
            let omega = (ell * ell - lambda * lambda).sqrt();
            let b = DMatrix::from_row_slice(2, 2, &[-lambda, omega, -omega, -lambda]);
            let bc = b.clone();
            (Some(b), VectorField::new(kind.name(), 2, move |_, x: &DVector<T>| &bc * x))
        }
        SystemKind::ScalarSat => {
            let gain = ell - lambda;
            (None, VectorField::new(kind.name(), 1, move |_, x: &DVector<T>| x.map(|v| -lambda * v - gain * v.tanh())))
        }
        SystemKind::DiagL1 => {
            if dim == 0 {
                return Err(HarnessError::InvalidParams("dimension must be positive".into()));
            }
            let b = DMatrix::from_diagonal_element(dim, dim, -lambda);
            (Some(b), VectorField::new(kind.name(), dim, move |_, x: &DVector<T>| x * -lambda))
        }
    };
    let mut spec = TestSystemSpec { kind, params, field, matrix };
    let n = spec.dim();
    let lips = spec.component_lips();
    let mut field = spec.field.clone().with_component_lips(lips)?;
    for kind in [NormKind::L2, NormKind::L1, NormKind::Linf] {
        let norm = NormSpec::unweighted(kind, n);
        let cert = spec.certificate(&norm)?;
        field = field.with_certificate(norm, cert)?;
    }
    spec.field = field;
    Ok(spec)
}

impl<T: Real> TestSystemSpec<T> {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            SystemKind::LinearRot => 2,
            SystemKind::ScalarSat => 1,
            SystemKind::DiagL1 => self.params.dim,
        }
    }

    /// `(Lip, osLip)` in `norm`.
    pub fn certificate(&self, norm: &NormSpec<T>) -> Result<Certificate<T>, HarnessError> {
        if norm.dim() != self.dim() {
            return Err(HarnessError::Dimension { expected: self.dim(), found: norm.dim() });
        }
        let cert = match &self.matrix {
            Some(b) => {
                let lip = norm.induced_matrix_norm(b)?;
                let oslip = norm.log_norm(b)?;
                // rounding can push μ a hair above ‖B‖ when they coincide
                Certificate::new(lip.max(oslip), oslip)?
            }
            // every norm on ℝ is a multiple of |·|
            None => Certificate::new(self.params.ell, -self.params.lambda)?,
        };
        Ok(cert)
    }

    /// `ĥℓᵢ`, the Lipschitz constant of `fᵢ` in `xᵢ`.
    pub fn component_lips(&self) -> DVector<T> {
        match &self.matrix {
            Some(b) => b.diagonal().map(|d| d.abs()),
            None => DVector::from_element(1, self.params.ell),
        }
    }

    /// The field with the certificate for `norm` attached.
    pub fn field_for(&self, norm: &NormSpec<T>) -> Result<VectorField<T>, HarnessError> {
        let cert = self.certificate(norm)?;
        Ok(self.field.clone().with_certificate(norm.clone(), cert)?)
    }
}

/// A one-step map `x ↦ g(t, x)`.
pub trait OneStepMap<T: Real>: Send + Sync {
    fn label(&self) -> String;
    fn step(&self, f: &VectorField<T>, t: T, x: &DVector<T>, h: T) -> Result<DVector<T>, HarnessError>;
}

/// Catalog or custom tableau with the matching stepper.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum MethodStepper<T: Real> {
    Explicit { label: String, stepper: ExplicitStepper<T> },
    Implicit { label: String, stepper: ImplicitStepper<T> },
}

impl<T: Real> MethodStepper<T> {
    /// Explicit tableaus are stepped stage by stage; the rest go through
    /// the auxiliary stage solver configured by `cfg`.
    pub fn new(tableau: &ButcherTableau, cfg: AuxiliaryConfig<T>) -> Result<Self, HarnessError> {
        let label = tableau.label().to_string();
        Ok(if tableau.is_explicit() {
            MethodStepper::Explicit { label, stepper: ExplicitStepper::new(tableau, cfg.stage_time)? }
        } else {
            MethodStepper::Implicit { label, stepper: ImplicitStepper::new(tableau, cfg)? }
        })
    }
}

impl<T: Real> OneStepMap<T> for MethodStepper<T> {
    fn label(&self) -> String {
        match self {
            MethodStepper::Explicit { label, .. } | MethodStepper::Implicit { label, .. } => label.clone(),
        }
    }

    fn step(&self, f: &VectorField<T>, t: T, x: &DVector<T>, h: T) -> Result<DVector<T>, HarnessError> {
        Ok(match self {
            MethodStepper::Explicit { stepper, .. } => stepper.step(f, t, x, h)?,
            MethodStepper::Implicit { stepper, .. } => stepper.step(f, t, x, h)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalConfig<T> {
    pub h: T,
    pub pairs: usize,
    pub steps: usize,
    pub seed: u64,
    /// `None` runs the experiment without a bound to compare against.
    pub certified_rho: Option<T>,
    pub tol: f64,
    /// Initial points are uniform in `[-half_width, half_width]ⁿ`.
    pub half_width: f64,
    /// Initial separations are log-uniform in this range. A pair is no
    /// longer followed once its separation drops below the lower end.
    pub separation: (f64, f64),
}

impl<T: Real> EmpiricalConfig<T> {
    pub fn new(h: T, pairs: usize, steps: usize, seed: u64) -> Self {
        Self { h, pairs, steps, seed, certified_rho: None, tol: 1e-9, half_width: 2.0, separation: (1e-4, 1.0) }
    }

    pub fn with_bound(mut self, rho: T) -> Self {
        self.certified_rho = Some(rho);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalContractionReport<T> {
    pub method: String,
    pub system: String,
    pub norm: String,
    pub h: T,
    pub pairs: usize,
    pub steps: usize,
    /// Number of one-step ratios measured.
    pub samples: usize,
    pub max_ratio: T,
    pub certified_rho: Option<T>,
    /// `max_ratio ≤ certified_rho + tol`; vacuously true without a bound.
    pub sound: bool,
}

impl<T: Real> EmpiricalContractionReport<T> {
    pub const CSV_HEADER: &'static str = "method,system,norm,h,pairs,steps,samples,max_ratio,certified_rho,sound";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.12},{},{}",
            self.method,
            self.system,
            csv_field(&self.norm),
            self.h.to_f64_lossy(),
            self.pairs,
            self.steps,
            self.samples,
            self.max_ratio.to_f64_lossy(),
            self.certified_rho.map(|r| format!("{:.12}", r.to_f64_lossy())).unwrap_or_default(),
            self.sound
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Largest per-step ratio `‖g(xₖ) − g(x′ₖ)‖ / ‖xₖ − x′ₖ‖` over random
/// trajectory pairs of `stepper` on `sys`, measured in `norm`.
pub fn empirical_contraction_factor<T: Real>(
    stepper: &dyn OneStepMap<T>,
    sys: &TestSystemSpec<T>,
    norm: &NormSpec<T>,
    cfg: &EmpiricalConfig<T>,
) -> Result<EmpiricalContractionReport<T>, HarnessError> {
    if cfg.pairs == 0 || cfg.steps == 0 {
        return Err(HarnessError::EmptyExperiment);
    }
    let n = sys.dim();
    if norm.dim() != n {
        return Err(HarnessError::Dimension { expected: n, found: norm.dim() });
    }
    let field = sys.field_for(norm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (sep_lo, sep_hi) = cfg.separation;
    let floor = T::lit(sep_lo);
    let mut max_ratio = T::zero();
    let mut samples = 0;
    let t0 = T::zero();

    for _ in 0..cfg.pairs {
        let (mut x, mut y) = loop {
            let x = DVector::from_fn(n, |_, _| T::lit(rng.random_range(-cfg.half_width..=cfg.half_width)));
            let u = DVector::from_fn(n, |_, _| T::lit(rng.random_range(-1.0..=1.0)));
            let un = norm.vec_norm(&u)?;
            if !(un > T::lit(1e-6)) {
                continue;
            }
            let sep = T::lit(rng.random_range(sep_lo.ln()..=sep_hi.ln()).exp());
            let y = &x + u * (sep / un);
            // coincident after rounding: resample
            if norm.vec_norm(&(&y - &x))? > T::zero() {
                break (x, y);
            }
        };
        let mut t = t0;
        for _ in 0..cfg.steps {
            let before = norm.vec_norm(&(&x - &y))?;
            if before < floor {
                break;
            }
            let gx = stepper.step(&field, t, &x, cfg.h)?;
            let gy = stepper.step(&field, t, &y, cfg.h)?;
            let after = norm.vec_norm(&(&gx - &gy))?;
            let ratio = after / before;
            max_ratio = max_ratio.max(ratio);
            samples += 1;
            x = gx;
            y = gy;
            t += cfg.h;
        }
    }
    let sound = cfg.certified_rho.is_none_or(|rho| max_ratio <= rho + T::lit(cfg.tol));
    Ok(EmpiricalContractionReport {
        method: stepper.label(),
        system: sys.name().to_string(),
        norm: norm.to_string(),
        h: cfg.h,
        pairs: cfg.pairs,
        steps: cfg.steps,
        samples,
        max_ratio,
        certified_rho: cfg.certified_rho,
        sound,
    })
}

/// Which bound a soundness cell checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellTheorem {
    /// The explicit-method recursion with the given forward Euler factor
    /// and output step.
    Explicit(EulerBound, ExplicitFormula),
    Implicit(Theorem),
}

impl fmt::Display for CellTheorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellTheorem::Explicit(e, formula) => write!(f, "thm1_{e}_{formula}"),
            CellTheorem::Implicit(t) => write!(f, "{t}"),
        }
    }
}

/// The bound a method gets in a norm family, as used by the CLI and the
/// soundness matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum MethodBound<T: Real> {
    Explicit(crate::explicit::ExplicitRhoBound<T>),
    Implicit(ContractionCertificate<T>),
}

impl<T: Real> MethodBound<T> {
    pub fn rho(&self) -> Option<T> {
        match self {
            MethodBound::Explicit(b) => Some(b.rho),
            MethodBound::Implicit(c) => c.rho,
        }
    }

    pub fn certified(&self) -> bool {
        match self {
            MethodBound::Explicit(b) => b.certified(),
            MethodBound::Implicit(c) => c.certified,
        }
    }

    pub fn theorem(&self) -> CellTheorem {
        match self {
            MethodBound::Explicit(b) => CellTheorem::Explicit(b.euler_bound, b.formula),
            MethodBound::Implicit(c) => CellTheorem::Implicit(c.theorem),
        }
    }
}

/// Forward Euler factor suited to a norm family: the inner-product bound
/// for ℓ₂ and the norm-independent one otherwise.
pub fn euler_bound_for(kind: NormKind) -> EulerBound {
    match kind {
        NormKind::L2 => EulerBound::L2,
        NormKind::L1 | NormKind::Linf => EulerBound::General,
    }
}

/// Bound from the norm-family theorem (`rho_l2`, `rho_l1`, `rho_linf`).
pub fn family_bound<T: Real>(
    tableau: &ButcherTableau,
    kind: NormKind,
    h: T,
    lam: T,
    ell: T,
    comp_lips: Option<&DVector<T>>,
) -> Result<ContractionCertificate<T>, ContractionError> {
    match kind {
        NormKind::L2 => rho_l2(tableau, h, lam, ell),
        NormKind::L1 => rho_l1(tableau, h, lam, ell, comp_lips),
        NormKind::Linf => rho_linf(tableau, h, lam, ell, comp_lips),
    }
}

/// The primary bound for a method: the corrected explicit recursion for
/// explicit tableaus, the norm-family theorem otherwise.
pub fn method_bound<T: Real>(
    tableau: &ButcherTableau,
    kind: NormKind,
    h: T,
    lam: T,
    ell: T,
    comp_lips: Option<&DVector<T>>,
) -> Result<MethodBound<T>, HarnessError> {
    Ok(if tableau.is_explicit() {
        MethodBound::Explicit(explicit_lipschitz_bound_with(
            tableau,
            h,
            lam,
            ell,
            euler_bound_for(kind),
            ExplicitFormula::Corrected,
        )?)
    } else {
        MethodBound::Implicit(family_bound(tableau, kind, h, lam, ell, comp_lips)?)
    })
}

#[derive(Debug, Clone)]
pub struct SoundnessConfig {
    pub methods: Vec<CatalogMethod>,
    pub systems: Vec<SystemKind>,
    pub norm_families: Vec<NormKind>,
    /// Output steps of the explicit recursion that get their own cells.
    pub explicit_formulas: Vec<ExplicitFormula>,
    pub hs: Vec<f64>,
    pub lambda: f64,
    pub ell: f64,
    pub diag_dim: usize,
    pub pairs: usize,
    pub steps: usize,
    pub seed: u64,
    pub tol: f64,
    /// Stage-solver tolerance for implicit cells.
    pub residual_tol: f64,
}

impl Default for SoundnessConfig {
    fn default() -> Self {
        Self {
            methods: CatalogMethod::ALL.to_vec(),
            systems: SystemKind::ALL.to_vec(),
            norm_families: vec![NormKind::L2, NormKind::L1, NormKind::Linf],
            explicit_formulas: vec![ExplicitFormula::Corrected],
            hs: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            lambda: 1.0,
            ell: 2.0,
            diag_dim: 3,
            pairs: 1000,
            steps: 2,
            seed: 2024,
            tol: 1e-9,
            residual_tol: 1e-14,
        }
    }
}

/// Weighted norm of a family used in the matrix: `ηᵢ = 1 + i/2` for ℓ₁ and
/// ℓ∞, `P = diag(η)` for ℓ₂.
pub fn matrix_norm(kind: NormKind, n: usize) -> NormSpec<f64> {
    let eta = DVector::from_fn(n, |i, _| 1.0 + i as f64 / 2.0);
    match kind {
        NormKind::L1 => NormSpec::l1(eta),
        NormKind::Linf => NormSpec::linf(eta),
        NormKind::L2 => NormSpec::l2_diag(eta),
    }
    .expect("positive weights")
}

#[derive(Debug, Clone)]
pub struct SoundnessCell {
    pub index: usize,
    pub method: CatalogMethod,
    pub system: SystemKind,
    pub norm: NormKind,
    pub h: f64,
    pub theorem: CellTheorem,
    pub certified_rho: Option<f64>,
    pub certified: bool,
    /// Present only for certified cells.
    pub report: Option<EmpiricalContractionReport<f64>>,
}

impl SoundnessCell {
    pub const CSV_HEADER: &'static str = "method,system,norm,h,theorem,certified,certified_rho,max_ratio,samples,sound";

    /// Uncertified cells are not checked and count as sound.
    pub fn sound(&self) -> bool {
        self.report.as_ref().is_none_or(|r| r.sound)
    }

    pub fn csv_row(&self) -> String {
        let (max_ratio, samples) = match &self.report {
            Some(r) => (format!("{:.12}", r.max_ratio), r.samples.to_string()),
            None => (String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.method,
            self.system,
            self.norm,
            self.h,
            self.theorem,
            self.certified,
            self.certified_rho.map(|r| format!("{r:.12}")).unwrap_or_default(),
            max_ratio,
            samples,
            self.sound()
        )
    }
}

struct CellPlan {
    method: CatalogMethod,
    system: SystemKind,
    norm: NormKind,
    h: f64,
    theorem: CellTheorem,
}

/// Runs every (method, system, norm family, h, applicable theorem) cell.
/// Explicit methods are checked against the explicit recursion and the
/// norm-family theorem; implicit methods against the norm-family theorem.
/// Cells run in parallel, each with its own generator stream.
pub fn soundness_matrix(cfg: &SoundnessConfig) -> Result<Vec<SoundnessCell>, HarnessError> {
    let mut plans = Vec::new();
    for &method in &cfg.methods {
        let explicit = method.tableau().is_explicit();
        for &system in &cfg.systems {
            for &norm in &cfg.norm_families {
                for &h in &cfg.hs {
                    if explicit {
                        for &formula in &cfg.explicit_formulas {
                            let theorem = CellTheorem::Explicit(euler_bound_for(norm), formula);
                            plans.push(CellPlan { method, system, norm, h, theorem });
                        }
                    }
                    plans.push(CellPlan { method, system, norm, h, theorem: CellTheorem::Implicit(Theorem::for_norm(norm)) });
                }
            }
        }
    }
    plans.into_par_iter().enumerate().map(|(index, plan)| run_cell(cfg, index, plan)).collect()
}

fn run_cell(cfg: &SoundnessConfig, index: usize, plan: CellPlan) -> Result<SoundnessCell, HarnessError> {
    let params = SystemParams { lambda: cfg.lambda, ell: cfg.ell, dim: cfg.diag_dim };
    let sys = builtin_system::<f64>(plan.system, params)?;
    let norm = matrix_norm(plan.norm, sys.dim());
    let cert = sys.certificate(&norm)?;
    let tableau = plan.method.tableau();
    let lam = cert.rate();
    let ell = cert.lip;
    let lips = sys.component_lips();

    let bound: Option<(f64, bool)> = if lam > 0.0 {
        match plan.theorem {
            CellTheorem::Explicit(euler, formula) => {
                let b = explicit_lipschitz_bound_with(&tableau, plan.h, lam, ell, euler, formula)?;
                Some((b.rho, b.certified()))
            }
            CellTheorem::Implicit(_) => {
                let c = family_bound(&tableau, plan.norm, plan.h, lam, ell, Some(&lips))?;
                c.rho.map(|r| (r, c.certified))
            }
        }
    } else {
        None
    };
    let certified = bound.is_some_and(|(_, c)| c);

    let report = if certified {
        let rho = bound.expect("certified").0;
        let aux = AuxiliaryConfig::default()
            .with_norm(norm.clone())
            .with_residual_tol(cfg.residual_tol);
        let stepper = MethodStepper::new(&tableau, AuxiliaryConfig { stage_time: StageTime::Literal, ..aux })?;
        let mut ecfg = EmpiricalConfig::new(plan.h, cfg.pairs, cfg.steps, cell_seed(cfg.seed, index)).with_bound(rho);
        ecfg.tol = cfg.tol;
        Some(empirical_contraction_factor(&stepper, &sys, &norm, &ecfg)?)
    } else {
        None
    };

    Ok(SoundnessCell {
        index,
        method: plan.method,
        system: plan.system,
        norm: plan.norm,
        h: plan.h,
        theorem: plan.theorem,
        certified_rho: bound.map(|b| b.0),
        certified,
        report,
    })
}

/// Seed of cell `index` derived from the master seed.
pub fn cell_seed(master: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index as u64);
    rng.random()
}

/// Per-method summary of a `ρ(h)` curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSummary {
    pub file: PathBuf,
    pub method: String,
    pub rho_at_min_h: f64,
    pub min_rho: f64,
    pub argmin_h: f64,
}

impl CurveSummary {
    /// `ρ < 1` somewhere on the grid and `ρ → 1` at the smallest step.
    pub fn passes(&self, small_h_tol: f64) -> bool {
        self.min_rho < 1.0 && (self.rho_at_min_h - 1.0).abs() <= small_h_tol
    }
}

/// Writes `method,h,rho` for the five explicit catalog methods at
/// `(λ, ℓ)` over `grid`, using the inner-product forward Euler factor.
pub fn write_rho_curves(path: &Path, lam: f64, ell: f64, grid: &[f64]) -> Result<Vec<CurveSummary>, HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "method,h,rho")?;
    let mut summaries = Vec::new();
    for m in EXPLICIT_FIGURE_METHODS {
        let rows = rho_sweep(&m.tableau(), lam, ell, EulerBound::L2, grid)?;
        let mut min_rho = f64::INFINITY;
        let mut argmin_h = f64::NAN;
        for row in &rows {
            let rho = row.bound.as_ref().map_err(Clone::clone)?.rho;
            writeln!(out, "{},{},{:.12}", m.name(), row.h, rho)?;
            if rho < min_rho {
                min_rho = rho;
                argmin_h = row.h;
            }
        }
        let rho_at_min_h = rows
            .iter()
            .min_by(|a, b| a.h.total_cmp(&b.h))
            .and_then(|r| r.rho())
            .unwrap_or(f64::NAN);
        summaries.push(CurveSummary { file: path.to_path_buf(), method: m.name().to_string(), rho_at_min_h, min_rho, argmin_h });
    }
    out.flush()?;
    Ok(summaries)
}

/// Writes `fig1.csv` (`λ = 1, ℓ = 2`) and `fig2.csv` (`λ = 2, ℓ = 2`) on
/// the default grid `h = 0.001, 0.002, …, 1`.
pub fn reproduce_figures(out_dir: &Path) -> Result<Vec<CurveSummary>, HarnessError> {
    reproduce_figures_on(out_dir, &default_figure_grid())
}

pub fn reproduce_figures_on(out_dir: &Path, grid: &[f64]) -> Result<Vec<CurveSummary>, HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    let mut all = write_rho_curves(&out_dir.join("fig1.csv"), 1.0, 2.0, grid)?;
    all.extend(write_rho_curves(&out_dir.join("fig2.csv"), 2.0, 2.0, grid)?);
    Ok(all)
}

/// `count` points from `0.001` to `1`, the figure grid at another density.
pub fn figure_grid(count: usize) -> Vec<f64> {
    if count == 1000 {
        default_figure_grid()
    } else {
        linear_grid(1e-3, 1.0, count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::catalog_lookup;
    use approx::assert_abs_diff_eq;

    fn params(lambda: f64, ell: f64, dim: usize) -> SystemParams<f64> {
        SystemParams { lambda, ell, dim }
    }

    #[test]
    fn linear_rot_certificates() {
        let sys = builtin_system(SystemKind::LinearRot, params(1.0, 2.0, 0)).unwrap();
        let c = sys.certificate(&NormSpec::l2_unweighted(2)).unwrap();
        assert_abs_diff_eq!(c.lip, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.oslip, -1.0, epsilon = 1e-12);
        let b = sys.matrix.as_ref().unwrap();
        assert_abs_diff_eq!(b[(0, 1)], 3f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn diag_certificates_in_every_norm() {
        let sys = builtin_system(SystemKind::DiagL1, params(1.0, 1.0, 3)).unwrap();
        for kind in [NormKind::L1, NormKind::L2, NormKind::Linf] {
            let c = sys.certificate(&matrix_norm(kind, 3)).unwrap();
            assert_abs_diff_eq!(c.lip, 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(c.oslip, -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn scalar_sat_derivative_range() {
        let sys = builtin_system(SystemKind::ScalarSat, params(1.0, 2.0, 0)).unwrap();
        let eps = 1e-6;
        for k in -40..=40 {
            let x = k as f64 * 0.25;
            let d = (sys.field.eval(0.0, &DVector::from_element(1, x + eps))[0]
                - sys.field.eval(0.0, &DVector::from_element(1, x - eps))[0])
                / (2.0 * eps);
            assert!((-2.0 - 1e-8..-1.0).contains(&d), "f'({x}) = {d}");
        }
    }

    #[test]
    fn invalid_params() {
        assert!(builtin_system::<f64>(SystemKind::LinearRot, params(2.0, 1.0, 0)).is_err());
        assert!("bogus".parse::<SystemKind>().is_err());
        assert_eq!("diag_l1".parse::<SystemKind>().unwrap(), SystemKind::DiagL1);
    }

    #[test]
    fn forward_euler_diag_ratio_exact() {
        let sys = builtin_system(SystemKind::DiagL1, params(1.0, 1.0, 3)).unwrap();
        let stepper = MethodStepper::new(&catalog_lookup("forward_euler").unwrap(), AuxiliaryConfig::default()).unwrap();
        let cfg = EmpiricalConfig::new(0.5, 200, 3, 7);
        let r = empirical_contraction_factor(&stepper, &sys, &NormSpec::l1_unweighted(3), &cfg).unwrap();
        assert_abs_diff_eq!(r.max_ratio, 0.5, epsilon = 1e-12);
        assert!(r.sound);
    }

    #[test]
    fn implicit_euler_diag_ratio_matches_rho1() {
        let sys = builtin_system(SystemKind::DiagL1, params(1.0, 1.0, 2)).unwrap();
        let norm = NormSpec::l1_unweighted(2);
        let aux = AuxiliaryConfig::default().with_norm(norm.clone()).with_residual_tol(1e-14);
        let stepper = MethodStepper::new(&catalog_lookup("implicit_euler").unwrap(), aux).unwrap();
        let cfg = EmpiricalConfig::new(1.0, 100, 1, 3).with_bound(0.5);
        let r = empirical_contraction_factor(&stepper, &sys, &norm, &cfg).unwrap();
        assert_abs_diff_eq!(r.max_ratio, 0.5, epsilon = 1e-9);
        assert!(r.sound);
    }

    #[test]
    fn reports_are_reproducible() {
        let sys = builtin_system(SystemKind::LinearRot, params(1.0, 2.0, 0)).unwrap();
        let stepper = MethodStepper::new(&catalog_lookup("rk4_classic").unwrap(), AuxiliaryConfig::default()).unwrap();
        let cfg = EmpiricalConfig::new(0.1, 50, 2, 11);
        let norm = NormSpec::l2_unweighted(2);
        let a = empirical_contraction_factor(&stepper, &sys, &norm, &cfg).unwrap();
        let b = empirical_contraction_factor(&stepper, &sys, &norm, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.max_ratio.to_bits(), b.max_ratio.to_bits());
    }

    #[test]
    fn empty_experiment_rejected() {
        let sys = builtin_system(SystemKind::DiagL1, params(1.0, 1.0, 1)).unwrap();
        let stepper = MethodStepper::new(&catalog_lookup("forward_euler").unwrap(), AuxiliaryConfig::default()).unwrap();
        let cfg = EmpiricalConfig::new(0.5, 0, 1, 0);
        assert!(matches!(
            empirical_contraction_factor(&stepper, &sys, &NormSpec::l1_unweighted(1), &cfg),
            Err(HarnessError::EmptyExperiment)
        ));
    }

    #[test]
    fn cell_seeds_differ() {
        assert_ne!(cell_seed(1, 0), cell_seed(1, 1));
        assert_eq!(cell_seed(1, 5), cell_seed(1, 5));
    }

    #[test]
    fn figure_files_written() {
        let dir = tempfile::tempdir().unwrap();
        let summaries = reproduce_figures_on(dir.path(), &figure_grid(50)).unwrap();
        assert_eq!(summaries.len(), 10);
        for s in &summaries {
            assert!(s.passes(0.05), "{s:?}");
        }
        let text = std::fs::read_to_string(dir.path().join("fig1.csv")).unwrap();
        assert_eq!(text.lines().next(), Some("method,h,rho"));
        assert_eq!(text.lines().count(), 1 + 5 * 50);
    }
}
