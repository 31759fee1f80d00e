//! Implicit Runge-Kutta dynamics through the auxiliary stage dynamics
//!
//! ```text
//! ẏ = Q⁻¹ ( −y + 𝟙ₛ⊗x + h (A⊗Iₙ) F_c(t, y) ),    Q ∈ { I_{sn}, A⊗Iₙ }
//! ```
//!
//! whose unique equilibrium is the solution `y* = G(t, x)` of the stage
//! equations whenever the dynamics is strongly infinitesimally contracting.
//! The module provides the well-definedness certificates for that
//! contractivity, a forward Euler stage solver on the auxiliary dynamics,
//! and the step map in both its update-equation form and the rewritten form
//! `g = (1/s)(𝟙ₛ⊗Iₙ)ᵀy* + h(v⊗Iₙ)ᵀF_c(t, y*)`.

use std::fmt;

use nalgebra::{DMatrix, DVector, LU};
use thiserror::Error;

use crate::fields::{forward_euler_lipschitz_general, Certificate, FieldError, VectorField};
use crate::norms::{NormError, NormKind, NormSpec};
use crate::scalar::Real;
use crate::stages::{as_blocks, eval_stages, from_blocks, repeat_state, StageTime};
use crate::tableau::{to_real, ButcherTableau, RealTableau};

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;
/// Points in the log grid searched for the auxiliary step.
pub const AUX_STEP_GRID: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImplicitError {
    #[error("A is singular; Q = A⊗I and the Cor-2 criterion need an invertible A")]
    SingularA,
    #[error("no certificate available: {0}")]
    MissingCertificate(String),
    #[error("auxiliary dynamics not certified contracting (margin {margin:e} via {criterion})")]
    NotWellDefined { criterion: Criterion, margin: f64 },
    #[error("auxiliary certificates inconsistent: lambda_aux = {lambda}, ell_aux = {ell}")]
    InconsistentAux { lambda: f64, ell: f64 },
    #[error("no auxiliary step gives a contraction factor below 1")]
    NoContractiveAuxStep,
    #[error("stage solver stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("state has dimension {found}, field has dimension {expected}")]
    Dimension { expected: usize, found: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Norm(#[from] NormError),
}

/// Choice of the weighting `Q` in the auxiliary dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QKind {
    /// `Q = I_{sn}`.
    #[default]
    Identity,
    /// `Q = A⊗Iₙ`.
    KronA,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryConfig<T: Real> {
    pub q_kind: QKind,
    /// Contraction rate of the auxiliary field. Derived from the field's
    /// certificate when `None`.
    pub aux_lambda: Option<T>,
    /// Lipschitz bound of the auxiliary field. Derived when `None`.
    pub aux_ell: Option<T>,
    /// Component norm on `ℝⁿ`; defaults to the field's first certificate.
    pub norm: Option<NormSpec<T>>,
    pub residual_tol: T,
    pub max_iters: usize,
    pub stage_time: StageTime,
}

impl<T: Real> Default for AuxiliaryConfig<T> {
    fn default() -> Self {
        Self {
            q_kind: QKind::Identity,
            aux_lambda: None,
            aux_ell: None,
            norm: None,
            residual_tol: T::lit(DEFAULT_RESIDUAL_TOL),
            max_iters: DEFAULT_MAX_ITERS,
            stage_time: StageTime::Literal,
        }
    }
}

impl<T: Real> AuxiliaryConfig<T> {
    pub fn with_q(mut self, q_kind: QKind) -> Self {
        self.q_kind = q_kind;
        self
    }

    pub fn with_norm(mut self, norm: NormSpec<T>) -> Self {
        self.norm = Some(norm);
        self
    }

    pub fn with_residual_tol(mut self, tol: T) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn with_aux_certificate(mut self, lambda: T, ell: T) -> Self {
        self.aux_lambda = Some(lambda);
        self.aux_ell = Some(ell);
        self
    }

    fn validate(&self) -> Result<(), ImplicitError> {
        if !(self.residual_tol > T::zero()) {
            return Err(ImplicitError::InvalidConfig("residual_tol must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(ImplicitError::InvalidConfig("max_iters must be positive".into()));
        }
        if let (Some(l), Some(e)) = (self.aux_lambda, self.aux_ell) {
            if l > e {
                return Err(ImplicitError::InconsistentAux { lambda: l.to_f64_lossy(), ell: e.to_f64_lossy() });
            }
        }
        Ok(())
    }
}

/// How a well-definedness margin was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// `1 − h‖A‖₁ Lipᵢ(f)` in the block-ℓ₁ composite of a component norm.
    Cor1Norm,
    /// `−μ_{2,[d]^{1/2}}(−A⁻¹) − h osLip(f)` with `Q = A⊗I`.
    Cor2L2,
    /// `1 − h maxⱼ(⋯)` from the column-wise block log-norm bound
    /// (block-ℓ₁ composite norm, `Q = I`).
    BlockColumn,
    /// Row-wise counterpart in the block-ℓ∞ composite norm.
    BlockRow,
    /// Rate supplied by the caller and not verified.
    UserAsserted,
    /// Explicit tableau: the stages are computed directly.
    ExplicitTableau,
    /// `M ⪰ 0` with `b > 0` elementwise; the margin is `min bᵢ`.
    AlgebraicStability,
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::Cor1Norm => "cor1_norm",
            Criterion::Cor2L2 => "cor2_l2",
            Criterion::BlockColumn => "block_column",
            Criterion::BlockRow => "block_row",
            Criterion::UserAsserted => "user_asserted",
            Criterion::ExplicitTableau => "explicit_tableau",
            Criterion::AlgebraicStability => "algebraic_stability",
        })
    }
}

/// A contraction rate `margin` of the auxiliary dynamics; positive means the
/// stage equations have a unique solution.
#[derive(Debug, Clone, PartialEq)]
pub struct WellDefinednessReport<T> {
    pub criterion: Criterion,
    pub margin: T,
    /// Human-readable description of the norm on `ℝ^{sn}`.
    pub norm: String,
    pub h: T,
}

impl<T: Real> WellDefinednessReport<T> {
    pub fn certified(&self) -> bool {
        self.margin > T::zero()
    }
}

/// Which sum of off-diagonal `|a_ij|` enters the block bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockPattern {
    /// `Σ_{i≠j} |a_ij|` for each column `j`.
    Column,
    /// `Σ_{j≠i} |a_ij|` for each row `i`.
    Row,
}

/// Cor-1 margin `1 − h‖A‖₁ ℓᵢ`, `ℓᵢ` the Lipschitz constant of `f` in the
/// component norm.
pub fn certify_well_defined_cor1<T: Real>(tableau: &ButcherTableau, h: T, lip_component: T) -> WellDefinednessReport<T> {
    let a_norm: T = to_real(&tableau.a_norm_1());
    WellDefinednessReport {
        criterion: Criterion::Cor1Norm,
        margin: T::one() - h * a_norm * lip_component,
        norm: "block-l1 composite".into(),
        h,
    }
}

/// Cor-2 margin `−(μ_{2,[d]^{1/2}}(−A⁻¹) + h·oslip)` for `Q = A⊗I` in the
/// norm `‖·‖_{2,([d]⊗P)^{1/2}}`.
pub fn certify_well_defined_cor2<T: Real>(
    tableau: &ButcherTableau,
    h: T,
    oslip: T,
    d: &DVector<T>,
) -> Result<WellDefinednessReport<T>, ImplicitError> {
    let s = tableau.stages();
    if d.len() != s {
        return Err(ImplicitError::Dimension { expected: s, found: d.len() });
    }
    let mu = log_norm_neg_a_inv(tableau, d)?;
    Ok(WellDefinednessReport {
        criterion: Criterion::Cor2L2,
        margin: -(mu + h * oslip),
        norm: "l2 weighted by [d]⊗P".into(),
        h,
    })
}

/// `μ_{2,[d]^{1/2}}(−A⁻¹)`.
pub fn log_norm_neg_a_inv<T: Real>(tableau: &ButcherTableau, d: &DVector<T>) -> Result<T, ImplicitError> {
    if !tableau.is_a_invertible() {
        return Err(ImplicitError::SingularA);
    }
    let a = tableau.to_real::<T>().a;
    let inv = a.try_inverse().ok_or(ImplicitError::SingularA)?;
    Ok(NormSpec::l2_diag(d.clone())?.log_norm(&(-inv))?)
}

/// Margin `1 − h·max_k(δ_k + ℓ·off_k)` with `δ_k = a_kk·oslip` when
/// `a_kk ≥ 0` and `|a_kk|·ℓ` otherwise, and `off_k` the off-diagonal sum of
/// column or row `k`. It bounds the contraction rate of the auxiliary field
/// with `Q = I` in the block-ℓ₁ (column) or block-ℓ∞ (row) composite of the
/// component norm.
pub fn certify_well_defined_block<T: Real>(
    tableau: &ButcherTableau,
    h: T,
    oslip: T,
    ell: T,
    pattern: BlockPattern,
) -> WellDefinednessReport<T> {
    let worst = block_rate_bound(&tableau.to_real::<T>().a, oslip, ell, pattern);
    let (criterion, norm) = match pattern {
        BlockPattern::Column => (Criterion::BlockColumn, "block-l1 composite"),
        BlockPattern::Row => (Criterion::BlockRow, "block-linf composite"),
    };
    WellDefinednessReport { criterion, margin: T::one() - h * worst, norm: norm.into(), h }
}

pub(crate) fn block_rate_bound<T: Real>(a: &DMatrix<T>, oslip: T, ell: T, pattern: BlockPattern) -> T {
    let s = a.nrows();
    (0..s)
        .map(|k| {
            let akk = a[(k, k)];
            let diag = if akk >= T::zero() { akk * oslip } else { akk.abs() * ell };
            let off = (0..s).filter(|&m| m != k).fold(T::zero(), |acc, m| {
                acc + match pattern {
                    BlockPattern::Column => a[(m, k)].abs(),
                    BlockPattern::Row => a[(k, m)].abs(),
                }
            });
            diag + ell * off
        })
        .fold(-T::infinity(), |m, v| m.max(v))
}

/// Norm on `ℝ^{sn}` used for residuals and auxiliary certificates.
#[derive(Debug, Clone, PartialEq)]
pub enum StageNorm<T: Real> {
    /// `Σᵢ ‖yᵢ‖` over stage blocks.
    BlockL1(NormSpec<T>),
    /// `maxᵢ ‖yᵢ‖` over stage blocks.
    BlockLinf(NormSpec<T>),
    /// A norm on the stacked vector.
    Stacked(NormSpec<T>),
}

impl<T: Real> StageNorm<T> {
    pub fn eval(&self, y: &DVector<T>) -> T {
        match self {
            StageNorm::BlockL1(c) => blocks_of(y, c.dim()).fold(T::zero(), |acc, b| acc + c.norm_unchecked(&b)),
            StageNorm::BlockLinf(c) => blocks_of(y, c.dim()).fold(T::zero(), |acc, b| acc.max(c.norm_unchecked(&b))),
            StageNorm::Stacked(full) => full.norm_unchecked(y),
        }
    }

    /// The equivalent [`NormSpec`] on `ℝ^{sn}` when one exists.
    pub fn as_norm_spec(&self, s: usize) -> Option<NormSpec<T>> {
        match self {
            StageNorm::Stacked(full) => Some(full.clone()),
            StageNorm::BlockL1(c) if s == 1 || c.kind() == NormKind::L1 => Some(c.stacked(s)),
            StageNorm::BlockLinf(c) if s == 1 || c.kind() == NormKind::Linf => Some(c.stacked(s)),
            _ => None,
        }
    }
}

fn blocks_of<T: Real>(y: &DVector<T>, n: usize) -> impl Iterator<Item = DVector<T>> + '_ {
    y.as_slice().chunks(n).map(DVector::from_column_slice)
}

/// Certified `(λ_aux, ℓ_aux)` of the auxiliary field and the norm they hold in.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxCertificate<T: Real> {
    pub lambda: T,
    pub ell: T,
    pub stage_norm: StageNorm<T>,
    pub report: WellDefinednessReport<T>,
}

/// Resolves the auxiliary certificate from the configuration and the
/// field's declared certificate in the component norm.
///
/// With `Q = I` the rate is the better of the Cor-1 and column-block
/// margins and `ℓ_aux = 1 + h‖A‖₁ℓ`, both in the block-ℓ₁ composite norm.
/// With `Q = A⊗I` the component norm must be ℓ₂; the rate is the Cor-2
/// margin with `d = 𝟙ₛ` and `ℓ_aux = ‖A⁻¹‖₂ + hℓ`.
pub fn auxiliary_certificate<T: Real>(
    tableau: &ButcherTableau,
    f: &VectorField<T>,
    cfg: &AuxiliaryConfig<T>,
    h: T,
) -> Result<AuxCertificate<T>, ImplicitError> {
    cfg.validate()?;
    let s = tableau.stages();
    let norm = match &cfg.norm {
        Some(n) => n.clone(),
        None => f
            .certificates()
            .first()
            .map(|(n, _)| n.clone())
            .unwrap_or_else(|| NormSpec::l2_unweighted(f.dim())),
    };
    if norm.dim() != f.dim() {
        return Err(ImplicitError::Dimension { expected: f.dim(), found: norm.dim() });
    }
    let declared = f.certificate(&norm);

    let derived = match cfg.q_kind {
        QKind::Identity => declared.map(|cert| {
            let cor1 = certify_well_defined_cor1(tableau, h, cert.lip);
            let block = certify_well_defined_block(tableau, h, cert.oslip, cert.lip, BlockPattern::Column);
            let report = if block.margin > cor1.margin { block } else { cor1 };
            let a_norm: T = to_real(&tableau.a_norm_1());
            (report.margin, T::one() + h * a_norm * cert.lip, StageNorm::BlockL1(norm.clone()), report)
        }),
        QKind::KronA => {
            if !tableau.is_a_invertible() {
                return Err(ImplicitError::SingularA);
            }
            match (norm.kind(), declared) {
                (NormKind::L2, Some(cert)) => {
                    let ones = DVector::from_element(s, T::one());
                    let report = certify_well_defined_cor2(tableau, h, cert.oslip, &ones)?;
                    let inv = tableau.to_real::<T>().a.try_inverse().ok_or(ImplicitError::SingularA)?;
                    let inv_norm = NormSpec::l2_unweighted(s).induced_matrix_norm(&inv)?;
                    Some((report.margin, inv_norm + h * cert.lip, StageNorm::Stacked(norm.stacked(s)), report))
                }
                _ => None,
            }
        }
    };

    let fallback_norm = || match cfg.q_kind {
        QKind::KronA if norm.kind() == NormKind::L2 => StageNorm::Stacked(norm.stacked(s)),
        _ => StageNorm::BlockL1(norm.clone()),
    };

    let (lambda, ell, stage_norm, mut report) = match (derived, cfg.aux_lambda, cfg.aux_ell) {
        (Some(d), None, None) => d,
        (derived, Some(l), Some(e)) => {
            let sn = derived.map(|d| d.2).unwrap_or_else(fallback_norm);
            (l, e, sn, asserted(l, h))
        }
        (Some((dl, de, sn, rep)), lam, ell) => {
            let user = lam.is_some() || ell.is_some();
            let report = if user { asserted(lam.unwrap_or(dl), h) } else { rep };
            (lam.unwrap_or(dl), ell.unwrap_or(de), sn, report)
        }
        (None, _, _) => {
            return Err(ImplicitError::MissingCertificate(format!(
                "field `{}` has no certificate in {norm} and no auxiliary rates were supplied",
                f.label()
            )))
        }
    };
    if !(lambda > T::zero()) {
        report.margin = lambda;
        return Err(ImplicitError::NotWellDefined { criterion: report.criterion, margin: lambda.to_f64_lossy() });
    }
    if lambda > ell {
        return Err(ImplicitError::InconsistentAux { lambda: lambda.to_f64_lossy(), ell: ell.to_f64_lossy() });
    }
    Ok(AuxCertificate { lambda, ell, stage_norm, report })
}

fn asserted<T: Real>(margin: T, h: T) -> WellDefinednessReport<T> {
    WellDefinednessReport { criterion: Criterion::UserAsserted, margin, norm: "user supplied".into(), h }
}

/// Picks the auxiliary forward Euler step minimizing
/// `e^{−h λ} + e^{h ℓ} − 1 − h ℓ` over a log grid on `[1e-4/ℓ, 10/ℓ]`.
pub fn select_aux_step<T: Real>(lambda: T, ell: T) -> Result<(T, T), ImplicitError> {
    if !(ell.is_finite() && ell > T::zero() && lambda > T::zero()) {
        return Err(ImplicitError::NoContractiveAuxStep);
    }
    let lo = (T::lit(1e-4) / ell).ln();
    let hi = (T::lit(10.0) / ell).ln();
    let steps = T::from_usize(AUX_STEP_GRID - 1).expect("grid size");
    let best = (0..AUX_STEP_GRID)
        .map(|k| {
            let step = (lo + (hi - lo) * T::from_usize(k).expect("grid index") / steps).exp();
            (step, forward_euler_lipschitz_general(step, lambda, ell))
        })
        .filter(|(_, rho)| rho.is_finite())
        .fold(None, |best: Option<(T, T)>, cand| match best {
            Some(b) if b.1 <= cand.1 => Some(b),
            _ => Some(cand),
        });
    match best {
        Some((step, rho)) if rho < T::one() => Ok((step, rho)),
        _ => Err(ImplicitError::NoContractiveAuxStep),
    }
}

/// Outcome of the forward Euler iteration on the auxiliary dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolveResult<T: Real> {
    pub y_star: DVector<T>,
    /// Stage-equation defect of `y_star` in the stage norm.
    pub residual: T,
    pub iterations: usize,
    pub aux_step: T,
    pub aux_rho: T,
    pub converged: bool,
    pub report: WellDefinednessReport<T>,
}

/// Implicit step map for one tableau and configuration. Caches the floating
/// point tableau and the factorization of `A`.
#[derive(Debug, Clone)]
pub struct ImplicitStepper<T: Real> {
    tableau: ButcherTableau,
    real: RealTableau<T>,
    v: DVector<T>,
    a_lu: Option<LU<T, nalgebra::Dyn, nalgebra::Dyn>>,
    cfg: AuxiliaryConfig<T>,
}

impl<T: Real> ImplicitStepper<T> {
    pub fn new(tableau: &ButcherTableau, cfg: AuxiliaryConfig<T>) -> Result<Self, ImplicitError> {
        cfg.validate()?;
        let real = tableau.to_real::<T>();
        let a_lu = match cfg.q_kind {
            QKind::Identity => None,
            QKind::KronA => {
                if !tableau.is_a_invertible() {
                    return Err(ImplicitError::SingularA);
                }
                Some(real.a.clone().lu())
            }
        };
        Ok(Self { tableau: tableau.clone(), v: tableau.derive().v_real(), real, a_lu, cfg })
    }

    pub fn tableau(&self) -> &ButcherTableau {
        &self.tableau
    }

    pub fn config(&self) -> &AuxiliaryConfig<T> {
        &self.cfg
    }

    /// `−y + 𝟙ₛ⊗x + h(A⊗Iₙ)F_c(t, y)` and `F_c(t, y)`, both as `n × s` blocks.
    pub fn stage_defect(
        &self,
        f: &VectorField<T>,
        t: T,
        x: &DVector<T>,
        h: T,
        y: &DVector<T>,
    ) -> Result<(DMatrix<T>, DMatrix<T>), ImplicitError> {
        let n = x.len();
        let blocks = as_blocks(y, n);
        let fc = eval_stages(f, t, h, &self.real.c, self.cfg.stage_time, &blocks)?;
        let mut defect = &fc * self.real.a.transpose() * h - blocks;
        for mut col in defect.column_iter_mut() {
            col += x;
        }
        Ok((defect, fc))
    }

    /// Applies `Q⁻¹` to a block matrix.
    fn apply_q_inv(&self, blocks: DMatrix<T>) -> DMatrix<T> {
        match &self.a_lu {
            None => blocks,
            Some(lu) => lu
                .solve(&blocks.transpose())
                .expect("A verified invertible")
                .transpose(),
        }
    }

    /// Right-hand side of the auxiliary dynamics at `y`.
    pub fn auxiliary_rhs(
        &self,
        f: &VectorField<T>,
        t: T,
        x: &DVector<T>,
        h: T,
        y: &DVector<T>,
    ) -> Result<DVector<T>, ImplicitError> {
        let (defect, _) = self.stage_defect(f, t, x, h, y)?;
        Ok(from_blocks(&self.apply_q_inv(defect)))
    }

    pub fn solve_stages(&self, f: &VectorField<T>, t: T, x: &DVector<T>, h: T) -> Result<StageSolveResult<T>, ImplicitError> {
        self.solve_stages_from(f, t, x, h, repeat_state(x, self.real.b.len()))
    }

    /// Forward Euler iteration `y ← y + h_aux·Q⁻¹(defect)` from `y0` until the
    /// stage defect is at most `residual_tol`.
    pub fn solve_stages_from(
        &self,
        f: &VectorField<T>,
        t: T,
        x: &DVector<T>,
        h: T,
        y0: DVector<T>,
    ) -> Result<StageSolveResult<T>, ImplicitError> {
        let n = f.dim();
        let s = self.real.b.len();
        if x.len() != n {
            return Err(ImplicitError::Dimension { expected: n, found: x.len() });
        }
        if y0.len() != n * s {
            return Err(ImplicitError::Dimension { expected: n * s, found: y0.len() });
        }
        let cert = auxiliary_certificate(&self.tableau, f, &self.cfg, h)?;
        let (aux_step, aux_rho) = select_aux_step(cert.lambda, cert.ell)?;

        let mut y = y0;
        let mut best: Option<(DVector<T>, T)> = None;
        let mut iterations = 0;
        loop {
            let (defect, _) = self.stage_defect(f, t, x, h, &y)?;
            let residual = cert.stage_norm.eval(&from_blocks(&defect));
            if best.as_ref().is_none_or(|(_, r)| residual < *r) {
                best = Some((y.clone(), residual));
            }
            if residual <= self.cfg.residual_tol {
                return Ok(StageSolveResult {
                    y_star: y,
                    residual,
                    iterations,
                    aux_step,
                    aux_rho,
                    converged: true,
                    report: cert.report,
                });
            }
            if iterations >= self.cfg.max_iters || !residual.is_finite() {
                let (y_best, r_best) = best.expect("at least one iterate");
                return Ok(StageSolveResult {
                    y_star: y_best,
                    residual: r_best,
                    iterations,
                    aux_step,
                    aux_rho,
                    converged: false,
                    report: cert.report,
                });
            }
            let rhs = from_blocks(&self.apply_q_inv(defect));
            y.axpy(aux_step, &rhs, T::one());
            iterations += 1;
        }
    }

    /// Update equation `x + h(b⊗Iₙ)ᵀF_c(t, y*)` from solved stages.
    pub fn update(&self, f: &VectorField<T>, t: T, x: &DVector<T>, h: T, y_star: &DVector<T>) -> Result<DVector<T>, ImplicitError> {
        let fc = eval_stages(f, t, h, &self.real.c, self.cfg.stage_time, &as_blocks(y_star, x.len()))?;
        Ok(x + fc * &self.real.b * h)
    }

    /// Rewritten update `(1/s)(𝟙ₛ⊗Iₙ)ᵀy* + h(v⊗Iₙ)ᵀF_c(t, y*)`.
    pub fn update_rewritten(
        &self,
        f: &VectorField<T>,
        t: T,
        x: &DVector<T>,
        h: T,
        y_star: &DVector<T>,
    ) -> Result<DVector<T>, ImplicitError> {
        let blocks = as_blocks(y_star, x.len());
        let s = T::from_usize(blocks.ncols()).expect("stage count");
        let fc = eval_stages(f, t, h, &self.real.c, self.cfg.stage_time, &blocks)?;
        Ok(blocks.column_sum() / s + fc * &self.v * h)
    }

    fn solved(&self, f: &VectorField<T>, t: T, x: &DVector<T>, h: T) -> Result<StageSolveResult<T>, ImplicitError> {
        let res = self.solve_stages(f, t, x, h)?;
        if !res.converged {
            return Err(ImplicitError::NotConverged { iterations: res.iterations, residual: res.residual.to_f64_lossy() });
        }
        Ok(res)
    }

    pub fn step(&self, f: &VectorField<T>, t: T, x: &DVector<T>, h: T) -> Result<DVector<T>, ImplicitError> {
        let res = self.solved(f, t, x, h)?;
        self.update(f, t, x, h, &res.y_star)
    }

    pub fn step_rewritten(&self, f: &VectorField<T>, t: T, x: &DVector<T>, h: T) -> Result<DVector<T>, ImplicitError> {
        let res = self.solved(f, t, x, h)?;
        self.update_rewritten(f, t, x, h, &res.y_star)
    }
}

/// The auxiliary dynamics on `ℝ^{sn}` as a [`VectorField`] (its own time
/// argument is ignored; `t` and `x` are frozen). The derived auxiliary
/// certificate is attached when its norm is expressible as a [`NormSpec`].
pub fn auxiliary_field<T: Real>(
    tableau: &ButcherTableau,
    f: &VectorField<T>,
    cfg: &AuxiliaryConfig<T>,
    h: T,
    t: T,
    x: &DVector<T>,
) -> Result<VectorField<T>, ImplicitError> {
    let stepper = ImplicitStepper::new(tableau, cfg.clone())?;
    let s = tableau.stages();
    let n = f.dim();
    if x.len() != n {
        return Err(ImplicitError::Dimension { expected: n, found: x.len() });
    }
    let cert = auxiliary_certificate(tableau, f, cfg, h).ok();
    let (field, frozen_x) = (f.clone(), x.clone());
    let label = format!("aux[{}|{}]", tableau.label(), f.label());
    let mut aux = VectorField::new(label, n * s, move |_, y: &DVector<T>| {
        stepper
            .auxiliary_rhs(&field, t, &frozen_x, h, y)
            .unwrap_or_else(|_| DVector::from_element(y.len(), T::lit(f64::NAN)))
    });
    if let Some(c) = cert {
        if let Some(spec) = c.stage_norm.as_norm_spec(s) {
            aux = aux.with_certificate(spec, Certificate::new(c.ell, -c.lambda)?)?;
        }
    }
    Ok(aux)
}

pub fn solve_stages<T: Real>(
    tableau: &ButcherTableau,
    f: &VectorField<T>,
    t: T,
    x: &DVector<T>,
    h: T,
    cfg: &AuxiliaryConfig<T>,
) -> Result<StageSolveResult<T>, ImplicitError> {
    ImplicitStepper::new(tableau, cfg.clone())?.solve_stages(f, t, x, h)
}

pub fn implicit_step<T: Real>(
    tableau: &ButcherTableau,
    f: &VectorField<T>,
    t: T,
    x: &DVector<T>,
    h: T,
    cfg: &AuxiliaryConfig<T>,
) -> Result<DVector<T>, ImplicitError> {
    ImplicitStepper::new(tableau, cfg.clone())?.step(f, t, x, h)
}

pub fn implicit_step_rewritten<T: Real>(
    tableau: &ButcherTableau,
    f: &VectorField<T>,
    t: T,
    x: &DVector<T>,
    h: T,
    cfg: &AuxiliaryConfig<T>,
) -> Result<DVector<T>, ImplicitError> {
    ImplicitStepper::new(tableau, cfg.clone())?.step_rewritten(f, t, x, h)
}
