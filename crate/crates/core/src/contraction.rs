//! Closed-form contraction factors of implicit Runge-Kutta one-step maps in
//! weighted ℓ₂, ℓ₁ and ℓ∞ norms, with every hypothesis checked and recorded.
//!
//! ```text
//! ρ₂ = (1 − 2hλ₂‖b‖₁ / ‖Iₛ + hℓ₂|A|‖²_{2,[b]^{1/2}})^{1/2}
//! ρ₁ = (1 − hλ₁vᵀ𝟙ₛ) / (1 − h maxⱼ(−λ₁aⱼⱼ + ℓ₁ Σ_{i≠j} |aᵢⱼ|))
//! ρ∞ = (1 − hλ∞vᵀ𝟙ₛ) / (1 − h maxᵢ(−λ∞aᵢᵢ + ℓ∞ Σ_{j≠i} |aᵢⱼ|))
//! ```

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::implicit::{certify_well_defined_block, certify_well_defined_cor1, certify_well_defined_cor2, BlockPattern, Criterion, WellDefinednessReport};
use crate::norms::{NormKind, NormSpec};
use crate::scalar::Real;
use crate::tableau::{ButcherTableau, DEFAULT_PSD_TOL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractionError {
    #[error("step size must be finite and nonnegative, got {0}")]
    InvalidStep(f64),
    #[error("rates must be finite and positive, got lambda = {lam}, ell = {ell}")]
    InvalidRates { lam: f64, ell: f64 },
    #[error("component Lipschitz constants must be finite and nonnegative")]
    InvalidComponentLips,
    #[error("assumption A4 fails: {0}")]
    A4Violated(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Theorem {
    /// Weighted ℓ₂ norm, algebraically stable tableaus.
    Thm3L2,
    /// Weighted ℓ₁ norm.
    Thm4L1,
    /// Weighted ℓ∞ norm.
    Thm5Linf,
}

impl Theorem {
    pub fn norm_kind(self) -> NormKind {
        match self {
            Theorem::Thm3L2 => NormKind::L2,
            Theorem::Thm4L1 => NormKind::L1,
            Theorem::Thm5Linf => NormKind::Linf,
        }
    }

    pub fn for_norm(kind: NormKind) -> Self {
        match kind {
            NormKind::L2 => Theorem::Thm3L2,
            NormKind::L1 => Theorem::Thm4L1,
            NormKind::Linf => Theorem::Thm5Linf,
        }
    }

    /// Assumption identifiers in order.
    pub fn assumption_ids(self) -> &'static [AssumptionId] {
        use AssumptionId::*;
        match self {
            Theorem::Thm3L2 => &[A1, A2, A3, A4],
            Theorem::Thm4L1 | Theorem::Thm5Linf => &[A1, A2, A3, A4, A5],
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::Thm3L2 => "thm3_l2",
            Theorem::Thm4L1 => "thm4_l1",
            Theorem::Thm5Linf => "thm5_linf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AssumptionId {
    /// The one-step map is well defined.
    A1,
    /// `osLip(f) ≤ −λ`.
    A2,
    /// `Lip(f) ≤ ℓ`.
    A3,
    /// Tableau condition.
    A4,
    /// Step-size condition.
    A5,
}

impl fmt::Display for AssumptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption<T> {
    pub id: AssumptionId,
    pub satisfied: bool,
    /// Slack of the condition; nonnegative (positive for strict
    /// inequalities) when satisfied.
    pub margin: T,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionCertificate<T: Real> {
    pub theorem: Theorem,
    pub norm: NormKind,
    pub h: T,
    /// Omitted when the formula is undefined under the failed assumptions.
    pub rho: Option<T>,
    pub assumptions: Vec<Assumption<T>>,
    /// The well-definedness argument used for A1.
    pub well_defined: WellDefinednessReport<T>,
    /// Intermediate quantities, e.g. both off-diagonal patterns for ℓ∞.
    pub quantities: Vec<(&'static str, T)>,
    pub notes: Vec<String>,
    pub certified: bool,
}

impl<T: Real> ContractionCertificate<T> {
    pub fn assumption(&self, id: AssumptionId) -> Option<&Assumption<T>> {
        self.assumptions.iter().find(|a| a.id == id)
    }

    pub fn failed(&self) -> Vec<AssumptionId> {
        self.assumptions.iter().filter(|a| !a.satisfied).map(|a| a.id).collect()
    }

    pub fn quantity(&self, name: &str) -> Option<T> {
        self.quantities.iter().find(|(k, _)| *k == name).map(|(_, v)| *v)
    }

    fn finish(mut self) -> Self {
        self.certified = self.assumptions.iter().all(|a| a.satisfied)
            && self.rho.is_some_and(|r| r >= T::zero() && r < T::one());
        self
    }
}

impl<T: Real> fmt::Display for ContractionCertificate<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "theorem={}", self.theorem)?;
        writeln!(f, "norm={}", self.norm)?;
        writeln!(f, "h={}", self.h.to_f64_lossy())?;
        match self.rho {
            Some(r) => writeln!(f, "rho={}", r.to_f64_lossy())?,
            None => writeln!(f, "rho=")?,
        }
        writeln!(f, "certified={}", self.certified)?;
        writeln!(f, "well_defined.criterion={}", self.well_defined.criterion)?;
        writeln!(f, "well_defined.margin={}", self.well_defined.margin.to_f64_lossy())?;
        for a in &self.assumptions {
            writeln!(f, "{}.satisfied={}", a.id, a.satisfied)?;
            writeln!(f, "{}.margin={}", a.id, a.margin.to_f64_lossy())?;
            if !a.note.is_empty() {
                writeln!(f, "{}.note={}", a.id, a.note)?;
            }
        }
        for (k, v) in &self.quantities {
            writeln!(f, "{k}={}", v.to_f64_lossy())?;
        }
        for n in &self.notes {
            writeln!(f, "note={n}")?;
        }
        Ok(())
    }
}

fn check_inputs<T: Real>(h: T, lam: T, ell: T) -> Result<(), ContractionError> {
    if !(h >= T::zero() && h.is_finite()) {
        return Err(ContractionError::InvalidStep(h.to_f64_lossy()));
    }
    if !(lam.is_finite() && ell.is_finite() && lam > T::zero() && ell > T::zero()) {
        return Err(ContractionError::InvalidRates { lam: lam.to_f64_lossy(), ell: ell.to_f64_lossy() });
    }
    Ok(())
}

fn rate_assumptions<T: Real>(lam: T, ell: T) -> [Assumption<T>; 2] {
    [
        Assumption { id: AssumptionId::A2, satisfied: true, margin: lam, note: "osLip(f) <= -lambda supplied".into() },
        Assumption {
            id: AssumptionId::A3,
            satisfied: ell >= lam,
            margin: ell - lam,
            note: if ell >= lam { "Lip(f) <= ell supplied".into() } else { "ell < lambda is inconsistent".into() },
        },
    ]
}

fn best<T: Real>(a: WellDefinednessReport<T>, b: WellDefinednessReport<T>) -> WellDefinednessReport<T> {
    if b.margin > a.margin {
        b
    } else {
        a
    }
}

fn explicit_report<T: Real>(h: T) -> WellDefinednessReport<T> {
    WellDefinednessReport { criterion: Criterion::ExplicitTableau, margin: T::infinity(), norm: "any".into(), h }
}

fn a1_assumption<T: Real>(report: &WellDefinednessReport<T>) -> Assumption<T> {
    Assumption {
        id: AssumptionId::A1,
        satisfied: report.certified(),
        margin: report.margin,
        note: format!("via {}", report.criterion),
    }
}

/// Contraction factor in `‖·‖_{2,P^{1/2}}` for a field with `osLip ≤ −λ₂`
/// and `Lip ≤ ℓ₂` in that norm. Requires `M ⪰ 0` and `b > 0`.
pub fn rho_l2<T: Real>(tableau: &ButcherTableau, h: T, lam2: T, ell2: T) -> Result<ContractionCertificate<T>, ContractionError> {
    check_inputs(h, lam2, ell2)?;
    let rt = tableau.to_real::<T>();
    let s = tableau.stages();
    let stab = tableau.algebraic_stability::<T>(T::lit(DEFAULT_PSD_TOL));
    let b_positive = rt.b.iter().all(|&bi| bi > T::zero());
    let mut notes = Vec::new();

    let well_defined = if tableau.is_explicit() {
        explicit_report(h)
    } else if stab.stable && b_positive {
        WellDefinednessReport {
            criterion: Criterion::AlgebraicStability,
            margin: stab.min_b,
            norm: "l2".into(),
            h,
        }
    } else {
        let block = certify_well_defined_block(tableau, h, -lam2, ell2, BlockPattern::Column);
        match certify_well_defined_cor2(tableau, h, -lam2, &DVector::from_element(s, T::one())) {
            Ok(cor2) => best(block, cor2),
            Err(_) => block,
        }
    };

    let a4 = Assumption {
        id: AssumptionId::A4,
        satisfied: stab.stable,
        margin: stab.min_eig_m.min(stab.min_b),
        note: format!("min eig M = {:e}, min b = {:e}", stab.min_eig_m.to_f64_lossy(), stab.min_b.to_f64_lossy()),
    };
    let [a2, a3] = rate_assumptions(lam2, ell2);
    let mut assumptions = vec![a1_assumption(&well_defined), a2, a3, a4];

    let mut quantities = vec![("min_eig_m", stab.min_eig_m), ("min_b", stab.min_b)];
    let rho = if !stab.stable {
        None
    } else if !b_positive {
        notes.push("some b_i = 0: the [b]-weighted norm is degenerate".into());
        assumptions[3].satisfied = false;
        assumptions[3].note.push_str("; b > 0 required");
        None
    } else {
        let abs_a = rt.a.map(|x| x.abs());
        let shifted = DMatrix::identity(s, s) + abs_a * (h * ell2);
        let weighted = NormSpec::l2_diag(rt.b.clone()).expect("b > 0").induced_matrix_norm(&shifted).expect("dims");
        let b1 = rt.b.iter().fold(T::zero(), |acc, &bi| acc + bi.abs());
        quantities.push(("weighted_norm", weighted));
        quantities.push(("b_norm_1", b1));
        let radicand = T::one() - (T::lit(2.0) * h * lam2 * b1) / (weighted * weighted);
        if radicand < T::zero() {
            notes.push(format!("radicand {:e} clamped to 0", radicand.to_f64_lossy()));
        }
        Some(radicand.max(T::zero()).sqrt())
    };

    Ok(ContractionCertificate {
        theorem: Theorem::Thm3L2,
        norm: NormKind::L2,
        h,
        rho,
        assumptions,
        well_defined,
        quantities,
        notes,
        certified: false,
    }
    .finish())
}

/// `maxₖ(−λaₖₖ + ℓ·Σ_{m≠k}|·|)` with the off-diagonal sum over column `k`
/// or row `k`.
fn pattern_max<T: Real>(a: &DMatrix<T>, lam: T, ell: T, pattern: BlockPattern) -> T {
    let s = a.nrows();
    (0..s)
        .map(|k| {
            let off = (0..s).filter(|&m| m != k).fold(T::zero(), |acc, m| {
                acc + match pattern {
                    BlockPattern::Column => a[(m, k)].abs(),
                    BlockPattern::Row => a[(k, m)].abs(),
                }
            });
            -lam * a[(k, k)] + ell * off
        })
        .fold(-T::infinity(), |m, v| m.max(v))
}

fn resolve_comp_lips<T: Real>(
    comp_lips: Option<&DVector<T>>,
    ell: T,
    notes: &mut Vec<String>,
) -> Result<DVector<T>, ContractionError> {
    match comp_lips {
        Some(l) => {
            if l.is_empty() || l.iter().any(|x| !(x.is_finite() && *x >= T::zero())) {
                return Err(ContractionError::InvalidComponentLips);
            }
            Ok(l.clone())
        }
        None => {
            notes.push("component Lipschitz constants defaulted to ell".into());
            Ok(DVector::from_element(1, ell))
        }
    }
}

/// Checks the Thm 4/5 tableau condition A4 with the given off-diagonal
/// pattern, returning the assumption record.
fn a4_l1_type<T: Real>(a: &DMatrix<T>, v: &DVector<T>, lam: T, ell: T, pattern: BlockPattern) -> (Assumption<T>, T) {
    let diag_ok = (0..a.nrows()).all(|i| a[(i, i)] >= T::zero());
    let v_ok = v.iter().all(|&vi| vi >= T::zero());
    let vsum = v.sum();
    let worst = pattern_max(a, lam, ell, pattern);
    let margin = lam * vsum - worst;
    let mut reasons = Vec::new();
    if !diag_ok {
        reasons.push("negative diagonal entry of A");
    }
    if !v_ok {
        reasons.push("negative entry of v");
    }
    if !(margin > T::zero()) {
        reasons.push("lambda v^T 1 does not exceed the max");
    }
    let note = if reasons.is_empty() { String::new() } else { reasons.join("; ") };
    (Assumption { id: AssumptionId::A4, satisfied: reasons.is_empty(), margin, note }, worst)
}

fn a5_assumption<T: Real>(h: T, lam: T, v: &DVector<T>, lips: &DVector<T>) -> Assumption<T> {
    let s = T::from_usize(v.len()).expect("stage count");
    let first = T::one() - h * lam * v.sum();
    let lip_max = lips.iter().fold(T::zero(), |m, &x| m.max(x));
    let v_max = v.iter().fold(T::zero(), |m, &x| m.max(x));
    let second = T::one() - h * s * lip_max * v_max;
    let margin = first.min(second);
    Assumption {
        id: AssumptionId::A5,
        satisfied: margin >= T::zero(),
        margin,
        note: format!("1 - h lambda v^T 1 = {:e}, 1 - h s max(l_i v_k) = {:e}", first.to_f64_lossy(), second.to_f64_lossy()),
    }
}

fn rho_l1_type<T: Real>(
    tableau: &ButcherTableau,
    h: T,
    lam: T,
    ell: T,
    comp_lips: Option<&DVector<T>>,
    theorem: Theorem,
) -> Result<ContractionCertificate<T>, ContractionError> {
    check_inputs(h, lam, ell)?;
    let mut notes = Vec::new();
    let lips = resolve_comp_lips(comp_lips, ell, &mut notes)?;
    let a = tableau.to_real::<T>().a;
    let v = tableau.derive().v_real::<T>();

    let (a4_pattern, rho_pattern, wd_pattern) = match theorem {
        Theorem::Thm4L1 => (BlockPattern::Column, BlockPattern::Column, BlockPattern::Column),
        _ => (BlockPattern::Column, BlockPattern::Row, BlockPattern::Row),
    };
    let well_defined = if tableau.is_explicit() {
        explicit_report(h)
    } else {
        let block = certify_well_defined_block(tableau, h, -lam, ell, wd_pattern);
        best(block, certify_well_defined_cor1(tableau, h, ell))
    };
    let (a4, a4_max) = a4_l1_type(&a, &v, lam, ell, a4_pattern);
    let rho_max = pattern_max(&a, lam, ell, rho_pattern);
    let [a2, a3] = rate_assumptions(lam, ell);
    let a5 = a5_assumption(h, lam, &v, &lips);
    let assumptions = vec![a1_assumption(&well_defined), a2, a3, a4, a5];

    let vsum = v.sum();
    let mut quantities = vec![("v_sum", vsum), ("a4_max", a4_max), ("rho_max", rho_max)];
    if theorem == Theorem::Thm5Linf {
        quantities.push(("a4_max_row_pattern", pattern_max(&a, lam, ell, BlockPattern::Row)));
        quantities.push(("rho_max_column_pattern", pattern_max(&a, lam, ell, BlockPattern::Column)));
    }
    let denom = T::one() - h * rho_max;
    let rho = if denom > T::zero() {
        Some((T::one() - h * lam * vsum) / denom)
    } else {
        notes.push(format!("denominator {:e} is not positive", denom.to_f64_lossy()));
        None
    };

    Ok(ContractionCertificate {
        theorem,
        norm: theorem.norm_kind(),
        h,
        rho,
        assumptions,
        well_defined,
        quantities,
        notes,
        certified: false,
    }
    .finish())
}

/// Contraction factor in `‖·‖_{1,[η]}`. `comp_lips` are the constants
/// `ĥℓᵢ` of each component `fᵢ` in `xᵢ`; they default to `ℓ₁`.
pub fn rho_l1<T: Real>(
    tableau: &ButcherTableau,
    h: T,
    lam1: T,
    ell1: T,
    comp_lips: Option<&DVector<T>>,
) -> Result<ContractionCertificate<T>, ContractionError> {
    rho_l1_type(tableau, h, lam1, ell1, comp_lips, Theorem::Thm4L1)
}

/// Contraction factor in `‖·‖_{∞,[η]⁻¹}`. The tableau condition sums
/// `|aⱼᵢ|` down columns while the factor sums `|aᵢⱼ|` along rows; both
/// maxima are recorded.
pub fn rho_linf<T: Real>(
    tableau: &ButcherTableau,
    h: T,
    lam_inf: T,
    ell_inf: T,
    comp_lips: Option<&DVector<T>>,
) -> Result<ContractionCertificate<T>, ContractionError> {
    rho_l1_type(tableau, h, lam_inf, ell_inf, comp_lips, Theorem::Thm5Linf)
}

/// Largest `h` meeting the step conditions of the ℓ₁ theorem, or `None`
/// when every step qualifies (`v = 0`).
pub fn max_certified_step_l1<T: Real>(
    tableau: &ButcherTableau,
    lam1: T,
    ell1: T,
    comp_lips: Option<&DVector<T>>,
) -> Result<Option<T>, ContractionError> {
    check_inputs(T::zero(), lam1, ell1)?;
    let lips = resolve_comp_lips(comp_lips, ell1, &mut Vec::new())?;
    let a = tableau.to_real::<T>().a;
    let v = tableau.derive().v_real::<T>();
    let (a4, _) = a4_l1_type(&a, &v, lam1, ell1, BlockPattern::Column);
    if !a4.satisfied {
        return Err(ContractionError::A4Violated(a4.note));
    }
    let s = T::from_usize(v.len()).expect("stage count");
    let vsum = v.sum();
    let lip_max = lips.iter().fold(T::zero(), |m, &x| m.max(x));
    let v_max = v.iter().fold(T::zero(), |m, &x| m.max(x));
    let caps = [lam1 * vsum, s * lip_max * v_max];
    Ok(caps
        .iter()
        .filter(|c| **c > T::zero())
        .map(|c| T::one() / *c)
        .fold(None, |m: Option<T>, x| Some(m.map_or(x, |m| m.min(x)))))
}
