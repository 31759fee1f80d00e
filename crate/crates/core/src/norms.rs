//! Weighted ℓ₁/ℓ₂/ℓ∞ norms with their compatible weak pairings, induced
//! matrix norms and induced log norms (matrix measures).
//!
//! | family | vector norm            | weak pairing `⟦x; y⟧`                          |
//! |--------|------------------------|-------------------------------------------------|
//! | ℓ₁     | `ηᵀ|x|`                | `‖y‖ · sign(y)ᵀ[η]x`                            |
//! | ℓ₂     | `√(xᵀPx)`              | `yᵀPx`                                          |
//! | ℓ∞     | `maxᵢ |xᵢ|/ηᵢ`         | `max_{i ∈ I∞([η]⁻¹y)} ηᵢ⁻² yᵢ xᵢ`               |
//!
//! `I∞(z)` is the set of indices where `|zᵢ| = ‖z‖∞`; ties are resolved by
//! taking the maximum over every attaining index.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::scalar::Real;

/// Smallest admissible `λmin(P) / λmax(P)` for an ℓ₂ weight.
pub const MIN_WEIGHT_CONDITION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormError {
    #[error("dimension mismatch: norm has dimension {expected}, argument has {found}")]
    Dimension { expected: usize, found: usize },
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("weights must be strictly positive and finite")]
    NonPositiveWeight,
    #[error("weight matrix is not symmetric")]
    NotSymmetric,
    #[error("weight matrix is not positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("weight matrix is too ill-conditioned (eigenvalue ratio {0:e})")]
    IllConditioned(f64),
    #[error("empty norm dimension")]
    Empty,
    #[error("cannot parse norm spec: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::L1 => "l1",
            NormKind::L2 => "l2",
            NormKind::Linf => "linf",
        })
    }
}

/// A validated weighted norm on `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormSpec<T: Real> {
    repr: Repr<T>,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr<T: Real> {
    L1(DVector<T>),
    L2 {
        p: DMatrix<T>,
        half: DMatrix<T>,
        inv_half: DMatrix<T>,
    },
    Linf(DVector<T>),
}

impl<T: Real> NormSpec<T> {
    /// `‖x‖_{1,[η]} = ηᵀ|x|`.
    pub fn l1(eta: DVector<T>) -> Result<Self, NormError> {
        check_weights(&eta)?;
        Ok(Self { repr: Repr::L1(eta) })
    }

    /// `‖x‖_{∞,[η]⁻¹} = maxᵢ |xᵢ|/ηᵢ`.
    pub fn linf(eta: DVector<T>) -> Result<Self, NormError> {
        check_weights(&eta)?;
        Ok(Self { repr: Repr::Linf(eta) })
    }

    /// `‖x‖_{2,P^{1/2}} = √(xᵀPx)` for symmetric positive definite `P`.
    pub fn l2(p: DMatrix<T>) -> Result<Self, NormError> {
        let n = p.nrows();
        if n == 0 {
            return Err(NormError::Empty);
        }
        if p.ncols() != n {
            return Err(NormError::NotSquare { rows: n, cols: p.ncols() });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(NormError::NonPositiveWeight);
        }
        let scale = p.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let asym = (&p - p.transpose()).iter().fold(T::zero(), |m, x| m.max(x.abs()));
        if asym > T::lit(1e-12) * scale {
            return Err(NormError::NotSymmetric);
        }
        let sym = (&p + p.transpose()) * T::lit(0.5);
        let eig = SymmetricEigen::new(sym.clone());
        let lo = eig.eigenvalues.iter().copied().fold(T::infinity(), |m, x| m.min(x));
        let hi = eig.eigenvalues.iter().copied().fold(-T::infinity(), |m, x| m.max(x));
        if lo <= T::zero() {
            return Err(NormError::NotPositiveDefinite(lo.to_f64_lossy()));
        }
        if lo / hi < T::lit(MIN_WEIGHT_CONDITION) {
            return Err(NormError::IllConditioned((lo / hi).to_f64_lossy()));
        }
        let q = &eig.eigenvectors;
        let half = q * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.sqrt())) * q.transpose();
        let inv_half =
            q * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| T::one() / l.sqrt())) * q.transpose();
        Ok(Self { repr: Repr::L2 { p: sym, half, inv_half } })
    }

    /// ℓ₂ weighted by a positive diagonal, `P = [d]`.
    pub fn l2_diag(d: DVector<T>) -> Result<Self, NormError> {
        check_weights(&d)?;
        Self::l2(DMatrix::from_diagonal(&d))
    }

    pub fn l1_unweighted(n: usize) -> Self {
        Self::l1(DVector::from_element(n.max(1), T::one())).expect("unit weights")
    }

    pub fn linf_unweighted(n: usize) -> Self {
        Self::linf(DVector::from_element(n.max(1), T::one())).expect("unit weights")
    }

    pub fn l2_unweighted(n: usize) -> Self {
        Self::l2(DMatrix::identity(n.max(1), n.max(1))).expect("identity weight")
    }

    /// Unweighted norm of the given family.
    pub fn unweighted(kind: NormKind, n: usize) -> Self {
        match kind {
            NormKind::L1 => Self::l1_unweighted(n),
            NormKind::L2 => Self::l2_unweighted(n),
            NormKind::Linf => Self::linf_unweighted(n),
        }
    }

    pub fn kind(&self) -> NormKind {
        match self.repr {
            Repr::L1(_) => NormKind::L1,
            Repr::L2 { .. } => NormKind::L2,
            Repr::Linf(_) => NormKind::Linf,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::L1(eta) | Repr::Linf(eta) => eta.len(),
            Repr::L2 { p, .. } => p.nrows(),
        }
    }

    /// The weight vector `η` of an ℓ₁ or ℓ∞ norm.
    pub fn eta(&self) -> Option<&DVector<T>> {
        match &self.repr {
            Repr::L1(eta) | Repr::Linf(eta) => Some(eta),
            Repr::L2 { .. } => None,
        }
    }

    /// The weight matrix `P` of an ℓ₂ norm.
    pub fn p(&self) -> Option<&DMatrix<T>> {
        match &self.repr {
            Repr::L2 { p, .. } => Some(p),
            _ => None,
        }
    }

    /// The same family lifted to `ℝ^{sn}` with every stage block weighted
    /// like the component norm: `𝟙ₛ⊗η` for ℓ₁/ℓ∞ and `Iₛ⊗P` for ℓ₂.
    pub fn stacked(&self, s: usize) -> Self {
        match &self.repr {
            Repr::L1(eta) => Self { repr: Repr::L1(repeat(eta, s)) },
            Repr::Linf(eta) => Self { repr: Repr::Linf(repeat(eta, s)) },
            Repr::L2 { p, half, inv_half } => Self {
                repr: Repr::L2 {
                    p: block_diag(p, s),
                    half: block_diag(half, s),
                    inv_half: block_diag(inv_half, s),
                },
            },
        }
    }

    fn check_vec(&self, x: &DVector<T>) -> Result<(), NormError> {
        if x.len() != self.dim() {
            return Err(NormError::Dimension { expected: self.dim(), found: x.len() });
        }
        Ok(())
    }

    fn check_mat(&self, b: &DMatrix<T>) -> Result<(), NormError> {
        if !b.is_square() {
            return Err(NormError::NotSquare { rows: b.nrows(), cols: b.ncols() });
        }
        if b.nrows() != self.dim() {
            return Err(NormError::Dimension { expected: self.dim(), found: b.nrows() });
        }
        Ok(())
    }

    pub fn vec_norm(&self, x: &DVector<T>) -> Result<T, NormError> {
        self.check_vec(x)?;
        Ok(self.norm_unchecked(x))
    }

    pub(crate) fn norm_unchecked(&self, x: &DVector<T>) -> T {
        match &self.repr {
            Repr::L1(eta) => eta.iter().zip(x.iter()).fold(T::zero(), |acc, (&e, &xi)| acc + e * xi.abs()),
            Repr::Linf(eta) => eta
                .iter()
                .zip(x.iter())
                .fold(T::zero(), |acc, (&e, &xi)| acc.max(xi.abs() / e)),
            Repr::L2 { p, .. } => (x.transpose() * p * x)[(0, 0)].max(T::zero()).sqrt(),
        }
    }

    /// The compatible weak pairing `⟦x; y⟧`.
    pub fn weak_pairing(&self, x: &DVector<T>, y: &DVector<T>) -> Result<T, NormError> {
        self.check_vec(x)?;
        self.check_vec(y)?;
        Ok(self.pairing_unchecked(x, y))
    }

    pub(crate) fn pairing_unchecked(&self, x: &DVector<T>, y: &DVector<T>) -> T {
        match &self.repr {
            Repr::L2 { p, .. } => (y.transpose() * p * x)[(0, 0)],
            Repr::L1(eta) => {
                let signed = eta
                    .iter()
                    .zip(x.iter().zip(y.iter()))
                    .fold(T::zero(), |acc, (&e, (&xi, &yi))| acc + sign(yi) * e * xi);
                self.norm_unchecked(y) * signed
            }
            Repr::Linf(eta) => {
                let top = self.norm_unchecked(y);
                eta.iter()
                    .zip(x.iter().zip(y.iter()))
                    .filter(|(&e, (_, &yi))| yi.abs() / e == top)
                    .map(|(&e, (&xi, &yi))| yi * xi / (e * e))
                    .fold(-T::infinity(), |m, v| m.max(v))
            }
        }
    }

    /// `‖B‖ = max_{‖x‖=1} ‖Bx‖`.
    pub fn induced_matrix_norm(&self, b: &DMatrix<T>) -> Result<T, NormError> {
        self.check_mat(b)?;
        let n = b.nrows();
        Ok(match &self.repr {
            Repr::L1(eta) => (0..n)
                .map(|j| (0..n).fold(T::zero(), |acc, i| acc + eta[i] * b[(i, j)].abs()) / eta[j])
                .fold(T::zero(), |m, v| m.max(v)),
            Repr::Linf(eta) => (0..n)
                .map(|i| (0..n).fold(T::zero(), |acc, j| acc + eta[j] * b[(i, j)].abs()) / eta[i])
                .fold(T::zero(), |m, v| m.max(v)),
            Repr::L2 { half, inv_half, .. } => (half * b * inv_half)
                .singular_values()
                .iter()
                .copied()
                .fold(T::zero(), |m, v| m.max(v)),
        })
    }

    /// Induced log norm `μ(B) = lim_{h→0⁺} (‖I + hB‖ − 1)/h`.
    pub fn log_norm(&self, b: &DMatrix<T>) -> Result<T, NormError> {
        self.check_mat(b)?;
        let n = b.nrows();
        Ok(match &self.repr {
            Repr::L1(eta) => (0..n)
                .map(|j| {
                    b[(j, j)]
                        + (0..n)
                            .filter(|&i| i != j)
                            .fold(T::zero(), |acc, i| acc + eta[i] / eta[j] * b[(i, j)].abs())
                })
                .fold(-T::infinity(), |m, v| m.max(v)),
            Repr::Linf(eta) => (0..n)
                .map(|i| {
                    b[(i, i)]
                        + (0..n)
                            .filter(|&j| j != i)
                            .fold(T::zero(), |acc, j| acc + eta[j] / eta[i] * b[(i, j)].abs())
                })
                .fold(-T::infinity(), |m, v| m.max(v)),
            Repr::L2 { half, inv_half, .. } => {
                let c = half * b * inv_half;
                let sym = (&c + c.transpose()) * T::lit(0.5);
                SymmetricEigen::new(sym)
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(-T::infinity(), |m, v| m.max(v))
            }
        })
    }
}

impl<T: Real> fmt::Display for NormSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |v: &DVector<T>| {
            v.iter().map(|x| format!("{}", x.to_f64_lossy())).collect::<Vec<_>>().join(",")
        };
        match &self.repr {
            Repr::L1(eta) => write!(f, "l1:{}", list(eta)),
            Repr::Linf(eta) => write!(f, "linf:{}", list(eta)),
            Repr::L2 { p, .. } => {
                if p.is_identity(T::zero()) {
                    write!(f, "l2")
                } else if (p - DMatrix::from_diagonal(&p.diagonal())).iter().all(|x| *x == T::zero()) {
                    write!(f, "l2[diag:{}]", list(&p.diagonal()))
                } else {
                    write!(f, "l2[P]")
                }
            }
        }
    }
}

/// Parses `l1`, `l1:η₁,η₂,…`, `linf`, `linf:…`, `l2` or `l2:<path to P>`
/// for a state of dimension `n`. The `P` file holds the matrix rows as
/// whitespace-separated numbers.
pub fn parse_norm_spec<T: Real>(spec: &str, n: usize) -> Result<NormSpec<T>, NormError> {
    let (family, arg) = match spec.split_once(':') {
        Some((f, a)) => (f.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    let weights = |arg: &str| -> Result<DVector<T>, NormError> {
        let values = arg
            .split(',')
            .map(|w| w.trim().parse::<f64>().map(T::lit))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| NormError::Parse(format!("weight list `{arg}`: {e}")))?;
        if values.len() != n {
            return Err(NormError::Dimension { expected: n, found: values.len() });
        }
        Ok(DVector::from_vec(values))
    };
    match (family.to_ascii_lowercase().as_str(), arg) {
        ("l1", None) => Ok(NormSpec::l1_unweighted(n)),
        ("l1", Some(a)) => NormSpec::l1(weights(a)?),
        ("linf", None) => Ok(NormSpec::linf_unweighted(n)),
        ("linf", Some(a)) => NormSpec::linf(weights(a)?),
        ("l2", None) => Ok(NormSpec::l2_unweighted(n)),
        ("l2", Some(path)) => {
            let p = read_matrix(Path::new(path))?;
            if p.nrows() != n {
                return Err(NormError::Dimension { expected: n, found: p.nrows() });
            }
            NormSpec::l2(p)
        }
        _ => Err(NormError::Parse(format!("unknown norm `{spec}`"))),
    }
}

fn read_matrix<T: Real>(path: &Path) -> Result<DMatrix<T>, NormError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| NormError::Parse(format!("{}: {e}", path.display())))?;
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map(T::lit))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| NormError::Parse(format!("{}: {e}", path.display())))?;
    let n = rows.len();
    if n == 0 {
        return Err(NormError::Empty);
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(NormError::NotSquare { rows: n, cols: bad.len() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_weights<T: Real>(w: &DVector<T>) -> Result<(), NormError> {
    if w.is_empty() {
        return Err(NormError::Empty);
    }
    if w.iter().any(|&x| !(x.is_finite() && x > T::zero())) {
        return Err(NormError::NonPositiveWeight);
    }
    Ok(())
}

fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

fn repeat<T: Real>(v: &DVector<T>, s: usize) -> DVector<T> {
    DVector::from_iterator(v.len() * s, (0..s).flat_map(|_| v.iter().copied()))
}

fn block_diag<T: Real>(m: &DMatrix<T>, s: usize) -> DMatrix<T> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n * s, n * s);
    for k in 0..s {
        out.view_mut((k * n, k * n), (n, n)).copy_from(m);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{dmatrix, dvector};

    fn rot() -> DMatrix<f64> {
        let r3 = 3f64.sqrt();
        dmatrix![-1.0, r3; -r3, -1.0]
    }

    #[test]
    fn vector_norms() {
        assert_abs_diff_eq!(NormSpec::l2_unweighted(2).vec_norm(&dvector![3.0, -4.0]).unwrap(), 5.0);
        let l1 = NormSpec::l1(dvector![2.0, 3.0]).unwrap();
        assert_eq!(l1.vec_norm(&dvector![1.0, -2.0]).unwrap(), 8.0);
        let linf = NormSpec::linf(dvector![2.0, 1.0]).unwrap();
        assert_eq!(linf.vec_norm(&dvector![1.0, -2.0]).unwrap(), 2.0);
        assert_eq!(linf.vec_norm(&dvector![0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_errors() {
        let n = NormSpec::<f64>::l1_unweighted(2);
        assert_eq!(
            n.vec_norm(&dvector![1.0]).unwrap_err(),
            NormError::Dimension { expected: 2, found: 1 }
        );
        assert!(n.weak_pairing(&dvector![1.0, 2.0], &dvector![1.0]).is_err());
        assert!(n.induced_matrix_norm(&DMatrix::identity(3, 3)).is_err());
        assert!(n.log_norm(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn weight_validation() {
        assert_eq!(NormSpec::l1(dvector![1.0, 0.0]).unwrap_err(), NormError::NonPositiveWeight);
        assert_eq!(NormSpec::linf(dvector![1.0, -2.0]).unwrap_err(), NormError::NonPositiveWeight);
        assert_eq!(NormSpec::l2(dmatrix![1.0, 0.5; 0.0, 1.0]).unwrap_err(), NormError::NotSymmetric);
        assert!(matches!(
            NormSpec::l2(dmatrix![1.0, 2.0; 2.0, 1.0]).unwrap_err(),
            NormError::NotPositiveDefinite(_)
        ));
        assert!(matches!(
            NormSpec::l2(dmatrix![1.0, 0.0; 0.0, 1e-14]).unwrap_err(),
            NormError::IllConditioned(_)
        ));
    }

    #[test]
    fn pairings() {
        let l1 = NormSpec::l1_unweighted(2);
        assert_eq!(l1.weak_pairing(&dvector![1.0, -2.0], &dvector![1.0, -2.0]).unwrap(), 9.0);
        assert_eq!(l1.weak_pairing(&dvector![1.0, -1.0], &dvector![2.0, 1.0]).unwrap(), 0.0);
        let l2 = NormSpec::l2_unweighted(2);
        assert_eq!(l2.weak_pairing(&dvector![1.0, 0.0], &dvector![0.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn linf_pairing_takes_max_over_ties() {
        let linf = NormSpec::linf_unweighted(3);
        // y attains its max modulus at indices 0 and 2
        let y = dvector![2.0, 1.0, -2.0];
        let x = dvector![1.0, 5.0, -3.0];
        // candidates: 2*1 = 2 and (-2)(-3) = 6
        assert_eq!(linf.weak_pairing(&x, &y).unwrap(), 6.0);
        assert_eq!(linf.weak_pairing(&x, &DVector::zeros(3)).unwrap(), 0.0);
    }

    #[test]
    fn l1_pairing_sign_of_zero() {
        let l1 = NormSpec::l1_unweighted(2);
        let y = dvector![0.0, 3.0];
        assert_eq!(l1.weak_pairing(&y, &y).unwrap(), 9.0);
        assert_eq!(l1.weak_pairing(&dvector![100.0, 0.0], &y).unwrap(), 0.0);
    }

    #[test]
    fn induced_norms() {
        let id = DMatrix::<f64>::identity(2, 2);
        for kind in [NormKind::L1, NormKind::L2, NormKind::Linf] {
            assert_abs_diff_eq!(NormSpec::unweighted(kind, 2).induced_matrix_norm(&id).unwrap(), 1.0, epsilon = 1e-14);
        }
        let nil = dmatrix![0.0, 2.0; 0.0, 0.0];
        assert_eq!(NormSpec::l1_unweighted(2).induced_matrix_norm(&nil).unwrap(), 2.0);
        assert_abs_diff_eq!(NormSpec::l2_unweighted(2).induced_matrix_norm(&rot()).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn log_norms() {
        let neg = -DMatrix::<f64>::identity(3, 3);
        for kind in [NormKind::L1, NormKind::L2, NormKind::Linf] {
            assert_abs_diff_eq!(NormSpec::unweighted(kind, 3).log_norm(&neg).unwrap(), -1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(NormSpec::l2_unweighted(2).log_norm(&rot()).unwrap(), -1.0, epsilon = 1e-12);
        let ie = dmatrix![-1.0];
        assert_eq!(NormSpec::l2_unweighted(1).log_norm(&ie).unwrap(), -1.0);
    }

    #[test]
    fn weighted_l2_matches_direct_quadratic_form() {
        let p = dmatrix![2.0f64, 0.5; 0.5, 1.0];
        let n = NormSpec::l2(p.clone()).unwrap();
        let x = dvector![0.3, -1.2];
        assert_abs_diff_eq!(n.vec_norm(&x).unwrap(), (x.transpose() * &p * &x)[(0, 0)].sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn stacked_weights() {
        let n = NormSpec::l1(dvector![1.0, 2.0]).unwrap().stacked(2);
        assert_eq!(n.eta().unwrap(), &dvector![1.0, 2.0, 1.0, 2.0]);
        let p = NormSpec::l2_diag(dvector![1.0, 3.0]).unwrap().stacked(2);
        assert_eq!(p.p().unwrap().diagonal(), dvector![1.0, 3.0, 1.0, 3.0]);
    }

    #[test]
    fn parse_specs() {
        let n: NormSpec<f64> = parse_norm_spec("l1:1,2", 2).unwrap();
        assert_eq!(n.kind(), NormKind::L1);
        assert_eq!(n.eta().unwrap(), &dvector![1.0, 2.0]);
        assert_eq!(parse_norm_spec::<f64>("linf", 3).unwrap().dim(), 3);
        assert_eq!(parse_norm_spec::<f64>("l2", 2).unwrap().p().unwrap(), &DMatrix::identity(2, 2));
        assert!(parse_norm_spec::<f64>("l1:1,2", 3).is_err());
        assert!(parse_norm_spec::<f64>("l7", 3).is_err());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.txt");
        std::fs::write(&path, "2 0.5\n0.5 1\n").unwrap();
        let n: NormSpec<f64> = parse_norm_spec(&format!("l2:{}", path.display()), 2).unwrap();
        assert_eq!(n.p().unwrap()[(0, 1)], 0.5);
    }

    #[test]
    fn works_in_single_precision() {
        let n = NormSpec::<f32>::l2_unweighted(2);
        assert!((n.vec_norm(&dvector![3.0f32, 4.0]).unwrap() - 5.0).abs() < 1e-6);
    }
}
