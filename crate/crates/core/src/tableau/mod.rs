//! Butcher tableaus and the structural quantities derived from them.
//!
//! Coefficients are held as exact rationals. The derived quantities
//! (`d0`, `d`, `v`, `M`) are computed in exact arithmetic and only converted
//! to floating point at the call site through [`ButcherTableau::to_real`] and
//! [`TableauDerived::m_real`].

mod catalog;
mod text;

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num::{BigRational, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::scalar::Real;

pub use catalog::{catalog_lookup, CatalogMethod, EXPLICIT_FIGURE_METHODS};
pub use text::parse_tableau;

/// Exact coefficient type.
pub type Coefficient = BigRational;

/// Default tolerance on the smallest eigenvalue of `M` for the PSD test.
pub const DEFAULT_PSD_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TableauError {
    #[error("stage count must be positive")]
    Empty,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite coefficient {value} at {location}")]
    NonFinite { location: String, value: String },
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// An `s`-stage Runge-Kutta method `(A, b, c)`.
#[derive(Clone, PartialEq, Eq)]
pub struct ButcherTableau {
    a: Vec<Vec<Coefficient>>,
    b: Vec<Coefficient>,
    c: Vec<Coefficient>,
    name: Option<String>,
}

/// Floating-point view of a tableau, converted once per use site.
#[derive(Debug, Clone, PartialEq)]
pub struct RealTableau<T: Real> {
    pub a: DMatrix<T>,
    pub b: DVector<T>,
    pub c: DVector<T>,
}

/// Structural quantities consumed by the contraction theorems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableauDerived {
    /// Sum of the weights `b`.
    pub d0: Coefficient,
    /// Strict row sums `d_i = sum_{j<i} a_ij`.
    pub d: Vec<Coefficient>,
    /// `v = b - A^T 1 / s`.
    pub v: Vec<Coefficient>,
    /// `M = [b]A + A^T[b] - b b^T`, symmetric.
    pub m: Vec<Vec<Coefficient>>,
}

/// Outcome of the algebraic stability test `M >= 0`, `b >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgebraicStability<T> {
    pub stable: bool,
    /// Smallest eigenvalue of `M`.
    pub min_eig_m: T,
    /// Smallest entry of `b`.
    pub min_b: T,
}

impl ButcherTableau {
    /// Builds a tableau from exact coefficients.
    pub fn new(
        a: Vec<Vec<Coefficient>>,
        b: Vec<Coefficient>,
        c: Vec<Coefficient>,
    ) -> Result<Self, TableauError> {
        let s = b.len();
        if s == 0 {
            return Err(TableauError::Empty);
        }
        if a.len() != s || a.iter().any(|row| row.len() != s) {
            return Err(TableauError::Dimension(format!(
                "A must be {s}x{s} to match b of length {s}"
            )));
        }
        if c.len() != s {
            return Err(TableauError::Dimension(format!(
                "c has length {} but b has length {s}",
                c.len()
            )));
        }
        Ok(Self { a, b, c, name: None })
    }

    /// Builds a tableau from floating-point coefficients; every finite `f64`
    /// is converted to the rational it represents exactly.
    pub fn from_f64(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<Self, TableauError> {
        let conv = |x: f64, loc: String| {
            BigRational::from_float(x).ok_or(TableauError::NonFinite {
                location: loc,
                value: x.to_string(),
            })
        };
        let a = a
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .map(|(j, &x)| conv(x, format!("A[{}][{}]", i + 1, j + 1)))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let b = b
            .iter()
            .enumerate()
            .map(|(i, &x)| conv(x, format!("b[{}]", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        let c = c
            .iter()
            .enumerate()
            .map(|(i, &x)| conv(x, format!("c[{}]", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(a, b, c)
    }

    /// Same as [`ButcherTableau::new`] with `c` set to the row sums of `A`.
    pub fn with_row_sum_c(a: Vec<Vec<Coefficient>>, b: Vec<Coefficient>) -> Result<Self, TableauError> {
        let c = a.iter().map(|row| row.iter().sum()).collect();
        Self::new(a, b, c)
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    /// Name for reports; falls back to `custom`.
    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("custom")
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &[Vec<Coefficient>] {
        &self.a
    }

    pub fn b(&self) -> &[Coefficient] {
        &self.b
    }

    pub fn c(&self) -> &[Coefficient] {
        &self.c
    }

    /// True iff `a_ij = 0` for all `i <= j`.
    pub fn is_explicit(&self) -> bool {
        self.a
            .iter()
            .enumerate()
            .all(|(i, row)| row[i..].iter().all(Zero::is_zero))
    }

    pub fn to_real<T: Real>(&self) -> RealTableau<T> {
        let s = self.stages();
        RealTableau {
            a: DMatrix::from_fn(s, s, |i, j| to_real(&self.a[i][j])),
            b: DVector::from_iterator(s, self.b.iter().map(to_real)),
            c: DVector::from_iterator(s, self.c.iter().map(to_real)),
        }
    }

    /// Computes `d0`, `d`, `v` and `M` exactly.
    pub fn derive(&self) -> TableauDerived {
        let s = self.stages();
        let d0: Coefficient = self.b.iter().sum();
        let d = self
            .a
            .iter()
            .enumerate()
            .map(|(i, row)| row[..i].iter().sum())
            .collect();
        let s_q = BigRational::from_integer(s.into());
        let v = (0..s)
            .map(|j| {
                let col: Coefficient = (0..s).map(|i| &self.a[i][j]).sum();
                &self.b[j] - col / &s_q
            })
            .collect();
        let m = (0..s)
            .map(|i| {
                (0..s)
                    .map(|j| {
                        &self.b[i] * &self.a[i][j] + &self.a[j][i] * &self.b[j]
                            - &self.b[i] * &self.b[j]
                    })
                    .collect()
            })
            .collect();
        TableauDerived { d0, d, v, m }
    }

    /// Algebraic stability: smallest eigenvalue of `M` and smallest weight
    /// both at least `-tol`.
    pub fn algebraic_stability<T: Real>(&self, tol: T) -> AlgebraicStability<T> {
        let derived = self.derive();
        let m = derived.m_real::<T>();
        let min_eig_m = SymmetricEigen::new(m)
            .eigenvalues
            .iter()
            .copied()
            .fold(T::infinity(), |acc, x| acc.min(x));
        let min_b = self
            .b
            .iter()
            .map(to_real::<T>)
            .fold(T::infinity(), |acc, x| acc.min(x));
        AlgebraicStability {
            stable: min_eig_m >= -tol && min_b >= -tol,
            min_eig_m,
            min_b,
        }
    }

    pub fn is_algebraically_stable(&self, tol: f64) -> bool {
        self.algebraic_stability(tol).stable
    }

    /// Exact test of `det A ≠ 0` by rational Gaussian elimination.
    pub fn is_a_invertible(&self) -> bool {
        let s = self.stages();
        let mut m = self.a.clone();
        for col in 0..s {
            let Some(pivot) = (col..s).find(|&r| !m[r][col].is_zero()) else {
                return false;
            };
            m.swap(col, pivot);
            for r in col + 1..s {
                if m[r][col].is_zero() {
                    continue;
                }
                let factor = &m[r][col] / &m[col][col];
                let (top, bottom) = m.split_at_mut(r);
                for (dst, src) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                    *dst -= &factor * src;
                }
            }
        }
        true
    }

    /// Largest absolute column sum of `A`.
    pub fn a_norm_1(&self) -> Coefficient {
        let s = self.stages();
        (0..s)
            .map(|j| (0..s).map(|i| self.a[i][j].abs()).sum::<Coefficient>())
            .max()
            .unwrap_or_else(Coefficient::zero)
    }
}

impl TableauDerived {
    pub fn m_real<T: Real>(&self) -> DMatrix<T> {
        let s = self.m.len();
        DMatrix::from_fn(s, s, |i, j| to_real(&self.m[i][j]))
    }

    pub fn v_real<T: Real>(&self) -> DVector<T> {
        DVector::from_iterator(self.v.len(), self.v.iter().map(to_real))
    }

    pub fn d_real<T: Real>(&self) -> DVector<T> {
        DVector::from_iterator(self.d.len(), self.d.iter().map(to_real))
    }

    pub fn d0_real<T: Real>(&self) -> T {
        to_real(&self.d0)
    }
}

pub(crate) fn to_real<T: Real>(q: &Coefficient) -> T {
    T::lit(q.to_f64().unwrap_or(f64::NAN))
}

impl fmt::Debug for ButcherTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ButcherTableau({})", self.label())?;
        write!(f, "{self}")
    }
}

impl fmt::Display for ButcherTableau {
    /// Writes the text config format accepted by [`parse_tableau`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |row: &[Coefficient]| {
            row.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
        };
        writeln!(f, "{}", self.stages())?;
        for row in &self.a {
            writeln!(f, "{}", join(row))?;
        }
        writeln!(f, "{}", join(&self.b))?;
        writeln!(f, "{}", join(&self.c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Coefficient {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn make_tableau_classifies() {
        let fe = ButcherTableau::from_f64(&[vec![0.0]], &[1.0], &[0.0]).unwrap();
        assert!(fe.is_explicit());
        let mid = ButcherTableau::from_f64(&[vec![0.5]], &[1.0], &[0.5]).unwrap();
        assert!(!mid.is_explicit());
    }

    #[test]
    fn make_tableau_rejects_bad_shapes() {
        let err = ButcherTableau::from_f64(&[vec![0.0, 0.0]], &[1.0], &[0.0]).unwrap_err();
        assert!(matches!(err, TableauError::Dimension(_)));
        let err = ButcherTableau::from_f64(&[vec![0.0]], &[1.0], &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, TableauError::Dimension(_)));
        assert_eq!(
            ButcherTableau::from_f64(&[], &[], &[]).unwrap_err(),
            TableauError::Empty
        );
    }

    #[test]
    fn make_tableau_rejects_non_finite() {
        let err = ButcherTableau::from_f64(&[vec![f64::NAN]], &[1.0], &[0.0]).unwrap_err();
        assert!(matches!(err, TableauError::NonFinite { .. }));
        let err = ButcherTableau::from_f64(&[vec![0.0]], &[f64::INFINITY], &[0.0]).unwrap_err();
        assert!(matches!(err, TableauError::NonFinite { .. }));
    }

    #[test]
    fn forward_euler_derived() {
        let d = catalog_lookup("forward_euler").unwrap().derive();
        assert_eq!(d.d0, q(1, 1));
        assert_eq!(d.d, vec![q(0, 1)]);
        assert_eq!(d.v, vec![q(1, 1)]);
        assert_eq!(d.m, vec![vec![q(-1, 1)]]);
    }

    #[test]
    fn implicit_v_values() {
        assert_eq!(catalog_lookup("implicit_midpoint").unwrap().derive().v, vec![q(1, 2)]);
        assert_eq!(catalog_lookup("implicit_euler").unwrap().derive().v, vec![q(0, 1)]);
    }

    #[test]
    fn m_is_symmetric() {
        for method in CatalogMethod::ALL {
            let m = method.tableau().derive().m;
            for (i, row) in m.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    assert_eq!(*v, m[j][i]);
                }
            }
        }
    }

    #[test]
    fn algebraic_stability_values() {
        let mid = catalog_lookup("implicit_midpoint").unwrap();
        let st = mid.algebraic_stability(1e-12);
        assert!(st.stable);
        assert_eq!(mid.derive().m, vec![vec![q(0, 1)]]);
        let ie = catalog_lookup("implicit_euler").unwrap();
        assert!(ie.is_algebraically_stable(1e-12));
        assert_eq!(ie.derive().m, vec![vec![q(1, 1)]]);
        let fe = catalog_lookup("forward_euler").unwrap().algebraic_stability(1e-12);
        assert!(!fe.stable);
        assert_eq!(fe.min_eig_m, -1.0);
    }

    #[test]
    fn derive_is_deterministic() {
        let t = catalog_lookup("ssprk5").unwrap();
        let (x, y) = (t.derive(), t.derive());
        assert_eq!(x, y);
        let (mx, my) = (x.m_real::<f64>(), y.m_real::<f64>());
        assert!(mx.iter().zip(my.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn invertibility_is_exact() {
        assert!(catalog_lookup("implicit_midpoint").unwrap().is_a_invertible());
        assert!(!catalog_lookup("rk4_classic").unwrap().is_a_invertible());
        let singular = ButcherTableau::from_f64(&[vec![1.0, 2.0], vec![0.5, 1.0]], &[0.5, 0.5], &[0.0, 0.0]).unwrap();
        assert!(!singular.is_a_invertible());
        let lobatto_iiic = ButcherTableau::from_f64(&[vec![0.5, -0.5], vec![0.5, 0.5]], &[0.5, 0.5], &[0.0, 1.0]).unwrap();
        assert!(lobatto_iiic.is_a_invertible());
    }

    #[test]
    fn a_norm_1_is_max_column_sum() {
        assert_eq!(catalog_lookup("implicit_midpoint").unwrap().a_norm_1(), q(1, 2));
        // ssprk5 column 1: 1/4 + 1/8 + 3/16 = 9/16; column 3: 1/2 + 3/8 = 7/8
        assert_eq!(catalog_lookup("ssprk5").unwrap().a_norm_1(), q(7, 8));
    }

    #[test]
    fn display_round_trips_through_parser() {
        for method in CatalogMethod::ALL {
            let t = method.tableau();
            let back = parse_tableau(&t.to_string()).unwrap();
            assert_eq!(back.a(), t.a());
            assert_eq!(back.b(), t.b());
            assert_eq!(back.c(), t.c());
        }
    }
}
