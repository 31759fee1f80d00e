//! Stacked stage vectors `y = (y₁, …, yₛ) ∈ ℝ^{sn}` and the stage
//! evaluation `F_c(t, y) = (f(t + τ₁, y₁), …, f(t + τₛ, yₛ))`.

use nalgebra::{DMatrix, DVector};

use crate::fields::{FieldError, VectorField};
use crate::scalar::Real;

/// How the stage times `τᵢ` are formed from the tableau's `cᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StageTime {
    /// `τᵢ = cᵢ`, as the stage equations are usually written in the
    /// contraction literature for this scheme.
    #[default]
    Literal,
    /// `τᵢ = cᵢ·h`, the textbook convention.
    ScaledByH,
}

impl StageTime {
    pub fn offset<T: Real>(self, c: T, h: T) -> T {
        match self {
            StageTime::Literal => c,
            StageTime::ScaledByH => c * h,
        }
    }
}

/// Views `y` as the `n × s` matrix whose columns are the stage blocks.
pub fn as_blocks<T: Real>(y: &DVector<T>, n: usize) -> DMatrix<T> {
    let s = y.len() / n;
    DMatrix::from_column_slice(n, s, y.as_slice())
}

pub fn from_blocks<T: Real>(blocks: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(blocks.as_slice())
}

/// `𝟙ₛ ⊗ x`.
pub fn repeat_state<T: Real>(x: &DVector<T>, s: usize) -> DVector<T> {
    DVector::from_iterator(x.len() * s, (0..s).flat_map(|_| x.iter().copied()))
}

/// Evaluates `F_c(t, y)` as an `n × s` block matrix.
pub fn eval_stages<T: Real>(
    f: &VectorField<T>,
    t: T,
    h: T,
    c: &DVector<T>,
    mode: StageTime,
    blocks: &DMatrix<T>,
) -> Result<DMatrix<T>, FieldError> {
    let n = blocks.nrows();
    let mut out = DMatrix::zeros(n, blocks.ncols());
    for (i, col) in blocks.column_iter().enumerate() {
        let fi = f.try_eval(t + mode.offset(c[i], h), &col.into_owned())?;
        out.set_column(i, &fi);
    }
    Ok(out)
}
