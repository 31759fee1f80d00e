//! Vector fields with declared contraction certificates, and sampling-based
//! estimators that give lower bounds on the true Lipschitz and one-sided
//! Lipschitz constants.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::norms::{NormError, NormSpec};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error(transparent)]
    Norm(#[from] NormError),
    #[error("field of dimension {expected} evaluated at a point of dimension {found}")]
    Dimension { expected: usize, found: usize },
    #[error("field `{0}` returned a non-finite value")]
    NonFinite(String),
    #[error("invalid certificate: {0}")]
    Certificate(String),
    #[error("negative radicand {0} in the forward Euler bound (is ell < lambda?)")]
    NegativeRadicand(f64),
    #[error("sample count must be at least 1")]
    NoSamples,
    #[error("every sampled pair was coincident")]
    NoValidPairs,
}

/// Declared bounds `Lip(f) ≤ lip` and `osLip(f) ≤ oslip` in some norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate<T> {
    pub lip: T,
    pub oslip: T,
}

impl<T: Real> Certificate<T> {
    /// `lip` may be infinite; `oslip ≤ lip` is enforced.
    pub fn new(lip: T, oslip: T) -> Result<Self, FieldError> {
        if lip.is_nan() || oslip.is_nan() || lip < T::zero() {
            return Err(FieldError::Certificate(format!(
                "lip = {}, oslip = {}",
                lip.to_f64_lossy(),
                oslip.to_f64_lossy()
            )));
        }
        if oslip > lip {
            return Err(FieldError::Certificate(format!(
                "oslip {} exceeds lip {}",
                oslip.to_f64_lossy(),
                lip.to_f64_lossy()
            )));
        }
        Ok(Self { lip, oslip })
    }

    /// Contraction rate `λ = −oslip`; positive iff strongly contracting.
    pub fn rate(&self) -> T {
        -self.oslip
    }
}

pub type FieldFn<T> = dyn Fn(T, &DVector<T>) -> DVector<T> + Send + Sync;

/// `ẋ = f(t, x)` on `ℝⁿ` with optional certificates.
#[derive(Clone)]
pub struct VectorField<T: Real> {
    dim: usize,
    eval: Arc<FieldFn<T>>,
    certificates: Vec<(NormSpec<T>, Certificate<T>)>,
    component_lips: Option<DVector<T>>,
    label: String,
}

impl<T: Real> VectorField<T> {
    pub fn new<F>(label: impl Into<String>, dim: usize, eval: F) -> Self
    where
        F: Fn(T, &DVector<T>) -> DVector<T> + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Arc::new(eval),
            certificates: Vec::new(),
            component_lips: None,
            label: label.into(),
        }
    }

    /// Declares a certificate; replaces any earlier one for the same norm.
    pub fn with_certificate(mut self, norm: NormSpec<T>, cert: Certificate<T>) -> Result<Self, FieldError> {
        if norm.dim() != self.dim {
            return Err(FieldError::Dimension { expected: self.dim, found: norm.dim() });
        }
        self.certificates.retain(|(n, _)| n != &norm);
        self.certificates.push((norm, cert));
        Ok(self)
    }

    /// Per-component constants `ĥℓᵢ`: Lipschitz constant of `fᵢ` in `xᵢ`
    /// uniformly in the other variables.
    pub fn with_component_lips(mut self, lips: DVector<T>) -> Result<Self, FieldError> {
        if lips.len() != self.dim {
            return Err(FieldError::Dimension { expected: self.dim, found: lips.len() });
        }
        self.component_lips = Some(lips);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn certificates(&self) -> &[(NormSpec<T>, Certificate<T>)] {
        &self.certificates
    }

    pub fn certificate(&self, norm: &NormSpec<T>) -> Option<Certificate<T>> {
        self.certificates.iter().find(|(n, _)| n == norm).map(|(_, c)| *c)
    }

    pub fn component_lips(&self) -> Option<&DVector<T>> {
        self.component_lips.as_ref()
    }

    /// Evaluates without checks.
    pub fn eval(&self, t: T, x: &DVector<T>) -> DVector<T> {
        (self.eval)(t, x)
    }

    /// Evaluates with dimension and finiteness checks.
    pub fn try_eval(&self, t: T, x: &DVector<T>) -> Result<DVector<T>, FieldError> {
        if x.len() != self.dim {
            return Err(FieldError::Dimension { expected: self.dim, found: x.len() });
        }
        let out = (self.eval)(t, x);
        if out.len() != self.dim {
            return Err(FieldError::Dimension { expected: self.dim, found: out.len() });
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite(self.label.clone()));
        }
        Ok(out)
    }
}

impl<T: Real> fmt::Debug for VectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("certificates", &self.certificates)
            .field("component_lips", &self.component_lips)
            .finish_non_exhaustive()
    }
}

/// Empirical lower bounds obtained from a common batch of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateEstimate<T: Real> {
    pub norm: NormSpec<T>,
    pub lip_lower: T,
    pub oslip_lower: T,
    pub samples_used: usize,
}

/// Deterministic source of point pairs in an axis-aligned box.
///
/// Even-indexed pairs are two independent uniform points; odd-indexed pairs
/// are `(x, x + ε·u)` with `u` a random unit vector, which probes the
/// differential supremum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSampler {
    pub lo: f64,
    pub hi: f64,
    pub perturbation: f64,
    pub t_range: (f64, f64),
    pub seed: u64,
}

impl Default for PairSampler {
    fn default() -> Self {
        Self { lo: -5.0, hi: 5.0, perturbation: 1e-4, t_range: (0.0, 1.0), seed: 0 }
    }
}

impl PairSampler {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn with_box(mut self, lo: f64, hi: f64) -> Self {
        self.lo = lo;
        self.hi = hi;
        self
    }

    /// `count` samples `(t, x, y)` in dimension `n`.
    pub fn pairs<T: Real>(&self, n: usize, count: usize) -> Vec<(T, DVector<T>, DVector<T>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..count)
            .map(|k| {
                let t = rng.random_range(self.t_range.0..=self.t_range.1);
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(self.lo..=self.hi)).collect();
                let y: Vec<f64> = if k % 2 == 0 {
                    (0..n).map(|_| rng.random_range(self.lo..=self.hi)).collect()
                } else {
                    let u = random_unit(&mut rng, n);
                    x.iter().zip(&u).map(|(xi, ui)| xi + self.perturbation * ui).collect()
                };
                (T::lit(t), to_vec(&x), to_vec(&y))
            })
            .collect()
    }
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    loop {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-3 && norm <= 1.0 {
            return u.into_iter().map(|v| v / norm).collect();
        }
    }
}

fn to_vec<T: Real>(v: &[f64]) -> DVector<T> {
    DVector::from_iterator(v.len(), v.iter().map(|&x| T::lit(x)))
}

/// Max of `‖f(t,x) − f(t,y)‖ / ‖x − y‖` over the sampled pairs.
pub fn estimate_lipschitz<T: Real>(
    f: &VectorField<T>,
    norm: &NormSpec<T>,
    sampler: &PairSampler,
    count: usize,
) -> Result<T, FieldError> {
    estimate_certificates(f, norm, sampler, count).map(|e| e.lip_lower)
}

/// Max of `⟦f(t,x) − f(t,y); x − y⟧ / ‖x − y‖²` over the sampled pairs.
pub fn estimate_one_sided_lipschitz<T: Real>(
    f: &VectorField<T>,
    norm: &NormSpec<T>,
    sampler: &PairSampler,
    count: usize,
) -> Result<T, FieldError> {
    estimate_certificates(f, norm, sampler, count).map(|e| e.oslip_lower)
}

/// Both quotients over one batch of samples. Coincident pairs are skipped.
pub fn estimate_certificates<T: Real>(
    f: &VectorField<T>,
    norm: &NormSpec<T>,
    sampler: &PairSampler,
    count: usize,
) -> Result<CertificateEstimate<T>, FieldError> {
    if count == 0 {
        return Err(FieldError::NoSamples);
    }
    if norm.dim() != f.dim() {
        return Err(FieldError::Dimension { expected: f.dim(), found: norm.dim() });
    }
    let pairs = sampler.pairs::<T>(f.dim(), count);
    let quotients = pairs
        .par_iter()
        .map(|(t, x, y)| {
            let dx = x - y;
            let dist = norm.norm_unchecked(&dx);
            if dist == T::zero() {
                return Ok(None);
            }
            let df = f.try_eval(*t, x)? - f.try_eval(*t, y)?;
            let lip = norm.norm_unchecked(&df) / dist;
            let oslip = norm.pairing_unchecked(&df, &dx) / (dist * dist);
            Ok(Some((lip, oslip)))
        })
        .collect::<Result<Vec<_>, FieldError>>()?;
    let mut used = 0;
    let mut lip_lower = -T::infinity();
    let mut oslip_lower = -T::infinity();
    for (lip, oslip) in quotients.into_iter().flatten() {
        used += 1;
        lip_lower = lip_lower.max(lip);
        oslip_lower = oslip_lower.max(oslip);
    }
    if used == 0 {
        return Err(FieldError::NoValidPairs);
    }
    Ok(CertificateEstimate { norm: norm.clone(), lip_lower, oslip_lower, samples_used: used })
}

/// Lower bounds on `ĥℓᵢ = sup |fᵢ(t, x + δeᵢ) − fᵢ(t, x)| / |δ|`, perturbing
/// one coordinate at a time.
pub fn estimate_component_lipschitz<T: Real>(
    f: &VectorField<T>,
    sampler: &PairSampler,
    count: usize,
) -> Result<DVector<T>, FieldError> {
    if count == 0 {
        return Err(FieldError::NoSamples);
    }
    let n = f.dim();
    let pairs = sampler.pairs::<T>(n, count);
    let rows = pairs
        .par_iter()
        .map(|(t, x, y)| {
            let fx = f.try_eval(*t, x)?;
            (0..n)
                .map(|i| {
                    let delta = y[i] - x[i];
                    if delta == T::zero() {
                        return Ok(T::zero());
                    }
                    let mut moved = x.clone();
                    moved[i] = y[i];
                    let fm = f.try_eval(*t, &moved)?;
                    Ok((fm[i] - fx[i]).abs() / delta.abs())
                })
                .collect::<Result<Vec<T>, FieldError>>()
        })
        .collect::<Result<Vec<_>, FieldError>>()?;
    Ok(DVector::from_fn(n, |i, _| rows.iter().fold(T::zero(), |m, r| m.max(r[i]))))
}

/// Euclidean bound `Lip(id + h·d·f) ≤ √(1 − 2hdλ + (hdℓ)²)` for a field
/// with `osLip ≤ −λ` and `Lip ≤ ℓ` in a weighted ℓ₂ norm.
pub fn forward_euler_lipschitz_l2<T: Real>(h: T, d: T, lam: T, ell: T) -> Result<T, FieldError> {
    let hd = h * d;
    let radicand = T::one() - T::lit(2.0) * hd * lam + (hd * ell) * (hd * ell);
    if radicand < T::zero() {
        return Err(FieldError::NegativeRadicand(radicand.to_f64_lossy()));
    }
    Ok(radicand.sqrt())
}

/// Norm-independent bound `Lip(id + h·f) ≤ e^{−hλ} + e^{hℓ} − 1 − hℓ`.
pub fn forward_euler_lipschitz_general<T: Real>(h: T, lam: T, ell: T) -> T {
    (-h * lam).exp() + (h * ell).exp() - T::one() - h * ell
}
