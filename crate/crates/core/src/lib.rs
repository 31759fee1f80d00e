//! Contraction analysis for Runge-Kutta discretizations of contracting
//! vector fields.
//!
//! The crate computes certified Lipschitz bounds `ρ` of explicit and
//! implicit Runge-Kutta one-step maps from the contraction rate `λ` and
//! Lipschitz constant `ℓ` of the continuous-time field, in weighted ℓ₁, ℓ₂
//! and ℓ∞ norms. Implicit stages are solved as the equilibrium of an
//! auxiliary contracting system. All numerics are generic over [`Real`]
//! (`f32` or `f64`); tableau coefficients are exact rationals.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contraction;
pub mod explicit;
pub mod fields;
pub mod harness;
pub mod implicit;
pub mod norms;
pub mod scalar;
pub mod stages;
pub mod tableau;

pub use contraction::{
    max_certified_step_l1, rho_l1, rho_l2, rho_linf, Assumption, ContractionCertificate, ContractionError, Theorem,
};
pub use explicit::{
    explicit_lipschitz_bound, explicit_lipschitz_bound_corrected, explicit_lipschitz_bound_with, explicit_step, rho_sweep,
    EulerBound, ExplicitError, ExplicitFormula, ExplicitRhoBound,
};
pub use fields::{Certificate, FieldError, VectorField};
pub use implicit::{
    auxiliary_field, certify_well_defined_cor1, certify_well_defined_cor2, implicit_step, implicit_step_rewritten,
    solve_stages, AuxiliaryConfig, ImplicitError, ImplicitStepper, QKind, StageSolveResult, WellDefinednessReport,
};
pub use norms::{parse_norm_spec, NormError, NormKind, NormSpec};
pub use scalar::Real;
pub use stages::StageTime;
pub use tableau::{catalog_lookup, parse_tableau, ButcherTableau, CatalogMethod, TableauError};

pub type NormSpecF64 = NormSpec<f64>;
pub type VectorFieldF64 = VectorField<f64>;
pub type CertificateF64 = Certificate<f64>;
pub type AuxiliaryConfigF64 = AuxiliaryConfig<f64>;
pub type StageSolveResultF64 = StageSolveResult<f64>;
pub type ContractionCertificateF64 = ContractionCertificate<f64>;
pub type NormSpecF32 = NormSpec<f32>;
pub type VectorFieldF32 = VectorField<f32>;
