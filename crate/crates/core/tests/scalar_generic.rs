//! The library runs at single precision and agrees with double precision to
//! single-precision accuracy.

use nalgebra::{DMatrix, DVector};
use rkcontract::contraction::rho_l2;
use rkcontract::tableau::CatalogMethod;
use rkcontract::{
    explicit_lipschitz_bound_corrected, implicit_step, AuxiliaryConfig, Certificate, EulerBound, NormSpecF32,
    VectorFieldF32,
};

#[test]
fn single_precision_bounds_match_double() {
    for m in CatalogMethod::ALL {
        let t = m.tableau();
        if t.is_explicit() {
            let a = explicit_lipschitz_bound_corrected(&t, 0.2f32, 1.0, 2.0, EulerBound::L2).unwrap().rho;
            let b = explicit_lipschitz_bound_corrected(&t, 0.2f64, 1.0, 2.0, EulerBound::L2).unwrap().rho;
            assert!((f64::from(a) - b).abs() < 1e-6, "{m}");
        } else {
            let a = rho_l2(&t, 0.7f32, 1.0, 2.0).unwrap().rho.unwrap();
            let b = rho_l2(&t, 0.7f64, 1.0, 2.0).unwrap().rho.unwrap();
            assert!((f64::from(a) - b).abs() < 1e-6, "{m}");
        }
    }
}

#[test]
fn single_precision_norms_and_steps() {
    let b = DMatrix::from_row_slice(2, 2, &[-1.0f32, 0.5, -0.5, -1.0]);
    let norm = NormSpecF32::l2_unweighted(2);
    assert!((norm.log_norm(&b).unwrap() + 1.0).abs() < 1e-6);
    let bc = b.clone();
    let f = VectorFieldF32::new("rot32", 2, move |_, x: &DVector<f32>| &bc * x)
        .with_certificate(norm.clone(), Certificate::new(norm.induced_matrix_norm(&b).unwrap(), -1.0).unwrap())
        .unwrap();
    let x = DVector::from_vec(vec![1.0f32, -2.0]);
    let cfg = AuxiliaryConfig::default().with_residual_tol(1e-5f32);
    let y = implicit_step(&CatalogMethod::ImplicitEuler.tableau(), &f, 0.0, &x, 0.5, &cfg).unwrap();
    // (I − hB) y = x
    let back = &y - &b * &y * 0.5;
    assert!((back - x).amax() < 1e-4);
}
