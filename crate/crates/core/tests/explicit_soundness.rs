//! The corrected explicit recursion bounds the true Lipschitz constant of the
//! one-step map. For a linear field the step is the matrix `G` whose columns
//! are the steps of the unit vectors, so `‖G‖` is the exact constant.

mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rkcontract::explicit::{explicit_lipschitz_bound_with, rho_sweep_with, ExplicitStepper};
use rkcontract::harness::euler_bound_for;
use rkcontract::norms::{NormKind, NormSpec};
use rkcontract::tableau::{CatalogMethod, EXPLICIT_FIGURE_METHODS};
use rkcontract::{explicit_step, EulerBound, ExplicitFormula, StageTime, VectorField};

use common::*;

fn linear_field(b: &DMatrix<f64>) -> VectorField<f64> {
    let bc = b.clone();
    VectorField::new("linear", b.nrows(), move |_, x: &DVector<f64>| &bc * x)
}

fn step_matrix(method: CatalogMethod, b: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let n = b.nrows();
    let f = linear_field(b);
    let stepper = ExplicitStepper::new(&method.tableau(), StageTime::Literal).unwrap();
    let mut g = DMatrix::zeros(n, n);
    for j in 0..n {
        let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        g.set_column(j, &stepper.step(&f, 0.0, &e, h).unwrap());
    }
    g
}

fn norm_of(kind: NormKind, eta: &DVector<f64>) -> NormSpec<f64> {
    match kind {
        NormKind::L1 => NormSpec::l1(eta.clone()),
        NormKind::Linf => NormSpec::linf(eta.clone()),
        NormKind::L2 => NormSpec::l2_diag(eta.clone()),
    }
    .unwrap()
}

fn strategy() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>, usize, usize, f64)> {
    (1usize..=3).prop_flat_map(|n| {
        (
            Just(n),
            prop::collection::vec(-1.0f64..1.0, n * n),
            prop::collection::vec(0.5f64..2.0, n),
            0usize..5,
            0usize..3,
            0.01f64..1.5,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn corrected_bound_dominates_linear_step_norm((n, raw, eta, m, k, h) in strategy()) {
        let method = EXPLICIT_FIGURE_METHODS[m];
        let kind = [NormKind::L1, NormKind::L2, NormKind::Linf][k];
        let norm = norm_of(kind, &DVector::from_vec(eta));
        // shift the diagonal so the field contracts in `norm`
        let mut b = DMatrix::from_row_slice(n, n, &raw);
        let mu = norm.log_norm(&b).unwrap();
        b -= DMatrix::identity(n, n) * (mu + 0.5);
        let lam = -norm.log_norm(&b).unwrap();
        let ell = norm.induced_matrix_norm(&b).unwrap().max(lam);
        prop_assume!(lam > 0.0);
        let bound = explicit_lipschitz_bound_with(&method.tableau(), h, lam, ell, euler_bound_for(kind), ExplicitFormula::Corrected).unwrap();
        let exact = norm.induced_matrix_norm(&step_matrix(method, &b, h)).unwrap();
        prop_assert!(exact <= bound.rho + 1e-12, "{method} {kind} h={h}: exact {exact} > rho {}", bound.rho);
    }

    #[test]
    fn general_euler_factor_is_also_sound_in_l2((n, raw, eta, m, _k, h) in strategy()) {
        let method = EXPLICIT_FIGURE_METHODS[m];
        let norm = norm_of(NormKind::L2, &DVector::from_vec(eta));
        let mut b = DMatrix::from_row_slice(n, n, &raw);
        b -= DMatrix::identity(n, n) * (norm.log_norm(&b).unwrap() + 0.3);
        let lam = -norm.log_norm(&b).unwrap();
        let ell = norm.induced_matrix_norm(&b).unwrap().max(lam);
        prop_assume!(lam > 0.0);
        let tableau = method.tableau();
        let general = explicit_lipschitz_bound_with(&tableau, h, lam, ell, EulerBound::General, ExplicitFormula::Corrected).unwrap();
        let l2 = explicit_lipschitz_bound_with(&tableau, h, lam, ell, EulerBound::L2, ExplicitFormula::Corrected).unwrap();
        let exact = norm.induced_matrix_norm(&step_matrix(method, &b, h)).unwrap();
        prop_assert!(exact <= general.rho + 1e-12);
        // the inner-product factor is never worse than the general one
        prop_assert!(l2.rho <= general.rho + 1e-12);
    }

    #[test]
    fn corrected_never_below_printed(m in 0usize..5, h in 0.001f64..2.0, lam in 0.1f64..3.0, extra in 0.0f64..3.0) {
        let tableau = EXPLICIT_FIGURE_METHODS[m].tableau();
        for euler in [EulerBound::L2, EulerBound::General] {
            let p = explicit_lipschitz_bound_with(&tableau, h, lam, lam + extra, euler, ExplicitFormula::Printed).unwrap();
            let c = explicit_lipschitz_bound_with(&tableau, h, lam, lam + extra, euler, ExplicitFormula::Corrected).unwrap();
            prop_assert!(c.rho >= p.rho - 1e-15);
            prop_assert_eq!(&c.stage_rhos, &p.stage_rhos);
        }
    }
}

#[test]
fn corrected_bound_holds_on_nonlinear_fields() {
    let mut rng = rng(11);
    let mut checked = 0;
    for _ in 0..40 {
        let n = rng.random_range(1..=3);
        let f = random_tanh_field(&mut rng, n);
        let (norm, cert) = f.certificates()[0].clone();
        if cert.rate() <= 0.0 {
            continue;
        }
        for method in EXPLICIT_FIGURE_METHODS {
            let h = rng.random_range(0.02..0.8);
            let tableau = method.tableau();
            let bound = explicit_lipschitz_bound_with(&tableau, h, cert.rate(), cert.lip, EulerBound::L2, ExplicitFormula::Corrected).unwrap();
            for _ in 0..50 {
                let x = random_vector(&mut rng, n, 3.0);
                let d = random_vector(&mut rng, n, 1.0) * 10f64.powf(rng.random_range(-4.0..0.0));
                let y = &x + &d;
                let gx = explicit_step(&tableau, &f, 0.0, &x, h, StageTime::Literal).unwrap();
                let gy = explicit_step(&tableau, &f, 0.0, &y, h, StageTime::Literal).unwrap();
                let ratio = norm.vec_norm(&(gx - gy)).unwrap() / norm.vec_norm(&d).unwrap();
                assert!(ratio <= bound.rho + 1e-9, "{method} h={h}: {ratio} > {}", bound.rho);
            }
            checked += 1;
        }
    }
    assert!(checked > 50);
}

#[test]
fn printed_bound_is_exceeded_by_heun_on_scalar_decay() {
    // ẋ = −x with λ = ℓ = 1: the step is multiplication by 1 − h + h²/2
    let f = linear_field(&DMatrix::from_element(1, 1, -1.0));
    let tableau = CatalogMethod::Heun2.tableau();
    for h in [0.05, 0.1, 0.3] {
        let exact = explicit_step(&tableau, &f, 0.0, &DVector::from_element(1, 1.0), h, StageTime::Literal).unwrap()[0];
        assert!((exact - (1.0 - h + h * h / 2.0)).abs() < 1e-15);
        let printed = explicit_lipschitz_bound_with(&tableau, h, 1.0, 1.0, EulerBound::L2, ExplicitFormula::Printed).unwrap();
        let corrected = explicit_lipschitz_bound_with(&tableau, h, 1.0, 1.0, EulerBound::L2, ExplicitFormula::Corrected).unwrap();
        assert!(printed.rho < exact, "h={h}: printed {} not below {exact}", printed.rho);
        assert!(corrected.rho >= exact - 1e-15);
    }
}

#[test]
fn corrected_curves_still_contract_for_small_steps() {
    let grid: Vec<f64> = (1..=400).map(|k| k as f64 * 0.0025).collect();
    for (lam, ell) in [(1.0, 2.0), (2.0, 2.0)] {
        for method in EXPLICIT_FIGURE_METHODS {
            let rows = rho_sweep_with(&method.tableau(), lam, ell, EulerBound::L2, ExplicitFormula::Corrected, &grid).unwrap();
            let min = rows.iter().filter_map(|r| r.rho()).fold(f64::INFINITY, f64::min);
            assert!(min < 1.0, "{method} at ({lam}, {ell}): min rho {min}");
            assert!((rows[0].rho().unwrap() - 1.0).abs() < 0.02);
        }
    }
}

#[test]
fn stage_time_only_matters_for_time_dependent_fields() {
    let f = VectorField::new("forced", 1, |t: f64, x: &DVector<f64>| x.map(|v| -v + t.sin()));
    let tableau = CatalogMethod::Rk4Classic.tableau();
    let x = DVector::from_element(1, 0.3);
    let a = explicit_step(&tableau, &f, 1.0, &x, 0.2, StageTime::Literal).unwrap();
    let b = explicit_step(&tableau, &f, 1.0, &x, 0.2, StageTime::ScaledByH).unwrap();
    assert!((a[0] - b[0]).abs() > 1e-6);
    let g = linear_field(&DMatrix::from_element(1, 1, -1.0));
    let a = explicit_step(&tableau, &g, 1.0, &x, 0.2, StageTime::Literal).unwrap();
    let b = explicit_step(&tableau, &g, 1.0, &x, 0.2, StageTime::ScaledByH).unwrap();
    assert_eq!(a, b);
}
