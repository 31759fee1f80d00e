//! Test-only oracles and random instance generators.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rkcontract::norms::NormSpec;
use rkcontract::stages::{as_blocks, from_blocks, repeat_state};
use rkcontract::tableau::ButcherTableau;
use rkcontract::{Certificate, VectorField};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stage defect `y − 𝟙⊗x − h(A⊗I)F(t + c, y)` with the literal stage-time
/// convention.
pub fn stage_defect(tableau: &ButcherTableau, f: &VectorField<f64>, t: f64, x: &DVector<f64>, h: f64, y: &DVector<f64>) -> DVector<f64> {
    let rt = tableau.to_real::<f64>();
    let n = x.len();
    let blocks = as_blocks(y, n);
    let mut fc = DMatrix::zeros(n, blocks.ncols());
    for (i, col) in blocks.column_iter().enumerate() {
        fc.set_column(i, &f.eval(t + rt.c[i], &col.into_owned()));
    }
    let rhs = from_blocks(&(&fc * rt.a.transpose() * h)) + repeat_state(x, rt.b.len());
    y - rhs
}

/// Damped Newton on the stage equations with a central-difference
/// Jacobian. Returns the solution and its ∞-norm defect.
pub fn newton_stages(tableau: &ButcherTableau, f: &VectorField<f64>, t: f64, x: &DVector<f64>, h: f64) -> (DVector<f64>, f64) {
    let s = tableau.stages();
    let mut y = repeat_state(x, s);
    let m = y.len();
    let mut r = stage_defect(tableau, f, t, x, h, &y);
    for _ in 0..100 {
        if r.amax() < 1e-15 {
            break;
        }
        let mut jac = DMatrix::zeros(m, m);
        for k in 0..m {
            let eps = 1e-7 * (1.0 + y[k].abs());
            let mut yp = y.clone();
            let mut ym = y.clone();
            yp[k] += eps;
            ym[k] -= eps;
            let col = (stage_defect(tableau, f, t, x, h, &yp) - stage_defect(tableau, f, t, x, h, &ym)) / (2.0 * eps);
            jac.set_column(k, &col);
        }
        let Some(delta) = jac.lu().solve(&(-&r)) else { break };
        let mut step = 1.0;
        loop {
            let cand = &y + &delta * step;
            let rc = stage_defect(tableau, f, t, x, h, &cand);
            if rc.amax() < r.amax() || step < 1e-6 {
                y = cand;
                r = rc;
                break;
            }
            step *= 0.5;
        }
    }
    let res = r.amax();
    (y, res)
}

/// Update equation from given stages.
pub fn update_from(tableau: &ButcherTableau, f: &VectorField<f64>, t: f64, x: &DVector<f64>, h: f64, y: &DVector<f64>) -> DVector<f64> {
    let rt = tableau.to_real::<f64>();
    let blocks = as_blocks(y, x.len());
    let mut out = x.clone();
    for (i, col) in blocks.column_iter().enumerate() {
        out += f.eval(t + rt.c[i], &col.into_owned()) * (h * rt.b[i]);
    }
    out
}

/// `f(x) = Bx − κ tanh(x)` with `ℓ₂` certificate `Lip ≤ ‖B‖₂ + κ` and
/// `osLip ≤ μ₂(B)` (the tanh term has a diagonal Jacobian in `[−κ, 0]`).
pub fn random_tanh_field(rng: &mut ChaCha8Rng, n: usize) -> VectorField<f64> {
    let mut b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.6..0.6));
    for i in 0..n {
        b[(i, i)] -= rng.random_range(0.5..1.5);
    }
    let kappa = rng.random_range(0.0..1.0);
    let norm = NormSpec::l2_unweighted(n);
    let lip = norm.induced_matrix_norm(&b).unwrap() + kappa;
    let oslip = norm.log_norm(&b).unwrap();
    let bc = b.clone();
    VectorField::new("tanh_field", n, move |_, x: &DVector<f64>| &bc * x - x.map(|v| kappa * v.tanh()))
        .with_certificate(norm, Certificate::new(lip, oslip).unwrap())
        .unwrap()
}

pub fn radau_iia_2() -> ButcherTableau {
    ButcherTableau::from_f64(&[vec![5.0 / 12.0, -1.0 / 12.0], vec![0.75, 0.25]], &[0.75, 0.25], &[1.0 / 3.0, 1.0])
        .unwrap()
        .named("radau_iia_2")
}

pub fn lobatto_iiic_2() -> ButcherTableau {
    ButcherTableau::from_f64(&[vec![0.5, -0.5], vec![0.5, 0.5]], &[0.5, 0.5], &[0.0, 1.0])
        .unwrap()
        .named("lobatto_iiic_2")
}

/// Full implicit tableau with `s` stages, diagonal in `[0.2, 0.8]`,
/// off-diagonal in `[−0.25, 0.25]` and positive weights summing to 1.
pub fn random_implicit_tableau(rng: &mut ChaCha8Rng, s: usize) -> ButcherTableau {
    let a: Vec<Vec<f64>> = (0..s)
        .map(|i| (0..s).map(|j| if i == j { rng.random_range(0.2..0.8) } else { rng.random_range(-0.25..0.25) }).collect())
        .collect();
    let w: Vec<f64> = (0..s).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    let b: Vec<f64> = w.iter().map(|v| v / total).collect();
    let c: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    ButcherTableau::from_f64(&a, &b, &c).unwrap().named(format!("random_{s}"))
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-half_width..=half_width))
}

/// Points on the unit sphere of `ℝˢ`, `s ≤ 3`: both signs for `s = 1`,
/// equally spaced angles for `s = 2`, a Fibonacci lattice for `s = 3`.
pub fn sphere_grid(s: usize, count: usize) -> Vec<DVector<f64>> {
    match s {
        1 => vec![DVector::from_element(1, 1.0), DVector::from_element(1, -1.0)],
        2 => (0..count)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                DVector::from_vec(vec![th.cos(), th.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * k as f64;
                    DVector::from_vec(vec![r * th.cos(), r * th.sin(), z])
                })
                .collect()
        }
        _ => panic!("sphere grid only for s <= 3"),
    }
}

/// `min_{xᵀ[d]x = 1} xᵀ[d]Mx` by brute force over `grid`.
pub fn weighted_quadratic_min(m: &DMatrix<f64>, d: &DVector<f64>, grid: &[DVector<f64>]) -> f64 {
    let sq = d.map(f64::sqrt);
    grid.iter()
        .map(|w| {
            let x = w.component_div(&sq);
            (x.component_mul(d)).dot(&(m * &x))
        })
        .fold(f64::INFINITY, f64::min)
}
