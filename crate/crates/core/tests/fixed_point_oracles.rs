use kf_core::evaluate::{
    laplace_average_at, refine_at, semiconjugacy_residual, Convergence, EigenfunctionModel, EvaluateError,
};
use kf_core::factor::{approximate_factor, residual_order_check, sternberg_factor, FactorMode, PolynomialFactor};
use kf_core::flow::{find_fixed_point, FlowHandle};
use kf_core::linalg::{CMatrix, C64};
use kf_core::systems;
use kf_core::vfield::{Jet, JetLayout, MapJet};

fn c(v: f64) -> C64 {
    C64::new(v, 0.0)
}

fn scalar(v: f64) -> CMatrix {
    CMatrix::from_element(1, 1, c(v))
}

fn bernoulli_model(k: usize) -> EigenfunctionModel {
    let sys = systems::bernoulli();
    let h = sys.handle();
    let fp = find_fixed_point(&h, &sys.attractor_guess).unwrap();
    let f = h.time_one_map_jet(&fp.x0, k).unwrap();
    let e1 = (-1.0f64).exp();
    let p = approximate_factor(&f, &scalar(e1), &scalar(1.0))
        .unwrap()
        .with_generator(scalar(-1.0))
        .unwrap()
        .with_base(fp.x0.clone())
        .unwrap();
    EigenfunctionModel::new(p, h, Convergence::default()).unwrap()
}

fn bernoulli_time_one(x: f64) -> f64 {
    let e1 = (-1.0f64).exp();
    x * e1 / (1.0 - x + x * e1)
}

/// `y` (or any polynomial) as a flow-mode factor with generator `a`.
fn poly_factor(n: usize, k: usize, terms: &[(&[u32], f64)], a: f64, mode: FactorMode) -> PolynomialFactor {
    let layout = JetLayout::get(n, k);
    let mut j = Jet::zero_like(&layout);
    for (mi, v) in terms {
        j.set_coeff(mi, c(*v));
    }
    PolynomialFactor::from_parts(vec![0.0; n], mode, scalar(a), MapJet::new(vec![j])).unwrap()
}

#[test]
fn bernoulli_factor_coefficients() {
    let m = bernoulli_model(5);
    for d in 1..=5 {
        let v = m.factor().part(d).coeffs[0];
        assert!((v - c(1.0)).norm() < 1e-9, "degree {d}: {v}");
    }
}

#[test]
fn bernoulli_exact_eigenfunction() {
    let m = bernoulli_model(5);
    for &x in &[-0.5, -0.2, 0.1, 0.3, 0.5] {
        let r = refine_at(&m, &[x]).unwrap();
        assert!(r.converged);
        let want = x / (1.0 - x);
        assert!((r.value[0] - c(want)).norm() < 1e-8, "x={x}: {} vs {want}", r.value[0]);
    }
}

#[test]
fn bernoulli_semiconjugacy_fractional_time() {
    let m = bernoulli_model(5);
    let samples: Vec<Vec<f64>> = (0..20).map(|i| vec![-0.5 + i as f64 / 19.0]).collect();
    let r = semiconjugacy_residual(&m, &samples, 0.37).unwrap();
    assert!(r <= 1e-7, "residual {r}");
}

#[test]
fn bernoulli_residual_slopes() {
    for k in [2usize, 3, 5] {
        let m = bernoulli_model(k);
        let est = residual_order_check(m.factor(), |x| vec![bernoulli_time_one(x[0])], &[0.2, 0.1, 0.05, 0.025]).unwrap();
        let slope = est.slope.unwrap();
        assert!((slope - (k + 1) as f64).abs() <= 0.2, "k={k}: slope {slope}");
    }
}

#[test]
fn cubic_boundary_converges_below_three() {
    let h = systems::cubic_boundary(2.0, 0.1).handle();
    let m = EigenfunctionModel::new(
        poly_factor(2, 3, &[(&[0, 1], 1.0)], -2.0, FactorMode::Flow),
        h,
        Convergence::default(),
    )
    .unwrap();
    let r = refine_at(&m, &[0.5, 0.2]).unwrap();
    assert!(r.converged);
    assert!((r.value[0] - c(0.1875)).norm() < 1e-7, "{}", r.value[0]);
    let lap = laplace_average_at(&m, &[0.5, 0.2], c(-2.0), 40.0, 0.01).unwrap();
    assert!((lap.extrapolated[0] - c(0.1875)).norm() < 1e-6);
    // The plain average carries the 1/T transient bias.
    assert!((lap.raw[0] - c(0.1875)).norm() > 1e-4);
}

#[test]
fn cubic_boundary_diverges_above_three() {
    let h = systems::cubic_boundary(3.5, 0.1).handle();
    let m = EigenfunctionModel::new(
        poly_factor(2, 3, &[(&[0, 1], 1.0)], -3.5, FactorMode::Flow),
        h,
        Convergence::default(),
    )
    .unwrap();
    match refine_at(&m, &[0.5, 0.2]) {
        Err(EvaluateError::DivergenceDetected { steps, .. }) => assert!(steps <= 200),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn resonant_map_both_eigenfunctions() {
    let h = systems::resonant_diagonal_map().handle();
    let e2 = (-2.0f64).exp();
    let samples: Vec<Vec<f64>> = (0..10).map(|i| vec![0.1 * i as f64 - 0.4, 0.3 - 0.05 * i as f64]).collect();
    for terms in [vec![(&[0u32, 1][..], 1.0)], vec![(&[0u32, 1][..], 1.0), (&[2u32, 0][..], 1.0)]] {
        let m = EigenfunctionModel::new(poly_factor(2, 2, &terms, e2, FactorMode::Map), h.clone(), Convergence::default())
            .unwrap();
        let r = semiconjugacy_residual(&m, &samples, 1.0).unwrap();
        assert!(r <= 1e-12, "{r}");
    }
}

#[test]
fn sternberg_recovers_inverse_conjugacy() {
    let sys = systems::sternberg_map();
    let h: FlowHandle = sys.handle();
    let fp = find_fixed_point(&h, &sys.attractor_guess).unwrap();
    let f = h.time_one_map_jet(&fp.x0, 4).unwrap();
    let p = sternberg_factor(&f, 4).unwrap();
    let m = EigenfunctionModel::new(p, h, Convergence::default()).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..21 {
        for j in 0..21 {
            let (x, y) = (-0.5 + i as f64 * 0.05, -0.5 + j as f64 * 0.05);
            if x * x + y * y > 0.25 + 1e-12 {
                continue;
            }
            let r = refine_at(&m, &[x, y]).unwrap();
            worst = worst.max((r.value[0] - c(x)).norm()).max((r.value[1] - c(y - x * x)).norm());
        }
    }
    assert!(worst <= 1e-8, "{worst}");
}
